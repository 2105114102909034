// Explorer session state and its transitions. Pure functions so views stay
// projections of (server JSON, state) and tests need no DOM.

import type { ClusteringResultPayload, ClusterRequestBody } from "./types.js";

export type KMode = { mode: "auto" } | { mode: "fixed"; k: number };

export interface CampaignDraft {
  subject: string;
  body: string;
  abTest: boolean;
  seed: number;
}

export interface ExplorerState {
  course: string | null;
  metricIds: string[];
  kMode: KMode;
  seed: number;
  result: ClusteringResultPayload | null;
  // at most one in-flight request; the latest click while busy waits here
  inFlight: ClusterRequestBody | null;
  queued: ClusterRequestBody | null;
  scatterPair: [string, string] | null;
  distributionMetric: string | null;
  groupDraftName: string;
  campaignDraft: CampaignDraft;
  error: { kind: string; message: string } | null;
}

export function initialState(): ExplorerState {
  return {
    course: null,
    metricIds: [],
    kMode: { mode: "auto" },
    seed: 0,
    result: null,
    inFlight: null,
    queued: null,
    scatterPair: null,
    distributionMetric: null,
    groupDraftName: "",
    campaignDraft: { subject: "", body: "", abTest: false, seed: 0 },
    error: null,
  };
}

export function selectCourse(state: ExplorerState, course: string): ExplorerState {
  if (state.course === course) return state;
  // a course switch invalidates everything derived from the previous course
  return { ...initialState(), course, metricIds: [] };
}

export function toggleMetric(state: ExplorerState, metricId: string): ExplorerState {
  const metricIds = state.metricIds.includes(metricId)
    ? state.metricIds.filter((m) => m !== metricId)
    : [...state.metricIds, metricId];
  return { ...state, metricIds };
}

export function applyPreset(state: ExplorerState, metricIds: string[]): ExplorerState {
  return { ...state, metricIds: [...metricIds] };
}

export function setKMode(state: ExplorerState, kMode: KMode): ExplorerState {
  return { ...state, kMode };
}

function requestBody(state: ExplorerState): ClusterRequestBody {
  return {
    metric_ids: [...state.metricIds],
    k: state.kMode.mode === "fixed" ? state.kMode.k : null,
    seed: state.seed,
  };
}

/** A cluster click. Returns the body to send now, or null if one is already
 *  in flight (in which case the request is queued and replaces any earlier
 *  queued one — only the latest click matters). */
export function requestCluster(
  state: ExplorerState,
): { state: ExplorerState; send: ClusterRequestBody | null } {
  const body = requestBody(state);
  if (state.inFlight !== null) {
    return { state: { ...state, queued: body }, send: null };
  }
  return { state: { ...state, inFlight: body, error: null }, send: body };
}

/** Server answered the in-flight request. Promotes any queued request, which
 *  the caller must then send. */
export function receiveResult(
  state: ExplorerState,
  result: ClusteringResultPayload,
): { state: ExplorerState; send: ClusterRequestBody | null } {
  const [first, second] = result.metric_ids;
  const next: ExplorerState = {
    ...state,
    result,
    inFlight: state.queued,
    queued: null,
    error: null,
    scatterPair: first !== undefined && second !== undefined ? [first, second] : null,
    distributionMetric: first ?? null,
    groupDraftName: "",
  };
  return { state: next, send: next.inFlight };
}

export function receiveError(
  state: ExplorerState,
  kind: string,
  message: string,
): { state: ExplorerState; send: ClusterRequestBody | null } {
  const next: ExplorerState = {
    ...state,
    inFlight: state.queued,
    queued: null,
    error: { kind, message },
  };
  return { state: next, send: next.inFlight };
}

export function selectScatterPair(
  state: ExplorerState,
  x: string,
  y: string,
): ExplorerState {
  return { ...state, scatterPair: [x, y] };
}

export function selectDistributionMetric(
  state: ExplorerState,
  metricId: string,
): ExplorerState {
  return { ...state, distributionMetric: metricId };
}

export function setGroupDraftName(state: ExplorerState, name: string): ExplorerState {
  return { ...state, groupDraftName: name };
}

export function setCampaignDraft(
  state: ExplorerState,
  draft: Partial<CampaignDraft>,
): ExplorerState {
  return { ...state, campaignDraft: { ...state.campaignDraft, ...draft } };
}

/** A group may be saved only from the result currently on screen. */
export function canSaveGroup(state: ExplorerState, clusteringId: string): boolean {
  return (
    state.result !== null &&
    state.result.clustering_id === clusteringId &&
    state.groupDraftName.trim().length > 0
  );
}
