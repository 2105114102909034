// JSON payload shapes of the analytics service. The client never derives
// any of these values itself; it only renders what the server sends.

export type ChartKind = "CENTERS" | "SIZES" | "SCATTER" | "DISTRIBUTION";

export interface CentersEntry {
  cluster: number;
  center: number[];
  size: number;
  withinss: number;
}

export interface SizesEntry {
  cluster: number;
  size: number;
  withinss: number;
}

export interface ScatterEntry {
  cluster: number;
  points: [number, number][];
  center: [number, number];
}

export interface DistributionEntry {
  cluster: number;
  counts: number[];
}

export interface ChartData<Entry> {
  kind: ChartKind;
  series: Entry[];
  color_index: number[];
  meta: Record<string, unknown>;
}

export interface ClusterQuality {
  withinss: number[];
  tot_withinss: number;
  betweenss: number;
  totss: number;
  sizes: number[];
}

export interface ClusteringResultPayload {
  clustering_id: string;
  course_id: string;
  metric_ids: string[];
  k: number;
  k_estimated: boolean;
  seed: number;
  iterations: number;
  assignments: Record<string, number>;
  centers: number[][];
  centers_normalized: number[][];
  quality: ClusterQuality;
  charts: {
    centers: ChartData<CentersEntry>;
    sizes: ChartData<SizesEntry>;
    scatter: Record<string, ChartData<ScatterEntry>>;
    distributions: Record<string, ChartData<DistributionEntry>>;
  };
}

export interface CourseSummary {
  course_id: string;
  events: number;
  users: number;
  has_catalog: boolean;
}

export interface MetricInfo {
  id: string;
  description: string;
}

export interface Preset {
  name: string;
  metric_ids: string[];
}

export interface ClusterRequestBody {
  metric_ids: string[];
  k: number | null;
  seed: number;
}

export interface Group {
  group_id: string;
  course_id: string;
  name: string;
  user_ids: string[];
  metric_ids: string[];
  snapshot: Record<string, number[]>;
  cluster_label: number;
  created_at: string;
  provenance: Record<string, unknown>;
}

export interface Campaign {
  campaign_id: string;
  group_id: string;
  subject: string;
  body: string;
  ab_test: boolean;
  treatment_ids: string[];
  control_ids: string[];
  seed: number;
  dispatched_at: string | null;
}

export interface DispatchRecord {
  campaign_id: string;
  sent: string[];
  failed: [string, string][];
  dispatched_at: string;
}

export interface ArmReport {
  before: number[];
  after: number[];
  delta: number[];
}

export interface EffectReport {
  group_id: string;
  campaign_id: string;
  metric_ids: string[];
  window_before: [string, string];
  window_after: [string, string];
  arms: { treatment: ArmReport; control: ArmReport };
}
