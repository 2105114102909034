import { describe, expect, it } from "vitest";

import { applyPreset, initialState, receiveResult, requestCluster, selectCourse, setCampaignDraft, setGroupDraftName } from "../src/state.js";
import {
  renderCampaignComposer,
  renderDashboard,
  renderDispatchConfirmation,
  renderEffectReport,
  renderError,
  renderGroupManager,
  renderMetricPicker,
} from "../src/views/panels.js";
import type { Campaign, ClusteringResultPayload, EffectReport, Group, MetricInfo, Preset } from "../src/types.js";
import fixture from "./fixtures/clustering.json";

const result = fixture as unknown as ClusteringResultPayload;

const METRICS: MetricInfo[] = [
  { id: "S", description: "number of activity sessions" },
  { id: "GQP", description: "mean score over graded quiz submissions" },
];
const PRESETS: Preset[] = [{ name: "engagement", metric_ids: ["S", "TSD", "ASD", "FA"] }];

function stateWithResult() {
  let state = applyPreset(selectCourse(initialState(), "c1"), result.metric_ids);
  ({ state } = receiveResult(requestCluster(state).state, result));
  return state;
}

const GROUP: Group = {
  group_id: "g123",
  course_id: "c1",
  name: "quiet ones",
  user_ids: ["u1", "u2", "u3"],
  metric_ids: result.metric_ids,
  snapshot: { u1: [0, 0, 0], u2: [0, 0, 0], u3: [0, 0, 0] },
  cluster_label: 1,
  created_at: "2024-02-01T00:00:00+00:00",
  provenance: {},
};

describe("metric picker", () => {
  it("shows presets and marks selected metrics", () => {
    const state = applyPreset(initialState(), ["GQP"]);
    const html = renderMetricPicker(METRICS, PRESETS, state);
    expect(html).toContain('data-preset="engagement"');
    expect(html).toContain('data-metric="GQP" checked');
    expect(html).not.toContain('data-metric="S" checked');
  });

  it("disables the cluster button while a request is in flight", () => {
    const { state } = requestCluster(applyPreset(initialState(), ["S"]));
    expect(renderMetricPicker(METRICS, PRESETS, state)).toContain("disabled");
  });
});

describe("dashboard", () => {
  it("is empty before the first result", () => {
    expect(renderDashboard(initialState())).toContain("empty");
  });

  it("contains all four chart sections for a result", () => {
    const html = renderDashboard(stateWithResult());
    for (const cls of ["chart-sizes", "chart-centers", "chart-scatter", "chart-distribution"]) {
      expect(html).toContain(cls);
    }
    expect(html).toContain(`data-clustering="${result.clustering_id}"`);
  });
});

describe("group manager", () => {
  it("lists saved groups and offers a save form with the current clusters", () => {
    const html = renderGroupManager([GROUP], stateWithResult());
    expect(html).toContain("quiet ones");
    expect(html).toContain("3 learners");
    for (let label = 0; label < result.k; label++) {
      expect(html).toContain(`value="${label}"`);
    }
  });

  it("offers no save form without a result", () => {
    const html = renderGroupManager([], initialState());
    expect(html).not.toContain("save-group");
  });

  it("escapes user-provided group names", () => {
    const state = setGroupDraftName(stateWithResult(), '"><script>');
    const html = renderGroupManager([], state);
    expect(html).not.toContain("<script>");
  });
});

describe("campaign composer and dispatch confirmation", () => {
  const campaign: Campaign = {
    campaign_id: "camp1",
    group_id: GROUP.group_id,
    subject: "hi",
    body: "b",
    ab_test: true,
    treatment_ids: ["u1", "u2"],
    control_ids: ["u3"],
    seed: 0,
    dispatched_at: null,
  };

  it("shows the A/B toggle state from the draft", () => {
    const state = setCampaignDraft(initialState(), { abTest: true, subject: "s" });
    const html = renderCampaignComposer(GROUP, state);
    expect(html).toContain('name="ab" checked');
  });

  it("confirmation shows treatment/control sizes before sending", () => {
    const html = renderDispatchConfirmation(campaign);
    expect(html).toContain("2 treatment / 1 control");
    expect(html).toContain('data-campaign="camp1"');
  });
});

describe("effect report", () => {
  it("renders one delta column per metric and one row per arm", () => {
    const report: EffectReport = {
      group_id: GROUP.group_id,
      campaign_id: "camp1",
      metric_ids: ["TFC", "VPA"],
      window_before: ["2024-01-01T00:00:00+00:00", "2024-01-08T00:00:00+00:00"],
      window_after: ["2024-01-08T00:00:00+00:00", "2024-01-15T00:00:00+00:00"],
      arms: {
        treatment: { before: [0, 1], after: [0.5, 1], delta: [0.5, 0] },
        control: { before: [0, 1], after: [0, 1], delta: [0, 0] },
      },
    };
    const html = renderEffectReport(report);
    expect(html).toContain('data-arm="treatment"');
    expect(html).toContain('data-arm="control"');
    expect(html).toContain("+0.5000");
    expect((html.match(/<td data-delta=/g) ?? []).length).toBe(4);
  });
});

describe("error view", () => {
  it("surfaces the error kind with a retry affordance", () => {
    const html = renderError({ kind: "too_few_rows", message: "only 1 row" });
    expect(html).toContain('data-kind="too_few_rows"');
    expect(html).toContain("retry");
  });
});
