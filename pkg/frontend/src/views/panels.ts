// Non-chart views: metric picker, dashboard shell, group manager, campaign
// composer, effect report. All pure string renderers.

import { colorForCluster } from "../colors.js";
import type { ExplorerState } from "../state.js";
import type {
  Campaign,
  ClusteringResultPayload,
  EffectReport,
  Group,
  MetricInfo,
  Preset,
} from "../types.js";
import { renderCenters, renderDistribution, renderScatter, renderSizes } from "./charts.js";

function esc(value: unknown): string {
  return String(value).replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export function renderMetricPicker(
  metrics: MetricInfo[],
  presets: Preset[],
  state: ExplorerState,
): string {
  const boxes = metrics
    .map((m) => {
      const checked = state.metricIds.includes(m.id) ? " checked" : "";
      return (
        `<label class="metric" title="${esc(m.description)}">` +
        `<input type="checkbox" data-metric="${esc(m.id)}"${checked}> ${esc(m.id)}</label>`
      );
    })
    .join("");
  const presetButtons = presets
    .map(
      (p) =>
        `<button class="preset" data-preset="${esc(p.name)}" ` +
        `data-metrics="${esc(p.metric_ids.join(","))}">${esc(p.name)}</button>`,
    )
    .join("");
  const kMode =
    state.kMode.mode === "auto"
      ? `<label><input type="radio" name="k" value="auto" checked> auto</label>` +
        `<label><input type="radio" name="k" value="fixed"> fixed</label>`
      : `<label><input type="radio" name="k" value="auto"> auto</label>` +
        `<label><input type="radio" name="k" value="fixed" checked> fixed ` +
        `<input type="number" name="k-value" min="2" value="${state.kMode.k}"></label>`;
  const busy = state.inFlight !== null ? " disabled" : "";
  return (
    `<section class="metric-picker"><div class="presets">${presetButtons}</div>` +
    `<div class="metrics">${boxes}</div><div class="k-mode">${kMode}</div>` +
    `<button class="cluster-now"${busy}>cluster</button></section>`
  );
}

/** The four coherent-colored chart views for the current result. */
export function renderDashboard(state: ExplorerState): string {
  const result = state.result;
  if (result === null) {
    return `<section class="dashboard empty">pick metrics and cluster to see the cohort</section>`;
  }
  const pair = state.scatterPair;
  const scatterKey = pair ? `${pair[0]}|${pair[1]}` : "";
  const scatter = result.charts.scatter[scatterKey];
  const distMetric = state.distributionMetric ?? result.metric_ids[0] ?? "";
  const dist = result.charts.distributions[distMetric];
  const mode = result.k_estimated ? "estimated" : "fixed";
  return (
    `<section class="dashboard" data-clustering="${result.clustering_id}">` +
    `<h3>k = ${result.k} (${mode}), seed ${result.seed}</h3>` +
    renderSizes(result.charts.sizes) +
    renderCenters(result.charts.centers, result.metric_ids) +
    (scatter ? renderScatter(scatter) : "") +
    (dist ? renderDistribution(dist, distMetric) : "") +
    `</section>`
  );
}

export function renderGroupManager(groups: Group[], state: ExplorerState): string {
  const saved = groups
    .map((g) => {
      const color = colorForCluster(g.cluster_label);
      return (
        `<li class="group" data-group="${g.group_id}" data-cluster="${g.cluster_label}" ` +
        `data-color="${color}"><span class="swatch" style="background:${color}"></span>` +
        `${esc(g.name)} — ${g.user_ids.length} learners</li>`
      );
    })
    .join("");
  const clusters =
    state.result === null
      ? ""
      : state.result.charts.sizes.series
          .map(
            (entry) =>
              `<option value="${entry.cluster}">cluster ${entry.cluster} (${entry.size})</option>`,
          )
          .join("");
  const saveForm =
    state.result === null
      ? "<p>cluster first to save a group</p>"
      : `<form class="save-group"><select name="cluster">${clusters}</select>` +
        `<input name="name" placeholder="group name" value="${esc(state.groupDraftName)}">` +
        `<button type="submit">save</button></form>`;
  return `<section class="group-manager"><ul>${saved}</ul>${saveForm}</section>`;
}

export function renderCampaignComposer(group: Group, state: ExplorerState): string {
  const draft = state.campaignDraft;
  const ab = draft.abTest ? " checked" : "";
  return (
    `<section class="campaign-composer" data-group="${group.group_id}">` +
    `<h3>email ${esc(group.name)} (${group.user_ids.length} learners)</h3>` +
    `<input name="subject" placeholder="subject, {{user_id}} allowed" value="${esc(draft.subject)}">` +
    `<textarea name="body">${esc(draft.body)}</textarea>` +
    `<label><input type="checkbox" name="ab"${ab}> A/B test (half get the mail)</label>` +
    `<button class="create-campaign">create</button></section>`
  );
}

/** Confirmation step: shows the arm sizes before anything is sent. */
export function renderDispatchConfirmation(campaign: Campaign): string {
  const note = campaign.ab_test
    ? `${campaign.treatment_ids.length} treatment / ${campaign.control_ids.length} control`
    : `${campaign.treatment_ids.length} recipients, no control arm`;
  return (
    `<section class="dispatch-confirm" data-campaign="${campaign.campaign_id}">` +
    `<p>${esc(campaign.subject)}</p><p class="arms">${note}</p>` +
    `<button class="dispatch">dispatch</button></section>`
  );
}

export function renderEffectReport(report: EffectReport): string {
  const header =
    "<tr><th>arm</th>" +
    report.metric_ids.map((m) => `<th>${esc(m)}</th>`).join("") +
    "</tr>";
  const rows = (["treatment", "control"] as const)
    .map((arm) => {
      const deltas = report.arms[arm].delta
        .map((d) => `<td data-delta="${d}">${d >= 0 ? "+" : ""}${d.toFixed(4)}</td>`)
        .join("");
      return `<tr data-arm="${arm}"><td>${arm}</td>${deltas}</tr>`;
    })
    .join("");
  return (
    `<section class="effect-report" data-campaign="${report.campaign_id}">` +
    `<table>${header}${rows}</table></section>`
  );
}

export function renderError(error: { kind: string; message: string }): string {
  return (
    `<section class="error" data-kind="${esc(error.kind)}">` +
    `<p>${esc(error.message)}</p><button class="retry">retry</button></section>`
  );
}
