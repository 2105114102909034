// The four dashboard chart views. Each is a pure function from server chart
// JSON to markup; cluster coloring always goes through colorForCluster on the
// chart's color_index, so the label -> color mapping is identical everywhere.
// Elements carry data-cluster / data-color attributes for tests and tooltips.

import { colorForCluster } from "../colors.js";
import type {
  CentersEntry,
  ChartData,
  DistributionEntry,
  ScatterEntry,
  SizesEntry,
} from "../types.js";

function esc(value: unknown): string {
  return String(value).replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

function fmt(value: number): string {
  return Number.isInteger(value) ? String(value) : value.toFixed(3);
}

function swatch(cluster: number, color: string): string {
  return `<span class="swatch" data-cluster="${cluster}" data-color="${color}" style="background:${color}"></span>`;
}

/** Cluster sizes and within-cluster scatter as a horizontal bar list. */
export function renderSizes(chart: ChartData<SizesEntry>): string {
  const total = chart.series.reduce((acc, entry) => acc + entry.size, 0);
  const rows = chart.series
    .map((entry, idx) => {
      const color = colorForCluster(chart.color_index[idx] ?? entry.cluster);
      const width = total > 0 ? (100 * entry.size) / total : 0;
      return (
        `<div class="size-row" data-cluster="${entry.cluster}" data-color="${color}">` +
        swatch(entry.cluster, color) +
        `<div class="bar" style="width:${width.toFixed(1)}%;background:${color}"></div>` +
        `<span class="label">cluster ${entry.cluster}: ${entry.size} learners, ` +
        `withinss ${fmt(entry.withinss)}</span></div>`
      );
    })
    .join("");
  const quality =
    `<p class="quality">total withinss ${fmt(Number(chart.meta["tot_withinss"]))}, ` +
    `betweenss ${fmt(Number(chart.meta["betweenss"]))}, ` +
    `totss ${fmt(Number(chart.meta["totss"]))}</p>`;
  return `<section class="chart chart-sizes">${rows}${quality}</section>`;
}

/** Per-cluster center values, one row per cluster, one cell per metric. */
export function renderCenters(chart: ChartData<CentersEntry>, metricIds: string[]): string {
  const header =
    "<tr><th></th><th>cluster</th>" +
    metricIds.map((m) => `<th>${esc(m)}</th>`).join("") +
    "<th>size</th></tr>";
  const rows = chart.series
    .map((entry, idx) => {
      const color = colorForCluster(chart.color_index[idx] ?? entry.cluster);
      const cells = entry.center.map((v) => `<td>${fmt(v)}</td>`).join("");
      return (
        `<tr data-cluster="${entry.cluster}" data-color="${color}">` +
        `<td>${swatch(entry.cluster, color)}</td>` +
        `<td>${entry.cluster}</td>${cells}<td>${entry.size}</td></tr>`
      );
    })
    .join("");
  return `<section class="chart chart-centers"><table>${header}${rows}</table></section>`;
}

/** One metric pair as an SVG scatter; points in original metric units. */
export function renderScatter(chart: ChartData<ScatterEntry>, width = 420, height = 320): string {
  const all = chart.series.flatMap((entry) => entry.points);
  const xs = all.map((p) => p[0]);
  const ys = all.map((p) => p[1]);
  const xMin = Math.min(...xs, 0);
  const xMax = Math.max(...xs, 1);
  const yMin = Math.min(...ys, 0);
  const yMax = Math.max(...ys, 1);
  const sx = (x: number) => (10 + ((x - xMin) / (xMax - xMin || 1)) * (width - 20)).toFixed(1);
  const sy = (y: number) => (height - 10 - ((y - yMin) / (yMax - yMin || 1)) * (height - 20)).toFixed(1);
  const groups = chart.series
    .map((entry, idx) => {
      const color = colorForCluster(chart.color_index[idx] ?? entry.cluster);
      const dots = entry.points
        .map(([x, y]) => `<circle cx="${sx(x)}" cy="${sy(y)}" r="3" fill="${color}"/>`)
        .join("");
      const center =
        `<circle cx="${sx(entry.center[0])}" cy="${sy(entry.center[1])}" r="6" ` +
        `fill="${color}" stroke="#222" stroke-width="1.5"/>`;
      return `<g data-cluster="${entry.cluster}" data-color="${color}">${dots}${center}</g>`;
    })
    .join("");
  const title = `${esc(chart.meta["x"])} vs ${esc(chart.meta["y"])}`;
  return (
    `<section class="chart chart-scatter"><h4>${title}</h4>` +
    `<svg viewBox="0 0 ${width} ${height}">${groups}</svg></section>`
  );
}

/** Per-cluster histogram over the server's shared bin edges. */
export function renderDistribution(chart: ChartData<DistributionEntry>, metricId: string): string {
  const edges = chart.meta["edges"] as number[];
  const peak = Math.max(1, ...chart.series.flatMap((entry) => entry.counts));
  const groups = chart.series
    .map((entry, idx) => {
      const color = colorForCluster(chart.color_index[idx] ?? entry.cluster);
      const bars = entry.counts
        .map((count, bin) => {
          const h = (100 * count) / peak;
          return `<div class="bin" data-bin="${bin}" style="height:${h.toFixed(1)}%;background:${color}" title="[${fmt(edges[bin] ?? 0)}, ${fmt(edges[bin + 1] ?? 0)}): ${count}"></div>`;
        })
        .join("");
      return (
        `<div class="histogram" data-cluster="${entry.cluster}" data-color="${color}">` +
        `${swatch(entry.cluster, color)}<div class="bins">${bars}</div></div>`
      );
    })
    .join("");
  return `<section class="chart chart-distribution"><h4>${esc(metricId)}</h4>${groups}</section>`;
}
