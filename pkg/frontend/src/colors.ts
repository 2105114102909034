// One color per canonical cluster label, shared by every chart view. The
// mapping depends only on the label the server assigned, never on the order
// a particular chart happens to list its series in.

export const CLUSTER_PALETTE = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#7f7f7f",
  "#bcbd22",
  "#17becf",
] as const;

export const UNKNOWN_CLUSTER_COLOR = "#cccccc";

export function colorForCluster(label: number): string {
  if (!Number.isInteger(label) || label < 0) {
    return UNKNOWN_CLUSTER_COLOR;
  }
  return CLUSTER_PALETTE[label % CLUSTER_PALETTE.length] ?? UNKNOWN_CLUSTER_COLOR;
}
