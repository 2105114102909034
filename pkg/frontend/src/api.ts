// Thin typed wrapper over the service's HTTP/JSON endpoints. All analytics
// happen server-side; this layer only moves JSON.

import type {
  Campaign,
  ChartData,
  ClusteringResultPayload,
  ClusterRequestBody,
  CourseSummary,
  DispatchRecord,
  EffectReport,
  Group,
  MetricInfo,
  Preset,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly kind: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(
        response.status,
        typeof payload?.error === "string" ? payload.error : "internal",
        typeof payload?.message === "string" ? payload.message : response.statusText,
      );
    }
    return payload as T;
  }

  courses(): Promise<CourseSummary[]> {
    return this.request("/courses");
  }

  metrics(courseId: string): Promise<MetricInfo[]> {
    return this.request(`/courses/${encodeURIComponent(courseId)}/metrics`);
  }

  suggestions(): Promise<Preset[]> {
    return this.request("/suggestions");
  }

  cluster(courseId: string, body: ClusterRequestBody): Promise<ClusteringResultPayload> {
    return this.request(`/courses/${encodeURIComponent(courseId)}/clusterings`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  chart<E>(clusteringId: string, kind: string, params: Record<string, string> = {}): Promise<ChartData<E>> {
    const query = new URLSearchParams(params).toString();
    const suffix = query ? `?${query}` : "";
    return this.request(`/clusterings/${clusteringId}/charts/${kind}${suffix}`);
  }

  saveGroup(clusteringId: string, clusterLabel: number, name: string): Promise<Group> {
    return this.request("/groups", {
      method: "POST",
      body: JSON.stringify({
        clustering_id: clusteringId,
        cluster_label: clusterLabel,
        name,
      }),
    });
  }

  groups(courseId?: string): Promise<Group[]> {
    const suffix = courseId ? `?course_id=${encodeURIComponent(courseId)}` : "";
    return this.request(`/groups${suffix}`);
  }

  group(groupId: string): Promise<Group> {
    return this.request(`/groups/${groupId}`);
  }

  createCampaign(
    groupId: string,
    draft: { subject: string; body: string; ab_test: boolean; seed: number },
  ): Promise<Campaign> {
    return this.request(`/groups/${groupId}/campaigns`, {
      method: "POST",
      body: JSON.stringify(draft),
    });
  }

  dispatch(campaignId: string): Promise<DispatchRecord> {
    return this.request(`/campaigns/${campaignId}/dispatch`, { method: "POST" });
  }

  effectReport(
    groupId: string,
    before: string,
    after: string,
    metricIds?: string[],
  ): Promise<EffectReport> {
    const params = new URLSearchParams({ before, after });
    if (metricIds && metricIds.length > 0) {
      params.set("metric_ids", metricIds.join(","));
    }
    return this.request(`/groups/${groupId}/effect-report?${params.toString()}`);
  }
}
