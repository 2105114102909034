// Browser entry point: wires the pure views and state transitions to a DOM
// container and the live service. Everything testable lives in the imported
// modules; this file is glue.

import { ApiClient, ApiError } from "./api.js";
import {
  applyPreset,
  canSaveGroup,
  initialState,
  receiveError,
  receiveResult,
  requestCluster,
  selectCourse,
  setGroupDraftName,
  setKMode,
  toggleMetric,
  type ExplorerState,
} from "./state.js";
import {
  renderDashboard,
  renderError,
  renderGroupManager,
  renderMetricPicker,
} from "./views/panels.js";
import type { ClusterRequestBody, Group, MetricInfo, Preset } from "./types.js";

export class ExplorerApp {
  private state: ExplorerState = initialState();
  private metrics: MetricInfo[] = [];
  private presets: Preset[] = [];
  private groups: Group[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    const [courses, presets] = await Promise.all([this.api.courses(), this.api.suggestions()]);
    this.presets = presets;
    const first = courses[0];
    if (first) {
      this.state = selectCourse(this.state, first.course_id);
      this.metrics = await this.api.metrics(first.course_id);
      this.groups = await this.api.groups(first.course_id);
    }
    this.render();
  }

  private async send(body: ClusterRequestBody): Promise<void> {
    const course = this.state.course;
    if (course === null) return;
    try {
      const result = await this.api.cluster(course, body);
      const next = receiveResult(this.state, result);
      this.state = next.state;
      if (next.send) await this.send(next.send);
    } catch (error) {
      const kind = error instanceof ApiError ? error.kind : "network";
      const next = receiveError(this.state, kind, String(error));
      this.state = next.state;
      if (next.send) await this.send(next.send);
    }
    this.render();
  }

  private render(): void {
    this.root.innerHTML =
      renderMetricPicker(this.metrics, this.presets, this.state) +
      renderDashboard(this.state) +
      renderGroupManager(this.groups, this.state) +
      (this.state.error ? renderError(this.state.error) : "");
    this.bind();
  }

  private bind(): void {
    this.root.querySelectorAll<HTMLInputElement>("input[data-metric]").forEach((box) => {
      box.addEventListener("change", () => {
        this.state = toggleMetric(this.state, box.dataset.metric ?? "");
        this.render();
      });
    });
    this.root.querySelectorAll<HTMLButtonElement>("button.preset").forEach((button) => {
      button.addEventListener("click", () => {
        this.state = applyPreset(this.state, (button.dataset.metrics ?? "").split(","));
        this.render();
      });
    });
    this.root.querySelectorAll<HTMLInputElement>('input[name="k"]').forEach((radio) => {
      radio.addEventListener("change", () => {
        this.state = setKMode(
          this.state,
          radio.value === "auto" ? { mode: "auto" } : { mode: "fixed", k: 2 },
        );
        this.render();
      });
    });
    this.root.querySelector("button.cluster-now")?.addEventListener("click", () => {
      const next = requestCluster(this.state);
      this.state = next.state;
      this.render();
      if (next.send) void this.send(next.send);
    });
    const form = this.root.querySelector<HTMLFormElement>("form.save-group");
    form?.addEventListener("submit", (event) => {
      event.preventDefault();
      const name = (form.elements.namedItem("name") as HTMLInputElement).value;
      const label = Number((form.elements.namedItem("cluster") as HTMLSelectElement).value);
      this.state = setGroupDraftName(this.state, name);
      const result = this.state.result;
      if (result && canSaveGroup(this.state, result.clustering_id)) {
        void this.api.saveGroup(result.clustering_id, label, name).then(async () => {
          this.groups = await this.api.groups(this.state.course ?? undefined);
          this.state = setGroupDraftName(this.state, "");
          this.render();
        });
      }
    });
  }
}

export function mount(baseUrl: string, root: HTMLElement): ExplorerApp {
  const app = new ExplorerApp(new ApiClient(baseUrl), root);
  void app.start();
  return app;
}
