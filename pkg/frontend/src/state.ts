// View state carried entirely by the URL query string so any view can be
// reconstructed from the address plus server state after a refresh.

import { clamp01 } from "./format.js";

export type ViewName = "gallery" | "threshold" | "training";

export interface ViewState {
  view: ViewName;
  dataset: string;
  clustering: string;
  cluster: number;
  cutoff: number;
  job: string;
  model: string;
}

export const DEFAULT_STATE: ViewState = {
  view: "gallery",
  dataset: "",
  clustering: "",
  cluster: -1,
  cutoff: 0.5,
  job: "",
  model: "",
};

const VIEWS: readonly ViewName[] = ["gallery", "threshold", "training"];

export function parseViewState(search: string): ViewState {
  const params = new URLSearchParams(search);
  const view = params.get("view") ?? "";
  const cluster = Number.parseInt(params.get("cluster") ?? "", 10);
  const cutoff = Number.parseFloat(params.get("cutoff") ?? "");
  return {
    view: (VIEWS as readonly string[]).includes(view) ? (view as ViewName) : DEFAULT_STATE.view,
    dataset: params.get("dataset") ?? DEFAULT_STATE.dataset,
    clustering: params.get("clustering") ?? DEFAULT_STATE.clustering,
    cluster: Number.isInteger(cluster) && cluster >= 0 ? cluster : DEFAULT_STATE.cluster,
    cutoff: Number.isFinite(cutoff) ? clamp01(cutoff) : DEFAULT_STATE.cutoff,
    job: params.get("job") ?? DEFAULT_STATE.job,
    model: params.get("model") ?? DEFAULT_STATE.model,
  };
}

/** Canonical query string; default values are omitted to keep URLs short. */
export function viewStateQuery(state: ViewState): string {
  const params = new URLSearchParams();
  params.set("view", state.view);
  if (state.dataset) params.set("dataset", state.dataset);
  if (state.clustering) params.set("clustering", state.clustering);
  if (state.cluster >= 0) params.set("cluster", String(state.cluster));
  if (state.cutoff !== DEFAULT_STATE.cutoff) params.set("cutoff", String(state.cutoff));
  if (state.job) params.set("job", state.job);
  if (state.model) params.set("model", state.model);
  return params.toString();
}
