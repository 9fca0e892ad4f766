// Application shell: tab navigation, URL round trip, and view mounting.
// The query string is the single client-side source of truth, so any view
// can be reproduced by reloading the same address.

import { ApiClient } from "./api.js";
import { el } from "./dom.js";
import { GalleryView } from "./gallery.js";
import { parseViewState, ViewName, ViewState, viewStateQuery } from "./state.js";
import { ThresholdView } from "./threshold.js";
import { TrainingView } from "./training.js";

const TABS: readonly { name: ViewName; label: string }[] = [
  { name: "gallery", label: "Cluster gallery" },
  { name: "threshold", label: "Threshold explorer" },
  { name: "training", label: "Training monitor" },
];

export class App {
  private state: ViewState;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
    private readonly win: Window,
  ) {
    this.state = parseViewState(win.location.search);
  }

  start(): void {
    this.win.addEventListener("popstate", () => {
      this.state = parseViewState(this.win.location.search);
      void this.render();
    });
    void this.render();
  }

  private apply(patch: Partial<ViewState>, rerender: boolean): void {
    this.state = { ...this.state, ...patch };
    const query = viewStateQuery(this.state);
    this.win.history.replaceState(null, "", `?${query}`);
    if (rerender) void this.render();
  }

  private async render(): Promise<void> {
    const doc = this.root.ownerDocument;
    this.root.textContent = "";

    const header = el(doc, "header", "topbar");
    const datasetInput = el(doc, "input", "dataset-id");
    datasetInput.placeholder = "dataset id";
    datasetInput.value = this.state.dataset;
    const open = el(doc, "button", "open-dataset", "Open");
    open.addEventListener("click", () => {
      this.apply({ dataset: datasetInput.value.trim(), clustering: "", job: "", model: "" }, true);
    });
    header.append(datasetInput, open);
    const nav = el(doc, "nav", "tabs");
    for (const tab of TABS) {
      const button = el(doc, "button", tab.name === this.state.view ? "tab active" : "tab");
      button.textContent = tab.label;
      button.addEventListener("click", () => this.apply({ view: tab.name }, true));
      nav.appendChild(button);
    }
    header.appendChild(nav);
    this.root.appendChild(header);

    const body = el(doc, "main", "view");
    this.root.appendChild(body);
    const onState = (patch: Partial<ViewState>) => this.apply(patch, false);
    if (this.state.view === "gallery") {
      await new GalleryView(this.api, body, onState).load(this.state);
    } else if (this.state.view === "threshold") {
      await new ThresholdView(this.api, body, onState).load(this.state);
    } else {
      await new TrainingView(this.api, body, onState).load(this.state);
    }
  }
}

export function mount(win: Window, root: HTMLElement, baseUrl = "/api/v1"): App {
  const app = new App(new ApiClient(baseUrl), root, win);
  app.start();
  return app;
}

declare const window: Window & typeof globalThis;

if (typeof window !== "undefined" && typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) mount(window, root, root.getAttribute("data-api-base") ?? "/api/v1");
}
