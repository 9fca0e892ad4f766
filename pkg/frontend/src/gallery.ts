// Cluster gallery: thumbnail grids per cluster in gallery JSON order
// (members arrive sorted by ascending distance to the centroid), with an
// exclude action that bulk-labels every member negative.

import { ApiClient, ApiError, DatasetSummary, Gallery, JobRecord } from "./api.js";
import { clear, el, setBanner } from "./dom.js";
import { formatDistance, formatShare } from "./format.js";
import { LabelSubmitter } from "./labels.js";
import { Sleep, realSleep } from "./sequencing.js";
import { ViewState } from "./state.js";

export interface GalleryOptions {
  sleep?: Sleep;
  pollMs?: number;
}

export class GalleryView {
  private readonly doc: Document;
  private readonly labels: LabelSubmitter;
  private readonly sleep: Sleep;
  private readonly pollMs: number;
  private readonly excluding = new Set<number>();
  private tasks: Promise<unknown>[] = [];
  private gallery: Gallery | null = null;
  private state: ViewState | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
    private readonly onState: (patch: Partial<ViewState>) => void = () => {},
    options: GalleryOptions = {},
  ) {
    this.doc = root.ownerDocument;
    this.labels = new LabelSubmitter(api);
    this.sleep = options.sleep ?? realSleep;
    this.pollMs = options.pollMs ?? 500;
  }

  /** Await every handler kicked off by DOM events so far. */
  async settle(): Promise<void> {
    while (this.tasks.length > 0) {
      const batch = this.tasks.splice(0);
      await Promise.allSettled(batch);
    }
  }

  private track(task: Promise<unknown>): void {
    this.tasks.push(task);
  }

  async load(state: ViewState): Promise<void> {
    this.state = state;
    clear(this.root);
    setBanner(this.root, "");
    this.renderLaunchBar(state);
    if (state.job) {
      await this.watchJob(state.job);
      return;
    }
    if (!state.clustering) {
      this.root.appendChild(
        el(this.doc, "p", "hint", "Run a clustering or open one by id to browse groups."),
      );
      return;
    }
    await this.showGallery(state.clustering);
  }

  private renderLaunchBar(state: ViewState): void {
    const bar = el(this.doc, "div", "launch-bar");
    const kInput = el(this.doc, "input", "k-input");
    kInput.type = "number";
    kInput.min = "1";
    kInput.value = "5";
    const seedInput = el(this.doc, "input", "seed-input");
    seedInput.type = "number";
    seedInput.value = "0";
    const button = el(this.doc, "button", "run-clustering", "Run clustering");
    button.addEventListener("click", () => {
      this.track(this.launch(Number(kInput.value), Number(seedInput.value)));
    });
    bar.append("k ", kInput, " seed ", seedInput, " ", button);
    this.root.appendChild(bar);
    if (!state.dataset) {
      (bar.querySelector("button") as HTMLButtonElement).disabled = true;
    }
  }

  private async launch(k: number, seed: number): Promise<void> {
    if (!this.state?.dataset) return;
    try {
      const job = await this.api.startClustering(this.state.dataset, { k, seed });
      this.onState({ job: job.id, clustering: "" });
      await this.watchJob(job.id);
    } catch (error) {
      setBanner(this.root, error instanceof Error ? error.message : String(error));
    }
  }

  private async watchJob(jobId: string): Promise<void> {
    const progress = el(this.doc, "div", "job-progress");
    const bar = el(this.doc, "progress") as HTMLProgressElement;
    bar.max = 1;
    const text = el(this.doc, "span", "job-state");
    progress.append(bar, text);
    this.root.appendChild(progress);
    let job: JobRecord;
    try {
      for (;;) {
        job = await this.api.getJob(jobId);
        bar.value = job.progress;
        text.textContent = `${job.kind} ${job.state}`;
        if (job.state === "done" || job.state === "failed") break;
        await this.sleep(this.pollMs);
      }
    } catch (error) {
      setBanner(this.root, error instanceof Error ? error.message : String(error));
      return;
    }
    progress.remove();
    if (job.state === "failed") {
      setBanner(this.root, job.error ?? "clustering job failed");
      return;
    }
    const clusteringId = job.result_ref ?? "";
    this.onState({ clustering: clusteringId, job: "" });
    await this.showGallery(clusteringId);
  }

  private async showGallery(clusteringId: string): Promise<void> {
    let gallery: Gallery;
    let dataset: DatasetSummary | null = null;
    try {
      gallery = await this.api.getClustering(clusteringId);
      if (this.state?.dataset) dataset = await this.api.getDataset(this.state.dataset);
    } catch (error) {
      const message = error instanceof ApiError ? error.message : String(error);
      setBanner(this.root, message);
      return;
    }
    this.gallery = gallery;
    this.renderGallery(gallery, dataset);
  }

  private renderGallery(gallery: Gallery, dataset: DatasetSummary | null): void {
    const old = this.root.querySelector(".gallery");
    if (old) old.remove();
    const container = el(this.doc, "div", "gallery");
    const header = el(
      this.doc,
      "p",
      "gallery-header",
      `${gallery.k} clusters, total inertia ${gallery.inertia.toFixed(4)}`,
    );
    container.appendChild(header);
    if (dataset) container.appendChild(this.labelCounts(dataset));
    for (const cluster of gallery.clusters) {
      const section = el(this.doc, "section", "cluster");
      section.dataset.cluster = String(cluster.index);
      const title = el(
        this.doc,
        "h3",
        "",
        `Cluster ${cluster.index}: ${cluster.size} images, ` +
          `${formatShare(cluster.inertia_share)} of inertia`,
      );
      const exclude = el(this.doc, "button", "exclude", "Exclude cluster");
      exclude.addEventListener("click", () => {
        this.track(this.excludeCluster(cluster.index));
      });
      const grid = el(this.doc, "div", "thumb-grid");
      for (const member of cluster.members) {
        const figure = el(this.doc, "figure", "thumb");
        const img = el(this.doc, "img") as HTMLImageElement;
        img.src = this.api.imageUrl(member.image_id);
        img.alt = member.image_id;
        img.loading = "lazy";
        img.title = `${member.image_id} (distance ${formatDistance(member.distance)})`;
        figure.appendChild(img);
        grid.appendChild(figure);
      }
      section.append(title, exclude, grid);
      container.appendChild(section);
    }
    this.root.appendChild(container);
  }

  private labelCounts(dataset: DatasetSummary): HTMLElement {
    const counts = dataset.label_counts;
    return el(
      this.doc,
      "p",
      "label-counts",
      `Labels: ${counts.positive} positive, ${counts.negative} negative, ` +
        `${counts.unlabeled} unlabeled`,
    );
  }

  /** Bulk-label every member of one cluster negative, one PUT per member. */
  async excludeCluster(index: number): Promise<void> {
    if (!this.gallery || this.excluding.has(index)) return;
    const cluster = this.gallery.clusters.find((c) => c.index === index);
    if (!cluster) return;
    this.excluding.add(index);
    const button = this.root.querySelector<HTMLButtonElement>(
      `section[data-cluster="${index}"] button.exclude`,
    );
    if (button) button.disabled = true;
    try {
      await this.labels.submitAll(
        cluster.members.map((member) => member.image_id),
        "negative",
      );
      if (button) button.textContent = "Excluded";
      if (this.state?.dataset) {
        const dataset = await this.api.getDataset(this.state.dataset);
        const counts = this.root.querySelector(".label-counts");
        if (counts) counts.replaceWith(this.labelCounts(dataset));
      }
    } catch (error) {
      this.excluding.delete(index);
      if (button) button.disabled = false;
      setBanner(this.root, error instanceof Error ? error.message : String(error));
    }
  }
}
