// Training monitor: a launch form posting the train config, a polled
// progress bar, and a per-epoch loss chart drawn from the finished model's
// stored history. Launching requires both classes labeled; the form checks
// the dataset's label counts and refuses locally before any job is created.

import { ApiClient, DatasetSummary, JobRecord, ModelInfo, TrainRequest } from "./api.js";
import { clear, el, setBanner } from "./dom.js";
import { formatMetric } from "./format.js";
import { Sleep, realSleep } from "./sequencing.js";
import { ViewState } from "./state.js";

const CHART_WIDTH = 320;
const CHART_HEIGHT = 180;
const CHART_MARGIN = 20;
const SVG_NS = "http://www.w3.org/2000/svg";

export interface TrainingOptions {
  sleep?: Sleep;
  pollMs?: number;
}

export class TrainingView {
  private readonly doc: Document;
  private readonly sleep: Sleep;
  private readonly pollMs: number;
  private tasks: Promise<unknown>[] = [];
  private dataset: DatasetSummary | null = null;
  private state: ViewState | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
    private readonly onState: (patch: Partial<ViewState>) => void = () => {},
    options: TrainingOptions = {},
  ) {
    this.doc = root.ownerDocument;
    this.sleep = options.sleep ?? realSleep;
    this.pollMs = options.pollMs ?? 500;
  }

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
    if (state.dataset) {
      try {
        this.dataset = await this.api.getDataset(state.dataset);
      } catch (error) {
        setBanner(this.root, error instanceof Error ? error.message : String(error));
        return;
      }
    }
    this.renderForm();
    if (state.job) {
      // A refresh mid-training lands here: resume from the job state.
      await this.watchJob(state.job);
    } else if (state.model) {
      await this.showModel(state.model);
    }
  }

  private field(form: HTMLElement, label: string, name: string, value: string): HTMLInputElement {
    const wrap = el(this.doc, "label", `field-${name}`, `${label} `);
    const input = el(this.doc, "input");
    input.name = name;
    input.value = value;
    wrap.appendChild(input);
    form.appendChild(wrap);
    return input;
  }

  private renderForm(): void {
    const form = el(this.doc, "div", "train-form");
    const epochs = this.field(form, "epochs", "epochs", "5");
    const batch = this.field(form, "batch size", "batch-size", "32");
    const rate = this.field(form, "learning rate", "learning-rate", "0.001");
    const seed = this.field(form, "seed", "seed", "0");
    const optimizer = el(this.doc, "select", "optimizer");
    for (const name of ["sgd_momentum", "adam"]) {
      const option = el(this.doc, "option", "", name);
      option.value = name;
      optimizer.appendChild(option);
    }
    form.appendChild(optimizer);
    const launch = el(this.doc, "button", "launch", "Launch training");
    const error = el(this.doc, "span", "form-error");
    form.append(launch, error);
    launch.addEventListener("click", () => {
      error.textContent = "";
      const config: TrainRequest = {
        epochs: Number(epochs.value),
        batch_size: Number(batch.value),
        learning_rate: Number(rate.value),
        optimizer: optimizer.value as TrainRequest["optimizer"],
        seed: Number(seed.value),
      };
      this.track(this.launch(config, error));
    });
    this.root.appendChild(form);
  }

  /** Refuse locally when only one class is labeled; otherwise post the job. */
  private async launch(config: TrainRequest, error: HTMLElement): Promise<void> {
    if (!this.state?.dataset || !this.dataset) {
      error.textContent = "open a dataset first";
      return;
    }
    const counts = this.dataset.label_counts;
    if (counts.positive === 0 || counts.negative === 0) {
      error.textContent = "training needs both classes: label at least one positive and one negative image";
      return;
    }
    let job: JobRecord;
    try {
      job = await this.api.startTraining(this.state.dataset, config);
    } catch (err) {
      error.textContent = err instanceof Error ? err.message : String(err);
      return;
    }
    this.onState({ job: job.id, model: "" });
    await this.watchJob(job.id);
  }

  private async watchJob(jobId: string): Promise<void> {
    const holder = el(this.doc, "div", "train-progress");
    const bar = el(this.doc, "progress") as HTMLProgressElement;
    bar.max = 1;
    const text = el(this.doc, "span", "job-state");
    holder.append(bar, text);
    this.root.appendChild(holder);
    let job: JobRecord;
    try {
      for (;;) {
        job = await this.api.getJob(jobId);
        bar.value = job.progress;
        text.textContent = `training ${job.state}`;
        if (job.state === "done" || job.state === "failed") break;
        await this.sleep(this.pollMs);
      }
    } catch (error) {
      setBanner(this.root, error instanceof Error ? error.message : String(error));
      return;
    }
    holder.remove();
    if (job.state === "failed") {
      setBanner(this.root, job.error ?? "training failed");
      return;
    }
    const modelId = job.result_ref ?? "";
    this.onState({ model: modelId, job: "" });
    await this.showModel(modelId);
  }

  private async showModel(modelId: string): Promise<void> {
    let model: ModelInfo;
    try {
      model = await this.api.getModel(modelId);
    } catch (error) {
      setBanner(this.root, error instanceof Error ? error.message : String(error));
      return;
    }
    const old = this.root.querySelector(".model-report");
    if (old) old.remove();
    const report = el(this.doc, "div", "model-report");
    const accuracy = model.metrics.validation_accuracy;
    report.appendChild(
      el(
        this.doc,
        "p",
        "model-summary",
        `Model ${model.id}: ${model.metrics.epochs} epochs, validation accuracy ` +
          `${accuracy === null ? "n/a" : formatMetric(accuracy)}`,
      ),
    );
    report.appendChild(this.renderChart(model));
    const predict = el(this.doc, "button", "predict", "Predict on dataset");
    predict.addEventListener("click", () => {
      this.track(this.predictOnDataset(model.id));
    });
    report.appendChild(predict);
    this.root.appendChild(report);
  }

  /** One dot per epoch on the train-loss line; values straight from history. */
  private renderChart(model: ModelInfo): HTMLElement {
    const wrapper = el(this.doc, "div", "loss-chart");
    const history = model.metrics.history;
    if (history.length === 0) return wrapper;
    const svg = this.doc.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${CHART_WIDTH} ${CHART_HEIGHT}`);
    svg.setAttribute("width", String(CHART_WIDTH));
    svg.setAttribute("height", String(CHART_HEIGHT));
    const losses = history.map((epoch) => epoch.train_loss);
    const top = Math.max(...losses, 1e-9);
    const coords = losses.map((loss, i): [number, number] => {
      const x =
        CHART_MARGIN +
        (history.length === 1 ? 0 : (i / (history.length - 1)) * (CHART_WIDTH - 2 * CHART_MARGIN));
      const y = CHART_HEIGHT - CHART_MARGIN - (loss / top) * (CHART_HEIGHT - 2 * CHART_MARGIN);
      return [Math.round(x * 100) / 100, Math.round(y * 100) / 100];
    });
    const line = this.doc.createElementNS(SVG_NS, "polyline");
    line.setAttribute("points", coords.map(([x, y]) => `${x},${y}`).join(" "));
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", "currentColor");
    svg.appendChild(line);
    coords.forEach(([x, y], i) => {
      const dot = this.doc.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(x));
      dot.setAttribute("cy", String(y));
      dot.setAttribute("r", "3");
      dot.setAttribute("class", "epoch-point");
      const epoch = history[i];
      if (epoch) dot.setAttribute("data-loss", String(epoch.train_loss));
      svg.appendChild(dot);
    });
    wrapper.appendChild(svg);
    return wrapper;
  }

  private async predictOnDataset(modelId: string): Promise<void> {
    if (!this.dataset || !this.state) return;
    const imageIds = this.dataset.images.map((image) => image.id);
    if (imageIds.length === 0) return;
    let prediction;
    try {
      prediction = await this.api.predict(modelId, imageIds, this.state.cutoff);
    } catch (error) {
      setBanner(this.root, error instanceof Error ? error.message : String(error));
      return;
    }
    const old = this.root.querySelector(".predictions");
    if (old) old.remove();
    const table = el(this.doc, "table", "predictions");
    const head = el(this.doc, "tr");
    head.append(
      el(this.doc, "th", "", "image"),
      el(this.doc, "th", "", "probability"),
      el(this.doc, "th", "", "label"),
    );
    table.appendChild(head);
    for (const imageId of imageIds) {
      const probability = prediction.probabilities[imageId];
      const label = prediction.labels[imageId];
      if (probability === undefined || label === undefined) continue;
      const tr = el(this.doc, "tr");
      tr.append(
        el(this.doc, "td", "", imageId),
        el(this.doc, "td", "", formatMetric(probability)),
        el(this.doc, "td", "", label),
      );
      table.appendChild(tr);
    }
    this.root.appendChild(table);
  }
}
