// Typed client for the review service JSON API. Every number the UI shows
// comes through this module; views never compute metrics themselves.

export type Label = "positive" | "negative" | "unlabeled";

export interface DatasetImage {
  id: string;
  doc_id: string;
  page_index: number;
  label: Label;
}

export interface DatasetSummary {
  id: string;
  name: string;
  image_count: number;
  document_count: number;
  label_counts: Record<Label, number>;
  images: DatasetImage[];
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobRecord {
  id: string;
  kind: "extract" | "cluster" | "train";
  state: JobState;
  progress: number;
  dataset_id: string;
  params: Record<string, unknown>;
  result_ref: string | null;
  error: string | null;
  created_at: string;
}

export interface GalleryMember {
  image_id: string;
  distance: number;
}

export interface GalleryCluster {
  index: number;
  size: number;
  inertia_share: number;
  members: GalleryMember[];
}

export interface Gallery {
  k: number;
  inertia: number;
  clusters: GalleryCluster[];
}

export interface TrainEpoch {
  train_loss: number;
  validation_loss: number | null;
  validation_accuracy: number | null;
}

export interface ModelMetrics {
  dataset_id: string;
  feature_mode: string;
  feature_seed: number;
  epochs: number;
  final_train_loss: number | null;
  validation_accuracy: number | null;
  history: TrainEpoch[];
}

export interface ModelInfo {
  id: string;
  config: Record<string, unknown> | null;
  metrics: ModelMetrics;
}

export interface MetricsRow {
  cutoff: number;
  precision: number;
  recall: number;
  f1: number;
  accuracy: number;
}

export interface ThresholdReport {
  dataset: string;
  n: number;
  positives: number;
  table: MetricsRow[];
}

export interface PrPoint {
  cutoff: number;
  precision: number;
  recall: number;
}

export interface PrReport {
  dataset: string;
  n: number;
  positives: number;
  pr_curve: PrPoint[];
}

export interface Prediction {
  cutoff: number;
  probabilities: Record<string, number>;
  labels: Record<string, "positive" | "negative">;
}

export interface TrainRequest {
  epochs?: number;
  batch_size?: number;
  learning_rate?: number;
  optimizer?: "sgd_momentum" | "adam";
  seed?: number;
  validation_fraction?: number;
}

/** Error envelope raised for every non-2xx response. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Image ids contain slashes that must survive as path separators. */
export function encodeImagePath(imageId: string): string {
  return imageId.split("/").map(encodeURIComponent).join("/");
}

export class ApiClient {
  constructor(
    private readonly base: string = "/api/v1",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  imageUrl(imageId: string): string {
    return `${this.base}/images/${encodeImagePath(imageId)}`;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { accept: "application/json" } };
    if (body !== undefined) {
      init.headers = { ...init.headers, "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(`${this.base}${path}`, init);
    if (!response.ok) {
      let code = "http-error";
      let message = `${response.status} ${response.statusText}`;
      try {
        const envelope = (await response.json()) as { code?: string; message?: string };
        if (envelope.code) code = envelope.code;
        if (envelope.message) message = envelope.message;
      } catch {
        // non-JSON error body, keep the status line
      }
      throw new ApiError(response.status, code, message);
    }
    if (response.status === 204) return undefined as T;
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  registerDataset(manifest: unknown): Promise<{ id: string }> {
    return this.request("POST", "/datasets", manifest);
  }

  getDataset(datasetId: string): Promise<DatasetSummary> {
    return this.request("GET", `/datasets/${encodeURIComponent(datasetId)}`);
  }

  getLabel(imageId: string): Promise<{ image_id: string; label: Label }> {
    return this.request("GET", `/images/${encodeImagePath(imageId)}/label`);
  }

  putLabel(imageId: string, label: Label): Promise<void> {
    return this.request("PUT", `/images/${encodeImagePath(imageId)}/label`, { label });
  }

  startFeatures(
    datasetId: string,
    params: { mode?: string; backbone?: string; seed?: number },
  ): Promise<JobRecord> {
    return this.request("POST", `/datasets/${encodeURIComponent(datasetId)}/features`, params);
  }

  startClustering(datasetId: string, params: { k: number; seed?: number }): Promise<JobRecord> {
    return this.request("POST", `/datasets/${encodeURIComponent(datasetId)}/clusterings`, params);
  }

  startTraining(datasetId: string, config: TrainRequest): Promise<JobRecord> {
    return this.request("POST", `/datasets/${encodeURIComponent(datasetId)}/train`, config);
  }

  getJob(jobId: string): Promise<JobRecord> {
    return this.request("GET", `/jobs/${encodeURIComponent(jobId)}`);
  }

  getClustering(clusteringId: string): Promise<Gallery> {
    return this.request("GET", `/clusterings/${encodeURIComponent(clusteringId)}`);
  }

  getModel(modelId: string): Promise<ModelInfo> {
    return this.request("GET", `/models/${encodeURIComponent(modelId)}`);
  }

  predict(modelId: string, imageIds: string[], cutoff: number): Promise<Prediction> {
    return this.request("POST", `/models/${encodeURIComponent(modelId)}/predict`, {
      image_ids: imageIds,
      cutoff,
    });
  }

  importDetections(payload: unknown): Promise<{ documents: number }> {
    return this.request("POST", "/detections/import", payload);
  }

  getScores(): Promise<Record<string, number>> {
    return this.request("GET", "/documents/scores");
  }

  getEvaluations(cutoffs: number[]): Promise<ThresholdReport> {
    const list = cutoffs.map((value) => String(value)).join(",");
    return this.request("GET", `/evaluations?cutoffs=${encodeURIComponent(list)}`);
  }

  getPrCurve(): Promise<PrReport> {
    return this.request("GET", "/evaluations/pr-curve");
  }
}
