// Shared test scaffolding: an in-memory stub of the service API that
// records every request, plus small fixtures for the views.

import { ApiClient, DatasetSummary, FetchLike, Gallery, JobRecord } from "../src/api.js";
import { DEFAULT_STATE, ViewState } from "../src/state.js";

export interface RecordedCall {
  method: string;
  url: string;
  body: unknown;
}

export interface StubResponse {
  status?: number;
  body?: unknown;
}

type Handler = (
  call: RecordedCall,
  match: RegExpExecArray,
) => StubResponse | Promise<StubResponse>;

interface Route {
  method: string;
  pattern: RegExp;
  handler: Handler;
}

export class StubServer {
  readonly calls: RecordedCall[] = [];
  private readonly routes: Route[] = [];

  /** Register a route; earlier registrations win on overlap. */
  on(method: string, pattern: RegExp, handler: Handler): this {
    this.routes.push({ method, pattern, handler });
    return this;
  }

  /** Register a route that shadows any existing match. */
  override(method: string, pattern: RegExp, handler: Handler): this {
    this.routes.unshift({ method, pattern, handler });
    return this;
  }

  countCalls(method: string, pattern: RegExp): number {
    return this.calls.filter((call) => call.method === method && pattern.test(call.url)).length;
  }

  readonly fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const body = typeof init?.body === "string" ? JSON.parse(init.body) : undefined;
    const call: RecordedCall = { method, url, body };
    this.calls.push(call);
    for (const route of this.routes) {
      if (route.method !== method) continue;
      const match = route.pattern.exec(url);
      if (!match) continue;
      const result = await route.handler(call, match);
      const status = result.status ?? 200;
      if (status === 204) return new Response(null, { status });
      return new Response(JSON.stringify(result.body ?? {}), {
        status,
        headers: { "content-type": "application/json" },
      });
    }
    return new Response(
      JSON.stringify({ status: 404, code: "not-found", message: `no route: ${method} ${url}` }),
      { status: 404, headers: { "content-type": "application/json" } },
    );
  };
}

export function makeClient(server: StubServer): ApiClient {
  return new ApiClient("/api/v1", server.fetch);
}

export function makeRoot(): HTMLElement {
  const root = document.createElement("div");
  document.body.appendChild(root);
  return root;
}

export function makeState(overrides: Partial<ViewState> = {}): ViewState {
  return { ...DEFAULT_STATE, ...overrides };
}

/** Sleep stand-in that yields once without waiting. */
export const instantSleep = async (_ms: number): Promise<void> => {};

export const tick = (): Promise<void> => new Promise((resolve) => setTimeout(resolve, 0));

export interface Deferred<T> {
  promise: Promise<T>;
  resolve: (value: T) => void;
  reject: (reason: unknown) => void;
}

export function deferred<T>(): Deferred<T> {
  let resolve!: (value: T) => void;
  let reject!: (reason: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

export function makeGallery(sizes: readonly number[]): Gallery {
  let next = 0;
  const clusters = sizes.map((size, index) => {
    const members = Array.from({ length: size }, (_, i) => ({
      image_id: `doc-${index}/page-${i}.png`,
      distance: 0.1 * (i + 1),
    }));
    next += size;
    return { index, size, inertia_share: 1 / sizes.length, members };
  });
  return { k: sizes.length, inertia: 12.5, clusters };
}

export function makeDataset(
  id: string,
  counts: { positive: number; negative: number; unlabeled: number },
  imageIds: readonly string[] = [],
): DatasetSummary {
  return {
    id,
    name: "fixture",
    image_count: imageIds.length,
    document_count: new Set(imageIds.map((imageId) => imageId.split("/")[0])).size,
    label_counts: counts,
    images: imageIds.map((imageId, i) => ({
      id: imageId,
      doc_id: imageId.split("/")[0] ?? imageId,
      page_index: i,
      label: "unlabeled" as const,
    })),
  };
}

export function makeJob(overrides: Partial<JobRecord> = {}): JobRecord {
  return {
    id: "job-1",
    kind: "cluster",
    state: "queued",
    progress: 0,
    dataset_id: "ds-1",
    params: {},
    result_ref: null,
    error: null,
    created_at: "2026-01-01T00:00:00Z",
    ...overrides,
  };
}
