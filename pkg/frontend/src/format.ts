// Presentation helpers. These format numbers the service returned; no
// metric is ever computed on the client.

/** Metrics display with exactly three decimals, the panel-wide convention. */
export function formatMetric(value: number): string {
  return value.toFixed(3);
}

/** Inertia shares and job progress as a one-decimal percentage. */
export function formatShare(value: number): string {
  return `${(100 * value).toFixed(1)}%`;
}

/** Distances carry more precision than metrics but stay compact. */
export function formatDistance(value: number): string {
  return value.toFixed(4);
}

export function clamp01(value: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(1, Math.max(0, value));
}
