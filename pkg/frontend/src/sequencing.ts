// Request sequencing for views that refetch on every input event. Each
// fetch takes a token; only the newest token may apply its response, so a
// slow earlier response can never overwrite a later one.

export class LatestGate {
  private seq = 0;

  /** Claim the next token; all earlier tokens become stale. */
  next(): number {
    this.seq += 1;
    return this.seq;
  }

  /** True while no newer token has been claimed. */
  isCurrent(token: number): boolean {
    return token === this.seq;
  }
}

/** Sleep helper injected into polling loops so tests can run them instantly. */
export type Sleep = (ms: number) => Promise<void>;

export const realSleep: Sleep = (ms) => new Promise((resolve) => setTimeout(resolve, ms));
