/**
 * Offline decision queue: decisions that fail to POST are buffered in
 * storage and re-delivered in order when the service is reachable again.
 * Nothing the analyst does is lost on reload — the buffer survives in
 * localStorage and the authoritative state lives on the server.
 */

import { ApiError, TriageApi } from './api.js';
import type { DecisionRequest } from './types.js';

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const STORAGE_KEY = 'callranker.pendingDecisions.v1';

export class DecisionQueue {
  private pending: DecisionRequest[] = [];
  private flushing = false;
  onChange: (pendingCount: number) => void = () => {};

  constructor(
    private api: TriageApi,
    private storage: StorageLike
  ) {
    const saved = this.storage.getItem(STORAGE_KEY);
    if (saved) {
      try {
        this.pending = JSON.parse(saved) as DecisionRequest[];
      } catch {
        this.pending = [];
      }
    }
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  private persist(): void {
    if (this.pending.length === 0) {
      this.storage.removeItem(STORAGE_KEY);
    } else {
      this.storage.setItem(STORAGE_KEY, JSON.stringify(this.pending));
    }
    this.onChange(this.pending.length);
  }

  /**
   * POST a decision, buffering it when the service is unreachable.
   * Returns true when the decision reached the server in this call.
   */
  async submit(decision: DecisionRequest): Promise<boolean> {
    if (this.pending.length > 0) {
      // keep strict ordering: never let a new decision jump the queue
      this.pending.push(decision);
      this.persist();
      await this.flush();
      return this.pending.length === 0;
    }
    try {
      await this.api.postDecision(decision);
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.status !== null) {
        throw err; // the server rejected it: a validation error, not an outage
      }
      this.pending.push(decision);
      this.persist();
      return false;
    }
  }

  /** Deliver buffered decisions in order; stops at the first failure. */
  async flush(): Promise<number> {
    if (this.flushing) return 0;
    this.flushing = true;
    let delivered = 0;
    try {
      while (this.pending.length > 0) {
        try {
          await this.api.postDecision(this.pending[0]);
        } catch (err) {
          if (err instanceof ApiError && err.status !== null) {
            // rejected by the server: drop it rather than wedging the queue
            this.pending.shift();
            this.persist();
            continue;
          }
          break; // still offline
        }
        this.pending.shift();
        delivered += 1;
        this.persist();
      }
    } finally {
      this.flushing = false;
    }
    return delivered;
  }
}
