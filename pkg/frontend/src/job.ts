/** Per-job polling loop.  One tracker owns one batch: it refreshes the
 * snapshot on an interval, keeps the event console append-only, and
 * reports a "reconnecting" phase on transient network failures instead
 * of crashing or stopping. */

import { ApiError, type JobSnapshot } from "./api.js";

/** What a tracker needs from the API client. */
export interface JobSource {
  getJob(batchId: string): Promise<JobSnapshot>;
}

export type JobPhase = "running" | "reconnecting" | "finished" | "failed";

export interface JobState {
  batchId: string;
  phase: JobPhase;
  snapshot: JobSnapshot | null;
  /** Accumulated event console lines, server order, append-only. */
  consoleLines: string[];
  lastError: string | null;
}

export type Scheduler = (fn: () => void, ms: number) => unknown;
export type Canceller = (handle: unknown) => void;

export interface TrackerOptions {
  intervalMs?: number;
  schedule?: Scheduler;
  cancel?: Canceller;
}

/** Append the new tail to the lines seen so far without duplicating the
 * overlap.  The server sends only the last N events, so the incoming
 * list may start anywhere inside (or before) what we already display. */
export function mergeEventLog(existing: string[], incoming: string[]): string[] {
  const maxOverlap = Math.min(existing.length, incoming.length);
  for (let k = maxOverlap; k > 0; k--) {
    let matches = true;
    for (let i = 0; i < k; i++) {
      if (existing[existing.length - k + i] !== incoming[i]) {
        matches = false;
        break;
      }
    }
    if (matches) return existing.concat(incoming.slice(k));
  }
  return existing.concat(incoming);
}

export class JobTracker {
  private listeners: Array<(state: JobState) => void> = [];
  private handle: unknown = null;
  private stopped = false;
  private readonly intervalMs: number;
  private readonly schedule: Scheduler;
  private readonly cancel: Canceller;

  state: JobState;

  constructor(
    private readonly client: JobSource,
    batchId: string,
    options: TrackerOptions = {},
  ) {
    this.intervalMs = options.intervalMs ?? 500;
    this.schedule = options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.cancel = options.cancel ?? ((h) => clearTimeout(h as ReturnType<typeof setTimeout>));
    this.state = {
      batchId,
      phase: "running",
      snapshot: null,
      consoleLines: [],
      lastError: null,
    };
  }

  subscribe(listener: (state: JobState) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  start(): void {
    void this.tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.handle !== null) {
      this.cancel(this.handle);
      this.handle = null;
    }
  }

  /** One poll; reschedules itself, so refreshes never overlap. */
  async tick(): Promise<void> {
    if (this.stopped) return;
    try {
      const snapshot = await this.client.getJob(this.state.batchId);
      this.state = {
        ...this.state,
        phase: snapshot.answers !== null ? "finished" : "running",
        snapshot,
        consoleLines: mergeEventLog(this.state.consoleLines, snapshot.eventLog),
        lastError: null,
      };
    } catch (err) {
      if (err instanceof ApiError) {
        // the server answered: the job is gone for good, stop polling
        this.state = { ...this.state, phase: "failed", lastError: err.message };
      } else {
        this.state = {
          ...this.state,
          phase: "reconnecting",
          lastError: err instanceof Error ? err.message : String(err),
        };
      }
    }
    this.notify();
    if (this.state.phase === "finished" || this.state.phase === "failed") {
      this.stop();
      return;
    }
    if (!this.stopped) {
      this.handle = this.schedule(() => void this.tick(), this.intervalMs);
    }
  }

  private notify(): void {
    for (const listener of [...this.listeners]) listener(this.state);
  }
}
