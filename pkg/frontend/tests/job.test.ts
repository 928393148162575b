import { describe, expect, it } from "vitest";
import { ApiError, type JobSnapshot } from "../src/api.js";
import { JobTracker, mergeEventLog, type JobSource, type JobState } from "../src/job.js";

function snapshot(done: number, total: number, overrides: Partial<JobSnapshot> = {}): JobSnapshot {
  return {
    batchId: "b1",
    submittedAt: "2026-08-26T00:00:00+00:00",
    progress: { total, queued: total - done, inFlight: 0, done },
    answers: null,
    eventLog: [],
    totalRunningTime: null,
    ...overrides,
  };
}

/** getJob answers from a script of snapshots and errors. */
function scriptedClient(script: Array<JobSnapshot | Error>): JobSource & { calls: number } {
  const source = {
    calls: 0,
    async getJob(_batchId: string): Promise<JobSnapshot> {
      source.calls += 1;
      const next = script.shift();
      if (next === undefined) throw new Error("script exhausted");
      if (next instanceof Error) throw next;
      return next;
    },
  };
  return source;
}

function manualTimer() {
  const pending: Array<() => void> = [];
  return {
    pending,
    schedule: (fn: () => void, _ms: number) => {
      pending.push(fn);
      return pending.length;
    },
    cancel: (_handle: unknown) => {},
  };
}

function tracker(script: Array<JobSnapshot | Error>) {
  const client = scriptedClient(script);
  const timer = manualTimer();
  const t = new JobTracker(client, "b1", {
    intervalMs: 500,
    schedule: timer.schedule,
    cancel: timer.cancel,
  });
  return { t, client, timer };
}

describe("mergeEventLog", () => {
  it("appends disjoint lines", () => {
    expect(mergeEventLog(["a"], ["b", "c"])).toEqual(["a", "b", "c"]);
  });

  it("drops the overlapping prefix", () => {
    expect(mergeEventLog(["a", "b", "c"], ["b", "c", "d", "e"])).toEqual(["a", "b", "c", "d", "e"]);
  });

  it("ignores a tail fully contained in what is shown", () => {
    expect(mergeEventLog(["a", "b", "c"], ["b", "c"])).toEqual(["a", "b", "c"]);
  });

  it("handles empty sides", () => {
    expect(mergeEventLog([], ["a"])).toEqual(["a"]);
    expect(mergeEventLog(["a"], [])).toEqual(["a"]);
  });

  it("keeps server order across a sliding tail window", () => {
    // a server that keeps only the last 5 lines of a growing log
    const full = Array.from({ length: 12 }, (_, i) => `event ${i}`);
    let shown: string[] = [];
    for (const upTo of [4, 7, 9, 12]) {
      shown = mergeEventLog(shown, full.slice(Math.max(0, upTo - 5), upTo));
    }
    expect(shown).toEqual(full);
  });
});

describe("JobTracker", () => {
  it("polls until answers arrive, then stops", async () => {
    const done = snapshot(3, 3, {
      answers: [{ queryId: "q1", bestRecordId: "r1", bestSimilarity: 0.7, person: null }],
      totalRunningTime: 1.25,
    });
    const { t, client, timer } = tracker([snapshot(1, 3), snapshot(2, 3), done]);
    const phases: string[] = [];
    t.subscribe((s: JobState) => phases.push(s.phase));

    await t.tick();
    expect(t.state.phase).toBe("running");
    expect(timer.pending).toHaveLength(1);

    await t.tick();
    await t.tick();
    expect(t.state.phase).toBe("finished");
    expect(t.state.snapshot?.totalRunningTime).toBe(1.25);
    expect(phases).toEqual(["running", "running", "finished"]);
    // finishing cancels the loop: no new callback was scheduled
    expect(timer.pending).toHaveLength(2);
    expect(client.calls).toBe(3);

    await t.tick(); // stopped: a stray timer firing does nothing
    expect(client.calls).toBe(3);
  });

  it("reports reconnecting on network failure and recovers", async () => {
    const { t } = tracker([
      snapshot(1, 2, { eventLog: ["e1"] }),
      new TypeError("fetch failed"),
      snapshot(2, 2, { eventLog: ["e1", "e2"] }),
    ]);
    await t.tick();
    await t.tick();
    expect(t.state.phase).toBe("reconnecting");
    expect(t.state.lastError).toContain("fetch failed");
    // the last good snapshot stays on screen
    expect(t.state.snapshot?.progress.done).toBe(1);

    await t.tick();
    expect(t.state.phase).toBe("running");
    expect(t.state.lastError).toBeNull();
    expect(t.state.consoleLines).toEqual(["e1", "e2"]);
  });

  it("treats a server-side rejection as terminal", async () => {
    const { t, timer } = tracker([new ApiError(404, "unknown batch", "gone")]);
    await t.tick();
    expect(t.state.phase).toBe("failed");
    expect(t.state.lastError).toBe("unknown batch: gone");
    expect(timer.pending).toHaveLength(0);
  });

  it("accumulates console lines append-only across polls", async () => {
    const { t } = tracker([
      snapshot(1, 4, { eventLog: ["t0 submitted", "t1 dispatch a"] }),
      snapshot(3, 4, { eventLog: ["t1 dispatch a", "t2 done a", "t3 dispatch b"] }),
      snapshot(4, 4, { eventLog: ["t3 dispatch b", "t4 done b"] }),
    ]);
    await t.tick();
    await t.tick();
    await t.tick();
    expect(t.state.consoleLines).toEqual([
      "t0 submitted",
      "t1 dispatch a",
      "t2 done a",
      "t3 dispatch b",
      "t4 done b",
    ]);
  });

  it("stop() prevents any further polling", async () => {
    const { t, client } = tracker([snapshot(1, 2), snapshot(2, 2)]);
    await t.tick();
    t.stop();
    await t.tick();
    expect(client.calls).toBe(1);
  });
});
