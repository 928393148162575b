// @vitest-environment jsdom
import { afterEach, describe, expect, it } from "vitest";
import { ApiError, type JobSnapshot, type QueryFile } from "../src/api.js";
import { createApp, type App, type ConsoleApi } from "../src/app.js";
import { gradientPixels, pgmP5 } from "./helpers.js";

const FINISHED: JobSnapshot = {
  batchId: "b7",
  submittedAt: "2026-08-26T00:00:00+00:00",
  progress: { total: 2, queued: 0, inFlight: 0, done: 2 },
  answers: [
    {
      queryId: "q000001",
      bestRecordId: "r000002",
      bestSimilarity: 0.91234,
      person: { name: "Ada Fern", metadata: { team: "qa" }, photoPath: null },
    },
    { queryId: "q000002", bestRecordId: null, bestSimilarity: 0.012, person: null },
  ],
  eventLog: ["t0 batch submitted", "t1 all tasks done"],
  totalRunningTime: 2.5,
};

const RUNNING: JobSnapshot = {
  ...FINISHED,
  progress: { total: 2, queued: 1, inFlight: 1, done: 1 },
  answers: null,
  eventLog: ["t0 batch submitted"],
  totalRunningTime: null,
};

interface FakeApi extends ConsoleApi {
  submitted: QueryFile[][];
}

/** Serves the scripted snapshots one per poll; after the script runs out
 * it either repeats the last snapshot (a steady server) or throws (a
 * server that went away). */
function fakeApi(
  snapshots: JobSnapshot[],
  opts: { submitError?: Error; onExhausted?: "repeat" | "throw" } = {},
): FakeApi {
  const script = [...snapshots];
  let last: JobSnapshot | undefined;
  const api: FakeApi = {
    submitted: [],
    async submitQueries(files: QueryFile[]): Promise<string> {
      if (opts.submitError) throw opts.submitError;
      api.submitted.push(files);
      return "b7";
    },
    async getJob(_batchId: string): Promise<JobSnapshot> {
      const next = script.shift();
      if (next !== undefined) {
        last = next;
        return next;
      }
      if (opts.onExhausted === "throw" || last === undefined) {
        throw new TypeError("connection refused");
      }
      return last;
    },
  };
  return api;
}

const cleanups: App[] = [];

function mount(api: ConsoleApi): { root: HTMLElement; app: App } {
  const root = document.createElement("div");
  document.body.append(root);
  // manual scheduling: polls happen only when a test calls tick()
  const app = createApp(root, api, { tracker: { schedule: () => 0, cancel: () => {} } });
  cleanups.push(app);
  return { root, app };
}

/** Let the tracker's own first poll (fired by start()) settle. */
const settle = () => new Promise((resolve) => setTimeout(resolve, 0));

afterEach(() => {
  cleanups.splice(0).forEach((app) => app.dispose());
  document.body.replaceChildren();
});

const VALID = pgmP5(8, 8, gradientPixels(8, 8));

describe("submission validation", () => {
  it("rejects an unreadable file inline and creates no job", async () => {
    const api = fakeApi([]);
    const { root, app } = mount(api);
    const result = await app.submitFiles([
      { filename: "notes.txt", data: new TextEncoder().encode("hello") },
    ]);
    expect(result).toBeNull();
    const errors = Array.from(root.querySelectorAll(".file-error"), (li) => li.textContent);
    expect(errors).toHaveLength(1);
    expect(errors[0]).toContain("notes.txt");
    expect(api.submitted).toHaveLength(0);
    expect(root.querySelector(".job-card")).toBeNull();
  });

  it("one bad file blocks the whole selection", async () => {
    const api = fakeApi([]);
    const { root, app } = mount(api);
    const result = await app.submitFiles([
      { filename: "good.pgm", data: VALID },
      { filename: "bad.pgm", data: new TextEncoder().encode("P9 nope") },
    ]);
    expect(result).toBeNull();
    expect(api.submitted).toHaveLength(0);
    expect(root.querySelector(".file-error")?.textContent).toContain("bad.pgm");
  });

  it("requires at least one file", async () => {
    const { root, app } = mount(fakeApi([]));
    expect(await app.submitFiles([])).toBeNull();
    expect(root.querySelector(".file-error")?.textContent).toContain("at least one");
  });

  it("shows a server rejection inline", async () => {
    const api = fakeApi([], { submitError: new ApiError(400, "bad request", "no images field") });
    const { root, app } = mount(api);
    expect(await app.submitFiles([{ filename: "a.pgm", data: VALID }])).toBeNull();
    expect(root.querySelector(".file-error")?.textContent).toContain("bad request");
    expect(root.querySelector(".job-card")).toBeNull();
  });
});

describe("job cards", () => {
  it("renders live progress, then the result cards", async () => {
    const api = fakeApi([RUNNING, FINISHED]);
    const { root, app } = mount(api);
    const batchId = await app.submitFiles([
      { filename: "left.pgm", data: VALID },
      { filename: "right.pgm", data: VALID },
    ]);
    expect(batchId).toBe("b7");
    const tracker = app.trackers.get("b7")!;
    await settle(); // first poll saw RUNNING

    const card = root.querySelector<HTMLElement>(".job-card")!;
    expect(card.dataset.batchId).toBe("b7");
    expect(card.querySelector(".phase-badge")?.textContent).toBe("running");
    expect(card.querySelector(".progress-text")?.textContent).toBe("1 / 2 tasks");
    expect(card.querySelector<HTMLElement>(".progress-bar")?.style.width).toBe("50%");
    expect(card.querySelectorAll(".result-card")).toHaveLength(0);

    await tracker.tick();
    expect(card.querySelector(".phase-badge")?.textContent).toBe("finished");
    expect(card.querySelector(".progress-text")?.textContent).toBe("2 / 2 tasks");
    expect(card.querySelector<HTMLElement>(".running-time")?.hidden).toBe(false);
    expect(card.querySelector(".running-time")?.textContent).toBe("total running time 2.500 s");

    const results = card.querySelectorAll(".result-card");
    expect(results).toHaveLength(2);
    expect(results[0].querySelector(".result-name")?.textContent).toBe("Ada Fern");
    expect(results[0].querySelector(".result-similarity")?.textContent).toBe("0.912");
    expect(results[0].querySelector(".result-record")?.textContent).toBe("r000002");
    expect(results[0].textContent).toContain("team");
    expect(results[0].textContent).toContain("left.pgm");
    expect(results[1].querySelector(".result-name")?.textContent).toBe("no match");
    expect(results[1].querySelector(".result-similarity")?.textContent).toBe("0.012");
    // headless DOM has no canvas 2d context: the preview degrades politely
    expect(results[0].querySelector(".probe-fallback, .probe-canvas")).not.toBeNull();
  });

  it("shows the console lines exactly as the server ordered them", async () => {
    const api = fakeApi([RUNNING, FINISHED]);
    const { root, app } = mount(api);
    await app.submitFiles([{ filename: "a.pgm", data: VALID }]);
    const tracker = app.trackers.get("b7")!;
    await settle();
    await tracker.tick();
    const consoleText = root.querySelector(".event-console")?.textContent;
    expect(consoleText?.split("\n")).toEqual(FINISHED.eventLog);
  });

  it("flags a lost connection without tearing the card down", async () => {
    const api = fakeApi([RUNNING], { onExhausted: "throw" });
    const { root, app } = mount(api);
    await app.submitFiles([{ filename: "a.pgm", data: VALID }]);
    const tracker = app.trackers.get("b7")!;
    await settle();
    await tracker.tick();
    expect(root.querySelector(".phase-badge")?.textContent).toContain("reconnecting");
    // last good progress stays visible
    expect(root.querySelector(".progress-text")?.textContent).toBe("1 / 2 tasks");
  });

  it("submits via the file input and Identify button", async () => {
    const api = fakeApi([RUNNING, FINISHED]);
    const { root } = mount(api);
    const input = root.querySelector<HTMLInputElement>("input[type=file]")!;
    const file = new File([VALID], "picked.pgm", { type: "image/x-portable-graymap" });
    Object.defineProperty(input, "files", { value: [file] });
    root.querySelector<HTMLButtonElement>(".submit-button")!.click();
    await waitForCard(root);
    expect(api.submitted).toHaveLength(1);
    expect(api.submitted[0][0].filename).toBe("picked.pgm");
  });
});

async function waitForCard(root: HTMLElement): Promise<void> {
  for (let i = 0; i < 50; i++) {
    if (root.querySelector(".job-card")) return;
    await new Promise((r) => setTimeout(r, 10));
  }
  throw new Error("job card never appeared");
}
