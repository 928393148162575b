/** The console itself: an upload panel that queues query fingerprints,
 * and one live card per batch showing the progress bar, the master's
 * event console, and the result cards once answers arrive. */

import { ApiError, type Answer, type QueryFile } from "./api.js";
import {
  answerHeadline,
  formatRunningTime,
  formatSimilarity,
  progressPercent,
  progressText,
} from "./format.js";
import { JobTracker, type JobSource, type JobState, type TrackerOptions } from "./job.js";
import { PgmError, drawPgm, parsePgm, type PgmImage } from "./pgm.js";

/** What the console needs from the API client. */
export interface ConsoleApi extends JobSource {
  submitQueries(files: QueryFile[]): Promise<string>;
}

export interface SubmitInput {
  filename: string;
  data: Uint8Array;
}

export interface AppOptions {
  tracker?: TrackerOptions;
}

const PHASE_LABEL: Record<JobState["phase"], string> = {
  running: "running",
  reconnecting: "reconnecting…",
  finished: "finished",
  failed: "failed",
};

/** File.arrayBuffer with a FileReader fallback for DOMs that lack it. */
async function readFileBytes(file: File): Promise<Uint8Array> {
  if (typeof file.arrayBuffer === "function") {
    return new Uint8Array(await file.arrayBuffer());
  }
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(reader.error);
    reader.onload = () => resolve(new Uint8Array(reader.result as ArrayBuffer));
    reader.readAsArrayBuffer(file);
  });
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

class JobCard {
  readonly root: HTMLElement;
  private readonly badge: HTMLElement;
  private readonly bar: HTMLElement;
  private readonly barText: HTMLElement;
  private readonly runningTime: HTMLElement;
  private readonly console: HTMLPreElement;
  private readonly results: HTMLElement;
  private resultsRendered = false;

  constructor(
    batchId: string,
    private readonly files: SubmitInput[],
    private readonly previews: (PgmImage | null)[],
  ) {
    this.root = el("article", "job-card");
    this.root.dataset.batchId = batchId;

    const header = el("header");
    header.append(el("h3", "", `Batch ${batchId}`));
    this.badge = el("span", "phase-badge phase-running", PHASE_LABEL.running);
    header.append(this.badge);
    this.root.append(header);

    const progress = el("div", "progress");
    this.bar = el("div", "progress-bar");
    progress.append(this.bar);
    this.root.append(progress);
    this.barText = el("p", "progress-text", progressText(0, 0));
    this.root.append(this.barText);

    this.runningTime = el("p", "running-time");
    this.runningTime.hidden = true;
    this.root.append(this.runningTime);

    this.root.append(el("h4", "", "Progress console"));
    this.console = el("pre", "event-console");
    this.root.append(this.console);

    this.results = el("div", "results");
    this.root.append(this.results);
  }

  render(state: JobState): void {
    this.badge.textContent = PHASE_LABEL[state.phase];
    this.badge.className = `phase-badge phase-${state.phase}`;
    if (state.snapshot) {
      const { done, total } = state.snapshot.progress;
      this.bar.style.width = `${progressPercent(done, total)}%`;
      this.barText.textContent = progressText(done, total);
      if (state.snapshot.totalRunningTime !== null) {
        this.runningTime.hidden = false;
        this.runningTime.textContent = `total running time ${formatRunningTime(state.snapshot.totalRunningTime)}`;
      }
    }
    this.console.textContent = state.consoleLines.join("\n");
    if (state.phase === "failed" && state.lastError) {
      this.barText.textContent = state.lastError;
    }
    if (state.phase === "finished" && state.snapshot?.answers && !this.resultsRendered) {
      this.resultsRendered = true;
      state.snapshot.answers.forEach((answer, i) => {
        this.results.append(this.buildResultCard(answer, i));
      });
    }
  }

  private buildResultCard(answer: Answer, index: number): HTMLElement {
    const card = el("article", "result-card");
    card.append(el("h4", "result-name", answerHeadline(answer)));

    const facts = el("dl", "result-facts");
    const fact = (label: string, value: string, className?: string) => {
      facts.append(el("dt", "", label));
      facts.append(el("dd", className, value));
    };
    fact("similarity", formatSimilarity(answer.bestSimilarity), "result-similarity");
    fact("query", this.files[index]?.filename ?? answer.queryId);
    if (answer.bestRecordId !== null) {
      fact("record", answer.bestRecordId, "result-record");
      for (const [key, value] of Object.entries(answer.person?.metadata ?? {})) {
        fact(key, typeof value === "string" ? value : JSON.stringify(value));
      }
    }
    card.append(facts);

    // The API ships no image bytes, so the photo is a placeholder and
    // the fingerprint shown is the submitted probe, rendered locally.
    const initial = answerHeadline(answer).charAt(0).toUpperCase() || "?";
    card.append(el("div", "photo-placeholder", answer.person ? initial : "?"));

    const preview = this.previews[index];
    if (preview) {
      const figure = el("figure", "probe-figure");
      const canvas = el("canvas", "probe-canvas");
      if (drawPgm(preview, canvas)) {
        figure.append(canvas);
      } else {
        figure.append(el("p", "probe-fallback", "preview unavailable"));
      }
      figure.append(el("figcaption", "", `query print ${this.files[index]?.filename ?? ""}`.trim()));
      card.append(figure);
    }
    return card;
  }
}

export class App {
  readonly trackers = new Map<string, JobTracker>();
  private readonly errorList: HTMLUListElement;
  private readonly jobsSection: HTMLElement;
  private readonly fileInput: HTMLInputElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ConsoleApi,
    private readonly options: AppOptions = {},
  ) {
    root.replaceChildren();

    const upload = el("section", "upload-panel");
    upload.append(el("h2", "", "Submit query fingerprints"));
    this.fileInput = el("input");
    this.fileInput.type = "file";
    this.fileInput.multiple = true;
    this.fileInput.accept = ".pgm,image/x-portable-graymap";
    upload.append(this.fileInput);
    const submit = el("button", "submit-button", "Identify");
    submit.addEventListener("click", () => void this.submitSelection());
    upload.append(submit);
    this.errorList = el("ul", "file-errors");
    upload.append(this.errorList);
    root.append(upload);

    this.jobsSection = el("section", "jobs");
    root.append(this.jobsSection);
  }

  /** Read the file input and submit; used by the Identify button. */
  async submitSelection(): Promise<string | null> {
    const files = this.fileInput.files;
    if (!files || files.length === 0) {
      this.renderErrors([["", "select at least one fingerprint image"]]);
      return null;
    }
    const inputs: SubmitInput[] = [];
    for (const file of Array.from(files)) {
      inputs.push({ filename: file.name, data: await readFileBytes(file) });
    }
    return this.submitFiles(inputs);
  }

  /** Validate client-side, then post one batch.  Any unreadable file
   * blocks the whole submission: inline errors, no job. */
  async submitFiles(files: SubmitInput[]): Promise<string | null> {
    this.renderErrors([]);
    if (files.length === 0) {
      this.renderErrors([["", "select at least one fingerprint image"]]);
      return null;
    }
    const previews: (PgmImage | null)[] = [];
    const problems: [string, string][] = [];
    for (const file of files) {
      try {
        previews.push(parsePgm(file.data));
      } catch (err) {
        previews.push(null);
        problems.push([file.filename, err instanceof PgmError ? err.message : String(err)]);
      }
    }
    if (problems.length > 0) {
      this.renderErrors(problems);
      return null;
    }

    let batchId: string;
    try {
      batchId = await this.client.submitQueries(
        files.map((f) => ({ filename: f.filename, data: f.data })),
      );
    } catch (err) {
      const reason = err instanceof ApiError ? err.message : `master unreachable: ${String(err)}`;
      this.renderErrors([["batch", reason]]);
      return null;
    }

    const card = new JobCard(batchId, files, previews);
    this.jobsSection.prepend(card.root);
    const tracker = new JobTracker(this.client, batchId, this.options.tracker);
    tracker.subscribe((state) => card.render(state));
    this.trackers.set(batchId, tracker);
    tracker.start();
    return batchId;
  }

  dispose(): void {
    for (const tracker of this.trackers.values()) tracker.stop();
    this.trackers.clear();
  }

  private renderErrors(entries: [string, string][]): void {
    this.errorList.replaceChildren();
    for (const [filename, message] of entries) {
      const item = el("li", "file-error", filename ? `${filename}: ${message}` : message);
      this.errorList.append(item);
    }
  }
}

export function createApp(root: HTMLElement, client: ConsoleApi, options: AppOptions = {}): App {
  return new App(root, client, options);
}
