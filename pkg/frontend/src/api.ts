/** Typed client for the master's HTTP/JSON API.  The console consumes
 * exactly this surface; similarities and rankings are never recomputed
 * on the client. */

export interface Progress {
  total: number;
  queued: number;
  inFlight: number;
  done: number;
}

export interface PersonInfo {
  name: string;
  metadata: Record<string, unknown>;
  photoPath: string | null;
}

export interface Answer {
  queryId: string;
  bestRecordId: string | null;
  bestSimilarity: number;
  person: PersonInfo | null;
}

export interface JobSnapshot {
  batchId: string;
  submittedAt: string;
  progress: Progress;
  /** Present exactly when done = total. */
  answers: Answer[] | null;
  eventLog: string[];
  totalRunningTime: number | null;
}

export interface StatusInfo {
  records: number;
  workers: number;
  activeJobs: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorCode: string,
    readonly detail: unknown,
  ) {
    super(`${errorCode}: ${typeof detail === "string" ? detail : JSON.stringify(detail)}`);
  }
}

export type MultipartPart =
  | { field: string; value: string }
  | { field: string; filename: string; data: Uint8Array; contentType?: string };

/** RFC 7578 multipart/form-data, built by hand so the same bytes go out
 * from browsers and from node test processes. */
export function encodeMultipart(
  parts: MultipartPart[],
  boundary = `----fingerid-${Math.random().toString(36).slice(2)}`,
): { body: Uint8Array<ArrayBuffer>; contentType: string } {
  const encoder = new TextEncoder();
  const chunks: Uint8Array[] = [];
  for (const part of parts) {
    let head = `--${boundary}\r\nContent-Disposition: form-data; name="${part.field}"`;
    if ("filename" in part) {
      head += `; filename="${part.filename}"`;
      head += `\r\nContent-Type: ${part.contentType ?? "application/octet-stream"}`;
    }
    chunks.push(encoder.encode(head + "\r\n\r\n"));
    chunks.push("filename" in part ? part.data : encoder.encode(part.value));
    chunks.push(encoder.encode("\r\n"));
  }
  chunks.push(encoder.encode(`--${boundary}--\r\n`));

  const body = new Uint8Array(chunks.reduce((n, c) => n + c.length, 0));
  let offset = 0;
  for (const chunk of chunks) {
    body.set(chunk, offset);
    offset += chunk.length;
  }
  return { body, contentType: `multipart/form-data; boundary=${boundary}` };
}

export interface QueryFile {
  filename: string;
  data: Uint8Array;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class MasterClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  async submitQueries(files: QueryFile[]): Promise<string> {
    const { body, contentType } = encodeMultipart(
      files.map((f) => ({ field: "images", filename: f.filename, data: f.data })),
    );
    const reply = await this.request("/queries", {
      method: "POST",
      headers: { "Content-Type": contentType },
      body,
    });
    return (reply as { batchId: string }).batchId;
  }

  async getJob(batchId: string): Promise<JobSnapshot> {
    return (await this.request(`/queries/${encodeURIComponent(batchId)}`)) as JobSnapshot;
  }

  async getStatus(): Promise<StatusInfo> {
    return (await this.request("/status")) as StatusInfo;
  }

  async enroll(name: string, image: QueryFile, metadata: Record<string, unknown> = {}): Promise<string> {
    const { body, contentType } = encodeMultipart([
      { field: "image", filename: image.filename, data: image.data },
      { field: "name", value: name },
      { field: "metadata", value: JSON.stringify(metadata) },
    ]);
    const reply = await this.request("/records", {
      method: "POST",
      headers: { "Content-Type": contentType },
      body,
    });
    return (reply as { recordId: string }).recordId;
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let errorCode = `http ${response.status}`;
      let detail: unknown = null;
      try {
        const payload = (await response.json()) as { error?: string; detail?: unknown };
        if (payload && typeof payload.error === "string") errorCode = payload.error;
        detail = payload?.detail ?? null;
      } catch {
        // non-JSON error body: keep the status line
      }
      throw new ApiError(response.status, errorCode, detail);
    }
    return response.json();
  }
}
