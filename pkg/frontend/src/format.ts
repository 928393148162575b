import type { Answer } from "./api.js";

export function formatSimilarity(x: number): string {
  return x.toFixed(3);
}

export function formatRunningTime(seconds: number): string {
  return `${seconds.toFixed(3)} s`;
}

/** Card title: person name when known, record id as fallback, or "no match". */
export function answerHeadline(answer: Answer): string {
  if (answer.bestRecordId === null) return "no match";
  const name = answer.person?.name?.trim();
  return name ? name : answer.bestRecordId;
}

export function progressText(done: number, total: number): string {
  return `${done} / ${total} tasks`;
}

export function progressPercent(done: number, total: number): number {
  if (total <= 0) return 100;
  return Math.max(0, Math.min(100, (done / total) * 100));
}
