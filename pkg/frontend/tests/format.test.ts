import { describe, expect, it } from "vitest";
import type { Answer } from "../src/api.js";
import {
  answerHeadline,
  formatRunningTime,
  formatSimilarity,
  progressPercent,
  progressText,
} from "../src/format.js";

function answer(overrides: Partial<Answer>): Answer {
  return {
    queryId: "q000001",
    bestRecordId: "r000001",
    bestSimilarity: 0.5,
    person: { name: "Ada", metadata: {}, photoPath: null },
    ...overrides,
  };
}

describe("formatSimilarity", () => {
  it("always shows three decimals", () => {
    expect(formatSimilarity(1)).toBe("1.000");
    expect(formatSimilarity(0)).toBe("0.000");
    expect(formatSimilarity(0.91234)).toBe("0.912");
    expect(formatSimilarity(0.6666)).toBe("0.667");
  });
});

describe("formatRunningTime", () => {
  it("shows seconds with millisecond precision", () => {
    expect(formatRunningTime(12.3456)).toBe("12.346 s");
    expect(formatRunningTime(0.5)).toBe("0.500 s");
  });
});

describe("answerHeadline", () => {
  it("prefers the person's name", () => {
    expect(answerHeadline(answer({}))).toBe("Ada");
  });

  it("falls back to the record id when the name is blank", () => {
    expect(answerHeadline(answer({ person: { name: "  ", metadata: {}, photoPath: null } }))).toBe(
      "r000001",
    );
    expect(answerHeadline(answer({ person: null }))).toBe("r000001");
  });

  it("labels below-threshold answers as no match", () => {
    expect(answerHeadline(answer({ bestRecordId: null, person: null }))).toBe("no match");
  });
});

describe("progress", () => {
  it("formats done/total", () => {
    expect(progressText(3, 7)).toBe("3 / 7 tasks");
  });

  it("maps counts to a clamped percentage", () => {
    expect(progressPercent(0, 10)).toBe(0);
    expect(progressPercent(5, 10)).toBe(50);
    expect(progressPercent(10, 10)).toBe(100);
    expect(progressPercent(0, 0)).toBe(100); // an empty batch is complete
  });
});
