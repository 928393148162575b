import { describe, expect, it } from "vitest";
import { PgmError, parsePgm } from "../src/pgm.js";
import { gradientPixels, pgmP2, pgmP5 } from "./helpers.js";

describe("parsePgm", () => {
  it("round-trips a binary P5 image", () => {
    const pixels = gradientPixels(16, 9);
    const img = parsePgm(pgmP5(16, 9, pixels));
    expect(img.width).toBe(16);
    expect(img.height).toBe(9);
    expect(img.maxval).toBe(255);
    expect(Array.from(img.pixels)).toEqual(Array.from(pixels));
  });

  it("parses ascii P2", () => {
    const img = parsePgm(pgmP2(3, 2, [0, 10, 20, 30, 40, 255]));
    expect(Array.from(img.pixels)).toEqual([0, 10, 20, 30, 40, 255]);
  });

  it("skips comment lines anywhere in the header", () => {
    const text = "P5\n# made by a scanner\n4 # inline\n1\n# about to give maxval\n255\n";
    const data = new Uint8Array([...new TextEncoder().encode(text), 9, 8, 7, 6]);
    const img = parsePgm(data);
    expect(img.width).toBe(4);
    expect(Array.from(img.pixels)).toEqual([9, 8, 7, 6]);
  });

  it("rescales sub-255 maxval to the full range", () => {
    const img = parsePgm(pgmP5(2, 1, [0, 15], 15));
    expect(Array.from(img.pixels)).toEqual([0, 255]);
  });

  it.each([
    ["empty", new Uint8Array()],
    ["bad magic", new TextEncoder().encode("P6\n2 2\n255\n....")],
    ["png bytes", Uint8Array.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a])],
    ["truncated raster", pgmP5(4, 4, new Uint8Array(16)).slice(0, 20)],
    ["junk width", new TextEncoder().encode("P5\nwide 2\n255\n")],
    ["maxval over one byte", new TextEncoder().encode("P2\n1 1\n65535\n12")],
    ["sample above maxval", pgmP2(1, 2, [3, 200], 100)],
  ])("rejects %s", (_label, data) => {
    expect(() => parsePgm(data)).toThrow(PgmError);
  });

  it("names the failing sample in ascii rasters", () => {
    expect(() => parsePgm(pgmP2(2, 1, [1, 999]))).toThrow(/sample 1/);
  });
});
