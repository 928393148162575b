/** PGM builders for tests; mirrors what the generator CLI emits. */

export function pgmP5(
  width: number,
  height: number,
  pixels: ArrayLike<number>,
  maxval = 255,
): Uint8Array<ArrayBuffer> {
  const header = new TextEncoder().encode(`P5\n${width} ${height}\n${maxval}\n`);
  const out = new Uint8Array(header.length + width * height);
  out.set(header, 0);
  out.set(Uint8Array.from(pixels), header.length);
  return out;
}

export function pgmP2(
  width: number,
  height: number,
  pixels: ArrayLike<number>,
  maxval = 255,
): Uint8Array<ArrayBuffer> {
  const samples = Array.from(pixels).join(" ");
  return new TextEncoder().encode(`P2\n${width} ${height}\n${maxval}\n${samples}\n`);
}

export function gradientPixels(width: number, height: number): Uint8Array<ArrayBuffer> {
  const out = new Uint8Array(width * height);
  for (let i = 0; i < out.length; i++) out[i] = i % 256;
  return out;
}
