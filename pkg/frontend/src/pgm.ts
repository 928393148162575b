/** Client-side PGM (P5 binary / P2 ascii) decoding for previews and
 * pre-submit validation.  The server never converts images for us. */

export interface PgmImage {
  width: number;
  height: number;
  maxval: number;
  /** Row-major grayscale, rescaled to 0..255. */
  pixels: Uint8Array;
}

export class PgmError extends Error {}

const WHITESPACE = new Set([0x20, 0x09, 0x0a, 0x0d, 0x0b, 0x0c]);

class Cursor {
  pos = 0;
  constructor(private data: Uint8Array) {}

  /** Next header token, skipping whitespace and '#' comment lines. */
  token(): string {
    const d = this.data;
    while (this.pos < d.length) {
      const b = d[this.pos];
      if (WHITESPACE.has(b)) {
        this.pos += 1;
      } else if (b === 0x23) {
        while (this.pos < d.length && d[this.pos] !== 0x0a) this.pos += 1;
      } else {
        break;
      }
    }
    const start = this.pos;
    while (this.pos < this.data.length && !WHITESPACE.has(this.data[this.pos])) {
      this.pos += 1;
    }
    if (this.pos === start) throw new PgmError("truncated header");
    return new TextDecoder().decode(this.data.subarray(start, this.pos));
  }

  /** The single whitespace byte that separates maxval from the raster. */
  skipRasterSeparator(): void {
    if (this.pos >= this.data.length || !WHITESPACE.has(this.data[this.pos])) {
      throw new PgmError("missing separator before raster");
    }
    this.pos += 1;
  }
}

function headerInt(cursor: Cursor, what: string, lo: number, hi: number): number {
  const raw = cursor.token();
  if (!/^\d+$/.test(raw)) throw new PgmError(`bad ${what}: ${JSON.stringify(raw)}`);
  const value = Number(raw);
  if (value < lo || value > hi) throw new PgmError(`${what} ${value} out of range [${lo}, ${hi}]`);
  return value;
}

export function parsePgm(data: Uint8Array): PgmImage {
  if (data.length < 2) throw new PgmError("not a PGM file: too short");
  const magic = String.fromCharCode(data[0], data[1]);
  if (magic !== "P5" && magic !== "P2") {
    throw new PgmError(`not a PGM file: magic ${JSON.stringify(magic)}`);
  }
  const cursor = new Cursor(data);
  cursor.pos = 2;
  const width = headerInt(cursor, "width", 1, 1 << 16);
  const height = headerInt(cursor, "height", 1, 1 << 16);
  const maxval = headerInt(cursor, "maxval", 1, 255); // 2-byte samples unsupported

  const count = width * height;
  const pixels = new Uint8Array(count);
  if (magic === "P5") {
    cursor.skipRasterSeparator();
    if (data.length - cursor.pos < count) {
      throw new PgmError(`raster truncated: need ${count} bytes, have ${data.length - cursor.pos}`);
    }
    pixels.set(data.subarray(cursor.pos, cursor.pos + count));
  } else {
    for (let i = 0; i < count; i++) {
      let value: number;
      try {
        value = headerInt(cursor, "sample", 0, maxval);
      } catch (e) {
        throw e instanceof PgmError ? new PgmError(`raster sample ${i}: ${e.message}`) : e;
      }
      pixels[i] = value;
    }
  }
  if (maxval !== 255) {
    for (let i = 0; i < count; i++) pixels[i] = Math.round((pixels[i] * 255) / maxval);
  }
  return { width, height, maxval, pixels };
}

/** Paint onto a canvas; false when no 2d context exists (headless DOM). */
export function drawPgm(img: PgmImage, canvas: HTMLCanvasElement): boolean {
  canvas.width = img.width;
  canvas.height = img.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return false;
  const rgba = new Uint8ClampedArray(img.width * img.height * 4);
  for (let i = 0; i < img.pixels.length; i++) {
    const v = img.pixels[i];
    rgba[i * 4] = v;
    rgba[i * 4 + 1] = v;
    rgba[i * 4 + 2] = v;
    rgba[i * 4 + 3] = 255;
  }
  ctx.putImageData(new ImageData(rgba, img.width, img.height), 0, 0);
  return true;
}
