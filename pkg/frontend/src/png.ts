/** Scene -> PNG bytes without native dependencies: an RGB raster drawn with
 * Bresenham lines and the bitmap font, deflated through node:zlib. No
 * timestamp chunks are written, so output bytes depend only on the scene. */

import { deflateSync } from "node:zlib";

import { GLYPHS, GLYPH_HEIGHT, GLYPH_WIDTH } from "./font.js";
import { Primitive, Rgb, Scene } from "./scene.js";

class Raster {
  readonly width: number;
  readonly height: number;
  readonly pixels: Uint8Array;

  constructor(width: number, height: number, background: Rgb) {
    this.width = width;
    this.height = height;
    this.pixels = new Uint8Array(width * height * 3);
    for (let i = 0; i < width * height; i++) {
      this.pixels.set(background, i * 3);
    }
  }

  set(x: number, y: number, color: Rgb): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) {
      return;
    }
    this.pixels.set(color, (y * this.width + x) * 3);
  }

  fillRect(x: number, y: number, w: number, h: number, color: Rgb): void {
    const x0 = Math.round(x);
    const y0 = Math.round(y);
    for (let yy = y0; yy < y0 + Math.round(h); yy++) {
      for (let xx = x0; xx < x0 + Math.round(w); xx++) {
        this.set(xx, yy, color);
      }
    }
  }

  line(x0: number, y0: number, x1: number, y1: number, color: Rgb): void {
    let ax = Math.round(x0);
    let ay = Math.round(y0);
    const bx = Math.round(x1);
    const by = Math.round(y1);
    const dx = Math.abs(bx - ax);
    const dy = -Math.abs(by - ay);
    const sx = ax < bx ? 1 : -1;
    const sy = ay < by ? 1 : -1;
    let err = dx + dy;
    for (;;) {
      this.set(ax, ay, color);
      if (ax === bx && ay === by) {
        break;
      }
      const e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        ax += sx;
      }
      if (e2 <= dx) {
        err += dx;
        ay += sy;
      }
    }
  }

  text(x: number, y: number, text: string, color: Rgb): void {
    // y is the text baseline, matching the SVG backend convention
    let cx = Math.round(x);
    const top = Math.round(y) - GLYPH_HEIGHT;
    for (const ch of text.toLowerCase()) {
      const glyph = GLYPHS[ch];
      if (glyph) {
        for (let row = 0; row < GLYPH_HEIGHT; row++) {
          for (let col = 0; col < GLYPH_WIDTH; col++) {
            if ((glyph[row] >> (GLYPH_WIDTH - 1 - col)) & 1) {
              this.set(cx + col, top + row, color);
            }
          }
        }
      }
      cx += GLYPH_WIDTH + 1;
    }
  }
}

function draw(raster: Raster, prim: Primitive): void {
  switch (prim.kind) {
    case "rect":
      raster.fillRect(prim.x, prim.y, prim.w, prim.h, prim.color);
      break;
    case "polyline":
      for (let i = 1; i < prim.points.length; i++) {
        const [x0, y0] = prim.points[i - 1];
        const [x1, y1] = prim.points[i];
        raster.line(x0, y0, x1, y1, prim.color);
      }
      break;
    case "text":
      raster.text(prim.x, prim.y, prim.text, prim.color);
      break;
  }
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(data: Uint8Array): number {
  let crc = 0xffffffff;
  for (const byte of data) {
    crc = CRC_TABLE[(crc ^ byte) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

function chunk(type: string, payload: Uint8Array): Uint8Array {
  const out = new Uint8Array(12 + payload.length);
  const view = new DataView(out.buffer);
  view.setUint32(0, payload.length);
  for (let i = 0; i < 4; i++) {
    out[4 + i] = type.charCodeAt(i);
  }
  out.set(payload, 8);
  view.setUint32(8 + payload.length, crc32(out.subarray(4, 8 + payload.length)));
  return out;
}

export function sceneToPng(scene: Scene): Uint8Array {
  const raster = new Raster(scene.width, scene.height, scene.background);
  for (const prim of scene.primitives) {
    draw(raster, prim);
  }

  // filter byte 0 (None) per scanline
  const stride = scene.width * 3;
  const filtered = new Uint8Array((stride + 1) * scene.height);
  for (let y = 0; y < scene.height; y++) {
    filtered[y * (stride + 1)] = 0;
    filtered.set(raster.pixels.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
  }

  const ihdr = new Uint8Array(13);
  const ihdrView = new DataView(ihdr.buffer);
  ihdrView.setUint32(0, scene.width);
  ihdrView.setUint32(4, scene.height);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 2; // truecolor
  const signature = Uint8Array.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
  const idat = chunk("IDAT", deflateSync(filtered, { level: 9 }));
  const parts = [signature, chunk("IHDR", ihdr), idat, chunk("IEND", new Uint8Array(0))];
  const total = parts.reduce((n, p) => n + p.length, 0);
  const png = new Uint8Array(total);
  let offset = 0;
  for (const part of parts) {
    png.set(part, offset);
    offset += part.length;
  }
  return png;
}
