/** Backend-independent figure description: a fixed-size canvas plus a list
 * of drawing primitives. Both the SVG and PNG writers consume this. */

export type Rgb = [number, number, number];

export interface RectPrim {
  kind: "rect";
  x: number;
  y: number;
  w: number;
  h: number;
  color: Rgb;
}

export interface PolylinePrim {
  kind: "polyline";
  points: Array<[number, number]>;
  color: Rgb;
}

export interface TextPrim {
  kind: "text";
  x: number;
  y: number;
  text: string;
  color: Rgb;
}

export type Primitive = RectPrim | PolylinePrim | TextPrim;

export interface Scene {
  width: number;
  height: number;
  background: Rgb;
  primitives: Primitive[];
}

export const BLACK: Rgb = [20, 20, 20];
export const GREY: Rgb = [190, 190, 190];
export const WHITE: Rgb = [255, 255, 255];

/** Fixed qualitative palette; series beyond the palette wrap around. */
export const PALETTE: Rgb[] = [
  [31, 119, 180],
  [255, 127, 14],
  [44, 160, 44],
  [214, 39, 40],
  [148, 103, 189],
  [140, 86, 75],
  [227, 119, 194],
  [127, 127, 127],
  [188, 189, 34],
  [23, 190, 207],
];

export interface Scale {
  toPixel(value: number): number;
  ticks(): number[];
}

export function linearScale(lo: number, hi: number, pixLo: number, pixHi: number): Scale {
  if (hi === lo) {
    hi = lo + 1;
  }
  const span = hi - lo;
  return {
    toPixel: (v) => pixLo + ((v - lo) / span) * (pixHi - pixLo),
    ticks: () => niceTicks(lo, hi, 5),
  };
}

export function logScale(lo: number, hi: number, pixLo: number, pixHi: number): Scale {
  const safeLo = Math.max(lo, 1e-300);
  const safeHi = Math.max(hi, safeLo * 10);
  const llo = Math.log10(safeLo);
  const lhi = Math.log10(safeHi);
  const span = lhi - llo || 1;
  return {
    toPixel: (v) => pixLo + ((Math.log10(Math.max(v, 1e-300)) - llo) / span) * (pixHi - pixLo),
    ticks: () => {
      const ticks: number[] = [];
      const step = Math.max(1, Math.round(span / 5));
      for (let e = Math.ceil(llo); e <= Math.floor(lhi); e += step) {
        ticks.push(Math.pow(10, e));
      }
      return ticks.length ? ticks : [safeLo];
    },
  };
}

function niceTicks(lo: number, hi: number, target: number): number[] {
  const span = hi - lo;
  const rawStep = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const norm = rawStep / mag;
  const step = (norm >= 5 ? 5 : norm >= 2 ? 2 : 1) * mag;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

export function formatTick(value: number): string {
  if (value === 0) {
    return "0";
  }
  const abs = Math.abs(value);
  if (abs >= 1e4 || abs < 1e-3) {
    return value.toExponential(0).replace("+", "");
  }
  return String(Number(value.toPrecision(4)));
}
