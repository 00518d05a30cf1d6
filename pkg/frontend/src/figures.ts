/** Builds a drawing scene for each of the four figure kinds from parsed
 * pipeline CSVs. Spectra get a log y-axis; losses and schedules stay
 * linear. Legend labels come straight out of the CSV metadata columns. */

import { MetricRow, SchemaError, ScheduleTable } from "./csv.js";
import {
  BLACK,
  GREY,
  PALETTE,
  Primitive,
  Rgb,
  Scale,
  Scene,
  WHITE,
  formatTick,
  linearScale,
  logScale,
} from "./scene.js";

export const FIGURE_KINDS = ["spectrum", "correlation", "rollout-error", "schedule"] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { left: 64, right: 16, top: 28, bottom: 42 };
const LOG_FLOOR = 1e-300;

interface Series {
  label: string;
  points: Array<[number, number]>; // data units
}

function seriesFromMetrics(rows: MetricRow[], metrics: string[], kindName: string): Series[] {
  const wanted = rows.filter((r) => metrics.includes(r.metric) && r.step >= 0);
  if (wanted.length === 0) {
    throw new SchemaError("metric", `no rows with metric in {${metrics.join(", ")}} for ${kindName}`);
  }
  const byKey = new Map<string, Series>();
  for (const row of wanted) {
    const label = metrics.length > 1 ? `${row.channel}:${row.metric}` : row.channel;
    let series = byKey.get(label);
    if (!series) {
      series = { label, points: [] };
      byKey.set(label, series);
    }
    series.points.push([row.step, row.value]);
  }
  for (const series of byKey.values()) {
    series.points.sort((a, b) => a[0] - b[0]);
  }
  return [...byKey.values()];
}

function axesAndFrame(xScale: Scale, yScale: Scale, xLabel: string, yLabel: string, logY: boolean): Primitive[] {
  const prims: Primitive[] = [];
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  prims.push({ kind: "rect", x: 0, y: 0, w: WIDTH, h: HEIGHT, color: WHITE });
  for (const tick of xScale.ticks()) {
    const px = xScale.toPixel(tick);
    if (px < x0 - 0.5 || px > x1 + 0.5) continue;
    prims.push({ kind: "polyline", points: [[px, y1], [px, y0]], color: GREY });
    prims.push({ kind: "text", x: px - 8, y: y0 + 14, text: formatTick(tick), color: BLACK });
  }
  for (const tick of yScale.ticks()) {
    const py = yScale.toPixel(tick);
    if (py < y1 - 0.5 || py > y0 + 0.5) continue;
    prims.push({ kind: "polyline", points: [[x0, py], [x1, py]], color: GREY });
    const label = logY ? `1e${Math.round(Math.log10(tick))}` : formatTick(tick);
    prims.push({ kind: "text", x: 6, y: py + 3, text: label, color: BLACK });
  }
  prims.push({ kind: "polyline", points: [[x0, y1], [x0, y0], [x1, y0]], color: BLACK });
  prims.push({ kind: "text", x: Math.round((x0 + x1) / 2) - 4 * xLabel.length, y: HEIGHT - 8, text: xLabel, color: BLACK });
  prims.push({ kind: "text", x: 6, y: 16, text: yLabel, color: BLACK });
  return prims;
}

function legend(prims: Primitive[], labels: string[]): void {
  const x = MARGIN.left + 10;
  let y = MARGIN.top + 10;
  labels.forEach((label, i) => {
    const color = PALETTE[i % PALETTE.length];
    prims.push({ kind: "rect", x, y: y - 6, w: 10, h: 10, color });
    prims.push({ kind: "text", x: x + 16, y: y + 3, text: label, color: BLACK });
    y += 16;
  });
}

function buildLineFigure(series: Series[], xLabel: string, yLabel: string, logY: boolean): Scene {
  const xs = series.flatMap((s) => s.points.map((p) => p[0]));
  let ys = series.flatMap((s) => s.points.map((p) => p[1]));
  if (logY) {
    ys = ys.map((v) => Math.max(v, LOG_FLOOR));
  }
  const xScale = linearScale(Math.min(...xs), Math.max(...xs), MARGIN.left, WIDTH - MARGIN.right);
  const lo = Math.min(...ys);
  const hi = Math.max(...ys);
  const yScale = logY
    ? logScale(lo, hi, HEIGHT - MARGIN.bottom, MARGIN.top)
    : linearScale(Math.min(lo, 0), hi, HEIGHT - MARGIN.bottom, MARGIN.top);
  const prims = axesAndFrame(xScale, yScale, xLabel, yLabel, logY);
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const points = s.points.map(
      ([x, y]) => [xScale.toPixel(x), yScale.toPixel(logY ? Math.max(y, LOG_FLOOR) : y)] as [number, number],
    );
    prims.push({ kind: "polyline", points, color });
  });
  legend(prims, series.map((s) => s.label));
  return { width: WIDTH, height: HEIGHT, background: WHITE, primitives: prims };
}

export function spectrumFigure(rows: MetricRow[]): Scene {
  const series = seriesFromMetrics(rows, ["spectrum_truth", "spectrum_pred"], "spectrum");
  return buildLineFigure(series, "band", "power", true);
}

export function correlationFigure(rows: MetricRow[]): Scene {
  const series = seriesFromMetrics(rows, ["correlation"], "correlation");
  return buildLineFigure(series, "step", "correlation", false);
}

export function rolloutErrorFigure(rows: MetricRow[]): Scene {
  const series = seriesFromMetrics(rows, ["step_mse"], "rollout-error");
  return buildLineFigure(series, "step", "mse", false);
}

export function scheduleFigure(table: ScheduleTable): Scene {
  const k = table.columns.get("k")!;
  const series: Series[] = [];
  for (const name of ["alpha", "sigma", "tau"]) {
    series.push({ label: name, points: k.map((x, i) => [x, table.columns.get(name)![i]]) });
  }
  for (const [name, values] of table.columns) {
    if (name.startsWith("d_lam")) {
      series.push({ label: name, points: k.map((x, i) => [x, values[i]]) });
    }
  }
  return buildLineFigure(series, "refinement step k", "schedule value", false);
}
