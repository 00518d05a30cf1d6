/** Figure rendering entry point: CSV in, SVG or PNG out, deterministic for
 * a given input (fixed size, fixed style, no timestamps). */

import { readFileSync, writeFileSync } from "node:fs";

import { readMetricRows, readScheduleTable, SchemaError } from "./csv.js";
import {
  FIGURE_KINDS,
  FigureKind,
  correlationFigure,
  rolloutErrorFigure,
  scheduleFigure,
  spectrumFigure,
} from "./figures.js";
import { Scene } from "./scene.js";
import { sceneToPng } from "./png.js";
import { sceneToSvg } from "./svg.js";

export interface FigureSpec {
  kind: FigureKind;
  inputPath: string;
  outputPath: string;
}

export function buildScene(kind: FigureKind, csvText: string): Scene {
  switch (kind) {
    case "spectrum":
      return spectrumFigure(readMetricRows(csvText));
    case "correlation":
      return correlationFigure(readMetricRows(csvText));
    case "rollout-error":
      return rolloutErrorFigure(readMetricRows(csvText));
    case "schedule":
      return scheduleFigure(readScheduleTable(csvText));
  }
}

export function renderBytes(kind: FigureKind, csvText: string, outputPath: string): Uint8Array {
  const scene = buildScene(kind, csvText);
  if (outputPath.endsWith(".svg")) {
    return new TextEncoder().encode(sceneToSvg(scene));
  }
  if (outputPath.endsWith(".png")) {
    return sceneToPng(scene);
  }
  throw new Error(`unsupported output extension on '${outputPath}' (use .svg or .png)`);
}

export function render(spec: FigureSpec): void {
  if (!FIGURE_KINDS.includes(spec.kind)) {
    throw new Error(`unknown figure kind '${spec.kind}' (expected ${FIGURE_KINDS.join("|")})`);
  }
  const csvText = readFileSync(spec.inputPath, "utf-8");
  writeFileSync(spec.outputPath, renderBytes(spec.kind, csvText, spec.outputPath));
}

export { SchemaError };
