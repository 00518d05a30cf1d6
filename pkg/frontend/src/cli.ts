#!/usr/bin/env node
/** render_figs --kind spectrum|correlation|rollout-error|schedule --in data.csv --out fig.svg */

import { FIGURE_KINDS, FigureKind } from "./figures.js";
import { SchemaError, render } from "./render.js";

function parseArgs(argv: string[]): { kind: FigureKind; inputPath: string; outputPath: string } {
  const values = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith("--") || value === undefined) {
      throw new Error(`malformed arguments near '${flag}'`);
    }
    values.set(flag.slice(2), value);
  }
  for (const required of ["kind", "in", "out"]) {
    if (!values.has(required)) {
      throw new Error(`missing required flag --${required}`);
    }
  }
  const kind = values.get("kind") as FigureKind;
  if (!FIGURE_KINDS.includes(kind)) {
    throw new Error(`unknown figure kind '${kind}' (expected ${FIGURE_KINDS.join("|")})`);
  }
  return { kind, inputPath: values.get("in")!, outputPath: values.get("out")! };
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    render({ kind: args.kind, inputPath: args.inputPath, outputPath: args.outputPath });
    return 0;
  } catch (err) {
    const payload =
      err instanceof SchemaError
        ? { error: "schema", column: err.column, message: err.message }
        : { error: "render", message: err instanceof Error ? err.message : String(err) };
    process.stderr.write(JSON.stringify(payload) + "\n");
    return err instanceof SchemaError ? 2 : 1;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
