/**
 * CSV parsing and schema validation for the pipeline's two file formats:
 * the metric table (metric,channel,step,value,seed,config_hash) and the
 * schedule audit table (k,t,alpha,sigma,tau,d_lam*,r_lam*,dr2dphi_lam*).
 *
 * Fields never contain commas or quotes, so a plain split is exact.
 */

export class SchemaError extends Error {
  readonly column: string;

  constructor(column: string, detail: string) {
    super(`schema violation on column '${column}': ${detail}`);
    this.name = "SchemaError";
    this.column = column;
  }
}

export interface Table {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text
    .split(/\r?\n/)
    .filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("(header)", "empty file");
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line) => line.split(","));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new SchemaError("(row)", `expected ${header.length} cells, got ${row.length}`);
    }
  }
  return { header, rows };
}

export const METRIC_COLUMNS = ["metric", "channel", "step", "value", "seed", "config_hash"] as const;

export interface MetricRow {
  metric: string;
  channel: string;
  step: number;
  value: number;
  seed: string;
  configHash: string;
}

function requireColumn(table: Table, name: string): number {
  const index = table.header.indexOf(name);
  if (index < 0) {
    throw new SchemaError(name, "column missing");
  }
  return index;
}

function parseNumber(cell: string, column: string): number {
  const value = Number(cell);
  if (!Number.isFinite(value)) {
    throw new SchemaError(column, `non-numeric cell '${cell}'`);
  }
  return value;
}

export function readMetricRows(text: string): MetricRow[] {
  const table = parseCsv(text);
  for (const column of METRIC_COLUMNS) {
    requireColumn(table, column);
  }
  const idx = Object.fromEntries(METRIC_COLUMNS.map((c) => [c, table.header.indexOf(c)]));
  return table.rows.map((row) => ({
    metric: row[idx.metric],
    channel: row[idx.channel],
    step: parseNumber(row[idx.step], "step"),
    value: parseNumber(row[idx.value], "value"),
    seed: row[idx.seed],
    configHash: row[idx.config_hash],
  }));
}

export const SCHEDULE_BASE_COLUMNS = ["k", "t", "alpha", "sigma", "tau"] as const;

export interface ScheduleTable {
  /** column name -> per-step numeric values, in file order */
  columns: Map<string, number[]>;
}

export function readScheduleTable(text: string): ScheduleTable {
  const table = parseCsv(text);
  for (const column of SCHEDULE_BASE_COLUMNS) {
    requireColumn(table, column);
  }
  const columns = new Map<string, number[]>();
  table.header.forEach((name, i) => {
    columns.set(
      name,
      table.rows.map((row) => parseNumber(row[i], name)),
    );
  });
  return { columns };
}
