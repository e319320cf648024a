/**
 * Reading benchmark report CSVs.
 *
 * The expected schema is exactly what the engine's report emitter writes:
 * model,setting,style,permuted,n,accuracy,rel_delta,unparseable
 */

import { readFileSync } from "fs";
import Papa from "papaparse";

export interface ReportRow {
  model: string;
  setting: string;
  style: string;
  permuted: boolean;
  n: number;
  accuracy: number;
  rel_delta: number;
  unparseable: number;
}

export const REPORT_COLUMNS = [
  "model",
  "setting",
  "style",
  "permuted",
  "n",
  "accuracy",
  "rel_delta",
  "unparseable",
] as const;

export class SchemaError extends Error {
  constructor(public readonly missing: string[]) {
    super(`report CSV missing columns: ${missing.join(", ")}`);
    this.name = "SchemaError";
  }
}

export function parseReportCsv(text: string): ReportRow[] {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new Error(`cannot parse report CSV: ${first.message} (row ${first.row})`);
  }
  const fields = parsed.meta.fields ?? [];
  const missing = REPORT_COLUMNS.filter((c) => !fields.includes(c));
  if (missing.length > 0) {
    throw new SchemaError([...missing]);
  }
  return parsed.data.map((record) => ({
    model: record.model,
    setting: record.setting,
    style: record.style,
    permuted: record.permuted === "true",
    n: Number(record.n),
    accuracy: Number(record.accuracy),
    rel_delta: Number(record.rel_delta),
    unparseable: Number(record.unparseable),
  }));
}

export function loadReport(path: string): ReportRow[] {
  return parseReportCsv(readFileSync(path, "utf-8"));
}
