/**
 * Versioned-CSV readers for the graphkv benchmark harness.
 *
 * Each CSV carries its schema name in a leading `schema` column on every
 * row. Readers validate the schema and the required columns up front and
 * never mutate the file.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

export const MEM_SCHEMA = "gkv-mem-v1";
export const TTFT_SCHEMA = "gkv-ttft-v1";

export class CsvSchemaError extends Error {}

export interface MemRow {
  topology: string;
  neighbors: number;
  words: number;
  model_peak_tokens: number;
  kv_entries: number;
}

export interface TtftRow {
  topology: string;
  words_per_node: number;
  run_index: number;
  ttft_ns: number;
  ttft_ns_median: number;
}

function parseRows(path: string): Record<string, string>[] {
  const text = readFileSync(path, "utf-8");
  const result = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (result.errors.length > 0) {
    const e = result.errors[0];
    throw new CsvSchemaError(`${path}: malformed CSV (${e.message})`);
  }
  return result.data;
}

function requireColumns(
  path: string,
  rows: Record<string, string>[],
  schema: string,
  columns: string[],
): void {
  if (rows.length === 0) {
    throw new CsvSchemaError(`${path}: empty CSV, nothing to plot`);
  }
  const present = new Set(Object.keys(rows[0]));
  for (const col of ["schema", ...columns]) {
    if (!present.has(col)) {
      throw new CsvSchemaError(`${path}: missing column "${col}"`);
    }
  }
  for (const row of rows) {
    if (row.schema !== schema) {
      throw new CsvSchemaError(
        `${path}: schema mismatch: expected "${schema}", got "${row.schema}"`,
      );
    }
  }
}

function toInt(path: string, row: Record<string, string>, col: string): number {
  const n = Number(row[col]);
  if (!Number.isFinite(n)) {
    throw new CsvSchemaError(`${path}: non-numeric value "${row[col]}" in column "${col}"`);
  }
  return n;
}

export function readMemCsv(path: string): MemRow[] {
  const rows = parseRows(path);
  requireColumns(path, rows, MEM_SCHEMA, [
    "topology", "neighbors", "words", "model_peak_tokens", "kv_entries",
  ]);
  return rows.map((r) => ({
    topology: r.topology,
    neighbors: toInt(path, r, "neighbors"),
    words: toInt(path, r, "words"),
    model_peak_tokens: toInt(path, r, "model_peak_tokens"),
    kv_entries: toInt(path, r, "kv_entries"),
  }));
}

export function readTtftCsv(path: string): TtftRow[] {
  const rows = parseRows(path);
  requireColumns(path, rows, TTFT_SCHEMA, [
    "topology", "words_per_node", "run_index", "ttft_ns", "ttft_ns_median",
  ]);
  return rows.map((r) => ({
    topology: r.topology,
    words_per_node: toInt(path, r, "words_per_node"),
    run_index: toInt(path, r, "run_index"),
    ttft_ns: toInt(path, r, "ttft_ns"),
    ttft_ns_median: toInt(path, r, "ttft_ns_median"),
  }));
}
