/**
 * The two figure emitters: peak-memory vs neighbor count and median TTFT vs
 * words per node, one line per topology. Charts are rendered fully before
 * any file is written, so a bad CSV never leaves a partial image behind.
 */

import { writeFileSync } from "node:fs";
import { renderLineChart, Series } from "./chart.js";
import { readMemCsv, readTtftCsv } from "./csv.js";

function topologies<T extends { topology: string }>(rows: T[]): string[] {
  return [...new Set(rows.map((r) => r.topology))].sort();
}

/**
 * Memory chart: x = neighbors, y = peak single-encode block size in tokens.
 * With several words-per-node groups in one CSV, plots the group selected by
 * `words` (default: the largest present).
 */
export function plotMemory(csvPath: string, outPath: string, words?: number): string {
  const rows = readMemCsv(csvPath);
  const group = words ?? Math.max(...rows.map((r) => r.words));
  const selected = rows.filter((r) => r.words === group);
  if (selected.length === 0) {
    throw new Error(`${csvPath}: no rows with words=${group}`);
  }
  const series: Series[] = topologies(selected).map((topo) => ({
    name: topo,
    points: selected
      .filter((r) => r.topology === topo)
      .map((r) => ({ x: r.neighbors, y: r.model_peak_tokens })),
  }));
  const svg = renderLineChart({
    title: `Peak encode size vs neighbors (${group} words/node)`,
    xLabel: "neighbors",
    yLabel: "peak block tokens",
    series,
  });
  writeFileSync(outPath, svg);
  return svg;
}

/** TTFT chart: x = words per node, y = per-sweep median TTFT. */
export function plotTtft(csvPath: string, outPath: string): string {
  const rows = readTtftCsv(csvPath);
  const xs = [...new Set(rows.map((r) => r.words_per_node))].sort((a, b) => a - b);
  const series: Series[] = topologies(rows).map((topo) => ({
    name: topo,
    points: xs.flatMap((w) => {
      const grp = rows.filter((r) => r.topology === topo && r.words_per_node === w);
      return grp.length === 0 ? [] : [{ x: w, y: grp[0].ttft_ns_median / 1e6 }];
    }),
  }));
  const svg = renderLineChart({
    title: "Time to first token vs words per node",
    xLabel: "words per node",
    yLabel: "median TTFT (ms)",
    series,
    xTicks: xs,
  });
  writeFileSync(outPath, svg);
  return svg;
}
