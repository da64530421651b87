#!/usr/bin/env node
/**
 * plots memory <csv> <out.svg> [--words N]
 * plots ttft <csv> <out.svg>
 */

import { plotMemory, plotTtft } from "./plots.js";

const USAGE =
  "usage: plots memory <csv> <out.svg> [--words N]\n" +
  "       plots ttft <csv> <out.svg>";

export function run(argv: string[]): number {
  const [cmd, csv, out, ...rest] = argv;
  if (!cmd || !csv || !out) {
    console.error(USAGE);
    return 1;
  }
  try {
    if (cmd === "memory") {
      let words: number | undefined;
      if (rest[0] === "--words" && rest[1] !== undefined) {
        words = Number(rest[1]);
        if (!Number.isFinite(words)) {
          console.error(`plots: invalid --words value "${rest[1]}"`);
          return 1;
        }
      } else if (rest.length > 0) {
        console.error(USAGE);
        return 1;
      }
      plotMemory(csv, out, words);
    } else if (cmd === "ttft") {
      if (rest.length > 0) {
        console.error(USAGE);
        return 1;
      }
      plotTtft(csv, out);
    } else {
      console.error(USAGE);
      return 1;
    }
  } catch (e) {
    console.error(`plots: ${e instanceof Error ? e.message : String(e)}`);
    return 1;
  }
  console.error(`wrote ${out}`);
  return 0;
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(run(process.argv.slice(2)));
}
