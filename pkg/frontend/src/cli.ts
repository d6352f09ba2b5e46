#!/usr/bin/env node
/**
 * perturbench-plot: render report figures.
 *
 *   plot <kind> --in report.csv --out fig.png
 *
 * kinds: asr_defense_bars | transfer_heatmap | quality_panel | spectrum_gallery
 * Exit codes: 0 ok, 1 malformed input (with row/column diagnostics), 2 usage.
 */

import process from "node:process";

import { CsvError } from "./csv.js";
import { FIGURE_KINDS, FigureKind, render, SelfCheckError } from "./figures.js";

function usage(): void {
  console.error("usage: plot <kind> --in <report.csv> --out <figure.png>");
  console.error(`kinds: ${FIGURE_KINDS.join(" | ")}`);
}

export function main(argv: string[]): number {
  const args = [...argv];
  const kind = args.shift();
  if (!kind || !(FIGURE_KINDS as readonly string[]).includes(kind)) {
    usage();
    return 2;
  }
  let input: string | undefined;
  let output: string | undefined;
  while (args.length) {
    const flag = args.shift();
    if (flag === "--in") input = args.shift();
    else if (flag === "--out") output = args.shift();
    else {
      console.error(`unknown flag: ${flag}`);
      usage();
      return 2;
    }
  }
  if (!input || !output) {
    usage();
    return 2;
  }
  try {
    render({ kind: kind as FigureKind, input, output });
    console.log(`wrote ${output}`);
    return 0;
  } catch (err) {
    if (err instanceof CsvError) {
      const where = [err.row !== undefined ? `row ${err.row}` : null,
                     err.column !== undefined ? `column '${err.column}'` : null]
        .filter(Boolean).join(", ");
      console.error(`malformed CSV${where ? ` (${where})` : ""}: ${err.message}`);
      return 1;
    }
    if (err instanceof SelfCheckError) {
      console.error(`self-check failed: ${err.message}`);
      return 1;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
