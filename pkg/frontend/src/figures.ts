/**
 * Figure data models and raster rendering for the four report figure kinds:
 * grouped ASR/defended-top-1 bars, transfer-matrix heatmaps, quality-metric
 * panels, and spectrum-heatmap galleries.
 *
 * Every renderer first builds a plain data model from the input files, then
 * runs a parse-back self-check: the inputs are re-read independently and
 * every value in the data model must match within 1e-12. Only then are
 * pixels drawn and the output written (atomically, temp file + rename).
 */

import { readFileSync, readdirSync, renameSync, writeFileSync } from "node:fs";
import { basename, dirname, join } from "node:path";
import process from "node:process";

import { columnIndex, numericCell, parseCsv, Table } from "./csv.js";
import { parsePgm, Pgm } from "./pgm.js";
import { encodePng } from "./png.js";
import { Canvas, Color, heatColor, PALETTE } from "./raster.js";

export const FIGURE_KINDS = [
  "asr_defense_bars",
  "transfer_heatmap",
  "quality_panel",
  "spectrum_gallery",
] as const;
export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface PlotJob {
  kind: FigureKind;
  input: string;
  output: string;
}

export class SelfCheckError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SelfCheckError";
  }
}

const TOLERANCE = 1e-12;

function valuesEqual(a: number, b: number): boolean {
  if (Number.isNaN(a) || Number.isNaN(b)) return Number.isNaN(a) && Number.isNaN(b);
  if (!Number.isFinite(a) || !Number.isFinite(b)) return a === b;
  return Math.abs(a - b) <= TOLERANCE;
}

// ---------------------------------------------------------------- bar data

export interface BarGroup {
  label: string;
  values: number[]; // parallel to series
}

export interface BarModel {
  series: string[]; // legend labels: exactly the CSV column names
  groups: BarGroup[];
}

function barModelFromReport(table: Table, seriesNames: string[], path: string): BarModel {
  const modelIdx = columnIndex(table, "model", path);
  const attackIdx = columnIndex(table, "attack", path);
  const seriesIdx = seriesNames.map((s) => columnIndex(table, s, path));
  const groups: BarGroup[] = table.rows.map((_, r) => ({
    label: `${table.rows[r][modelIdx]}/${table.rows[r][attackIdx]}`,
    values: seriesIdx.map((c) => numericCell(table, r, c, path)),
  }));
  return { series: seriesNames, groups };
}

function selfCheckBarModel(model: BarModel, csvText: string, path: string): void {
  const fresh = parseCsv(csvText, path);
  const again = barModelFromReport(fresh, model.series, path);
  if (again.groups.length !== model.groups.length) {
    throw new SelfCheckError(`group count drifted: ${model.groups.length} vs ${again.groups.length}`);
  }
  model.groups.forEach((g, i) => {
    g.values.forEach((v, j) => {
      if (!valuesEqual(v, again.groups[i].values[j])) {
        throw new SelfCheckError(
          `value mismatch at group '${g.label}' series '${model.series[j]}': ${v} vs ${again.groups[i].values[j]}`,
        );
      }
    });
  });
}

// ------------------------------------------------------------- bar drawing

const MARGIN = { left: 56, right: 16, top: 36, bottom: 72 };
const FG: Color = [0, 0, 0];
const GRID: Color = [210, 210, 210];

function fmt(v: number): string {
  if (!Number.isFinite(v)) return v > 0 ? "inf" : "-inf";
  return Math.abs(v) >= 100 ? v.toFixed(0) : v.toFixed(2);
}

function drawBarChart(model: BarModel, title: string, yMax: number | null): Canvas {
  const groups = model.groups.length;
  const series = model.series.length;
  const barW = 10;
  const groupW = series * barW + 14;
  const width = Math.max(460, MARGIN.left + MARGIN.right + groups * groupW);
  const height = 330;
  const canvas = new Canvas(width, height);
  const plotH = height - MARGIN.top - MARGIN.bottom;
  const finite = model.groups.flatMap((g) => g.values).filter((v) => Number.isFinite(v));
  const top = yMax ?? Math.max(1e-9, ...finite) * 1.05;

  canvas.text(MARGIN.left, 10, title, FG);
  for (let t = 0; t <= 4; t++) {
    const frac = t / 4;
    const y = MARGIN.top + plotH - Math.round(frac * plotH);
    canvas.fillRect(MARGIN.left, y, width - MARGIN.left - MARGIN.right, 1, GRID);
    const label = fmt(top * frac);
    canvas.text(MARGIN.left - canvas.textWidth(label) - 4, y - 5, label, FG);
  }

  model.groups.forEach((g, gi) => {
    const x0 = MARGIN.left + gi * groupW + 7;
    g.values.forEach((v, si) => {
      const color = PALETTE[si % PALETTE.length];
      if (Number.isFinite(v)) {
        const h = Math.round((Math.max(0, v) / top) * plotH);
        canvas.fillRect(x0 + si * barW, MARGIN.top + plotH - h, barW - 2, h, color);
      } else {
        canvas.text(x0 + si * barW, MARGIN.top + 2, "inf", color);
      }
    });
    // group label, staggered to avoid overlap
    const ly = height - MARGIN.bottom + 8 + (gi % 3) * 13;
    canvas.text(x0, ly, g.label, FG);
  });

  // legend: labels are exactly the series (CSV column) names
  let lx = MARGIN.left;
  const lyLegend = height - 16;
  model.series.forEach((s, si) => {
    canvas.fillRect(lx, lyLegend, 8, 8, PALETTE[si % PALETTE.length]);
    canvas.text(lx + 11, lyLegend - 2, s, FG);
    lx += 24 + canvas.textWidth(s);
  });
  canvas.fillRect(MARGIN.left, MARGIN.top + plotH, width - MARGIN.left - MARGIN.right, 1, FG);
  return canvas;
}

// --------------------------------------------------------- transfer matrix

export interface MatrixModel {
  sources: string[];
  targets: string[];
  grid: number[][];
}

function matrixModel(table: Table, path: string): MatrixModel {
  if (table.columns.length < 2) {
    throw new SelfCheckError(`${path}: transfer matrix needs target columns`);
  }
  const targets = table.columns.slice(1);
  const sources = table.rows.map((r) => r[0]);
  const grid = table.rows.map((_, r) =>
    targets.map((_, c) => numericCell(table, r, c + 1, path)),
  );
  return { sources, targets, grid };
}

function selfCheckMatrix(model: MatrixModel, csvText: string, path: string): void {
  const again = matrixModel(parseCsv(csvText, path), path);
  model.grid.forEach((row, i) =>
    row.forEach((v, j) => {
      if (!valuesEqual(v, again.grid[i][j])) {
        throw new SelfCheckError(`cell (${i},${j}) mismatch: ${v} vs ${again.grid[i][j]}`);
      }
    }),
  );
}

function drawMatrix(model: MatrixModel, title: string): Canvas {
  const cell = 86;
  const left = 120;
  const top = 64;
  const width = left + model.targets.length * cell + 24;
  const height = top + model.sources.length * cell + 24;
  const canvas = new Canvas(width, height);
  canvas.text(16, 10, title, FG);
  canvas.text(16, 26, "rows: source, columns: target", [90, 90, 90]);
  model.targets.forEach((t, j) => {
    canvas.text(left + j * cell + 6, top - 16, t, FG);
  });
  model.sources.forEach((s, i) => {
    canvas.text(8, top + i * cell + cell / 2 - 5, s, FG);
    model.targets.forEach((_, j) => {
      const v = model.grid[i][j];
      const x = left + j * cell;
      const y = top + i * cell;
      canvas.fillRect(x, y, cell - 2, cell - 2, heatColor(v));
      canvas.strokeRect(x, y, cell - 1, cell - 1, i === j ? FG : GRID);
      const label = v.toFixed(3);
      canvas.text(x + (cell - canvas.textWidth(label)) / 2, y + cell / 2 - 5, label,
        v > 0.55 ? [0, 0, 0] : [255, 255, 255]);
    });
  });
  return canvas;
}

// ----------------------------------------------------------- quality panel

const QUALITY_COLUMNS = ["psnr_db", "ssim", "l0_frac", "l1", "l2", "linf"];

function drawQualityPanel(model: BarModel, title: string): Canvas {
  // one sub-chart per metric, stacked vertically
  const charts = model.series.map((metric, si) =>
    drawBarChart(
      { series: [metric], groups: model.groups.map((g) => ({ label: g.label, values: [g.values[si]] })) },
      metric,
      null,
    ),
  );
  const width = Math.max(...charts.map((c) => c.width));
  const height = charts.reduce((a, c) => a + c.height, 28);
  const canvas = new Canvas(width, height);
  canvas.text(16, 8, title, FG);
  let y = 28;
  for (const chart of charts) {
    for (let yy = 0; yy < chart.height; yy++) {
      for (let xx = 0; xx < chart.width; xx++) {
        const i = (yy * chart.width + xx) * 3;
        canvas.set(xx, y + yy, [chart.pixels[i], chart.pixels[i + 1], chart.pixels[i + 2]]);
      }
    }
    y += chart.height;
  }
  return canvas;
}

// -------------------------------------------------------- spectrum gallery

export interface GalleryModel {
  tiles: { label: string; pgm: Pgm }[];
}

function galleryModel(heatmapDir: string): GalleryModel {
  const files = readdirSync(heatmapDir).filter((f) => f.endsWith(".pgm")).sort();
  if (files.length === 0) {
    throw new SelfCheckError(`no .pgm heatmaps under ${heatmapDir}`);
  }
  return {
    tiles: files.map((f) => ({
      label: f.replace(/\.pgm$/, ""),
      pgm: parsePgm(readFileSync(join(heatmapDir, f)), f),
    })),
  };
}

function selfCheckGallery(model: GalleryModel, heatmapDir: string): void {
  const again = galleryModel(heatmapDir);
  if (again.tiles.length !== model.tiles.length) {
    throw new SelfCheckError("heatmap set changed during render");
  }
  model.tiles.forEach((t, i) => {
    const b = again.tiles[i].pgm;
    if (t.pgm.width !== b.width || t.pgm.height !== b.height) {
      throw new SelfCheckError(`tile ${t.label}: size drifted`);
    }
    for (let k = 0; k < t.pgm.pixels.length; k++) {
      if (t.pgm.pixels[k] !== b.pixels[k]) {
        throw new SelfCheckError(`tile ${t.label}: pixel ${k} mismatch`);
      }
    }
  });
}

function drawGallery(model: GalleryModel, title: string): Canvas {
  const scale = 4;
  const cols = Math.min(4, model.tiles.length);
  const rows = Math.ceil(model.tiles.length / cols);
  const tileW = Math.max(...model.tiles.map((t) => t.pgm.width)) * scale;
  const tileH = Math.max(...model.tiles.map((t) => t.pgm.height)) * scale;
  const pad = 14;
  const width = 16 + cols * (tileW + pad) + 8;
  const height = 40 + rows * (tileH + pad + 16);
  const canvas = new Canvas(width, height);
  canvas.text(16, 10, title, FG);
  model.tiles.forEach((t, i) => {
    const cx = 16 + (i % cols) * (tileW + pad);
    const cy = 36 + Math.floor(i / cols) * (tileH + pad + 16);
    for (let y = 0; y < t.pgm.height; y++) {
      for (let x = 0; x < t.pgm.width; x++) {
        const v = t.pgm.pixels[y * t.pgm.width + x];
        canvas.fillRect(cx + x * scale, cy + y * scale, scale, scale, heatColor(v / 255));
      }
    }
    canvas.strokeRect(cx, cy, t.pgm.width * scale, t.pgm.height * scale, FG);
    canvas.text(cx, cy + t.pgm.height * scale + 4, t.label, FG);
  });
  return canvas;
}

// ------------------------------------------------------------------ driver

function atomicWrite(path: string, data: Buffer): void {
  const tmp = `${path}.tmp-${process.pid}`;
  writeFileSync(tmp, data);
  renameSync(tmp, path);
}

/** Render one figure; throws CsvError / SelfCheckError on bad input. */
export function render(job: PlotJob): void {
  const title = basename(job.input);
  let canvas: Canvas;
  if (job.kind === "asr_defense_bars") {
    const text = readFileSync(job.input, "utf8");
    const table = parseCsv(text, job.input);
    const defenses = table.columns.filter((c) => c.startsWith("top1_err_"));
    const model = barModelFromReport(table, ["asr", ...defenses], job.input);
    selfCheckBarModel(model, text, job.input);
    canvas = drawBarChart(model, `asr + defended top-1 error: ${title}`, 1.0);
  } else if (job.kind === "quality_panel") {
    const text = readFileSync(job.input, "utf8");
    const table = parseCsv(text, job.input);
    const model = barModelFromReport(table, QUALITY_COLUMNS, job.input);
    selfCheckBarModel(model, text, job.input);
    canvas = drawQualityPanel(model, `perturbation quality metrics: ${title}`);
  } else if (job.kind === "transfer_heatmap") {
    const text = readFileSync(job.input, "utf8");
    const model = matrixModel(parseCsv(text, job.input), job.input);
    selfCheckMatrix(model, text, job.input);
    canvas = drawMatrix(model, `transfer ASR: ${title}`);
  } else if (job.kind === "spectrum_gallery") {
    const dir = job.input.endsWith(".csv") ? join(dirname(job.input), "heatmaps") : job.input;
    const model = galleryModel(dir);
    selfCheckGallery(model, dir);
    canvas = drawGallery(model, "mean perturbation spectra (log energy)");
  } else {
    throw new Error(`unknown figure kind '${job.kind}'`);
  }
  atomicWrite(job.output, encodePng(canvas.width, canvas.height, canvas.pixels));
}
