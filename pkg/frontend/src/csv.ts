/**
 * Strict CSV parsing for perturbench reports.
 *
 * Reports are plain comma-separated tables with a header row; fields never
 * contain commas or quotes. Malformed input raises CsvError with the
 * offending row and column named, which the CLI turns into a nonzero exit.
 */

export class CsvError extends Error {
  constructor(message: string, readonly row?: number, readonly column?: string) {
    super(message);
    this.name = "CsvError";
  }
}

export interface Table {
  columns: string[];
  rows: string[][];
}

export function parseCsv(text: string, path = "<csv>"): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new CsvError(`${path}: empty file`);
  }
  const columns = lines[0].split(",");
  const rows: string[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new CsvError(
        `${path}: row ${i + 1} has ${cells.length} fields, header has ${columns.length}`,
        i + 1,
      );
    }
    rows.push(cells);
  }
  return { columns, rows };
}

export function columnIndex(table: Table, name: string, path = "<csv>"): number {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new CsvError(`${path}: missing column '${name}'`, undefined, name);
  }
  return idx;
}

/** Parse a numeric cell; the token "inf" maps to Infinity (identical images). */
export function numericCell(table: Table, row: number, col: number, path = "<csv>"): number {
  const raw = table.rows[row][col];
  if (raw === "inf") return Infinity;
  if (raw === "") return NaN;
  const v = Number(raw);
  if (Number.isNaN(v)) {
    throw new CsvError(
      `${path}: row ${row + 2}, column '${table.columns[col]}': not a number: '${raw}'`,
      row + 2,
      table.columns[col],
    );
  }
  return v;
}
