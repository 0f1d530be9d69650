import { readFileSync } from 'fs';
import { parse } from 'papaparse';

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

/** Raised when a CSV is missing the columns a figure kind declares. */
export class SchemaMismatch extends Error {
  readonly missing: string[];

  constructor(kind: string, missing: string[], columns: string[]) {
    super(
      `figure kind ${kind} needs column(s) [${missing.join(', ')}] ` +
      `but the CSV has [${columns.join(', ')}]`,
    );
    this.name = 'SchemaMismatch';
    this.missing = missing;
  }
}

export function readTable(path: string): Table {
  const text = readFileSync(path, 'utf8');
  const parsed = parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new Error(`failed to parse ${path}: ${first.message} (row ${first.row})`);
  }
  const columns = parsed.meta.fields ?? [];
  return { columns, rows: parsed.data };
}

export function requireColumns(kind: string, table: Table, needed: string[]): void {
  const missing = needed.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new SchemaMismatch(kind, missing, table.columns);
  }
}

export function num(row: Record<string, string>, column: string): number {
  const raw = row[column];
  if (raw === undefined || raw === '') {
    return NaN;
  }
  return Number(raw);
}

export function numColumn(table: Table, column: string): number[] {
  return table.rows.map((row) => num(row, column));
}
