/**
 * Reader for the simulator's CSV outputs.
 *
 * Every file starts with a `# schema: <name>` comment line followed by a
 * header row; loaders check the schema marker and required columns and fail
 * loudly on any mismatch so stale files never render silently.
 */

import { readFileSync } from "node:fs";

export class SchemaError extends Error {}

export interface Table {
  schema: string;
  columns: string[];
  rows: string[][];
}

export function parseCsv(text: string, expectedSchema: string): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`empty file, expected schema ${expectedSchema}`);
  }
  const marker = lines[0];
  const match = marker.match(/^# schema:\s*(\S+)$/);
  if (!match) {
    throw new SchemaError(`missing schema comment line, got ${JSON.stringify(marker)}`);
  }
  if (match[1] !== expectedSchema) {
    throw new SchemaError(`schema mismatch: expected ${expectedSchema}, file carries ${match[1]}`);
  }
  if (lines.length < 2) {
    throw new SchemaError(`schema ${expectedSchema}: header row missing`);
  }
  const columns = lines[1].split(",");
  const rows = lines.slice(2).map((line) => line.split(","));
  for (const row of rows) {
    if (row.length !== columns.length) {
      throw new SchemaError(
        `schema ${expectedSchema}: row has ${row.length} fields, header has ${columns.length}`
      );
    }
  }
  return { schema: match[1], columns, rows };
}

export function loadCsv(path: string, expectedSchema: string): Table {
  return parseCsv(readFileSync(path, "utf8"), expectedSchema);
}

/** Numeric column accessor; booleans in the files are `true`/`false`. */
export function column(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`schema ${table.schema}: missing column ${name}`);
  }
  return table.rows.map((row) => {
    if (row[idx] === "true") return 1;
    if (row[idx] === "false") return 0;
    const value = Number(row[idx]);
    if (Number.isNaN(value)) {
      throw new SchemaError(`schema ${table.schema}: non-numeric cell ${JSON.stringify(row[idx])} in ${name}`);
    }
    return value;
  });
}

export function requireNonEmpty(table: Table): Table {
  if (table.rows.length === 0) {
    throw new SchemaError(`schema ${table.schema}: no data rows`);
  }
  return table;
}
