import assert from "node:assert/strict";
import { test } from "node:test";

import { column, parseCsv, requireNonEmpty, SchemaError } from "../src/csv";

const GOOD = `# schema: qcollide.activity.v1
t,activity
1,0.65
2,0.61
`;

test("parses a well-formed table", () => {
  const table = parseCsv(GOOD, "qcollide.activity.v1");
  assert.equal(table.schema, "qcollide.activity.v1");
  assert.deepEqual(table.columns, ["t", "activity"]);
  assert.deepEqual(column(table, "activity"), [0.65, 0.61]);
});

test("rejects a schema mismatch", () => {
  assert.throws(() => parseCsv(GOOD, "qcollide.correlations.v1"), SchemaError);
});

test("rejects a missing schema line", () => {
  assert.throws(() => parseCsv("t,activity\n1,0.5\n", "qcollide.activity.v1"), SchemaError);
});

test("rejects ragged rows", () => {
  const ragged = "# schema: qcollide.activity.v1\nt,activity\n1\n";
  assert.throws(() => parseCsv(ragged, "qcollide.activity.v1"), SchemaError);
});

test("rejects a missing column request", () => {
  const table = parseCsv(GOOD, "qcollide.activity.v1");
  assert.throws(() => column(table, "banana"), SchemaError);
});

test("rejects non-numeric cells", () => {
  const bad = "# schema: qcollide.activity.v1\nt,activity\n1,soup\n";
  const table = parseCsv(bad, "qcollide.activity.v1");
  assert.throws(() => column(table, "activity"), SchemaError);
});

test("booleans read as 0/1", () => {
  const text = "# schema: qcollide.phase_diagram.v1\nV,converged\n1.0,true\n2.0,false\n";
  const table = parseCsv(text, "qcollide.phase_diagram.v1");
  assert.deepEqual(column(table, "converged"), [1, 0]);
});

test("empty data rows are flagged", () => {
  const empty = "# schema: qcollide.activity.v1\nt,activity\n";
  assert.throws(() => requireNonEmpty(parseCsv(empty, "qcollide.activity.v1")), SchemaError);
});
