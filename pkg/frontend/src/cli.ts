/**
 * Figure CLI: `node dist/src/cli.js <fig1|fig2|fig3|figs1|figs2> --... --output out.svg`
 *
 * Inputs are the simulator's CSV files; each subcommand checks the expected
 * schema and exits nonzero with a readable message on any mismatch.
 */

import { writeFileSync } from "node:fs";
import { loadCsv, SchemaError, Table } from "./csv";
import {
  renderJumpDynamics,
  renderOrderParameters,
  renderPhaseDiagram,
  renderSingleBody,
  renderTrajectoryRaster,
} from "./panels";

interface Flags {
  [key: string]: string;
}

export function parseFlags(argv: string[]): { command: string; flags: Flags } {
  if (argv.length === 0) {
    throw new Error("usage: <fig1|fig2|fig3|figs1|figs2> --input ... --output out.svg");
  }
  const command = argv[0];
  const flags: Flags = {};
  for (let i = 1; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) {
      throw new Error(`unexpected argument ${arg}`);
    }
    const eq = arg.indexOf("=");
    if (eq >= 0) {
      flags[arg.slice(2, eq)] = arg.slice(eq + 1);
    } else {
      const value = argv[i + 1];
      if (value === undefined || value.startsWith("--")) {
        throw new Error(`flag ${arg} needs a value`);
      }
      flags[arg.slice(2)] = value;
      i++;
    }
  }
  return { command, flags };
}

function need(flags: Flags, name: string): string {
  const value = flags[name];
  if (!value) {
    throw new Error(`missing required flag --${name}`);
  }
  return value;
}

function optionalTable(flags: Flags, name: string, schema: string): Table | undefined {
  return flags[name] ? loadCsv(flags[name], schema) : undefined;
}

export function render(command: string, flags: Flags): string {
  switch (command) {
    case "fig1":
      return renderTrajectoryRaster(loadCsv(need(flags, "input"), "qcollide.trajectory.v1"));
    case "fig2":
      return renderOrderParameters(
        loadCsv(need(flags, "activity"), "qcollide.activity.v1"),
        loadCsv(need(flags, "correlations"), "qcollide.correlations.v1"),
        loadCsv(need(flags, "stationary"), "qcollide.stationary.v1"),
        optionalTable(flags, "estimators", "qcollide.estimators.v1")
      );
    case "fig3":
      return renderPhaseDiagram(
        loadCsv(need(flags, "input"), "qcollide.phase_diagram.v1"),
        flags["cut-v"] ? Number(flags["cut-v"]) : undefined
      );
    case "figs1":
      return renderJumpDynamics(
        loadCsv(need(flags, "events"), "qcollide.jump_events.v1"),
        optionalTable(flags, "occupations", "qcollide.occupations.v1"),
        optionalTable(flags, "scan", "qcollide.scgf_scan.v1")
      );
    case "figs2":
      return renderSingleBody(
        loadCsv(need(flags, "map"), "qcollide.singlebody_map.v1"),
        loadCsv(need(flags, "detuning"), "qcollide.detuning_scan.v1")
      );
    default:
      throw new Error(`unknown figure type ${command}`);
  }
}

export function main(argv: string[]): number {
  try {
    const { command, flags } = parseFlags(argv);
    const svg = render(command, flags);
    const output = need(flags, "output");
    writeFileSync(output, svg);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${(err as Error).message}`);
      return 3;
    }
    console.error(`${(err as Error).message}`);
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
