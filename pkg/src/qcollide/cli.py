"""Command-line entry point: reproducible experiments with CSV/JSON outputs.

Subcommands map onto the library layers: ``simulate`` (trajectory records),
``ensemble`` (order-parameter curves and stationary predictions),
``phase-diagram`` (the (V, s) sweep), ``lindblad`` (continuous-time limit),
``singlebody`` (closed-form maps and detuning scans) and ``validate`` (the
invariant suite). All physical quantities are in units of the Rabi frequency
(times in its inverse); every run echoes its resolved configuration into
``manifest.json`` so reruns are bit-reproducible.

Exit codes: 0 success, 2 usage error, 3 validation failure, 4 convergence
failure under --strict.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConvergenceError, QCollideError
from .model import ModelParams

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_CONVERGENCE = 4

WORKERS_ENV = "QCOLLIDE_WORKERS"

SCHEMAS = {
    "activity": "qcollide.activity.v1",
    "correlations": "qcollide.correlations.v1",
    "stationary": "qcollide.stationary.v1",
    "estimators": "qcollide.estimators.v1",
    "phase_diagram": "qcollide.phase_diagram.v1",
    "jump_events": "qcollide.jump_events.v1",
    "occupations": "qcollide.occupations.v1",
    "scgf_scan": "qcollide.scgf_scan.v1",
    "singlebody_map": "qcollide.singlebody_map.v1",
    "detuning_scan": "qcollide.detuning_scan.v1",
    "validate": "qcollide.validate.v1",
}


def parse_range(spec: str) -> np.ndarray:
    """start:stop:count, endpoints inclusive; a bare number is a single point."""
    parts = spec.split(":")
    if len(parts) == 1:
        return np.array([float(parts[0])])
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"range must be 'start:stop:count' or a single number, got {spec!r}"
        )
    start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1:
        raise argparse.ArgumentTypeError("range count must be >= 1")
    return np.linspace(start, stop, count)


def parse_offsets(spec: str) -> list:
    """Semicolon-separated di,dt pairs, e.g. '0,1;1,0;1,1'."""
    out = []
    for token in spec.split(";"):
        di, dt = token.split(",")
        out.append((int(di), int(dt)))
    return out


def write_table(path, schema_key, header, rows):
    with open(path, "w") as fh:
        fh.write(f"# schema: {SCHEMAS[schema_key]}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(c) for c in row) + "\n")


def _format_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def model_from_args(args) -> ModelParams:
    return ModelParams(
        L=args.L, dt=args.dt, v=args.V, gamma=args.gamma,
        omega=args.omega, delta=args.delta, pbc=not args.open_boundary,
    )


def add_model_arguments(parser):
    parser.add_argument("--L", type=int, default=6, help="number of chain sites")
    parser.add_argument("--dt", type=float, default=1.25, help="collision time (1/Omega)")
    parser.add_argument("--V", type=float, default=5.875, help="interaction strength (Omega)")
    parser.add_argument("--gamma", type=float, default=3.0, help="dephasing rate (Omega)")
    parser.add_argument("--omega", type=float, default=1.0, help="Rabi frequency (fixes the unit)")
    parser.add_argument("--delta", type=float, default=0.0, help="static detuning (Omega)")
    parser.add_argument("--open-boundary", action="store_true", help="open instead of periodic chain")


def add_common_arguments(parser):
    parser.add_argument("--config", type=Path, help="JSON config file; flags override its entries")
    parser.add_argument("--output-dir", type=Path, default=Path("qcollide-out"))
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument(
        "--workers", type=int,
        default=int(os.environ.get(WORKERS_ENV, "1")),
        help=f"worker processes (default ${WORKERS_ENV} or 1); affects wall time only",
    )
    parser.add_argument("--strict", action="store_true",
                        help="exit nonzero on numerical convergence failures")


def apply_config_file(args, parser, argv):
    """Config file provides defaults; explicit flags win."""
    if args.config is None:
        return args
    with open(args.config) as fh:
        config = json.load(fh)
    given = {a.split("=", 1)[0] for a in argv if a.startswith("--")}
    for key, value in config.items():
        flag = "--" + key.replace("_", "-")
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            parser.error(f"unknown config key {key!r}")
        if flag not in given:
            setattr(args, attr, type(getattr(args, attr))(value) if getattr(args, attr) is not None else value)
    return args


def write_manifest(outdir: Path, command: str, args, wall_time: float, outputs: list):
    payload = {
        "command": command,
        "version": __version__,
        "config": {
            k: (str(v) if isinstance(v, Path) else v)
            for k, v in vars(args).items()
            if k not in ("func",)
        },
        "wall_time_s": wall_time,
        "outputs": sorted(str(o) for o in outputs),
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


# --- subcommands ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .channel import build_kraus_fast
    from .observables import running_estimators
    from .trajectory import Mode, postprocess_reset_free, sample_many, write_csv, zero_state

    if args.postprocess and not args.reset_free:
        print("--postprocess only applies to --reset-free runs", file=sys.stderr)
        return EXIT_USAGE
    params = model_from_args(args)
    kf = build_kraus_fast(params)
    outdir = args.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    mode = Mode.RESET_FREE if args.reset_free else Mode.RESET
    records = sample_many(
        kf, zero_state(params.L), args.T, args.trajectories, args.seed,
        record_occupations=not args.no_occupations, workers=args.workers, mode=mode,
    )
    if args.postprocess:
        records = [postprocess_reset_free(rec) for rec in records]
    outputs = []
    offsets = parse_offsets(args.offsets)
    for rec in records:
        path = outdir / f"trajectory_{rec.traj_index:04d}.csv"
        write_csv(rec, path)
        outputs.append(path)
    estimator_rows = []
    for rec in records:
        series = running_estimators(rec.outcomes, offsets)
        for (di, dt), (ts, values) in sorted(series.items()):
            for t, val in zip(ts, values):
                if np.isfinite(val):
                    estimator_rows.append((int(t), rec.traj_index, di, dt, float(val)))
    est_path = outdir / "estimators.csv"
    write_table(est_path, "estimators", ["t", "trajectory", "di", "dt", "estimate"], estimator_rows)
    outputs.append(est_path)
    write_manifest(outdir, "simulate", args, time.time() - t0, outputs)
    return EXIT_OK


def cmd_ensemble(args) -> int:
    from .channel import build_kraus_fast
    from .observables import (
        activity_series,
        correlation_series,
        pxp_sector_prediction,
        stationary_order_parameters,
    )
    from .trajectory import zero_state

    params = model_from_args(args)
    kf = build_kraus_fast(params)
    outdir = args.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    offsets = parse_offsets(args.offsets)

    psi0 = zero_state(params.L)
    rho0 = np.outer(psi0, psi0.conj())
    acts = activity_series(kf, rho0, args.T)
    act_path = outdir / "activity.csv"
    write_table(act_path, "activity", ["t", "activity"],
                [(t + 1, a) for t, a in enumerate(acts)])

    corr = correlation_series(kf, rho0, args.T, offsets)
    corr_rows = []
    for (di, dt), (ts, values) in sorted(corr.items()):
        corr_rows.extend((int(t), di, dt, v) for t, v in zip(ts, values))
    corr_path = outdir / "correlations.csv"
    write_table(corr_path, "correlations", ["t", "di", "dt", "c"], corr_rows)

    rho_ss = np.eye(params.dim, dtype=complex) / params.dim
    stationary = stationary_order_parameters(kf, rho_ss, offsets)
    if params.L >= 2:  # the blockade-free sector needs a neighbor pair
        stationary.update(pxp_sector_prediction(kf, offsets))
    stat_path = outdir / "stationary.csv"
    write_table(stat_path, "stationary", ["label", "value"], sorted(stationary.items()))

    write_manifest(outdir, "ensemble", args, time.time() - t0,
                   [act_path, corr_path, stat_path])
    return EXIT_OK


def cmd_phase_diagram(args) -> int:
    from .tilted import phase_diagram_sweep

    params = model_from_args(args)
    outdir = args.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    offsets = parse_offsets(args.offsets)
    rows = phase_diagram_sweep(
        parse_range(args.V_range), parse_range(args.s_range), params,
        offsets=offsets, max_iter=args.max_iter, workers=args.workers,
    )
    header = ["V", "s", "activity"] + [f"c_{di}_{dt}" for (di, dt) in offsets] + [
        "lambda", "iterations", "converged",
    ]
    table = [
        tuple(
            [r["V"], r["s"], r["activity"]]
            + [r[f"c_{di}_{dt}"] for (di, dt) in offsets]
            + [r["lam"], r["iterations"], r["converged"]]
        )
        for r in rows
    ]
    path = outdir / "phase_diagram.csv"
    write_table(path, "phase_diagram", header, table)
    write_manifest(outdir, "phase-diagram", args, time.time() - t0, [path])
    if args.strict and not all(r["converged"] for r in rows):
        print("phase-diagram: unconverged grid points flagged", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_lindblad(args) -> int:
    from .lindblad import build_lindblad_model, quantum_jump_trajectory, scgf_scan
    from .trajectory import zero_state

    params = model_from_args(args)
    m = build_lindblad_model(params)
    outdir = args.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    outputs = []
    event_rows, occupation_rows = [], []
    for i in range(args.trajectories):
        traj = quantum_jump_trajectory(
            m, zero_state(params.L), args.t_max, args.seed, traj_index=i,
            micro_dt=args.micro_dt, record_dt=args.record_dt,
        )
        event_rows.extend((t, site, i) for (t, site) in traj.events)
        for j, t in enumerate(traj.sample_times):
            for site in range(params.L):
                occupation_rows.append((float(t), site, i, traj.occupations[j, site]))
    ev_path = outdir / "events.csv"
    write_table(ev_path, "jump_events", ["time", "site", "trajectory"], event_rows)
    outputs.append(ev_path)
    occ_path = outdir / "occupations.csv"
    write_table(occ_path, "occupations", ["time", "site", "trajectory", "occupation"], occupation_rows)
    outputs.append(occ_path)

    if args.s_range is not None:
        try:
            rows = scgf_scan(m, parse_range(args.s_range))
        except ConvergenceError as err:
            if args.strict:
                print(f"lindblad: {err}", file=sys.stderr)
                return EXIT_CONVERGENCE
            raise
        scan_path = outdir / "scgf_scan.csv"
        write_table(scan_path, "scgf_scan", ["s", "theta", "activity"],
                    [(r["s"], r["theta"], r["activity"]) for r in rows])
        outputs.append(scan_path)
    write_manifest(outdir, "lindblad", args, time.time() - t0, outputs)
    return EXIT_OK


def cmd_singlebody(args) -> int:
    from .singlebody import detuning_phase_scan, order_parameter_map

    outdir = args.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    outputs = []

    dts = parse_range(args.dt_range)
    gammas = parse_range(args.gamma_range)
    map_rows = []
    for dt in dts:
        for gamma in gammas:
            a, b = args.omega * dt, float(np.sqrt(gamma * dt))
            from .singlebody import SingleBodyParams, analytic_activity, analytic_correlation

            p = SingleBodyParams(a=a, b=b)
            map_rows.append((float(dt), float(gamma), analytic_activity(p), analytic_correlation(p)))
    map_path = outdir / "singlebody_map.csv"
    write_table(map_path, "singlebody_map", ["dt", "gamma", "activity", "c_0_1"], map_rows)
    outputs.append(map_path)

    rows = detuning_phase_scan(
        parse_range(args.delta_range), parse_range(args.s_range),
        dt=args.dt, gamma=args.gamma, omega=args.omega,
    )
    det_path = outdir / "detuning_scan.csv"
    write_table(det_path, "detuning_scan",
                ["delta", "s", "activity", "c_0_1", "lambda", "iterations", "converged"], rows)
    outputs.append(det_path)
    write_manifest(outdir, "singlebody", args, time.time() - t0, outputs)
    if args.strict and not all(r[6] for r in rows):
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_validate(args) -> int:
    """Cross-module invariant suite; prints one pass/fail line per check."""
    from . import validate as _validate

    outdir = args.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    results = _validate.run_all(L=args.L)
    rows = [(name, "pass" if ok else "FAIL", detail) for (name, ok, detail) in results]
    for name, status, detail in rows:
        print(f"{status:4s}  {name}  {detail}")
    path = outdir / "validate.csv"
    write_table(path, "validate", ["check", "status", "detail"], rows)
    write_manifest(outdir, "validate", args, time.time() - t0, [path])
    return EXIT_OK if all(ok for (_, ok, _) in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcollide",
        description="Monitored collision-model dynamics of a kinetically constrained qubit chain. "
                    "All quantities are in units of the Rabi frequency Omega (times in 1/Omega).",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample monitored trajectories")
    add_model_arguments(p)
    add_common_arguments(p)
    p.add_argument("--T", type=int, default=2000, help="collision steps per trajectory")
    p.add_argument("--trajectories", type=int, default=10)
    p.add_argument("--offsets", type=str, default="0,1", help="di,dt pairs for estimators, e.g. '0,1;1,0'")
    p.add_argument("--reset-free", action="store_true", help="keep ancillas between collisions")
    p.add_argument("--postprocess", action="store_true",
                   help="flag outcome changes of a reset-free record (reset-model statistics)")
    p.add_argument("--no-occupations", action="store_true", help="skip simulator-side <n_i(t)>")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ensemble", help="exact order-parameter curves and stationary predictions")
    add_model_arguments(p)
    add_common_arguments(p)
    p.add_argument("--T", type=int, default=500)
    p.add_argument("--offsets", type=str, default="0,1;1,0;1,1")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("phase-diagram", help="(V, s) sweep of the biased stationary order parameters")
    add_model_arguments(p)
    add_common_arguments(p)
    p.add_argument("--V-range", type=str, default="0:10:41", metavar="START:STOP:COUNT")
    p.add_argument("--s-range", type=str, default="-0.5:0.5:41", metavar="START:STOP:COUNT")
    p.add_argument("--offsets", type=str, default="0,1")
    p.add_argument("--max-iter", type=int, default=10 ** 5)
    p.set_defaults(func=cmd_phase_diagram)

    p = sub.add_parser("lindblad", help="continuous-time limit: jump trajectories and theta(s)")
    add_model_arguments(p)
    add_common_arguments(p)
    p.add_argument("--t-max", type=float, default=40.0)
    p.add_argument("--trajectories", type=int, default=1)
    p.add_argument("--micro-dt", type=float, default=0.005)
    p.add_argument("--record-dt", type=float, default=0.25)
    p.add_argument("--s-range", type=str, default=None, metavar="START:STOP:COUNT",
                   help="also scan the tilted generator over s")
    p.set_defaults(func=cmd_lindblad)

    p = sub.add_parser("singlebody", help="closed-form maps and the detuning phase scan (L=1)")
    add_common_arguments(p)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1.25)
    p.add_argument("--gamma", type=float, default=3.0)
    p.add_argument("--dt-range", type=str, default="0.05:3:40")
    p.add_argument("--gamma-range", type=str, default="0:4:40")
    p.add_argument("--delta-range", type=str, default="0:8:41")
    p.add_argument("--s-range", type=str, default="-0.5:0.5:21")
    p.set_defaults(func=cmd_singlebody)

    p = sub.add_parser("validate", help="run the cross-module invariant suite")
    add_common_arguments(p)
    p.add_argument("--L", type=int, default=3, help="system size for the dense cross-checks (<= 4)")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    args = parser.parse_args(argv)
    args = apply_config_file(args, parser, argv)
    try:
        return args.func(args)
    except ConvergenceError as err:
        print(f"convergence failure: {err}", file=sys.stderr)
        return EXIT_CONVERGENCE if args.strict else EXIT_OK
    except QCollideError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
