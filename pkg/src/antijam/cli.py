"""Command line front end for the experiment harness.

Every run writes a CSV (stable column order, floats at 10 significant
digits, rows fully sorted) plus a JSON manifest carrying the config echo, a
content hash, and the measured wall time.  Reruns with the same config and
seed reproduce the CSV byte for byte; timing lives only in the manifest
unless the config sets record_runtime.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
import time

from .harness import (
    AXES,
    CSV_COLUMNS,
    ExperimentConfig,
    derive_trial_seed,
    run_beampattern_demo,
    run_sweep,
    run_theory_suite,
    run_trial,
    run_two_timescale,
    write_csv,
    write_manifest,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a JSON experiment config")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--trials", type=int, help="Monte Carlo trials override")
    parser.add_argument("--out", help="output CSV path (default: <command>.csv)")
    parser.add_argument(
        "--algos", help="comma-separated roster, e.g. ptrso,pgd,pnm,ula"
    )
    parser.add_argument(
        "--jobs", type=int, default=1, help="worker processes (default 1)"
    )


def _load_config(args: argparse.Namespace, **overrides) -> ExperimentConfig:
    cfg = (
        ExperimentConfig.from_file(args.config)
        if args.config
        else ExperimentConfig()
    )
    kw = {}
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        kw["trials"] = args.trials
    if getattr(args, "algos", None):
        kw["algos"] = tuple(a.strip() for a in args.algos.split(",") if a.strip())
    kw.update(overrides)
    return dataclasses.replace(cfg, **kw) if kw else cfg


def _print_summary(summary: list[dict]) -> None:
    header = f"{'value':>10} {'algo':>10} {'mean dB':>9} {'95% CI':>20} {'eff':>6} {'iters':>7}"
    print(header)
    for row in summary:
        ci = f"[{row['ci_lo']:7.3f},{row['ci_hi']:7.3f}]"
        print(
            f"{row['value']:>10} {row['algo']:>10} {row['mean_true_sinr_db']:9.3f} "
            f"{ci:>20} {row['effectiveness']:6.2f} {row['mean_iters']:7.1f}"
        )


def _finish(out: str, rows: list[dict], cfg, command: str, t0: float, columns=None):
    write_csv(out, rows, columns=columns)
    manifest = write_manifest(out, cfg, command, time.perf_counter() - t0, len(rows))
    print(f"wrote {out} ({len(rows)} rows) and {manifest}")


def _cmd_sweep(args: argparse.Namespace, axis: str) -> int:
    cfg = _load_config(args)
    values = None
    if args.values:
        cast = float if axis == "snr" else int
        values = [cast(v) for v in args.values.split(",")]
    t0 = time.perf_counter()
    result = run_sweep(cfg, axis, values=values, jobs=args.jobs)
    _print_summary(result.summary)
    out = args.out or f"sweep_{axis}.csv"
    _finish(out, result.rows, cfg, f"sweep-{axis}", t0, columns=CSV_COLUMNS)
    return 0


def _cmd_two_timescale(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    t0 = time.perf_counter()
    result = run_two_timescale(cfg, n_blocks=args.blocks, jobs=args.jobs)
    _print_summary(result.summary)
    out = args.out or "two_timescale.csv"
    _finish(out, result.rows, cfg, "two-timescale", t0, columns=CSV_COLUMNS)
    return 0


def _cmd_beampattern(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    t0 = time.perf_counter()
    _, _, rows = run_beampattern_demo(cfg)
    out = args.out or "beampattern.csv"
    _finish(
        out, rows, cfg, "beampattern", t0, columns=("algo", "angle_deg", "gain_db")
    )
    return 0


def _cmd_theory(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    t0 = time.perf_counter()
    kw = {}
    if args.quick:
        kw = {
            "lipschitz_draws": 500,
            "inverse_draws": 500,
            "concentration_trials": 30,
            "gap_trials": 30,
            "bias_draws": 30,
            "bias_sampled_draws": 50,
        }
    report = run_theory_suite(cfg, **kw)
    out = args.out or "theory_report.json"
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, check in report["checks"].items():
        status = "pass" if check["passed"] else "FAIL"
        print(f"{status}: {name}")
    print(f"wrote {out} (wall {time.perf_counter() - t0:.1f}s)")
    return 0 if report["passed"] else 1


def _cmd_trial(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    seed = args.seed if args.seed is not None else derive_trial_seed(cfg.seed, 0)
    t0 = time.perf_counter()
    record = run_trial(cfg, seed)
    rows = []
    for algo, res in record.results.items():
        print(
            f"{algo:>10}: true {res.true_sinr_db:8.3f} dB, "
            f"surrogate {res.surrogate_sinr_db:8.3f} dB, "
            f"effective={int(res.effective)}, iters={res.iters}"
        )
        rows.append(
            {
                "axis": "trial",
                "value": 0,
                "seed": record.seed,
                "algo": algo,
                "true_sinr_db": res.true_sinr_db,
                "surrogate_sinr_db": res.surrogate_sinr_db,
                "effective": int(res.effective),
                "iters": res.iters,
                "runtime_ms": res.runtime_ms,
            }
        )
    rows.sort(key=lambda r: (r["value"], r["algo"], r["seed"]))
    if args.out:
        _finish(args.out, rows, cfg, "trial", t0, columns=CSV_COLUMNS)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antijam",
        description="Movable-antenna anti-jamming experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for axis, attr in AXES.items():
        p = sub.add_parser(f"sweep-{axis}", help=f"sweep {attr} grid")
        # grids like -10,0,10 must parse as values, not as option names
        p._negative_number_matcher = re.compile(r"^-\d[\d,.eE+-]*$")
        _add_common(p)
        p.add_argument("--values", help=f"comma-separated {attr} grid")
        p.set_defaults(func=lambda a, ax=axis: _cmd_sweep(a, ax))

    p = sub.add_parser(
        "two-timescale", help="per-block SINR as anchors are re-optimized"
    )
    _add_common(p)
    p.add_argument("--blocks", type=int, default=4, help="coherence blocks")
    p.set_defaults(func=_cmd_two_timescale)

    p = sub.add_parser("beampattern", help="trial-averaged beampattern demo")
    _add_common(p)
    p.set_defaults(func=_cmd_beampattern)

    p = sub.add_parser("theory", help="run the theoretical-bound verifiers")
    _add_common(p)
    p.add_argument("--quick", action="store_true", help="reduced draw counts")
    p.set_defaults(func=_cmd_theory)

    p = sub.add_parser("trial", help="run and print a single trial")
    _add_common(p)
    p.set_defaults(func=_cmd_trial)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
