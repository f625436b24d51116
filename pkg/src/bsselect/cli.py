"""Command-line front end.

Subcommands: ``run`` executes an experiment plan and writes CSVs plus a
figure, ``replay`` re-executes a single drop with per-user detail,
``check`` runs one of the named verification suites, and ``presets``
lists or writes ready-made plan files.

Exit codes: 0 success, 1 validation error, 2 runtime or drop failure,
3 check-suite failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import checks, harness, plots, selection
from .exceptions import ConfigError, SimulationError, UnknownDrop, UnknownSuite
from .presets import PRESETS, preset_plan

OUTPUT_DIR_ENV = "BSSELECT_OUT"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_CHECK_FAILED = 3


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _apply_override(doc: dict, key: str, value) -> None:
    # intermediate objects may be absent from the file; unknown field names
    # are rejected by the plan schema afterwards
    parts = key.split(".")
    node = doc
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "override path crosses a non-object value")
    node[parts[-1]] = value


def _load_plan(args):
    path = Path(args.config)
    if not path.is_file():
        raise ConfigError(str(path), "config file not found")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"not valid JSON: {exc}") from exc
    for text in args.set or ():
        key, value = _parse_override(text)
        _apply_override(doc, key, value)
    if getattr(args, "seed", None) is not None:
        doc.setdefault("network", {})["rng_seed"] = args.seed
    return harness.plan_from_dict(doc)


def _resolve_out_dir(args, plan) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(plan.output_dir or "results")


def _prepare_outputs(out_dir: Path) -> dict:
    """Create every output path up front so failures happen before any
    computation starts."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out_dir / "results.csv",
        "drops": out_dir / "drops.csv",
        "failures": out_dir / "failed_drops.csv",
        "figure": out_dir / "results.png",
    }
    for path in paths.values():
        with open(path, "a", encoding="utf-8"):
            pass
    return paths


def _print_summary(outcome, quiet):
    if quiet:
        return
    print(f"{'sweep':>10} {'algorithm':>16} {'mean sum-rate':>14} "
          f"{'stderr':>10} {'drops':>6}")
    for row in outcome.rows:
        print(f"{row.sweep_value:>10.6g} {row.algorithm:>16} "
              f"{row.mean_sum_rate:>14.6g} {row.stderr:>10.3g} "
              f"{row.drops:>6}")
    if outcome.failure_rows:
        print(f"{len(outcome.failure_rows)} failed drops "
              f"(see failed_drops.csv)")


def cmd_run(args) -> int:
    plan = _load_plan(args)
    out_dir = _resolve_out_dir(args, plan)
    paths = _prepare_outputs(out_dir)
    outcome = harness.run_experiment(plan, workers=args.workers)
    harness.write_results_csv(outcome.rows, paths["results"])
    harness.write_drops_csv(outcome.drop_rows, paths["drops"])
    harness.write_failures_csv(outcome.failure_rows, paths["failures"])
    plots.render_results(outcome.rows, paths["figure"])
    _print_summary(outcome, args.quiet)
    if not args.quiet:
        print(f"wrote {paths['results']}")
    return EXIT_RUNTIME if outcome.failure_rows else EXIT_OK


def _print_replay(detail, quiet):
    print(f"sweep value {detail.sweep_value:.6g}, drop {detail.drop_index}")
    for name, result in detail.selections.items():
        print(f"\n[{name}] assignment "
              f"{{cluster: bs}} = { {c: l for c, l in enumerate(result.assignment)} }")
        if result.objective_value is not None:
            print(f"  objective {result.objective_value:.9g}")
        if result.per_cluster_scores is not None and not quiet:
            print("  candidate scores (rows: clusters, cols: base stations)")
            for c, row in enumerate(result.per_cluster_scores):
                cells = ["      nan" if np.isnan(v) else f"{v:9.4g}" for v in row]
                print(f"    cluster {c}: " + " ".join(cells))
        record = detail.sinr[name]
        total, per_cluster = detail.rates[name]
        print(f"  sum-rate {total:.6g} bits/s/Hz "
              f"({per_cluster:.6g} per cluster)")
        if not quiet:
            for c in range(record.sinr.shape[0]):
                sinr_txt = " ".join(f"{v:.5g}" for v in record.sinr[c])
                slnr_txt = " ".join(f"{v:.5g}" for v in detail.slnr[name][c])
                print(f"    cluster {c} @ bs {result.assignment[c]}: "
                      f"SINR [{sinr_txt}] SLNR [{slnr_txt}]")
    for name, kind in detail.errors.items():
        print(f"\n[{name}] failed: {kind}")


def cmd_replay(args) -> int:
    plan = _load_plan(args)
    algorithms = (args.algorithm,) if args.algorithm else None
    detail = harness.replay_drop(plan, args.sweep_index, args.drop,
                                 algorithms=algorithms)
    _print_replay(detail, args.quiet)
    return EXIT_RUNTIME if detail.errors else EXIT_OK


def cmd_check(args) -> int:
    if args.suite not in checks.SUITES:
        raise UnknownSuite(
            f"unknown suite {args.suite!r}; choose from {checks.SUITE_NAMES}")
    results = checks.SUITES[args.suite]()
    failed = 0
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        if not result.passed:
            failed += 1
        if not args.quiet or not result.passed:
            print(f"{status}  {result.name}" +
                  (f"  [{result.detail}]" if result.detail else ""))
    print(f"{len(results) - failed}/{len(results)} assertions passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def cmd_presets(args) -> int:
    if args.name is None:
        for name, (description, _) in PRESETS.items():
            print(f"{name:24} {description}")
        return EXIT_OK
    if args.name not in PRESETS:
        raise ConfigError(args.name, "unknown preset")
    out_dir = Path(args.out) if args.out else Path(
        os.environ.get(OUTPUT_DIR_ENV, "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{args.name}.json"
    path.write_text(json.dumps(preset_plan(args.name), indent=2) + "\n",
                    encoding="utf-8")
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsselect",
        description="Monte Carlo simulator for base-station selection in "
                    "massive MIMO downlinks with two-stage precoding.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True,
                           help="experiment plan (JSON)")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a plan field, e.g. num_drops=5 or "
                                "network.num_antennas=32 (repeatable)")
            p.add_argument("--seed", type=int,
                           help="override network.rng_seed")
        p.add_argument("--out", help=f"output directory (default from "
                                     f"${OUTPUT_DIR_ENV} or the plan)")
        p.add_argument("--quiet", action="store_true",
                       help="suppress non-essential output")

    run_p = sub.add_parser("run", help="run an experiment plan")
    common(run_p)
    run_p.add_argument("--workers", type=int, default=1,
                       help="worker processes for drops (default 1)")
    run_p.set_defaults(func=cmd_run)

    replay_p = sub.add_parser("replay",
                              help="re-execute one drop with full detail")
    common(replay_p)
    replay_p.add_argument("--sweep-index", type=int, required=True,
                          help="index into sweep.values")
    replay_p.add_argument("--drop", type=int, required=True,
                          help="drop index within the sweep point")
    replay_p.add_argument("--algorithm", choices=selection.ALGORITHMS,
                          help="restrict the replay to one algorithm")
    replay_p.set_defaults(func=cmd_replay)

    check_p = sub.add_parser("check", help="run a verification suite")
    check_p.add_argument("suite", help=f"one of {', '.join(checks.SUITE_NAMES)}")
    check_p.add_argument("--quiet", action="store_true",
                         help="print failing assertions only")
    check_p.set_defaults(func=cmd_check)

    presets_p = sub.add_parser("presets",
                               help="list presets or write one as JSON")
    presets_p.add_argument("name", nargs="?",
                           help="preset to write; omit to list")
    presets_p.add_argument("--out", help="directory for the written file")
    presets_p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownDrop, UnknownSuite) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SimulationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
