"""Command line entry point: ``rsbg run|sweep|complexity|replay``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .complexity import complexity_ratio
from .harness import (
    ConfigError,
    PlannerSpec,
    config_with,
    load_config,
    run_experiment,
    run_trial,
)

log = logging.getLogger("rsbg")


def _overrides(args) -> dict:
    out = {}
    for key in ("trials", "seed", "workers", "iterations"):
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    if getattr(args, "out", None):
        out["output"] = args.out
    if getattr(args, "planners", None):
        out["planners"] = [p.strip() for p in args.planners.split(",") if p.strip()]
    return out


def _print_summary(summary: dict) -> None:
    print(f"{'planner':<20} {'success%':>9} {'collision%':>11} {'timeout%':>9} {'steps':>7}")
    for name, s in summary.items():
        steps = "-" if s["mean_steps_to_goal"] is None else f"{s['mean_steps_to_goal']:.1f}"
        print(f"{name:<20} {s['success_pct']:>9.1f} {s['collision_pct']:>11.1f} {s['timeout_pct']:>9.1f} {steps:>7}")


def cmd_run(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    result = run_experiment(cfg, progress=args.verbose > 0)
    _print_summary(result.summary)
    if cfg.output:
        print(f"results written to {cfg.output}")
    return 0


def _with_cells(spec: PlannerSpec, k: int) -> PlannerSpec:
    if spec.config.mode.hypothesis_source != "partition":
        return spec
    return PlannerSpec(spec.name, spec.config, (k,) * len(spec.cells_per_dim), spec.hypothesis_space)


def _with_iterations(spec: PlannerSpec, n: int) -> PlannerSpec:
    from dataclasses import replace
    return PlannerSpec(spec.name, replace(spec.config, iterations=n), spec.cells_per_dim, spec.hypothesis_space)


def cmd_sweep(args) -> int:
    base = load_config(args.config, _overrides(args))
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError([f"--values: expected comma-separated integers, got {args.values!r}"]) from None
    if not values or min(values) < 1:
        raise ConfigError(["--values: need at least one positive integer"])
    change = _with_cells if args.param == "k" else _with_iterations
    out_root = Path(base.output) if base.output else None
    points = []
    for v in values:
        cfg = config_with(base, planners=tuple(change(p, v) for p in base.planners),
                          output=str(out_root / f"{args.param}_{v}") if out_root else None)
        result = run_experiment(cfg, progress=args.verbose > 0)
        print(f"== {args.param} = {v}")
        _print_summary(result.summary)
        points.append({args.param: v, "summary": result.summary})
    if out_root:
        out_root.mkdir(parents=True, exist_ok=True)
        (out_root / "sweep.json").write_text(json.dumps({"param": args.param, "points": points}, indent=2, sort_keys=True) + "\n")
        with open(out_root / "sweep.csv", "w") as fh:
            fh.write(f"{args.param},planner,success_pct,collision_pct,timeout_pct,mean_steps_to_goal\n")
            for pt in points:
                for name, s in pt["summary"].items():
                    steps = "" if s["mean_steps_to_goal"] is None else s["mean_steps_to_goal"]
                    fh.write(f"{pt[args.param]},{name},{s['success_pct']},{s['collision_pct']},{s['timeout_pct']},{steps}\n")
    return 0


def cmd_complexity(args) -> int:
    r = complexity_ratio(args.agents, args.horizon)
    if args.json:
        print(json.dumps(r.to_dict(), sort_keys=True))
        return 0
    print(f"O_SBG  ~ {r.sbg}")
    print(f"O_RSBG ~ {r.rsbg}")
    print(f"O_SBG / O_RSBG = {r.expression}")
    print(f"ratio exponent: {r.ratio_exponent}")
    print(f"exact quotient of the two expressions: {r.quotient}")
    return 0


def cmd_replay(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    if args.planner:
        specs = [p for p in cfg.planners if p.name == args.planner]
        if not specs:
            raise ConfigError([f"--planner: no planner named {args.planner!r}"])
        spec = specs[0]
    else:
        spec = cfg.planners[0]
    record = run_trial(cfg, spec, args.trial, seed=args.seed, trace=True)
    doc = record.to_dict()
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        print(f"{record.planner} seed {record.seed}: {record.outcome} after {record.steps} steps -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsbg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("config", help="experiment config (YAML)")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--iterations", type=int, help="search iterations for every planner")
        p.add_argument("--workers", type=int, help="worker processes (default $RSBG_WORKERS or 1)")
        p.add_argument("--planners", help="comma-separated subset of planner names")
        if out:
            p.add_argument("--out", help="output directory")

    p = sub.add_parser("run", help="run an experiment config")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="repeat an experiment over K or iteration counts")
    common(p)
    p.add_argument("--param", choices=("k", "iterations"), required=True)
    p.add_argument("--values", required=True, help="comma-separated values, e.g. 2,4,8,16,32")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("complexity", help="sample-complexity ratio of SBG vs RSBG search")
    p.add_argument("--agents", type=int, required=True, help="number of agents N, ego included")
    p.add_argument("--horizon", type=int, required=True, help="prediction horizon t")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("replay", help="re-run one trial with a full trace")
    p.add_argument("config")
    p.add_argument("--planner")
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--seed", type=int, help="trial seed (as recorded in results); overrides --trial")
    p.add_argument("--out", help="trace file (default stdout)")
    p.set_defaults(func=cmd_replay, trials=None, workers=None, iterations=None, planners=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"rsbg: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"rsbg: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
