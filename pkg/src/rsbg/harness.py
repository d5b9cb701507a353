"""Seeded batch experiments: config loading, trial loop, aggregation and result files.

Seeding: trial ``r`` of an experiment gets the seed
``sha256(f"{master_seed}:{r}")[:8]`` (big endian); each random stream of the
trial is seeded with ``sha256(f"{trial_seed}:{label}")[:8]`` for the labels
``scenario`` (initial world and true behavior boxes), ``others`` (per-step
behavior states of the simulated agents), ``planner`` and ``belief``. None of
this depends on the planner, so every planner faces the same scenarios.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

from . import __version__
from . import belief as belief_mod
from .behavior_space import make_hypotheses, partition_equal
from .domains import make_domain, scenario_hash
from .search import Mode, PlannerConfig, plan

log = logging.getLogger(__name__)

SEED_SCHEME = "trial_seed = sha256(f'{master_seed}:{trial}')[:8]; stream = sha256(f'{trial_seed}:{label}')[:8]; big-endian"
STREAMS = ("scenario", "others", "planner", "belief")
OUTCOMES = ("success", "collision", "timeout")
WORKERS_ENV = "RSBG_WORKERS"


class ConfigError(ValueError):
    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class PlannerSpec:
    name: str
    config: PlannerConfig
    cells_per_dim: tuple[int, ...] = (16,)
    hypothesis_space: str | None = None

    @property
    def k(self) -> int:
        if self.config.mode.hypothesis_source == "partition":
            return math.prod(self.cells_per_dim)
        return 1

    def to_dict(self) -> dict:
        d = {"name": self.name, **self.config.to_dict(), "cells_per_dim": list(self.cells_per_dim)}
        if self.hypothesis_space:
            d["hypothesis_space"] = self.hypothesis_space
        return d


@dataclass(frozen=True)
class ExperimentConfig:
    domain: str
    planners: tuple[PlannerSpec, ...]
    trials: int = 200
    seed: int = 0
    output: str | None = None
    workers: int = 1
    m_samples: int = 100
    tolerance_fraction: float = 0.1
    fallback: str = "prior"
    belief_std_trials: int = 10
    belief_std_steps: int = 10
    trace: bool = False
    domain_options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "trials": self.trials,
            "seed": self.seed,
            "belief": {"m_samples": self.m_samples, "tolerance_fraction": self.tolerance_fraction,
                       "fallback": self.fallback},
            "metrics": {"belief_std_trials": self.belief_std_trials,
                        "belief_std_steps": self.belief_std_steps, "trace": self.trace},
            self.domain: make_domain(self.domain, self.domain_options).describe(),
            "planners": [p.to_dict() for p in self.planners],
        }


_PLANNER_NUMERIC = {
    "iterations": int, "gamma": float, "k0": float, "alpha0": float, "ucb_c": float,
    "max_depth": int, "rollout_depth": int,
}


def parse_config(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Validate a config mapping; every problem is reported with its field path."""
    raw = copy.deepcopy(raw or {})
    overrides = overrides or {}
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a mapping"])

    domain = raw.get("domain")
    if domain not in ("crossing", "lanechange"):
        errors.append(f"domain: expected 'crossing' or 'lanechange', got {domain!r}")

    def get_int(path, value, minimum):
        try:
            v = int(value)
        except (TypeError, ValueError):
            errors.append(f"{path}: expected an integer, got {value!r}")
            return None
        if v < minimum:
            errors.append(f"{path}: must be >= {minimum}, got {v}")
        return v

    trials = get_int("trials", overrides.get("trials", raw.get("trials", 200)), 1)
    seed = get_int("seed", overrides.get("seed", raw.get("seed", 0)), 0)
    workers = get_int("workers", overrides.get("workers", raw.get("workers", os.environ.get(WORKERS_ENV, 1))), 1)

    belief = raw.get("belief", {}) or {}
    m_samples = get_int("belief.m_samples", belief.get("m_samples", 100), 1)
    tol = belief.get("tolerance_fraction", 0.1)
    if not isinstance(tol, (int, float)) or not tol > 0:
        errors.append(f"belief.tolerance_fraction: must be a positive number, got {tol!r}")
    fallback = belief.get("fallback", "prior")
    if fallback not in ("prior", "previous"):
        errors.append(f"belief.fallback: expected 'prior' or 'previous', got {fallback!r}")

    metrics = raw.get("metrics", {}) or {}
    std_trials = get_int("metrics.belief_std_trials", metrics.get("belief_std_trials", 10), 0)
    std_steps = get_int("metrics.belief_std_steps", metrics.get("belief_std_steps", 10), 0)
    trace = bool(metrics.get("trace", False))

    planners_raw = raw.get("planners")
    planners: list[PlannerSpec] = []
    if not isinstance(planners_raw, list) or not planners_raw:
        errors.append("planners: expected a nonempty list")
        planners_raw = []
    only = overrides.get("planners")
    names_seen = set()
    for i, p in enumerate(planners_raw):
        path = f"planners[{i}]"
        if not isinstance(p, dict):
            errors.append(f"{path}: expected a mapping")
            continue
        p = dict(p)
        if "iterations" in overrides and overrides["iterations"] is not None:
            p["iterations"] = overrides["iterations"]
        mode = p.get("mode")
        try:
            mode = Mode(mode)
        except ValueError:
            errors.append(f"{path}.mode: expected one of {[m.value for m in Mode]}, got {mode!r}")
            continue
        name = str(p.get("name", mode.value))
        if name in names_seen:
            errors.append(f"{path}.name: duplicate planner name {name!r}")
        names_seen.add(name)
        kwargs: dict[str, Any] = {"mode": mode, "seed": seed or 0}
        for key, typ in _PLANNER_NUMERIC.items():
            if key in p:
                try:
                    kwargs[key] = typ(p[key])
                except (TypeError, ValueError):
                    errors.append(f"{path}.{key}: expected {typ.__name__}, got {p[key]!r}")
        if p.get("ego_rollout") is not None:
            er = p["ego_rollout"]
            if isinstance(er, int) and not isinstance(er, bool):
                kwargs["ego_rollout"] = er
            else:
                errors.append(f"{path}.ego_rollout: expected an action index or null, got {er!r}")
        cells = p.get("cells_per_dim", [16])
        if isinstance(cells, int):
            cells = [cells]
        if not isinstance(cells, list) or not cells or not all(isinstance(c, int) and c >= 1 for c in cells):
            errors.append(f"{path}.cells_per_dim: expected a list of positive integers, got {cells!r}")
            cells = [1]
        kind = p.get("hypothesis_space")
        if domain == "lanechange":
            from .domains.lanechange import HYPOTHESIS_KINDS
            kind = kind or "1D_Velocity"
            if kind not in HYPOTHESIS_KINDS:
                errors.append(f"{path}.hypothesis_space: expected one of {sorted(HYPOTHESIS_KINDS)}, got {kind!r}")
            elif len(cells) != len(HYPOTHESIS_KINDS[kind]):
                errors.append(f"{path}.cells_per_dim: {kind} needs {len(HYPOTHESIS_KINDS[kind])} entries, got {len(cells)}")
        elif len(cells) != 1:
            errors.append(f"{path}.cells_per_dim: crossing behavior space is 1-D, got {len(cells)} entries")
        try:
            cfg = PlannerConfig(**kwargs)
        except ValueError as exc:
            errors.append(f"{path}: {exc}")
            continue
        if only and name not in only:
            continue
        planners.append(PlannerSpec(name, cfg, tuple(cells), kind))
    if only:
        missing = set(only) - names_seen
        if missing:
            errors.append(f"planners: unknown planner names {sorted(missing)}")
        elif not planners:
            errors.append("planners: selection is empty")

    domain_options = dict(raw.get(domain, {}) or {}) if isinstance(domain, str) else {}
    if not errors:
        try:
            make_domain(domain, domain_options)
        except (TypeError, ValueError) as exc:
            errors.append(f"{domain}: {exc}")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        domain=domain, planners=tuple(planners), trials=trials, seed=seed,
        output=overrides.get("output", raw.get("output")), workers=workers,
        m_samples=m_samples, tolerance_fraction=float(tol), fallback=fallback,
        belief_std_trials=std_trials, belief_std_steps=std_steps, trace=trace,
        domain_options=domain_options,
    )


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([f"<file>: cannot read {path}: {exc.strerror}"]) from exc
    except yaml.YAMLError as exc:
        raise ConfigError([f"<file>: not valid YAML: {exc}"]) from exc
    return parse_config(raw, overrides)


def _seed_from(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def trial_seed(master_seed: int, trial_index: int) -> int:
    return _seed_from(f"{master_seed}:{trial_index}")


def trial_streams(seed: int) -> dict[str, random.Random]:
    return {label: random.Random(_seed_from(f"{seed}:{label}")) for label in STREAMS}


@dataclass
class TrialRecord:
    planner: str
    trial: int
    seed: int
    outcome: str
    steps: int
    steps_to_goal: int | None
    belief_std: list[float]
    ego_actions: list
    scenario_hash: str
    wall_time: float = 0.0
    plan_times: list[float] = field(default_factory=list, repr=False)
    trace: list[dict] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        """Deterministic part of the record (timings excluded)."""
        d = {
            "planner": self.planner, "trial": self.trial, "seed": self.seed,
            "outcome": self.outcome, "steps": self.steps, "steps_to_goal": self.steps_to_goal,
            "scenario_hash": self.scenario_hash, "ego_actions": self.ego_actions,
            "belief_std": self.belief_std,
        }
        if self.trace is not None:
            d["trace"] = self.trace
        return d


def build_hypotheses(domain, spec: PlannerSpec, truth, agents: Iterable[int]) -> dict[int, list]:
    source = spec.config.mode.hypothesis_source
    if source == "true":
        return domain.true_hypotheses(truth)
    space = domain.hypothesis_space(spec.hypothesis_space)
    cells = spec.cells_per_dim if source == "partition" else (1,) * space.ndim
    hyps = make_hypotheses(partition_equal(space, cells), domain.policy(space))
    return {j: hyps for j in agents}


def run_trial(cfg: ExperimentConfig, spec: PlannerSpec, trial_index: int,
              seed: int | None = None, trace: bool | None = None) -> TrialRecord:
    """One episode: observe, update belief, plan, act, step."""
    domain = make_domain(cfg.domain, cfg.domain_options)
    env = domain.env
    seed_value = trial_seed(cfg.seed, trial_index) if seed is None else seed
    streams = trial_streams(seed_value)
    trace = cfg.trace if trace is None else trace

    state, truth = domain.sample_trial(streams["scenario"])
    agents = env.other_agents(state)
    hypotheses = build_hypotheses(domain, spec, truth, agents)
    k = len(next(iter(hypotheses.values())))
    belief = belief_mod.init(agents, k, fallback=cfg.fallback)
    tolerance = cfg.tolerance_fraction * domain.tolerance_scale
    s_hash = scenario_hash(state, domain.truth_record(truth))

    started = time.perf_counter()
    plan_times, stds, actions, rows = [], [], [], []
    while True:
        result = plan(env, state, belief, hypotheses, spec.config, streams["planner"])
        plan_times.append(result.wall_time)
        others = domain.simulate_others(state, truth, streams["others"])
        nxt, _, terminal = env.step(state, result.action, others)
        for j, a in zip(agents, others):
            belief = belief_mod.update(belief, j, a, state, hypotheses[j], streams["belief"],
                                       cfg.m_samples, tolerance)
        stds.append(round(belief_mod.normalized_belief_std(belief), 12))
        actions.append(domain.ego_action_label(result.action))
        if trace:
            rows.append({
                "step": nxt.step, "ego_action": domain.ego_action_label(result.action),
                "other_actions": list(others), "q_values": result.q_values,
                "visits": result.visits, "belief": belief.snapshot(), **domain.trace_row(nxt),
            })
        log.debug("trial %d step %d: %s", trial_index, nxt.step, result.to_dict())
        state = nxt
        if terminal:
            break

    return TrialRecord(
        planner=spec.name, trial=trial_index, seed=seed_value, outcome=state.outcome,
        steps=state.step, steps_to_goal=state.step if state.outcome == "success" else None,
        belief_std=stds, ego_actions=actions, scenario_hash=s_hash,
        wall_time=time.perf_counter() - started, plan_times=plan_times,
        trace=rows if trace else None,
    )


def _percentages(records: Sequence[TrialRecord]) -> dict[str, float]:
    n = len(records)
    counts = {o: sum(r.outcome == o for r in records) for o in OUTCOMES}
    return {o: 100.0 * c / n for o, c in counts.items()}


def summarize(records: Sequence[TrialRecord], belief_std_trials: int = 10,
              belief_std_steps: int = 10) -> dict[str, dict]:
    """Per-planner outcome percentages, mean steps to goal and belief-std curves."""
    if not records:
        raise ValueError("nothing to summarize")
    by_planner: dict[str, list[TrialRecord]] = {}
    for r in records:
        by_planner.setdefault(r.planner, []).append(r)
    out = {}
    for name, recs in by_planner.items():
        recs = sorted(recs, key=lambda r: r.trial)
        pct = _percentages(recs)
        goal_steps = [r.steps_to_goal for r in recs if r.steps_to_goal is not None]
        curve = []
        first = recs[:belief_std_trials]
        for t in range(belief_std_steps):
            vals = [r.belief_std[t] for r in first if t < len(r.belief_std)]
            curve.append(float(np.mean(vals)) if vals else None)
        out[name] = {
            "trials": len(recs),
            "success_pct": pct["success"],
            "collision_pct": pct["collision"],
            "timeout_pct": pct["timeout"],
            "mean_steps_to_goal": float(np.mean(goal_steps)) if goal_steps else None,
            "belief_std_curve": curve,
        }
    return out


def timing_summary(records: Sequence[TrialRecord]) -> dict[str, dict]:
    out = {}
    for name in dict.fromkeys(r.planner for r in records):
        times = [t for r in records if r.planner == name for t in r.plan_times]
        out[name] = {
            "mean_plan_s": float(np.mean(times)) if times else None,
            "p50_plan_s": float(np.percentile(times, 50)) if times else None,
            "p95_plan_s": float(np.percentile(times, 95)) if times else None,
            "total_s": float(sum(r.wall_time for r in records if r.planner == name)),
        }
    return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[TrialRecord]
    summary: dict[str, dict]

    def results_document(self) -> dict:
        return {
            "header": {"package": "rsbg", "version": __version__, "seed_scheme": SEED_SCHEME,
                       "streams": list(STREAMS)},
            "config": self.config.to_dict(),
            "summary": self.summary,
            "records": [r.to_dict() for r in self.records],
        }


def _work(args):
    cfg, spec, trial = args
    return run_trial(cfg, spec, trial)


def run_experiment(cfg: ExperimentConfig, progress: bool = False) -> ExperimentResult:
    jobs = [(cfg, spec, r) for spec in cfg.planners for r in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_work, jobs))
    else:
        records = []
        for job in jobs:
            records.append(_work(job))
            if progress:
                rec = records[-1]
                log.info("%s trial %d: %s in %d steps", rec.planner, rec.trial, rec.outcome, rec.steps)
    order = {spec.name: i for i, spec in enumerate(cfg.planners)}
    records.sort(key=lambda r: (order[r.planner], r.trial))
    summary = summarize(records, cfg.belief_std_trials, cfg.belief_std_steps)
    result = ExperimentResult(cfg, records, summary)
    if cfg.output:
        write_results(result, cfg.output)
    return result


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_results(result: ExperimentResult, output: str | Path) -> Path:
    """Write ``results.json``, ``records.csv`` and ``timings.json`` into ``output``.

    ``results.json`` and ``records.csv`` depend only on (config, master seed);
    wall-clock timings live in ``timings.json``.
    """
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    _dump(result.results_document(), out / "results.json")
    with open(out / "records.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["planner", "trial", "seed", "outcome", "steps", "steps_to_goal", "scenario_hash"])
        for r in result.records:
            w.writerow([r.planner, r.trial, r.seed, r.outcome, r.steps,
                        "" if r.steps_to_goal is None else r.steps_to_goal, r.scenario_hash])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["planner", "trials", "success_pct", "collision_pct", "timeout_pct", "mean_steps_to_goal"])
        for name, s in result.summary.items():
            w.writerow([name, s["trials"], s["success_pct"], s["collision_pct"], s["timeout_pct"],
                        "" if s["mean_steps_to_goal"] is None else s["mean_steps_to_goal"]])
    _dump(timing_summary(result.records), out / "timings.json")
    return out


def config_with(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes)
