"""Evaluation domains and the adapters the harness uses to drive them."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from typing import Any, Sequence

from ..behavior_space import BehaviorSpace, Dimension, Hypothesis
from . import crossing, lanechange


class CrossingDomain:
    name = "crossing"

    def __init__(self, section: dict | None = None):
        section = dict(section or {})
        self.true_space_variant = section.pop("true_space", "symmetric")
        self.true_space = crossing.true_behavior_space(self.true_space_variant)
        self.params = crossing.CrossingParams(**section)
        self.env = crossing.CrossingEnv(self.params)
        self.tolerance_scale = self.params.action_range

    def describe(self) -> dict:
        """Effective domain parameters, defaults included."""
        d = dataclasses.asdict(self.params)
        d["true_space"] = self.true_space_variant
        d["ego_actions"] = list(d["ego_actions"])
        return d

    def sample_trial(self, rng):
        boxes = crossing.draw_true_boxes(self.params.n_agents - 1, self.true_space, rng)
        return self.env.initial_state(), boxes

    def hypothesis_space(self, kind: str | None) -> BehaviorSpace:
        return crossing.expert_full_space()

    def policy(self, space: BehaviorSpace):
        return self.env.policy

    def true_hypotheses(self, truth) -> dict[int, list[Hypothesis]]:
        out = {}
        for j, (lo, hi) in zip(self.env.other_agents(None), truth):
            # a degenerate draw still needs a valid (nonzero-width) box
            hi = max(hi, lo + 1e-9)
            out[j] = [Hypothesis(BehaviorSpace((Dimension("desired_gap", lo, hi),)), self.env.policy)]
        return out

    def simulate_others(self, state, truth, rng):
        return self.env.simulate_others(state, truth, rng)

    def truth_record(self, truth) -> list:
        return [list(b) for b in truth]

    def trace_row(self, state) -> dict:
        return {"positions": list(state.positions), "actions": list(state.last_actions)}

    def ego_action_label(self, action) -> Any:
        return action


class LaneChangeDomain:
    name = "lanechange"

    def __init__(self, section: dict | None = None):
        section = dict(section or {})
        ranges = dict(lanechange.DEFAULT_RANGES)
        for k, v in (section.pop("ranges", None) or {}).items():
            ranges[k] = tuple(float(x) for x in v)
        for key in ("gap_range", "speed_range"):
            if key in section:
                section[key] = tuple(float(x) for x in section[key])
        self.params = lanechange.LaneChangeParams(ranges=ranges, **section)
        self.env = lanechange.LaneChangeEnv(self.params)
        self.tolerance_scale = lanechange.ACC_MAX - lanechange.ACC_MIN

    def describe(self) -> dict:
        d = dataclasses.asdict(self.params)
        d["ranges"] = {k: list(v) for k, v in sorted(d["ranges"].items())}
        d["gap_range"] = list(d["gap_range"])
        d["speed_range"] = list(d["speed_range"])
        return d

    def sample_trial(self, rng):
        world = self.env.sample_world(rng)
        return world, self.env.draw_true_boxes(rng)

    def hypothesis_space(self, kind: str | None) -> BehaviorSpace:
        return lanechange.hypothesis_space(kind or "1D_Velocity", self.params)

    def policy(self, space: BehaviorSpace):
        return self.env.policy_for(space.names)

    def true_hypotheses(self, truth) -> dict[int, list[Hypothesis]]:
        policy = self.env.policy_for(lanechange.PARAM_NAMES)
        return {j: [Hypothesis(box, policy)] for j, box in zip(self.env.other_agents(None), truth)}

    def simulate_others(self, state, truth, rng):
        return self.env.simulate_others(state, truth, rng)

    def truth_record(self, truth) -> list:
        return [box.to_config() for box in truth]

    def trace_row(self, world) -> dict:
        return {
            "ego": world.ego._asdict(),
            "others": [o._asdict() for o in world.others],
        }

    def ego_action_label(self, action) -> Any:
        return str(action)


DOMAINS = {"crossing": CrossingDomain, "lanechange": LaneChangeDomain}


def make_domain(name: str, section: dict | None = None):
    try:
        cls = DOMAINS[name]
    except KeyError:
        raise ValueError(f"unknown domain {name!r}; use one of {sorted(DOMAINS)}") from None
    return cls(section)


def scenario_hash(initial_state, truth_record: Sequence) -> str:
    payload = json.dumps({"state": repr(initial_state), "truth": truth_record}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
