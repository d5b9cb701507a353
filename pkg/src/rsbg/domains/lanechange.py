"""Two-lane highway merge.

The ego starts on the right lane and has to merge into a dense platoon on the
left lane. Other vehicles follow the ACC car-following model (IDM blended with
the constant-acceleration heuristic) with driver parameters redrawn every step
from a hidden per-trial box.

Units: metres, seconds. ``s`` is the front-bumper position; the gap to a
leader is ``leader.s - follower.s - leader.length``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from ..behavior_space import BehaviorSpace, Dimension, RandomSource

EGO = 0
ACC_MIN = -5.0
ACC_MAX = 8.0
IDM_EXPONENT = 4

SUCCESS = "success"
COLLISION = "collision"
TIMEOUT = "timeout"
RUNNING = "running"

PARAM_NAMES = ("v_desired", "t_desired", "s_min", "a_factor", "b_comf")

# Placeholder ranges: no reference boundaries are available.
DEFAULT_RANGES = {
    "v_desired": (10.0, 20.0),
    "t_desired": (0.5, 3.0),
    "s_min": (0.5, 3.0),
    "a_factor": (0.5, 3.0),
    "b_comf": (0.5, 4.0),
}
UNITS = {"v_desired": "m/s", "t_desired": "s", "s_min": "m", "a_factor": "m/s^2", "b_comf": "m/s^2"}

HYPOTHESIS_KINDS = {
    "1D_Velocity": ("v_desired",),
    "1D_Headway": ("t_desired",),
    "2D": ("v_desired", "t_desired"),
}


def clamp_acc(a: float) -> float:
    return ACC_MIN if a < ACC_MIN else ACC_MAX if a > ACC_MAX else a


class DriverParams(NamedTuple):
    v_desired: float
    t_desired: float
    s_min: float
    a_factor: float
    b_comf: float
    coolness: float = 0.99

    def validate(self) -> "DriverParams":
        for name in PARAM_NAMES:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.0 <= self.coolness <= 1.0:
            raise ValueError(f"coolness must lie in [0, 1], got {self.coolness}")
        return self


class VehicleState(NamedTuple):
    s: float
    v: float
    a_last: float = 0.0
    progress: float = 1.0  # lateral position: 0 right lane, 1 left lane
    length: float = 5.0

    @property
    def lane(self) -> str:
        if self.progress <= 0.0:
            return "right"
        if self.progress >= 1.0:
            return "left"
        return "changing"


def _gap(follower: VehicleState, leader: VehicleState) -> float:
    return leader.s - follower.s - leader.length


def idm_accel(follower: VehicleState, leader: VehicleState | None, p: DriverParams) -> float:
    """Intelligent Driver Model acceleration, clamped to the physical limits."""
    v = follower.v
    free = 1.0 - (v / p.v_desired) ** IDM_EXPONENT
    if leader is None:
        return clamp_acc(p.a_factor * free)
    gap = _gap(follower, leader)
    if gap <= 0.0:
        return ACC_MIN
    dv = v - leader.v
    s_star = p.s_min + max(0.0, v * p.t_desired + v * dv / (2.0 * math.sqrt(p.a_factor * p.b_comf)))
    return clamp_acc(p.a_factor * (free - (s_star / gap) ** 2))


def cah_accel(follower: VehicleState, leader: VehicleState, p: DriverParams) -> float:
    """Constant-acceleration heuristic: assume the leader keeps its acceleration."""
    gap = _gap(follower, leader)
    if gap <= 0.0:
        return ACC_MIN
    v, vl = follower.v, leader.v
    a_l = min(leader.a_last, p.a_factor)
    denom = vl * vl - 2.0 * gap * a_l
    if vl * (v - vl) <= -2.0 * gap * a_l and denom != 0.0:
        return clamp_acc(v * v * a_l / denom)
    closing = (v - vl) ** 2 / (2.0 * gap) if v > vl else 0.0
    return clamp_acc(a_l - closing)


def acc_accel(follower: VehicleState, leader: VehicleState | None, p: DriverParams) -> float:
    """ACC blend of IDM and CAH weighted by the coolness factor."""
    a_idm = idm_accel(follower, leader, p)
    if leader is None:
        return a_idm
    a_cah = cah_accel(follower, leader, p)
    if a_idm >= a_cah:
        return a_idm
    c = p.coolness
    blended = (1.0 - c) * a_idm + c * (a_cah + p.b_comf * math.tanh((a_idm - a_cah) / p.b_comf))
    return clamp_acc(blended)


class Macro(NamedTuple):
    kind: str  # "lane_change", "keep" or "gap_keep"
    accel: float = 0.0

    def __str__(self) -> str:
        return f"keep({self.accel:g})" if self.kind == "keep" else self.kind


LANE_CHANGE = Macro("lane_change")
GAP_KEEP = Macro("gap_keep")
EGO_MACROS = (LANE_CHANGE, *(Macro("keep", a) for a in (-5.0, -1.0, 0.0, 1.0, 4.0)), GAP_KEEP)


class World(NamedTuple):
    ego: VehicleState
    others: tuple[VehicleState, ...]
    step: int = 0
    outcome: str = RUNNING


@dataclass(frozen=True)
class LaneChangeParams:
    n_others: int = 4
    dt: float = 0.2
    t_change: float = 1.0
    time_budget: float = 7.5
    vehicle_length: float = 5.0
    gap_range: tuple[float, float] = (8.0, 20.0)
    speed_range: tuple[float, float] = (10.0, 15.0)
    lead_position: float = 100.0
    cut_in_progress: float = 0.5
    collision_reward: float = -1000.0
    goal_reward: float = 100.0
    ranges: dict = field(default_factory=lambda: dict(DEFAULT_RANGES))
    coolness: float = 0.99
    delta_min: float = 0.1
    delta_max: float = 0.4

    def __post_init__(self):
        if self.n_others < 1:
            raise ValueError("need at least one other vehicle")
        if not (self.dt > 0 and self.t_change > 0 and self.time_budget > 0):
            raise ValueError("dt, t_change and time_budget must be positive")
        for name in PARAM_NAMES:
            lo, hi = self.ranges[name]
            if not 0 < lo < hi:
                raise ValueError(f"range for {name} must satisfy 0 < lower < upper, got {(lo, hi)}")

    @property
    def max_steps(self) -> int:
        return math.ceil(self.time_budget / self.dt - 1e-9)

    def full_space(self) -> BehaviorSpace:
        return BehaviorSpace(tuple(Dimension(n, *self.ranges[n], UNITS[n]) for n in PARAM_NAMES))

    def centers(self) -> dict[str, float]:
        return {n: 0.5 * (lo + hi) for n, (lo, hi) in self.ranges.items()}

    def ego_params(self) -> DriverParams:
        c = self.centers()
        return DriverParams(*(c[n] for n in PARAM_NAMES), coolness=self.coolness)


class ParamPolicy:
    """Hypothetical ACC policy whose behavior state sets a subset of driver parameters.

    Parameters not covered by ``names`` are pinned to the centers of their ranges.
    """

    def __init__(self, env: "LaneChangeEnv", names: Sequence[str]):
        unknown = set(names) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown driver parameters {sorted(unknown)}")
        self.env = env
        self.names = tuple(names)
        centers = env.params.centers()
        self._base = [centers[n] for n in PARAM_NAMES]
        self._slots = [PARAM_NAMES.index(n) for n in self.names]

    def driver(self, beta: Sequence[float]) -> DriverParams:
        values = list(self._base)
        for slot, b in zip(self._slots, beta):
            values[slot] = b
        return DriverParams(*values, coolness=self.env.params.coolness)

    def __call__(self, world: World, agent: int, beta: Sequence[float]) -> float:
        return self.env.other_accel(world, agent, self.driver(beta))


def hypothesis_space(kind: str, params: LaneChangeParams | None = None) -> BehaviorSpace:
    params = params or LaneChangeParams()
    try:
        names = HYPOTHESIS_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown hypothesis space {kind!r}; use one of {sorted(HYPOTHESIS_KINDS)}") from None
    return BehaviorSpace(tuple(Dimension(n, *params.ranges[n], UNITS[n]) for n in names))


def behavior_space_5d(delta_min: float, delta_max: float, rng: RandomSource,
                      params: LaneChangeParams | None = None) -> BehaviorSpace:
    """Per-trial true box of one driver inside the full 5-D parameter space.

    Each dimension gets a width drawn uniformly from ``[delta_min, delta_max]``
    times its range, placed uniformly so that it fits. Coolness is not varied.
    """
    if not 0.0 < delta_min <= delta_max <= 1.0:
        raise ValueError(f"need 0 < delta_min <= delta_max <= 1, got {delta_min}, {delta_max}")
    params = params or LaneChangeParams()
    dims = []
    for n in PARAM_NAMES:
        lo, hi = params.ranges[n]
        span = hi - lo
        width = (delta_min + (delta_max - delta_min) * rng.random()) * span
        start = lo + (span - width) * rng.random()
        dims.append(Dimension(n, start, min(start + width, hi), UNITS[n]))
    return BehaviorSpace(tuple(dims))


class LaneChangeEnv:
    """Joint transition with the ego as agent 0 and other vehicles as agents ``1..n``."""

    def __init__(self, params: LaneChangeParams | None = None):
        self.params = params or LaneChangeParams()
        self._others = tuple(range(1, self.params.n_others + 1))
        self._ego_params = self.params.ego_params()
        self._policies: dict[tuple[str, ...], ParamPolicy] = {}

    def policy_for(self, names: Sequence[str]) -> ParamPolicy:
        """Shared policy object per parameter subset (identity matters for caching)."""
        key = tuple(names)
        if key not in self._policies:
            self._policies[key] = ParamPolicy(self, key)
        return self._policies[key]

    # scenario

    def sample_world(self, rng: RandomSource) -> World:
        p = self.params
        glo, ghi = p.gap_range
        vlo, vhi = p.speed_range
        others = []
        s = p.lead_position
        for i in range(p.n_others):
            if i > 0:
                s -= p.vehicle_length + glo + (ghi - glo) * rng.random()
            others.append(VehicleState(s, vlo + (vhi - vlo) * rng.random(), 0.0, 1.0, p.vehicle_length))
        tail, head = others[-1].s, others[0].s
        ego = VehicleState(tail + (head - tail) * rng.random(), vlo + (vhi - vlo) * rng.random(),
                           0.0, 0.0, p.vehicle_length)
        return World(ego, tuple(others))

    def draw_true_boxes(self, rng: RandomSource) -> list[BehaviorSpace]:
        p = self.params
        return [behavior_space_5d(p.delta_min, p.delta_max, rng, p) for _ in self._others]

    # protocol used by the search

    def ego_actions(self, world: World) -> tuple[Macro, ...]:
        return EGO_MACROS

    def other_agents(self, world: World) -> tuple[int, ...]:
        return self._others

    def is_terminal(self, world: World) -> bool:
        return world.outcome != RUNNING

    # dynamics

    def _ego_in_left(self, world: World) -> bool:
        return world.ego.progress >= self.params.cut_in_progress

    def leader_of(self, world: World, agent: int) -> VehicleState | None:
        """Nearest vehicle ahead in the left lane (the ego counts once it has cut in)."""
        me = world.others[agent - 1]
        best = None
        for i, o in enumerate(world.others):
            if i == agent - 1:
                continue
            if o.s > me.s and (best is None or o.s < best.s):
                best = o
        if self._ego_in_left(world):
            e = world.ego
            if e.s > me.s and (best is None or e.s < best.s):
                best = e
        return best

    def ego_leader(self, world: World) -> VehicleState | None:
        """Left-lane vehicle directly ahead of the ego's longitudinal position."""
        e = world.ego
        best = None
        for o in world.others:
            if o.s > e.s and (best is None or o.s < best.s):
                best = o
        return best

    def other_accel(self, world: World, agent: int, p: DriverParams) -> float:
        me = world.others[agent - 1]
        return acc_accel(me, self.leader_of(world, agent), p)

    def ego_macro_step(self, world: World, macro: Macro) -> tuple[float, float]:
        """Ego acceleration and new lateral progress for one macro action."""
        p = self.params
        ego = world.ego
        if macro.kind == "lane_change" and ego.progress >= 1.0:
            raise ValueError("lane change is only legal on the right lane or while changing")
        if macro.kind == "keep":
            acc = clamp_acc(macro.accel)
        elif macro.kind in ("gap_keep", "lane_change"):
            acc = idm_accel(ego, self.ego_leader(world), self._ego_params)
        else:
            raise ValueError(f"unknown macro {macro!r}")
        progress = ego.progress
        if macro.kind == "lane_change" or 0.0 < progress < 1.0:
            # a started lane change is irreversible
            progress = min(1.0, progress + p.dt / p.t_change)
        return acc, progress

    def step(self, world: World, ego_action: Macro, other_actions: Sequence[float]) -> tuple[World, float, bool]:
        p = self.params
        if world.outcome != RUNNING:
            raise ValueError("step called on a terminal world")
        if len(other_actions) != p.n_others:
            raise ValueError(f"expected {p.n_others} other accelerations, got {len(other_actions)}")
        dt = p.dt
        acc, progress = self.ego_macro_step(world, ego_action)
        ego = _integrate(world.ego, acc, dt)._replace(progress=progress)
        others = tuple(_integrate(o, clamp_acc(a), dt) for o, a in zip(world.others, other_actions))
        step = world.step + 1
        collided = False
        if progress >= p.cut_in_progress:
            for o in others:
                if o.s - o.length < ego.s and ego.s - ego.length < o.s:
                    collided = True
                    break
        if collided:
            outcome, reward = COLLISION, p.collision_reward
        elif progress >= 1.0:
            outcome, reward = SUCCESS, p.goal_reward
        elif step >= p.max_steps:
            outcome, reward = TIMEOUT, 0.0
        else:
            outcome, reward = RUNNING, 0.0
        return World(ego, others, step, outcome), reward, outcome != RUNNING

    def simulate_others(self, world: World, boxes: Sequence[BehaviorSpace], rng: RandomSource) -> list[float]:
        """Fresh driver parameters per vehicle and step, drawn from its true box."""
        policy = self.policy_for(PARAM_NAMES)
        return [policy(world, j, box.sample(rng)) for j, box in zip(self._others, boxes)]


def _integrate(veh: VehicleState, acc: float, dt: float) -> VehicleState:
    v = veh.v + acc * dt
    if v < 0.0:
        v = 0.0
    return veh._replace(s=veh.s + v * dt, v=v, a_last=acc)


def action_tolerance(fraction: float = 0.1) -> float:
    return fraction * (ACC_MAX - ACC_MIN)
