"""Chain-intersection crossing world.

``N`` agents move along 1-D chains that all pass through ``x_intersect``. Agent 0
is the ego; agents ``1..N-1`` follow the desired-gap policy with a behavior
state (the desired gap) redrawn every step from a hidden per-trial interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

from ..behavior_space import BehaviorSpace, Dimension, RandomSource

EGO = 0

SUCCESS = "success"
COLLISION = "collision"
TIMEOUT = "timeout"
RUNNING = "running"

TRUE_SPACES = {
    "symmetric": (-5.0, 5.0),
    "unsymmetric": (-2.5, 5.0),
}


@dataclass(frozen=True)
class CrossingParams:
    n_agents: int = 9
    x_intersect: float = 15.0
    x_goal: float = 17.0
    x_min: float = 0.0
    x_max: float = 17.0
    initial_position: float = 5.0
    min_velocity: float = -5.0
    max_velocity: float = 5.0
    ego_actions: tuple[float, ...] = (-1.0, 0.0, 1.0, 2.0)
    collision_reward: float = -1000.0
    goal_reward: float = 100.0
    max_steps: int = 50

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("crossing needs the ego and at least one other agent")
        if not self.x_intersect < self.x_goal <= self.x_max:
            raise ValueError("require x_intersect < x_goal <= x_max")
        if not self.x_min <= self.initial_position <= self.x_max:
            raise ValueError("initial position outside the chain")

    @property
    def action_range(self) -> float:
        return self.max_velocity - self.min_velocity


class CrossingState(NamedTuple):
    positions: tuple[float, ...]
    last_actions: tuple[float, ...]
    step: int
    crossed: tuple[bool, ...]
    outcome: str = RUNNING


def gap_policy(
    ego_position: float,
    ego_last_action: float,
    own_position: float,
    own_last_action: float,
    omega: float,
    min_velocity: float = -5.0,
    max_velocity: float = 5.0,
) -> float:
    """Desired-gap hypothetical policy.

    The ego position is predicted one step ahead with its last action; the
    agent then moves by the gap error, limited to the velocity bounds. With
    ``omega <= 0`` (aiming to pass ahead of the ego) it never decelerates
    below its previous action.
    """
    gap_error = ego_position + ego_last_action - omega - own_position
    a = min(max(gap_error, min_velocity), max_velocity)
    if omega <= 0.0 and a < own_last_action:
        a = own_last_action
    return a


def expert_full_space() -> BehaviorSpace:
    return BehaviorSpace((Dimension("desired_gap", -10.0, 10.0),))


def true_behavior_space(variant: str = "symmetric") -> BehaviorSpace:
    try:
        lo, hi = TRUE_SPACES[variant]
    except KeyError:
        raise ValueError(f"unknown true-space variant {variant!r}; use one of {sorted(TRUE_SPACES)}") from None
    return BehaviorSpace((Dimension("desired_gap", lo, hi),))


def draw_true_boxes(n_others: int, true_space: BehaviorSpace, rng: RandomSource) -> list[tuple[float, float]]:
    """Per other agent, an interval ``[omega_left, omega_right]`` inside the true space.

    Endpoints are two independent uniform draws, sorted.
    """
    lo, w = true_space.lows[0], true_space.widths[0]
    boxes = []
    for _ in range(n_others):
        a = lo + w * rng.random()
        b = lo + w * rng.random()
        boxes.append((min(a, b), max(a, b)))
    return boxes


class CrossingEnv:
    """Deterministic joint transition, ego reward and terminal test."""

    def __init__(self, params: CrossingParams | None = None):
        self.params = params or CrossingParams()
        self._others = tuple(range(1, self.params.n_agents))
        self.policy = self._policy
        self._ego_arr = np.array(self.params.ego_actions, dtype=float)

    def initial_state(self) -> CrossingState:
        p = self.params
        n = p.n_agents
        return CrossingState((p.initial_position,) * n, (0.0,) * n, 0, (False,) * n)

    def ego_actions(self, state: CrossingState) -> tuple[float, ...]:
        return self.params.ego_actions

    def other_agents(self, state: CrossingState) -> tuple[int, ...]:
        return self._others

    def is_terminal(self, state: CrossingState) -> bool:
        return state.outcome != RUNNING

    def _policy(self, state: CrossingState, agent: int, beta: Sequence[float]) -> float:
        p = self.params
        return gap_policy(
            state.positions[EGO], state.last_actions[EGO],
            state.positions[agent], state.last_actions[agent],
            beta[0], p.min_velocity, p.max_velocity,
        )

    def step(self, state: CrossingState, ego_action: float, other_actions: Sequence[float]) -> tuple[CrossingState, float, bool]:
        p = self.params
        if ego_action not in p.ego_actions:
            raise ValueError(f"ego action {ego_action} not in {p.ego_actions}")
        if len(other_actions) != p.n_agents - 1:
            raise ValueError(f"expected {p.n_agents - 1} other actions, got {len(other_actions)}")
        if other_actions and (min(other_actions) < p.min_velocity - 1e-12 or max(other_actions) > p.max_velocity + 1e-12):
            raise ValueError(f"other action outside [{p.min_velocity}, {p.max_velocity}]: {other_actions}")
        if state.outcome != RUNNING:
            raise ValueError("step called on a terminal state")
        return self._step(state, ego_action, other_actions)

    def _step(self, state: CrossingState, ego_action: float, other_actions: Sequence[float]) -> tuple[CrossingState, float, bool]:
        p = self.params
        xi, x_min, x_max = p.x_intersect, p.x_min, p.x_max
        actions = (ego_action, *other_actions)
        positions = []
        crossed = list(state.crossed)
        crossing_now = [False] * p.n_agents
        for j, (x, a) in enumerate(zip(state.positions, actions)):
            nx = x + a
            if nx < x_min:
                nx = x_min
            elif nx > x_max:
                nx = x_max
            positions.append(nx)
            if not crossed[j] and x < xi <= nx:
                crossed[j] = True
                crossing_now[j] = True
        step = state.step + 1
        collided = crossing_now[EGO] and any(crossing_now[1:])
        goal = positions[EGO] >= p.x_goal
        if collided:
            outcome, reward = COLLISION, p.collision_reward
        elif goal:
            outcome, reward = SUCCESS, p.goal_reward
        elif step >= p.max_steps:
            outcome, reward = TIMEOUT, 0.0
        else:
            outcome, reward = RUNNING, 0.0
        nxt = CrossingState(tuple(positions), actions, step, tuple(crossed), outcome)
        return nxt, reward, outcome != RUNNING

    def simulate_others(self, state: CrossingState, boxes: Sequence[tuple[float, float]], rng: RandomSource) -> list[float]:
        """Actions of all other agents with a fresh desired gap per agent and step."""
        out = []
        for j, (lo, hi) in zip(self._others, boxes):
            omega = lo + (hi - lo) * rng.random()
            out.append(self._policy(state, j, (omega,)))
        return out

    def rollout(self, state, hypotheses, types, depth, gamma, rng, ego_index=None) -> float:
        """Compiled rollout for the desired-gap policy; other policies use the generic loop.

        Takes a single draw from ``rng`` to seed the compiled generator, so the
        caller's stream advances by exactly one value per rollout.
        """
        lows = []
        widths = []
        for j in self._others:
            h = hypotheses[j][types[j]]
            if h.policy is not self.policy or h.cell.ndim != 1:
                return _generic_rollout(self, state, hypotheses, types, depth, gamma, rng, ego_index)
            lows.append(h.cell.lows[0])
            widths.append(h.cell.widths[0])
        p = self.params
        seed = int(rng.random() * 4294967296.0)
        return float(_rollout_kernel(
            np.array(state.positions), np.array(state.last_actions), np.array(state.crossed),
            state.step, np.array(lows), np.array(widths), seed, self._ego_arr,
            -1 if ego_index is None else min(ego_index, len(p.ego_actions) - 1),
            depth, gamma, p.min_velocity, p.max_velocity, p.x_intersect, p.x_min, p.x_max,
            p.x_goal, p.max_steps, p.collision_reward, p.goal_reward,
        ))


@njit(cache=True)
def _rollout_kernel(pos, last, crossed, step, lows, widths, seed, ego_set, ego_index, depth, gamma,
                    vmin, vmax, xi, x_min, x_max, x_goal, max_steps, r_collide, r_goal):
    n = pos.shape[0]
    n_ego = ego_set.shape[0]
    pos = pos.copy()
    last = last.copy()
    crossed = crossed.copy()
    acts = np.empty(n)
    disc = 1.0
    np.random.seed(seed)
    for _ in range(depth):
        if ego_index < 0:
            acts[0] = ego_set[min(int(np.random.random() * n_ego), n_ego - 1)]
        else:
            acts[0] = ego_set[ego_index]
        ego_pred = pos[0] + last[0]
        for j in range(1, n):
            omega = lows[j - 1] + widths[j - 1] * np.random.random()
            a = ego_pred - omega - pos[j]
            if a < vmin:
                a = vmin
            elif a > vmax:
                a = vmax
            if omega <= 0.0 and a < last[j]:
                a = last[j]
            acts[j] = a
        ego_cross = False
        other_cross = False
        for j in range(n):
            x = pos[j]
            nx = x + acts[j]
            if nx < x_min:
                nx = x_min
            elif nx > x_max:
                nx = x_max
            if not crossed[j] and x < xi and xi <= nx:
                crossed[j] = True
                if j == 0:
                    ego_cross = True
                else:
                    other_cross = True
            pos[j] = nx
            last[j] = acts[j]
        step += 1
        if ego_cross and other_cross:
            return disc * r_collide
        if pos[0] >= x_goal:
            return disc * r_goal
        if step >= max_steps:
            return 0.0
        disc *= gamma
    return 0.0


def _generic_rollout(env, state, hypotheses, types, depth, gamma, rng, ego_index=None) -> float:
    total, disc = 0.0, 1.0
    for _ in range(depth):
        actions = env.ego_actions(state)
        if ego_index is None:
            ego = actions[int(rng.random() * len(actions))]
        else:
            ego = actions[min(ego_index, len(actions) - 1)]
        others = [hypotheses[j][types[j]].sample_action(state, j, rng) for j in env.other_agents(state)]
        state, r, term = env.step(state, ego, others)
        total += disc * r
        disc *= gamma
        if term:
            break
    return total


def action_tolerance(params: CrossingParams, fraction: float = 0.1) -> float:
    return fraction * params.action_range

