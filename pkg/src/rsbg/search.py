"""Monte-Carlo tree search over joint multi-agent histories.

One parameterized search covers the robust (RSBG, RMDP) and expectation-based
(SBG, MDP) decision models:

* a joint type is drawn from the belief at the start of every iteration and
  kept for the whole simulation;
* the ego action is chosen with UCB1 over min-max normalized returns;
* other agents pick from a progressively widened set of actions sampled from
  their current hypothesis, either the worst case for the ego (argmin of the
  per-hypothesis ego return) or uniformly at random.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Hashable, Mapping, Protocol, Sequence

from .behavior_space import Action, Hypothesis, RandomSource
from .belief import BeliefState, sample_joint_type

log = logging.getLogger(__name__)


class DomainError(RuntimeError):
    """Raised when an environment cannot be planned in (e.g. no ego actions)."""


class Mode(str, enum.Enum):
    RSBG = "RSBG"
    SBG = "SBG"
    RMDP = "RMDP"
    MDP = "MDP"
    RSBG_FULL_INFO = "RSBGFullInfo"
    SBG_FULL_INFO = "SBGFullInfo"

    @property
    def worst_case(self) -> bool:
        return self in (Mode.RSBG, Mode.RMDP, Mode.RSBG_FULL_INFO)

    @property
    def hypothesis_source(self) -> str:
        """``partition``, ``full`` (single cell = whole space) or ``true`` (per-agent true box)."""
        if self in (Mode.RSBG, Mode.SBG):
            return "partition"
        if self in (Mode.RMDP, Mode.MDP):
            return "full"
        return "true"


class Environment(Protocol):
    def ego_actions(self, state: Any) -> Sequence[Any]: ...

    def other_agents(self, state: Any) -> Sequence[int]: ...

    def step(self, state: Any, ego_action: Any, other_actions: Sequence[Action]) -> tuple[Any, float, bool]: ...

    def is_terminal(self, state: Any) -> bool: ...


@dataclass(frozen=True)
class PlannerConfig:
    mode: Mode = Mode.RSBG
    iterations: int = 2000
    gamma: float = 0.9
    k0: float = 4.0
    alpha0: float = 0.25
    ucb_c: float = 2.0 * math.sqrt(2.0)
    max_depth: int = 30
    rollout_depth: int = 15
    ego_rollout: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.iterations < 1:
            raise ValueError(f"iterations must be positive, got {self.iterations}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.k0 > 0:
            raise ValueError(f"k0 must be > 0, got {self.k0}")
        if not 0 < self.alpha0 < 1:
            raise ValueError(f"alpha0 must lie in (0, 1), got {self.alpha0}")
        if not self.ucb_c > 0:
            raise ValueError(f"ucb_c must be > 0, got {self.ucb_c}")
        if self.max_depth < 1 or self.rollout_depth < 1:
            raise ValueError("max_depth and rollout_depth must be positive")
        if self.ego_rollout is not None and self.ego_rollout < 0:
            raise ValueError(f"ego_rollout must be a non-negative action index or None, got {self.ego_rollout}")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value, "iterations": self.iterations, "gamma": self.gamma,
            "k0": self.k0, "alpha0": self.alpha0, "ucb_c": self.ucb_c,
            "max_depth": self.max_depth, "rollout_depth": self.rollout_depth,
            "ego_rollout": self.ego_rollout, "seed": self.seed,
        }


def action_key(a: Action) -> Hashable:
    """Discretized node key for a (possibly continuous) action."""
    if isinstance(a, (int, float)):
        return round(float(a), 9)
    return tuple(round(float(x), 9) for x in a)


class OtherStats:
    """Progressively widened action set of one (agent, hypothesis) pair at one node."""

    __slots__ = ("n", "actions", "keys", "q", "visits", "updates")

    def __init__(self):
        self.n = 0
        self.actions: list[Action] = []
        self.keys: list[Hashable] = []
        self.q: list[float] = []
        self.visits: list[int] = []
        self.updates = 0

    def add(self, action: Action) -> int:
        key = action_key(action)
        try:
            return self.keys.index(key)
        except ValueError:
            self.actions.append(action)
            self.keys.append(key)
            self.q.append(0.0)
            self.visits.append(0)
            return len(self.actions) - 1


class SearchNode:
    __slots__ = ("state", "reward", "terminal", "ego_n", "ego_q", "n", "other", "children", "n_ego")

    def __init__(self, state: Any, n_ego: int, reward: float = 0.0, terminal: bool = False):
        self.state = state
        self.reward = reward
        self.terminal = terminal
        self.n_ego = n_ego
        self.ego_n = [0] * n_ego
        self.ego_q = [0.0] * n_ego
        self.n = 0
        self.other: dict[tuple[int, int], OtherStats] = {}
        self.children: dict[Hashable, SearchNode] = {}

    def stats(self, agent: int, hypothesis: int) -> OtherStats:
        key = (agent, hypothesis)
        s = self.other.get(key)
        if s is None:
            s = self.other[key] = OtherStats()
        return s


@dataclass
class SearchResult:
    action: Any
    action_index: int
    q_values: list[float]
    visits: list[int]
    iterations: int
    wall_time: float
    type_counts: dict = field(default_factory=dict, repr=False)
    root: SearchNode | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "action_index": self.action_index,
            "q_values": self.q_values,
            "visits": self.visits,
            "iterations": self.iterations,
        }


def widening_bound(n: int, cfg: PlannerConfig) -> int:
    return math.ceil(cfg.k0 * n ** cfg.alpha0) if n > 0 else 0


def select_ego_action(node: SearchNode, cfg: PlannerConfig) -> int:
    """UCB1 on min-max normalized mean returns; unvisited actions first, in index order."""
    ego_n = node.ego_n
    for i, n in enumerate(ego_n):
        if n == 0:
            return i
    q = node.ego_q
    lo, hi = min(q), max(q)
    span = hi - lo
    log_total = math.log(sum(ego_n))
    best, best_val = 0, -math.inf
    for i, (qi, ni) in enumerate(zip(q, ego_n)):
        qn = (qi - lo) / span if span > 0 else 0.0
        val = qn + cfg.ucb_c * math.sqrt(log_total / ni)
        if val > best_val:
            best, best_val = i, val
    return best


def select_other_action(
    node: SearchNode,
    agent: int,
    sampled_type: int,
    hypothesis: Hypothesis,
    cfg: PlannerConfig,
    rng: RandomSource,
    worst_case: bool | None = None,
) -> int:
    """Pick an action index in the node's widened set for (agent, sampled_type).

    Widens with a fresh sample from the hypothesis while the set is empty or
    smaller than ``ceil(k0 * N**alpha0)``; otherwise returns the ego-worst
    expanded action (worst-case modes) or a uniformly random one.
    """
    if worst_case is None:
        worst_case = cfg.mode.worst_case
    s = node.stats(agent, sampled_type)
    size = len(s.actions)
    if size == 0 or size < widening_bound(s.n, cfg):
        idx = s.add(hypothesis.sample_action(node.state, agent, rng))
        # a repeated draw leaves the set unchanged; worst-case modes then select
        if idx == size or not worst_case:
            return idx
    if worst_case:
        q = s.q
        best, best_val = 0, q[0]
        for i in range(1, size):
            if q[i] < best_val:
                best, best_val = i, q[i]
        return best
    return int(rng.random() * size)


PathEntry = tuple  # (node, ego index, ((agent, type, action index), ...), reward)


def backpropagate(path: Sequence[PathEntry], leaf_value: float, cfg: PlannerConfig) -> float:
    """Running-mean backup of discounted ego returns from leaf to root.

    Each entry is ``(node, ego_index, others, reward)`` where ``reward`` is the
    ego reward of the transition taken from ``node`` and ``others`` lists the
    sampled (agent, type, action index) triples of this iteration. Returns the
    root return.
    """
    g = leaf_value
    gamma = cfg.gamma
    for node, ego_idx, others, reward in reversed(path):
        g = reward + gamma * g
        node.n += 1
        n = node.ego_n[ego_idx] + 1
        node.ego_n[ego_idx] = n
        node.ego_q[ego_idx] += (g - node.ego_q[ego_idx]) / n
        for agent, typ, idx in others:
            s = node.other[(agent, typ)]
            s.n += 1
            s.updates += 1
            v = s.visits[idx] + 1
            s.visits[idx] = v
            s.q[idx] += (g - s.q[idx]) / v
    return g


def rollout(env: Environment, state: Any, hypotheses: Mapping[int, Sequence[Hypothesis]],
            types: Mapping[int, int], cfg: PlannerConfig, rng: RandomSource) -> float:
    """Discounted return with hypothesis-driven others.

    The ego acts uniformly at random unless ``cfg.ego_rollout`` fixes an action
    index (clipped to the available actions).
    """
    fast = getattr(env, "rollout", None)
    if fast is not None:
        return fast(state, hypotheses, types, cfg.rollout_depth, cfg.gamma, rng, cfg.ego_rollout)
    total, disc = 0.0, 1.0
    fixed = cfg.ego_rollout
    for _ in range(cfg.rollout_depth):
        actions = env.ego_actions(state)
        if fixed is None:
            ego = actions[int(rng.random() * len(actions))]
        else:
            ego = actions[min(fixed, len(actions) - 1)]
        others = [hypotheses[j][types[j]].sample_action(state, j, rng) for j in env.other_agents(state)]
        state, r, term = env.step(state, ego, others)
        total += disc * r
        disc *= cfg.gamma
        if term:
            break
    return total


def _simulate(env, root: SearchNode, hypotheses, types, cfg: PlannerConfig, rng) -> float:
    path = []
    node = root
    worst_case = cfg.mode.worst_case
    agents = env.other_agents(root.state)
    depth = 0
    leaf_value = 0.0
    while True:
        ego_idx = select_ego_action(node, cfg)
        picks = []
        others = []
        key_parts = [ego_idx]
        for j in agents:
            typ = types[j]
            idx = select_other_action(node, j, typ, hypotheses[j][typ], cfg, rng, worst_case)
            s = node.other[(j, typ)]
            picks.append((j, typ, idx))
            others.append(s.actions[idx])
            key_parts.append(s.keys[idx])
        key = tuple(key_parts)
        child = node.children.get(key)
        new = child is None
        if new:
            ego_actions = env.ego_actions(node.state)
            s2, r, term = env.step(node.state, ego_actions[ego_idx], others)
            n_ego = 0 if term else len(env.ego_actions(s2))
            if not term and n_ego == 0:
                raise DomainError("environment offers no ego actions in a non-terminal state")
            child = SearchNode(s2, n_ego, r, term)
            node.children[key] = child
        path.append((node, ego_idx, picks, child.reward))
        depth += 1
        if child.terminal:
            break
        if new:
            leaf_value = rollout(env, child.state, hypotheses, types, cfg, rng)
            break
        if depth >= cfg.max_depth:
            break
        node = child
    return backpropagate(path, leaf_value, cfg)


def plan(
    env: Environment,
    state: Any,
    belief: BeliefState,
    hypotheses: Mapping[int, Sequence[Hypothesis]],
    cfg: PlannerConfig,
    rng: RandomSource,
    keep_tree: bool = False,
) -> SearchResult:
    """Run ``cfg.iterations`` simulations from ``state`` and pick the ego action.

    ``hypotheses`` maps each other agent to its hypothesis list; its length
    must match the belief dimension for that agent.
    """
    if cfg.iterations < 1:
        raise ValueError("iteration budget must be positive")
    ego_actions = env.ego_actions(state)
    if not ego_actions:
        raise DomainError("no legal ego actions")
    for j in env.other_agents(state):
        if j not in hypotheses:
            raise ValueError(f"no hypotheses for agent {j}")
        if j in belief.per_agent and len(hypotheses[j]) != len(belief.per_agent[j]):
            raise ValueError(f"agent {j}: {len(hypotheses[j])} hypotheses, belief over {len(belief.per_agent[j])}")

    start = time.perf_counter()
    root = SearchNode(state, len(ego_actions))
    type_counts: dict[tuple[int, int], int] = {}
    for _ in range(cfg.iterations):
        types = sample_joint_type(belief, rng)
        for j, t in types.items():
            type_counts[(j, t)] = type_counts.get((j, t), 0) + 1
        _simulate(env, root, hypotheses, types, cfg, rng)

    best, best_q = 0, -math.inf
    for i, (q, n) in enumerate(zip(root.ego_q, root.ego_n)):
        if n > 0 and q > best_q:
            best, best_q = i, q
    result = SearchResult(
        action=ego_actions[best],
        action_index=best,
        q_values=list(root.ego_q),
        visits=list(root.ego_n),
        iterations=cfg.iterations,
        wall_time=time.perf_counter() - start,
        type_counts=type_counts,
        root=root if keep_tree else None,
    )
    if log.isEnabledFor(logging.DEBUG):
        log.debug("search %s", result.to_dict())
    return result
