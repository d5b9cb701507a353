"""Per-agent posterior over hypotheses using the sum posterior.

The likelihood of a hypothesis given the history is the time-average of the
per-step action likelihoods, so a single zero-probability observation does not
wipe a hypothesis out (unlike the product posterior).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .behavior_space import Action, Hypothesis, RandomSource, action_likelihood

PRIOR_TOL = 1e-9


@dataclass(frozen=True)
class BeliefState:
    per_agent: Mapping[int, tuple[float, ...]]
    priors: tuple[float, ...]
    likelihood_sums: Mapping[int, tuple[float, ...]]
    counts: Mapping[int, int]
    fallback: str = "prior"

    @property
    def k(self) -> int:
        return len(self.priors)

    @property
    def agents(self) -> tuple[int, ...]:
        return tuple(self.per_agent)

    @property
    def step_count(self) -> int:
        return max(self.counts.values(), default=0)

    def __getitem__(self, agent: int) -> tuple[float, ...]:
        return self.per_agent[agent]

    def snapshot(self) -> list[float]:
        """Flat posterior array, agents in insertion order."""
        return [p for agent in self.per_agent for p in self.per_agent[agent]]


def init(
    agents: int | Iterable[int],
    k: int,
    priors: Sequence[float] | None = None,
    fallback: str = "prior",
) -> BeliefState:
    """Start every agent at the prior (uniform by default).

    ``agents`` is either a list of agent ids or a count, in which case the ids
    are ``0..agents-1``.
    """
    if k < 1:
        raise ValueError(f"need at least one hypothesis, got k={k}")
    if fallback not in ("prior", "previous"):
        raise ValueError(f"unknown fallback {fallback!r}")
    if priors is None:
        prior = tuple([1.0 / k] * k)
    else:
        prior = tuple(float(p) for p in priors)
        if len(prior) != k:
            raise ValueError(f"prior has length {len(prior)}, expected {k}")
        if any(p < 0 or not math.isfinite(p) for p in prior):
            raise ValueError("prior entries must be finite and nonnegative")
        if abs(sum(prior) - 1.0) > PRIOR_TOL:
            raise ValueError(f"prior sums to {sum(prior)}, expected 1")
    ids = list(range(agents)) if isinstance(agents, int) else list(agents)
    if k == 1:
        prior = (1.0,)
    zeros = tuple([0.0] * k)
    return BeliefState(
        per_agent={a: prior for a in ids},
        priors=prior,
        likelihood_sums={a: zeros for a in ids},
        counts={a: 0 for a in ids},
        fallback=fallback,
    )


def update_with_likelihoods(b: BeliefState, agent: int, likelihoods: Sequence[float]) -> BeliefState:
    """Fold one step of per-hypothesis likelihoods into ``agent``'s posterior."""
    if agent not in b.per_agent:
        raise ValueError(f"unknown agent id {agent!r}")
    if len(likelihoods) != b.k:
        raise ValueError(f"got {len(likelihoods)} likelihoods for {b.k} hypotheses")
    if b.k == 1:
        counts = dict(b.counts)
        counts[agent] += 1
        return replace(b, counts=counts)

    sums = tuple(s + float(l) for s, l in zip(b.likelihood_sums[agent], likelihoods))
    t = b.counts[agent] + 1
    weights = [s / t * p for s, p in zip(sums, b.priors)]
    z = sum(weights)
    if z > 0:
        posterior = tuple(w / z for w in weights)
    elif b.fallback == "prior":
        posterior = b.priors
    else:
        posterior = b.per_agent[agent]

    per_agent = dict(b.per_agent)
    per_agent[agent] = posterior
    likelihood_sums = dict(b.likelihood_sums)
    likelihood_sums[agent] = sums
    counts = dict(b.counts)
    counts[agent] = t
    return replace(b, per_agent=per_agent, likelihood_sums=likelihood_sums, counts=counts)


def update(
    b: BeliefState,
    agent: int,
    observed: Action,
    history: Any,
    hypotheses: Sequence[Hypothesis],
    rng: RandomSource,
    m_samples: int = 100,
    tolerance: float = 1.0,
) -> BeliefState:
    if agent not in b.per_agent:
        raise ValueError(f"unknown agent id {agent!r}")
    if len(hypotheses) != b.k:
        raise ValueError(f"{len(hypotheses)} hypotheses for a belief over {b.k}")
    if b.k == 1:
        return update_with_likelihoods(b, agent, (1.0,))
    likelihoods = [
        action_likelihood(h, history, agent, observed, rng, m_samples, tolerance)
        for h in hypotheses
    ]
    return update_with_likelihoods(b, agent, likelihoods)


def sample_joint_type(b: BeliefState, rng: RandomSource) -> dict[int, int]:
    """Independent categorical draw of one hypothesis index per agent."""
    out = {}
    for agent, probs in b.per_agent.items():
        if len(probs) == 1:
            out[agent] = 0
            continue
        u = rng.random()
        acc = 0.0
        choice = len(probs) - 1
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                choice = i
                break
        # rounding can leave u >= acc; fall back to the last index with mass
        if choice == len(probs) - 1 and probs[choice] == 0.0:
            choice = max(i for i, p in enumerate(probs) if p > 0)
        out[agent] = choice
    return out


def normalized_belief_std(b: BeliefState) -> float:
    """Population std of all posterior entries divided by the uniform value 1/K."""
    values = np.asarray(b.snapshot(), dtype=float)
    if values.size == 0:
        return 0.0
    return float(values.std() * b.k)
