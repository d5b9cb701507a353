"""Sample-complexity bookkeeping for SBG vs. RSBG tree search.

With ``N`` agents (ego included), ``N' = N - 1`` others, ``K`` hypotheses and a
prediction horizon ``t``:

    O_SBG  = |B|^(N' t) * K^(N' - N' t)
    O_RSBG = |B|^t      * K^(N - t)

``|B|`` (how many samples represent the behavior space) is symbolic, so only
exponents are computed. The headline ratio ``(|B| / K)^e`` uses ``e = N' t``:
the SBG joint action space term ``(|B| / K)^(N' t)`` against the decoupled
per-hypothesis minimum. The exact quotient of the two expressions above is
reported separately in ``quotient``.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Power:
    """``|B|^b * K^k``."""

    b: int
    k: int

    def evaluate(self, behavior_space_samples: float, k: int) -> float:
        return float(behavior_space_samples) ** self.b * float(k) ** self.k

    def __str__(self) -> str:
        return f"|B|^{self.b} * K^{self.k}"


@dataclass(frozen=True)
class ComplexityRatio:
    sbg: Power
    rsbg: Power
    ratio_exponent: int
    quotient: Power

    @property
    def expression(self) -> str:
        return f"(|B|/K)^{self.ratio_exponent}"

    def to_dict(self) -> dict:
        return {
            "o_sbg": {"B": self.sbg.b, "K": self.sbg.k},
            "o_rsbg": {"B": self.rsbg.b, "K": self.rsbg.k},
            "ratio_exponent": self.ratio_exponent,
            "ratio": self.expression,
            "exact_quotient": {"B": self.quotient.b, "K": self.quotient.k},
        }


def complexity_ratio(n_agents: int, horizon: int) -> ComplexityRatio:
    if n_agents < 2:
        raise ValueError("need at least two agents (ego plus one other)")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    others = n_agents - 1
    sbg = Power(others * horizon, others - others * horizon)
    rsbg = Power(horizon, n_agents - horizon)
    quotient = Power(sbg.b - rsbg.b, sbg.k - rsbg.k)
    return ComplexityRatio(sbg, rsbg, others * horizon, quotient)


def complexity_values(behavior_space_samples: float, k: int, n_agents: int, horizon: int) -> tuple[float, float]:
    """Numeric (O_SBG, O_RSBG) for a concrete ``|B|`` and ``K``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    r = complexity_ratio(n_agents, horizon)
    return r.sbg.evaluate(behavior_space_samples, k), r.rsbg.evaluate(behavior_space_samples, k)
