"""Continuous behavior spaces, equal-volume partitions and the hypotheses built on them.

A behavior space is an axis-aligned box of physically interpretable parameters
(a desired gap, a desired velocity, ...). A hypothesis is one cell of a partition
of that box together with the hypothetical policy shared by every hypothesis; it
induces a distribution over actions by drawing the behavior state uniformly from
its cell.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence, Union

import numpy as np

Action = Union[float, Sequence[float]]
BehaviorState = tuple  # one float per dimension
HypotheticalPolicy = Callable[[Any, int, tuple], Action]


class RandomSource(Protocol):
    """Anything with a ``random()`` method returning floats in [0, 1).

    Both ``random.Random`` and ``numpy.random.Generator`` qualify.
    """

    def random(self) -> float: ...


@dataclass(frozen=True)
class Dimension:
    name: str
    lower: float
    upper: float
    unit: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError(f"dimension {self.name!r} has non-finite bounds")
        if not self.lower < self.upper:
            raise ValueError(
                f"dimension {self.name!r}: lower ({self.lower}) must be < upper ({self.upper})"
            )

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class BehaviorSpace:
    """Axis-aligned box of behavior parameters."""

    dims: tuple[Dimension, ...]
    lows: tuple[float, ...] = field(init=False, repr=False, compare=False)
    widths: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dims = tuple(self.dims)
        if not dims:
            raise ValueError("a behavior space needs at least one dimension")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lows", tuple(d.lower for d in dims))
        object.__setattr__(self, "widths", tuple(d.width for d in dims))

    @classmethod
    def from_bounds(cls, bounds: Sequence[tuple], names: Sequence[str] | None = None) -> "BehaviorSpace":
        """Build from ``[(lower, upper), ...]`` or ``[(name, lower, upper), ...]``."""
        dims = []
        for i, b in enumerate(bounds):
            if len(b) == 3:
                name, lo, hi = b
            else:
                lo, hi = b
                name = names[i] if names else f"dim{i}"
            dims.append(Dimension(str(name), float(lo), float(hi)))
        return cls(tuple(dims))

    @classmethod
    def from_config(cls, dims: Sequence[dict]) -> "BehaviorSpace":
        """Build from the config form ``[{name, lower, upper[, unit]}, ...]``."""
        return cls(tuple(
            Dimension(str(d["name"]), float(d["lower"]), float(d["upper"]), str(d.get("unit", "")))
            for d in dims
        ))

    def to_config(self) -> list[dict]:
        return [{"name": d.name, "lower": d.lower, "upper": d.upper, "unit": d.unit} for d in self.dims]

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def highs(self) -> tuple[float, ...]:
        return tuple(d.upper for d in self.dims)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dims)

    @property
    def volume(self) -> float:
        return math.prod(self.widths)

    @property
    def center(self) -> tuple[float, ...]:
        return tuple(d.lower + 0.5 * d.width for d in self.dims)

    def contains(self, point: Sequence[float]) -> bool:
        return len(point) == self.ndim and all(
            d.lower <= v <= d.upper for d, v in zip(self.dims, point)
        )

    def contains_space(self, other: "BehaviorSpace") -> bool:
        return other.ndim == self.ndim and all(
            a.lower <= b.lower and b.upper <= a.upper for a, b in zip(self.dims, other.dims)
        )

    def sample(self, rng: RandomSource) -> BehaviorState:
        """Uniform draw of one behavior state."""
        return tuple(lo + w * rng.random() for lo, w in zip(self.lows, self.widths))


def sample_state(space: BehaviorSpace, rng: RandomSource) -> BehaviorState:
    return space.sample(rng)


@dataclass(frozen=True)
class Partition:
    """Equal-volume grid partition of a behavior space.

    Cells are ordered row-major (last dimension varies fastest). Membership uses
    half-open cells ``[lo, hi)`` except for the last cell along each dimension,
    which is closed on the right, so every point of the parent belongs to
    exactly one cell.
    """

    parent: BehaviorSpace
    cells: tuple[BehaviorSpace, ...]
    cells_per_dim: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.cells)

    def locate(self, point: Sequence[float]) -> int:
        if not self.parent.contains(point):
            raise ValueError(f"point {tuple(point)} lies outside the partitioned space")
        index = 0
        for d, n, v in zip(self.parent.dims, self.cells_per_dim, point):
            i = min(int((v - d.lower) / d.width * n), n - 1)
            # guard against float rounding right at an interior boundary
            w = d.width / n
            if i > 0 and v < d.lower + i * w:
                i -= 1
            elif i < n - 1 and v >= d.lower + (i + 1) * w:
                i += 1
            index = index * n + i
        return index

    def member(self, cell_index: int, point: Sequence[float]) -> bool:
        """Half-open membership test for a single cell."""
        return self.parent.contains(point) and self.locate(point) == cell_index


def partition_equal(space: BehaviorSpace, cells_per_dim: Sequence[int]) -> Partition:
    cells_per_dim = tuple(int(n) for n in cells_per_dim)
    if len(cells_per_dim) != space.ndim:
        raise ValueError(
            f"cells_per_dim has {len(cells_per_dim)} entries, space has {space.ndim} dimensions"
        )
    if any(n < 1 for n in cells_per_dim):
        raise ValueError(f"cells_per_dim entries must be >= 1, got {cells_per_dim}")

    per_dim = []
    for d, n in zip(space.dims, cells_per_dim):
        w = d.width / n
        # last edge pinned to the parent bound, so the union is exact
        edges = [d.lower + i * w for i in range(n)] + [d.upper]
        per_dim.append([Dimension(d.name, edges[i], edges[i + 1], d.unit) for i in range(n)])
    cells = tuple(BehaviorSpace(tuple(combo)) for combo in itertools.product(*per_dim))
    return Partition(space, cells, cells_per_dim)


@dataclass(frozen=True)
class Hypothesis:
    """One partition cell plus the hypothetical policy.

    ``index`` is the zero-based position of the cell in its partition.
    """

    cell: BehaviorSpace
    policy: HypotheticalPolicy
    index: int = 0

    def sample_action(self, history: Any, agent: int, rng: RandomSource) -> Action:
        lows, widths = self.cell.lows, self.cell.widths
        beta = tuple(lo + w * rng.random() for lo, w in zip(lows, widths))
        return self.policy(history, agent, beta)


def make_hypotheses(partition: Partition, policy: HypotheticalPolicy) -> list[Hypothesis]:
    return [Hypothesis(cell, policy, k) for k, cell in enumerate(partition.cells)]


def sample_action(h: Hypothesis, history: Any, agent: int, rng: RandomSource) -> Action:
    return h.sample_action(history, agent, rng)


def _distance_inf(a: Action, b: Action) -> float:
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return abs(a - b)
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def action_likelihood(
    h: Hypothesis,
    history: Any,
    agent: int,
    observed: Action,
    rng: RandomSource,
    m_samples: int = 100,
    tolerance: float = 1.0,
) -> float:
    """Monte-Carlo mass of the hypothesis' action distribution near ``observed``.

    Returns the fraction of ``m_samples`` uniform behavior states from the cell
    whose policy action lies within ``tolerance`` (infinity norm) of the
    observed action. Unnormalized: it is a probability mass inside the
    tolerance ball, not a density.
    """
    if m_samples < 1:
        raise ValueError("m_samples must be >= 1")
    if not tolerance > 0:
        raise ValueError("tolerance must be > 0")
    hits = 0
    for _ in range(m_samples):
        if _distance_inf(h.sample_action(history, agent, rng), observed) <= tolerance:
            hits += 1
    return hits / m_samples
