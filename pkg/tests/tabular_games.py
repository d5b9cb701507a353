"""Small two-agent games with exhaustive value oracles.

The opponent's hypothetical policy maps a behavior state in [0, 1) to one of
its discrete actions, so a single hypothesis over [0, 1] makes every opponent
action equally likely.
"""

from __future__ import annotations

import random
from itertools import product

from rsbg.behavior_space import BehaviorSpace, Dimension, Hypothesis


class TabularGame:
    """Simultaneous-move game tree of fixed depth.

    ``payoff(history, a, b)`` gives the ego reward for ego action index ``a`` and
    opponent action index ``b`` after ``history`` (a tuple of previous joint
    index pairs). State is the history itself.
    """

    def __init__(self, n_ego: int, n_other: int, depth: int, payoff):
        self.n_ego = n_ego
        self.n_other = n_other
        self.depth = depth
        self.payoff = payoff
        self._ego = tuple(range(n_ego))

    def initial_state(self):
        return ()

    def ego_actions(self, state):
        return self._ego

    def other_agents(self, state):
        return (1,)

    def is_terminal(self, state):
        return len(state) >= self.depth

    def step(self, state, ego_action, other_actions):
        b = int(other_actions[0])
        r = self.payoff(state, ego_action, b)
        nxt = state + ((ego_action, b),)
        return nxt, r, len(nxt) >= self.depth

    def policy(self, history, agent, beta):
        return min(int(beta[0] * self.n_other), self.n_other - 1)

    def hypotheses(self):
        cell = BehaviorSpace((Dimension("choice", 0.0, 1.0),))
        return {1: [Hypothesis(cell, self.policy)]}

    # exhaustive oracles
    def maximin(self, gamma: float, state=()) -> float:
        if self.is_terminal(state):
            return 0.0
        return max(
            min(self._backup(state, a, b, gamma, self.maximin) for b in range(self.n_other))
            for a in range(self.n_ego)
        )

    def minimax(self, gamma: float, state=()) -> float:
        if self.is_terminal(state):
            return 0.0
        return min(
            max(self._backup(state, a, b, gamma, self.minimax) for a in range(self.n_ego))
            for b in range(self.n_other)
        )

    def uniform_value(self, gamma: float, state=()) -> float:
        if self.is_terminal(state):
            return 0.0
        return max(
            sum(self._backup(state, a, b, gamma, self.uniform_value) for b in range(self.n_other)) / self.n_other
            for a in range(self.n_ego)
        )

    def _backup(self, state, a, b, gamma, value):
        return self.payoff(state, a, b) + gamma * value(gamma, state + ((a, b),))


def table_game(tables: dict, n_ego: int, n_other: int, depth: int) -> TabularGame:
    """Game from explicit payoff matrices keyed by history."""
    return TabularGame(n_ego, n_other, depth, lambda h, a, b: tables[h][a][b])


def saddle_game() -> TabularGame:
    """Two-step 2x2 game whose stage matrices all have pure saddle points."""
    first = [[0.3, 0.1], [0.4, 0.2]]
    tables = {(): first}
    follow = {
        (0, 0): [[0.9, 0.5], [0.2, 0.1]],
        (0, 1): [[0.6, 0.7], [0.8, 0.3]],
        (1, 0): [[0.1, 0.2], [0.5, 0.4]],
        (1, 1): [[0.7, 0.6], [0.3, 0.2]],
    }
    for (a, b), m in follow.items():
        tables[((a, b),)] = m
    return table_game(tables, 2, 2, 2)


def three_action_game() -> TabularGame:
    """Two-step 3x3 game with distinct maximin and uniform-expectation choices."""
    first = [
        [0.50, 0.45, 0.55],
        [0.90, 0.05, 0.90],
        [0.20, 0.15, 0.25],
    ]
    tables = {(): first}
    for a, b in product(range(3), range(3)):
        shift = 0.05 * ((a + 2 * b) % 3)
        tables[((a, b),)] = [
            [0.30 + shift, 0.20 + shift, 0.40 + shift],
            [0.60, 0.00, 0.60],
            [0.10, 0.10, 0.10],
        ]
    return table_game(tables, 3, 3, 2)


def chain(length: int, goal_reward: float = 1.0) -> TabularGame:
    """Single-agent deterministic chain: ego index 1 advances, 0 stays; reward on the last step.

    The opponent has one action and no influence.
    """
    def payoff(history, a, b):
        pos = sum(x for x, _ in history) + a
        return goal_reward if len(history) == length - 1 and pos == length else 0.0

    return TabularGame(2, 1, length, payoff)


def has_pure_saddles(game: TabularGame, gamma: float, state=()) -> bool:
    """True when every stage matrix, with continuation values backed up, has a pure saddle point."""
    if game.is_terminal(state):
        return True
    m = [[game._backup(state, a, b, gamma, game.minimax) for b in range(game.n_other)]
         for a in range(game.n_ego)]
    lower = max(min(row) for row in m)
    upper = min(max(m[a][b] for a in range(game.n_ego)) for b in range(game.n_other))
    if abs(upper - lower) > 1e-12:
        return False
    return all(has_pure_saddles(game, gamma, state + ((a, b),))
               for a in range(game.n_ego) for b in range(game.n_other))


def _planted_matrix(rng, n_ego: int, n_other: int) -> list[list[float]]:
    # row i sits above 0.5, column j below it, so (i, j) is a pure saddle
    i, j = rng.randrange(n_ego), rng.randrange(n_other)
    mat = [[round(rng.random(), 2) for _ in range(n_other)] for _ in range(n_ego)]
    for b in range(n_other):
        mat[i][b] = round(rng.uniform(0.5, 1.0), 2)
    for a in range(n_ego):
        mat[a][j] = round(rng.uniform(0.0, 0.5), 2)
    mat[i][j] = 0.5
    return mat


def planted_game(seed: int, n_ego: int, n_other: int) -> TabularGame:
    """Two-step random game whose raw stage matrices each carry a planted saddle point."""
    rng = random.Random(seed)
    tables = {(): _planted_matrix(rng, n_ego, n_other)}
    for a, b in product(range(n_ego), range(n_other)):
        tables[((a, b),)] = _planted_matrix(rng, n_ego, n_other)
    return table_game(tables, n_ego, n_other, 2)


def saddle_suite(gamma: float, per_shape: int = 3) -> dict[str, TabularGame]:
    """First planted games per shape that keep a pure saddle after backing up continuation values."""
    suite = {}
    for n_ego, n_other in ((3, 3), (2, 3), (3, 2)):
        seed = found = 0
        while found < per_shape:
            g = planted_game(seed, n_ego, n_other)
            if has_pure_saddles(g, gamma):
                suite[f"planted_{n_ego}x{n_other}_{seed}"] = g
                found += 1
            seed += 1
    return suite
