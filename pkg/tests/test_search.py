import math
import random

import pytest

from rsbg import belief as B
from rsbg.search import (
    Mode,
    PlannerConfig,
    SearchNode,
    backpropagate,
    plan,
    select_ego_action,
    select_other_action,
    widening_bound,
)
from tabular_games import chain, saddle_game, table_game, three_action_game


def run(game, mode, iterations, seed=0, **kw):
    cfg = PlannerConfig(mode=mode, iterations=iterations, max_depth=game.depth + 1, **kw)
    return plan(game, (), B.init([1], 1), game.hypotheses(), cfg, random.Random(seed), keep_tree=True)


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(iterations=0)
    with pytest.raises(ValueError):
        PlannerConfig(gamma=1.5)
    with pytest.raises(ValueError):
        PlannerConfig(alpha0=1.0)
    with pytest.raises(ValueError):
        PlannerConfig(mode="nope")
    assert PlannerConfig(mode="SBG").mode is Mode.SBG


def test_mode_properties():
    assert [m.value for m in Mode if m.worst_case] == ["RSBG", "RMDP", "RSBGFullInfo"]
    assert Mode.MDP.hypothesis_source == "full"
    assert Mode("SBGFullInfo").hypothesis_source == "true"


def test_chain_value_matches_value_iteration():
    # mean backups keep a small UCB exploration bias, about 0.01 at 1e4 iterations
    g = chain(3)
    r = run(g, "SBG", 50_000)
    assert r.action == 1
    assert max(r.q_values) == pytest.approx(g.maximin(0.9), abs=0.01)


def test_one_step_matrix_game_maximin_choice():
    # row minima 0.1 and 0.2, so the second row is the maximin choice
    g = table_game({(): [[0.9, 0.1], [0.2, 0.3]]}, 2, 2, 1)
    assert run(g, "RSBG", 2_000).action == 1


def test_one_step_matrix_game_expectation_choice():
    g = table_game({(): [[0.9, 0.1], [0.2, 0.3]]}, 2, 2, 1)
    r = run(g, "SBG", 50_000)
    assert r.action == 0
    assert r.q_values[0] == pytest.approx(0.5, abs=0.05)


def test_saddle_game_values():
    g = saddle_game()
    assert g.maximin(0.9) == pytest.approx(g.minimax(0.9))
    assert max(run(g, "RSBG", 50_000).q_values) == pytest.approx(g.minimax(0.9), abs=0.05)
    assert max(run(g, "SBG", 50_000).q_values) == pytest.approx(g.uniform_value(0.9), abs=0.05)


def test_opponent_commits_first_without_saddle():
    # the widened set is shared across ego actions, so the worst case is the upper value
    g = three_action_game()
    assert g.minimax(0.9) > g.maximin(0.9)
    assert max(run(g, "RSBG", 50_000).q_values) == pytest.approx(g.minimax(0.9), abs=0.02)


def test_unvisited_ego_actions_first():
    node = SearchNode(None, 4)
    cfg = PlannerConfig()
    assert select_ego_action(node, cfg) == 0
    node.ego_n = [3, 0, 0, 0]
    assert select_ego_action(node, cfg) == 1


def test_ucb_prefers_higher_value_when_counts_equal():
    node = SearchNode(None, 2)
    node.ego_n = [100, 100]
    node.ego_q = [-5.0, 7.0]
    assert select_ego_action(node, PlannerConfig(ucb_c=2.0)) == 1


def test_ucb_formula_explores():
    node = SearchNode(None, 2)
    node.ego_n = [1000, 2]
    node.ego_q = [1.0, 0.0]
    # normalized values 1 and 0; bonus gap exceeds 1
    bonus = [2.0 * math.sqrt(math.log(1002) / n) for n in node.ego_n]
    assert bonus[1] - bonus[0] > 1
    assert select_ego_action(node, PlannerConfig(ucb_c=2.0)) == 1


def test_widening_bounds():
    cfg = PlannerConfig()
    assert widening_bound(0, cfg) == 0
    assert widening_bound(1, cfg) == 4
    assert widening_bound(16, cfg) == 8
    assert widening_bound(81, cfg) == 12


class _Counter:
    def __init__(self):
        self.i = 0

    def sample_action(self, state, agent, rng):
        self.i += 1
        return float(self.i)


def test_empty_set_expands_then_widens():
    node = SearchNode(None, 1)
    h = _Counter()
    cfg = PlannerConfig(mode="RSBG")
    assert select_other_action(node, 1, 0, h, cfg, random.Random(0)) == 0
    s = node.stats(1, 0)
    s.n = 1
    s.visits[0] = 1
    assert select_other_action(node, 1, 0, h, cfg, random.Random(0)) == 1
    assert len(s.actions) == 2


def test_worst_case_returns_argmin():
    node = SearchNode(None, 1)
    s = node.stats(1, 0)
    s.add(1.0)
    s.add(2.0)
    s.q = [-100.0, 50.0]
    s.visits = [5, 5]
    s.n = 1  # k0 = 1 gives bound 1, so the set is saturated
    cfg = PlannerConfig(mode="RSBG", k0=1.0)
    assert select_other_action(node, 1, 0, _Counter(), cfg, random.Random(0)) == 0
    s.q = [50.0, -100.0]
    assert select_other_action(node, 1, 0, _Counter(), cfg, random.Random(0)) == 1


def test_repeated_draw_in_worst_case_mode_selects_argmin():
    node = SearchNode(None, 1)
    s = node.stats(1, 0)
    s.add(1.0)
    s.add(2.0)
    s.q = [0.0, -1.0]
    s.visits = [1, 1]
    s.n = 2

    class Same:
        def sample_action(self, state, agent, rng):
            return 1.0

    assert select_other_action(node, 1, 0, Same(), PlannerConfig(mode="RSBG"), random.Random(0)) == 1
    assert select_other_action(node, 1, 0, Same(), PlannerConfig(mode="SBG"), random.Random(0)) == 0


def test_backprop_single_step():
    cfg = PlannerConfig()
    root = SearchNode(None, 2)
    g = backpropagate([(root, 1, [], 100.0)], 0.0, cfg)
    assert g == 100.0
    assert root.ego_q[1] == 100.0 and root.ego_n[1] == 1


def test_backprop_discounts():
    cfg = PlannerConfig(gamma=0.9)
    a, b = SearchNode(None, 1), SearchNode(None, 1)
    assert backpropagate([(a, 0, [], 0.0), (b, 0, [], -1000.0)], 0.0, cfg) == pytest.approx(-900.0)


def test_backprop_running_mean_and_type_isolation():
    cfg = PlannerConfig()
    node = SearchNode(None, 1)
    s0 = node.stats(1, 0)
    s0.add(0.5)
    s1 = node.stats(1, 1)
    s1.add(0.5)
    backpropagate([(node, 0, [(1, 0, 0)], 10.0)], 0.0, cfg)
    backpropagate([(node, 0, [(1, 0, 0)], 20.0)], 0.0, cfg)
    assert node.ego_q[0] == 15.0 and node.ego_n[0] == 2
    assert s0.q[0] == 15.0 and s0.visits[0] == 2 and s0.updates == 2
    assert s1.updates == 0 and s1.visits[0] == 0


def test_widening_invariant_holds_in_tree():
    g = saddle_game()
    r = run(g, "SBG", 3_000)
    cfg = PlannerConfig()
    stack = [r.root]
    while stack:
        node = stack.pop()
        for s in node.other.values():
            assert len(s.actions) <= max(1, widening_bound(s.n, cfg))
        stack.extend(node.children.values())


def test_search_is_deterministic():
    g = three_action_game()
    a = run(g, "RSBG", 2_000, seed=4)
    b = run(g, "RSBG", 2_000, seed=4)
    assert (a.q_values, a.visits, a.action) == (b.q_values, b.visits, b.action)


def test_type_counts_follow_belief():
    g = saddle_game()
    h = g.hypotheses()[1][0]
    hyps = {1: [h, h]}
    b = B.update_with_likelihoods(B.init([1], 2), 1, [1.0, 0.0])
    r = plan(g, (), b, hyps, PlannerConfig(iterations=200), random.Random(0))
    assert r.type_counts == {(1, 0): 200}


def test_plan_rejects_mismatched_hypotheses():
    g = saddle_game()
    with pytest.raises(ValueError):
        plan(g, (), B.init([1], 2), g.hypotheses(), PlannerConfig(iterations=10), random.Random(0))
    with pytest.raises(ValueError):
        plan(g, (), B.init([1], 1), {}, PlannerConfig(iterations=10), random.Random(0))
