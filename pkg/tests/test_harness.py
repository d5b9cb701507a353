import json

import pytest

from rsbg.harness import (
    ConfigError,
    TrialRecord,
    config_with,
    parse_config,
    run_experiment,
    run_trial,
    summarize,
    trial_seed,
    trial_streams,
)


def crossing_raw(**kw):
    raw = {
        "domain": "crossing",
        "trials": 2,
        "seed": 3,
        "planners": [
            {"name": "RSBG", "mode": "RSBG", "iterations": 30, "cells_per_dim": [4]},
            {"name": "SBG", "mode": "SBG", "iterations": 30, "cells_per_dim": [4]},
            {"name": "RMDP", "mode": "RMDP", "iterations": 30},
            {"name": "Full", "mode": "SBGFullInfo", "iterations": 30},
        ],
        "belief": {"m_samples": 20},
    }
    raw.update(kw)
    return raw


def record(outcome, steps=10, planner="P", trial=0):
    return TrialRecord(planner, trial, 0, outcome, steps, steps if outcome == "success" else None,
                       [0.0] * steps, [], "h")


def test_config_defaults_and_overrides():
    cfg = parse_config(crossing_raw(), {"trials": 5, "iterations": 7, "planners": ["SBG"]})
    assert cfg.trials == 5
    assert [p.name for p in cfg.planners] == ["SBG"]
    assert cfg.planners[0].config.iterations == 7
    assert cfg.planners[0].k == 4


def test_config_errors_name_fields():
    raw = crossing_raw(domain="moon", trials=0)
    raw["planners"].append({"mode": "Greedy"})
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    text = str(exc.value)
    assert "domain" in text and "trials" in text and "planners[4].mode" in text


def test_config_rejects_duplicates_and_bad_cells():
    raw = crossing_raw()
    raw["planners"][1]["name"] = "RSBG"
    raw["planners"][0]["cells_per_dim"] = [4, 4]
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    assert "duplicate" in str(exc.value)
    assert "planners[0].cells_per_dim" in str(exc.value)


def test_lanechange_config_checks_space_kind():
    raw = {"domain": "lanechange", "planners": [{"mode": "RSBG", "hypothesis_space": "2D", "cells_per_dim": [16]}]}
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_unknown_planner_selection():
    with pytest.raises(ConfigError):
        parse_config(crossing_raw(), {"planners": ["Nope"]})


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv("RSBG_WORKERS", "3")
    assert parse_config(crossing_raw()).workers == 3


def test_seed_streams():
    assert trial_seed(0, 1) == trial_seed(0, 1)
    assert len({trial_seed(0, r) for r in range(100)}) == 100
    a, b = trial_streams(5), trial_streams(5)
    assert [a[k].random() for k in sorted(a)] == [b[k].random() for k in sorted(b)]
    assert len({s.random() for s in trial_streams(5).values()}) == len(a)


def test_summary_percentages():
    recs = [record("success"), record("success", 20), record("collision", 3), record("timeout", 50)]
    s = summarize(recs)["P"]
    assert (s["success_pct"], s["collision_pct"], s["timeout_pct"]) == (50.0, 25.0, 25.0)
    assert s["mean_steps_to_goal"] == 15.0


def test_summary_mean_steps_and_empty_success():
    recs = [record("success", n) for n in (10, 20, 30)]
    assert summarize(recs)["P"]["mean_steps_to_goal"] == 20.0
    assert summarize([record("timeout", 50)])["P"]["mean_steps_to_goal"] is None


def test_summary_partitions_hundred_percent():
    recs = [record(o, trial=i) for i, o in enumerate(["success", "timeout", "timeout"])]
    s = summarize(recs)["P"]
    assert s["success_pct"] + s["collision_pct"] + s["timeout_pct"] == pytest.approx(100.0)


@pytest.fixture(scope="module")
def small_result():
    return run_experiment(parse_config(crossing_raw()))


def test_paired_scenarios(small_result):
    by_trial = {}
    for r in small_result.records:
        by_trial.setdefault(r.trial, set()).add(r.scenario_hash)
    assert all(len(h) == 1 for h in by_trial.values())
    assert len({next(iter(h)) for h in by_trial.values()}) == 2


def test_records_ordered_and_complete(small_result):
    assert [(r.planner, r.trial) for r in small_result.records] == [
        (p, t) for p in ("RSBG", "SBG", "RMDP", "Full") for t in (0, 1)
    ]
    for r in small_result.records:
        assert r.outcome in ("success", "collision", "timeout")
        assert len(r.ego_actions) == r.steps == len(r.belief_std)


def test_single_hypothesis_planners_report_zero_std(small_result):
    for r in small_result.records:
        if r.planner in ("RMDP", "Full"):
            assert set(r.belief_std) == {0.0}


def test_replay_by_seed_matches(small_result):
    cfg = parse_config(crossing_raw())
    rec = small_result.records[1]
    again = run_trial(cfg, cfg.planners[0], 0, seed=rec.seed)
    assert again.to_dict() == {**rec.to_dict(), "trial": 0}


def test_byte_identical_outputs(tmp_path):
    cfg = parse_config(crossing_raw(trials=1))
    run_experiment(config_with(cfg, output=str(tmp_path / "a")))
    run_experiment(config_with(cfg, output=str(tmp_path / "b")))
    for name in ("results.json", "records.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    doc = json.loads((tmp_path / "a" / "results.json").read_text())
    assert doc["header"]["seed_scheme"]
    assert doc["config"]["crossing"]["true_space"] == "symmetric"
    assert doc["config"]["crossing"]["n_agents"] == 9


def test_process_pool_matches_sequential():
    cfg = parse_config(crossing_raw(trials=2), {"planners": ["SBG"]})
    seq = run_experiment(cfg)
    par = run_experiment(config_with(cfg, workers=2))
    assert [r.to_dict() for r in seq.records] == [r.to_dict() for r in par.records]


def test_lanechange_trial_runs():
    raw = {
        "domain": "lanechange",
        "trials": 1,
        "planners": [{"name": "RSBG", "mode": "RSBG", "iterations": 10, "cells_per_dim": [4]}],
        "belief": {"m_samples": 10},
        "metrics": {"trace": True},
    }
    res = run_experiment(parse_config(raw))
    rec = res.records[0]
    assert rec.outcome in ("success", "collision", "timeout")
    assert rec.trace and "ego" in rec.trace[0]
    assert all(isinstance(a, str) for a in rec.ego_actions)
