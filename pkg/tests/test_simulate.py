import itertools

import numpy as np
import pytest

from wrdesign.simulate import (
    SimConfig,
    TrialData,
    compare_pairs,
    empirical_summary,
    generate_trial,
    observe,
    pairwise_win_ratio,
    replicate_rng,
)
from wrdesign.winprob import compute_table, exponential_scenario


def _trial(t_times, t_events, c_times, c_events):
    times = np.vstack([t_times, c_times]).astype(float)
    events = np.vstack([t_events, c_events]).astype(bool)
    treated = np.r_[np.ones(len(t_times), bool), np.zeros(len(c_times), bool)]
    return TrialData(treated, times, events, times.max(axis=1))


def test_control_event_before_treated_censoring_is_a_win():
    d = _trial([[400.0]], [[False]], [[10.0]], [[True]])
    res = pairwise_win_ratio(d)
    assert res.wins.tolist() == [1] and res.losses.tolist() == [0] and res.ties == 0


def test_early_treated_censoring_moves_to_next_endpoint():
    # treated censored at day 5, control event at day 10: tie on endpoint 1
    d = _trial([[5.0, 5.0]], [[False, False]], [[10.0, 3.0]], [[True, True]])
    wins, losses, ties = compare_pairs(d.times[:1], d.events[:1], d.times[1:], d.events[1:])
    assert wins.tolist() == [0, 1] and losses.tolist() == [0, 0] and ties == 0


def _brute_force(t_times, t_events, c_times, c_events):
    K = t_times.shape[1]
    wins, losses, ties = np.zeros(K, int), np.zeros(K, int), 0
    for i, j in itertools.product(range(len(t_times)), range(len(c_times))):
        for k in range(K):
            if c_events[j, k] and c_times[j, k] < t_times[i, k]:
                wins[k] += 1
                break
            if t_events[i, k] and t_times[i, k] < c_times[j, k]:
                losses[k] += 1
                break
        else:
            ties += 1
    return wins, losses, ties


def test_three_by_three_enumeration():
    t_times = np.array([[100.0, 50.0], [300.0, 300.0], [20.0, 20.0]])
    t_events = np.array([[False, True], [False, False], [True, True]])
    c_times = np.array([[150.0, 40.0], [300.0, 120.0], [90.0, 90.0]])
    c_events = np.array([[True, True], [False, True], [True, False]])
    got = compare_pairs(t_times, t_events, c_times, c_events)
    ref = _brute_force(t_times, t_events, c_times, c_events)
    assert got[0].tolist() == ref[0].tolist() and got[1].tolist() == ref[1].tolist() and got[2] == ref[2]
    assert got[0].sum() + got[1].sum() + got[2] == 9


def test_random_datasets_match_enumeration(rng):
    for _ in range(20):
        t = rng.integers(1, 30, size=(6, 3)).astype(float)
        c = rng.integers(1, 30, size=(5, 3)).astype(float)
        te, ce = rng.random((6, 3)) < 0.6, rng.random((5, 3)) < 0.6
        got = compare_pairs(t, te, c, ce)
        ref = _brute_force(t, te, c, ce)
        assert got[0].tolist() == ref[0].tolist() and got[1].tolist() == ref[1].tolist() and got[2] == ref[2]


def test_semi_competing_truncation():
    times, events = observe(np.array([[50.0, 80.0]]), np.array([400.0]), semi_competing=True)
    assert times.tolist() == [[50.0, 50.0]] and events.tolist() == [[True, False]]
    times, events = observe(np.array([[50.0, 80.0]]), np.array([400.0]), semi_competing=False)
    assert times.tolist() == [[50.0, 80.0]] and events.tolist() == [[True, True]]


def test_generated_trial_shapes_and_censoring():
    scn = exponential_scenario((1e-3, 2e-3), hazard_ratios=(0.8, 0.8), tau=0.3, study_length=500)
    d = generate_trial(scn, SimConfig(n_per_trial=101, allocation=0.5), 3)
    assert d.times.shape == (101, 2) and d.treated.sum() == 50
    assert np.all(d.censoring == 500.0)
    assert np.all(d.times[~d.events] == 500.0)
    assert np.all(d.times <= 500.0)


def test_counts_partition_and_swap():
    scn = exponential_scenario((1e-3, 2e-3), hazard_ratios=(0.7, 0.9), tau=0.5, study_length=600,
                               accrual_length=200, dropout_hazard=2e-4)
    d = generate_trial(scn, SimConfig(n_per_trial=300), 0)
    res = pairwise_win_ratio(d)
    assert res.wins.sum() + res.losses.sum() + res.ties == res.pairs
    flipped = pairwise_win_ratio(TrialData(~d.treated, d.times, d.events, d.censoring))
    assert flipped.wins.tolist() == res.losses.tolist() and flipped.losses.tolist() == res.wins.tolist()
    assert np.log(flipped.win_ratio) == pytest.approx(-np.log(res.win_ratio), rel=1e-14)


def test_zero_losses_undefined():
    d = _trial([[400.0]], [[False]], [[10.0]], [[True]])
    res = pairwise_win_ratio(d)
    assert np.isnan(res.win_ratio) and res.p_value == 1.0 and not res.defined


def test_replicate_streams_are_distinct_and_stable():
    a = replicate_rng(7, 0).random(3)
    assert np.array_equal(a, replicate_rng(7, 0).random(3))
    assert not np.array_equal(a, replicate_rng(7, 1).random(3))
    assert not np.array_equal(a, replicate_rng(8, 0).random(3))


def test_summary_independent_of_workers():
    scn = exponential_scenario((1e-3, 2e-3), hazard_ratios=(0.8, 0.8), tau=0.3, study_length=500,
                               accrual_length=100, dropout_hazard=1e-4)
    cfg = SimConfig(replicates=12, n_per_trial=80, master_seed=99)
    a = empirical_summary(scn, cfg, workers=1)
    b = empirical_summary(scn, cfg, workers=3)
    for f in ("mean_wr", "pooled_wr", "p_tie", "power", "excluded"):
        assert getattr(a, f) == getattr(b, f)
    np.testing.assert_array_equal(a.win, b.win)


def test_type_one_error_calibration():
    scn = exponential_scenario((1e-3, 2e-3), hazard_ratios=(1.0, 1.0), tau=0.3, study_length=500,
                               accrual_length=200, dropout_hazard=1.5e-4)
    s = empirical_summary(scn, SimConfig(replicates=2000, n_per_trial=200, master_seed=5))
    assert abs(s.power - 0.05) < 3 * np.sqrt(0.05 * 0.95 / 2000)


def test_admin_tie_closed_form_at_million_pairs():
    # 1000 x 1000 pairs per replicate
    scn = exponential_scenario((5.7e-4, 1.8e-3, 1.5e-3), effects=(0.2, 0.3, 0.1), tau=0.3, study_length=500)
    tab = compute_table(scn)
    s = empirical_summary(scn, SimConfig(replicates=20, n_per_trial=2000, master_seed=11))
    assert abs(s.p_tie - tab.tie) < 3 * s.p_tie_se


def test_summary_matches_formula_proportions():
    scn = exponential_scenario((5.7e-4, 1.8e-3, 1.5e-3), effects=(0.1, 0.2, 0.3), tau=0.5, study_length=750,
                               accrual_length=200, dropout_hazard=1.5e-4, semi_competing=True)
    tab = compute_table(scn)
    s = empirical_summary(scn, SimConfig(replicates=300, n_per_trial=400, master_seed=3))
    for k in range(3):
        assert abs(s.win[k] - tab.win[k]) < 3.5 * s.win_se[k]
        assert abs(s.loss[k] - tab.loss[k]) < 3.5 * s.loss_se[k]
    assert abs(s.p_tie - tab.tie) < 3.5 * s.p_tie_se


@pytest.mark.parametrize("kw", [dict(replicates=0), dict(n_per_trial=3), dict(master_seed=-1), dict(alpha=1.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)
