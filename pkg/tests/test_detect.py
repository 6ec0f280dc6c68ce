import math
import warnings

import numpy as np
import pytest

from qcd_markov.detect import (
    Decision,
    DetectorConfig,
    OnlineDetector,
    best_threshold,
    detector_step,
    estimate_risk,
    first_crossing,
    run_detection,
    sweep_thresholds,
)
from qcd_markov.errors import AlreadyStopped, InvalidCost, ValidationError
from qcd_markov.filtering import initial_posterior, run_filter
from qcd_markov.model import ChangePointModel, Trajectory, simulate
from qcd_markov.seeding import derive_rng

from conftest import A_B_3, RHO


def identical_chain_risk(h, rho, c):
    """Brute-force oracle: deterministic stopping time scored against the prior."""
    k, m = 0, 1.0
    while True:
        k += 1
        m *= 1 - rho
        if m <= h:
            break
    delay = sum((k - nu) * (1 - rho) ** (nu - 1) * rho for nu in range(1, k))
    pfa = (1 - rho) ** k
    return k, delay, pfa, c * delay + pfa


@pytest.fixture
def identical():
    return ChangePointModel.create(A_B_3, A_B_3, RHO)


def test_config_rejects_out_of_range():
    m = ChangePointModel.create(A_B_3, A_B_3, RHO)
    for h in (-0.1, 1.1):
        with pytest.raises(ValidationError):
            DetectorConfig(m, h)


def test_threshold_one_alarms_immediately(model_va):
    cfg = DetectorConfig(model_va, 1.0)
    _, decision = detector_step(cfg, initial_posterior(0), 0)
    assert decision is Decision.ALARM


def test_threshold_zero_needs_exact_zero(model_va):
    traj = simulate(model_va, 200, 10, np.random.default_rng(0))
    assert run_filter(model_va, traj).m_b.min() > 0
    res = run_detection(DetectorConfig(model_va, 0.0), traj)
    assert not res.stopped and res.tau is None


def test_already_stopped(model_va):
    det = OnlineDetector(DetectorConfig(model_va, 1.0), 0)
    assert det.update(0) is Decision.ALARM
    with pytest.raises(AlreadyStopped):
        det.update(0)


def test_identical_chain_alarm_index(identical):
    traj = simulate(identical, 500, "never", np.random.default_rng(2))
    res = run_detection(DetectorConfig(identical, 0.5), traj)
    assert res.stopped and res.tau == 139
    assert res.tau == math.ceil(math.log(0.5) / math.log(1 - RHO))
    assert res.false_alarm


def test_first_crossing_definition():
    m = np.array([[1.0, 0.9, 0.39, 0.2, 0.5], [1.0, 0.9, 0.8, 0.7, 0.6], [1.0, 0.4, 0.1, 0.1, 0.1]])
    np.testing.assert_array_equal(first_crossing(m, 0.4), [2, 5, 1])


def test_run_detection_first_crossing_replay(model_va):
    cfg = DetectorConfig(model_va, 0.4)
    for seed in range(10):
        traj = simulate(model_va, 2000, "sample", np.random.default_rng(seed))
        res = run_detection(cfg, traj)
        m = run_filter(model_va, traj).m_b
        if res.stopped:
            assert m[res.tau] <= 0.4 and res.posterior_at_stop == m[res.tau]
            assert np.all(m[1:res.tau] > 0.4)
        else:
            assert np.all(m[1:] > 0.4)


def test_invalid_cost(model_va):
    with pytest.raises(InvalidCost):
        estimate_risk(DetectorConfig(model_va, 0.4), 0.0, 10, 100, 0)


def test_threshold_one_risk(model_va):
    est = estimate_risk(DetectorConfig(model_va, 1.0), 0.001, 4000, 10, 3)
    assert est.mean_delay == 0.0
    assert np.all(est.taus == 1)
    se = math.sqrt(RHO * (1 - RHO) / 4000)
    assert abs(est.false_alarm_prob - (1 - RHO)) <= 3 * se + 1e-12


def test_identical_chain_risk_matches_closed_form(identical):
    h, c = 0.3, 0.01
    k, delay, pfa, risk = identical_chain_risk(h, RHO, c)
    est = estimate_risk(DetectorConfig(identical, h), c, 5000, k + 5, 11)
    assert np.all(est.taus == k)
    assert est.censored == 0
    assert abs(est.bayes_risk - risk) <= 3 * est.std_errors["bayes_risk"]
    assert abs(est.mean_delay - delay) <= 3 * est.std_errors["delay"]


def test_risk_identity_and_ranges(model_va):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ests = sweep_thresholds(model_va, 0.001, [0.9, 0.5, 0.1], 600, 1500, 21)
    for e in ests:
        assert e.bayes_risk == e.cost_c * e.mean_delay + e.false_alarm_prob
        assert 0 <= e.false_alarm_prob <= 1
    # lower thresholds alarm later: fewer false alarms
    for hi, lo in zip(ests, ests[1:]):
        tol = 3 * math.hypot(hi.std_errors["false_alarm"], lo.std_errors["false_alarm"])
        assert lo.false_alarm_prob <= hi.false_alarm_prob + tol
        assert np.all(lo.taus >= hi.taus)
    assert best_threshold(ests) in ests


def test_sweep_single_threshold_matches_estimate(model_va):
    one = sweep_thresholds(model_va, 0.001, [0.4], 300, 1500, 5)[0]
    est = estimate_risk(DetectorConfig(model_va, 0.4), 0.001, 300, 1500, 5)
    np.testing.assert_array_equal(one.taus, est.taus)
    assert one.bayes_risk == est.bayes_risk


def test_sweep_empty_and_validation(model_va):
    assert sweep_thresholds(model_va, 0.001, [], 10, 100, 0) == []
    with pytest.raises(ValidationError):
        sweep_thresholds(model_va, 0.001, [1.5], 10, 100, 0)


def test_sweep_paths_independent_of_threshold_list(model_va):
    a = sweep_thresholds(model_va, 0.001, [0.4], 200, 1500, 9)[0]
    b = sweep_thresholds(model_va, 0.001, [0.9, 0.4, 0.05], 200, 1500, 9)[1]
    np.testing.assert_array_equal(a.taus, b.taus)
    np.testing.assert_array_equal(a.change_times, b.change_times)


def test_censored_trials_are_scored_and_reported(model_va):
    with pytest.warns(UserWarning, match="did not alarm"):
        est = estimate_risk(DetectorConfig(model_va, 1e-9), 0.001, 50, 20, 1)
    assert est.censored == 50
    assert np.all(est.taus == 21)


def test_thread_count_does_not_change_results(model_va, monkeypatch):
    monkeypatch.setenv("QCD_THREADS", "1")
    serial = estimate_risk(DetectorConfig(model_va, 0.4), 0.001, 1200, 2000, 4)
    monkeypatch.setenv("QCD_THREADS", "4")
    threaded = estimate_risk(DetectorConfig(model_va, 0.4), 0.001, 1200, 2000, 4)
    np.testing.assert_array_equal(serial.taus, threaded.taus)
    assert serial.bayes_risk == threaded.bayes_risk


def test_zero_delay_counted_separately():
    taus_model = ChangePointModel.create(A_B_3, A_B_3, RHO)
    est = estimate_risk(DetectorConfig(taus_model, 0.3), 0.01, 3000, 300, 2)
    assert est.zero_delay == int(np.count_nonzero(est.taus == est.change_times))
    assert est.zero_delay > 0
