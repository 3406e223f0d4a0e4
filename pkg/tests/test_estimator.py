from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from orchestra_sim.cluster import AppClass, Pod, ResourceVector
from orchestra_sim.estimator import EstimatorConfig, UsageEstimator, lower_median


def rv(cpu, mem=0):
    return ResourceVector(cpu, mem)


def test_window_keeps_newest_samples():
    est = UsageEstimator(EstimatorConfig(window=3))
    for i in range(5):
        est.record("k", i, rv(i * 10))
    assert [u.cpu for _, u in est.samples("k")] == [20, 30, 40]


def test_equal_time_samples_both_kept_in_order():
    est = UsageEstimator()
    est.record("k", 5, rv(1))
    est.record("k", 5, rv(2))
    assert est.samples("k") == [(5, rv(1)), (5, rv(2))]


def test_negative_usage_rejected():
    forged = rv(0)
    object.__setattr__(forged, "cpu", -1)
    with pytest.raises(ValueError):
        UsageEstimator().record("k", 0, forged)
    with pytest.raises(ValueError):
        rv(-1)


def test_median_mean_and_cap():
    est = UsageEstimator()
    for c in (100, 300, 200):
        est.record("a", 0, rv(c))
    assert est.estimate("a", EstimatorConfig("median", 10, 1.0)) == rv(200)
    for c in (100, 300):
        est.record("b", 0, rv(c))
    assert est.estimate("b", EstimatorConfig("mean", 10, 1.0)) == rv(200)
    assert est.estimate("b", EstimatorConfig("median", 10, 1.0)) == rv(100)
    est.record("c", 0, rv(900))
    assert est.estimate("c", EstimatorConfig("median", 10, 1.2), request=rv(250, 64)) == rv(250)
    assert est.estimate("missing") is None


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(statistic="mode")
    with pytest.raises(ValueError):
        EstimatorConfig(window=0)
    with pytest.raises(ValueError):
        EstimatorConfig(safety_margin=0.9)


def test_reservation_falls_back_to_class_history():
    est = UsageEstimator(EstimatorConfig(window=2, safety_margin=1.0))
    veteran = Pod("old", 0, rv(500, 100), 10, app_class=AppClass.CRON_JOB)
    newcomer = Pod("new", 0, rv(500, 100), 10, app_class=AppClass.CRON_JOB)
    est.record_pod(veteran, 0, rv(100, 10))
    est.record_pod(veteran, 1, rv(300, 30))
    assert est.reservation(newcomer) == rv(100, 10)
    assert est.reservation(veteran) == rv(100, 10)


samples = st.lists(st.integers(0, 5000), min_size=1, max_size=12)


@given(samples, st.randoms())
def test_estimate_invariant_under_reordering(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    for stat in ("median", "mean"):
        cfg = EstimatorConfig(stat, window=len(values), safety_margin=1.0)
        a, b = UsageEstimator(cfg), UsageEstimator(cfg)
        for v in values:
            a.record("k", 0, rv(v))
        for v in shuffled:
            b.record("k", 0, rv(v))
        assert a.estimate("k") == b.estimate("k")


@given(samples, st.floats(1.0, 3.0), st.floats(0.0, 2.0), st.integers(0, 5000))
def test_margin_monotone_and_capped(values, m1, extra, cap):
    est = UsageEstimator()
    for v in values:
        est.record("k", 0, rv(v))
    req = rv(cap, 10_000)
    low = est.estimate("k", EstimatorConfig("median", 12, m1), request=req)
    high = est.estimate("k", EstimatorConfig("median", 12, m1 + extra), request=req)
    assert low.cpu <= high.cpu <= cap


@given(samples)
def test_lower_median_picks_the_lower_middle(values):
    m = lower_median(values)
    below = sum(v < m for v in values)
    at_most = sum(v <= m for v in values)
    # m is the element at sorted index (n - 1) // 2
    assert below <= (len(values) - 1) // 2 < at_most
