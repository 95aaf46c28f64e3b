import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowlab.distributions import (
    ecdf,
    flow_size_cdf,
    interval_ks,
    ks_critical_value,
    ks_statistic,
    ks_test,
    packet_size_cdf,
    rejection_rate,
)
from flowlab.flow_cache import FlowRecord
from flowlab.trace import FlowKey, PacketRecord, SyntheticConfig, generate_synthetic

from oracles import brute_ks

samples = st.lists(st.integers(0, 30), min_size=1, max_size=60)


def _flow(packets, nbytes=None, first=0):
    return FlowRecord(FlowKey(1, 2, 3, 4, 17), first, first, packets, nbytes or 40 * packets, 0, "flush")


def test_ecdf_single_value():
    assert ecdf([5]).points == [(5.0, 1.0)]


def test_ecdf_counts():
    assert ecdf([1, 1, 2]).points == [(1.0, 2 / 3), (2.0, 1.0)]


def test_ecdf_evaluation_is_right_continuous():
    f = ecdf([1, 1, 2])
    assert f([0.5, 1, 1.5, 2, 9]).tolist() == [0.0, 2 / 3, 2 / 3, 1.0, 1.0]


def test_ecdf_empty_rejected():
    with pytest.raises(ValueError):
        ecdf([])


def test_ecdf_uniform_concentration():
    worst = 0.0
    for seed in range(20):
        x = np.random.default_rng(seed).random(10_000)
        f = ecdf(x)
        # sup |F - x| over the steps, both sides of each jump
        left = np.concatenate(([0.0], f.probs[:-1]))
        worst = max(worst, np.max(np.abs(f.probs - f.values)), np.max(np.abs(left - f.values)))
    assert worst < 0.05


@given(samples)
def test_ecdf_normalised_and_strict(xs):
    f = ecdf(xs)
    assert f.probs[-1] == 1.0
    assert np.all(np.diff(f.values) > 0) and np.all(np.diff(f.probs) > 0)


@given(samples)
def test_ecdf_merge_consistency(xs):
    a, b = ecdf(xs), ecdf(xs + xs)
    assert a.values.tolist() == b.values.tolist() and a.probs.tolist() == b.probs.tolist()


def test_ks_statistic_examples():
    assert ks_statistic(ecdf([3, 1, 2]), ecdf([1, 2, 3])) == 0.0
    assert ks_statistic(ecdf([0, 0, 0]), ecdf([1, 1, 1])) == 1.0
    # union {1,2,3}: |Fa - Fb| = 0, 0.5, 0.5
    assert ks_statistic(ecdf([1, 2]), ecdf([1, 3])) == 0.5


@settings(max_examples=200)
@given(samples, samples)
def test_ks_statistic_matches_brute_force(a, b):
    d = ks_statistic(ecdf(a), ecdf(b))
    assert d == brute_ks(a, b)
    assert d == ks_statistic(ecdf(b), ecdf(a))
    assert 0.0 <= d <= 1.0


def test_ks_test_identical_samples():
    x = np.random.default_rng(1).random(1000)
    res = ks_test(x, x)
    assert res.statistic_d == 0 and not res.reject


def test_ks_test_disjoint_samples():
    res = ks_test(np.zeros(1000), np.ones(1000))
    assert res.statistic_d == 1.0 and res.reject
    # 1.358 * sqrt(2000 / 10**6)
    assert res.critical_value == pytest.approx(0.0607, abs=1e-4)
    assert res.n1 == res.n2 == 1000 and res.alpha == 0.05


def test_critical_coefficient_at_five_percent():
    assert ks_critical_value(1, 1, 0.05) / np.sqrt(2) == pytest.approx(1.358, abs=5e-4)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 2])
def test_ks_test_bad_alpha(alpha):
    with pytest.raises(ValueError):
        ks_test([1], [2], alpha)


@settings(max_examples=100)
@given(samples, samples, st.floats(0.001, 0.5))
def test_reject_iff_statistic_exceeds_critical(a, b, alpha):
    res = ks_test(a, b, alpha)
    assert res.reject == (res.statistic_d > res.critical_value)


def test_flow_size_cdf_examples():
    assert flow_size_cdf([_flow(1)] * 10, "packets").points == [(1.0, 1.0)]
    f = flow_size_cdf([_flow(1), _flow(1), _flow(1), _flow(5)], "packets")
    assert f(1) == 0.75
    assert flow_size_cdf([_flow(2, 3000)], "bytes").points == [(3000.0, 1.0)]
    with pytest.raises(ValueError):
        flow_size_cdf([], "packets")
    with pytest.raises(ValueError):
        flow_size_cdf([_flow(1)], "duration")


def test_packet_size_cdf():
    pkts = [PacketRecord(i, 1, 2, 3, 4, 17, 1500) for i in range(4)]
    assert packet_size_cdf(pkts).points == [(1500.0, 1.0)]
    with pytest.raises(ValueError):
        packet_size_cdf([])


def test_default_mixture_has_step_at_1500():
    trace = generate_synthetic(SyntheticConfig(duration_s=60, flow_arrival_rate=50, seed=8))
    f = packet_size_cdf(trace)
    assert f.values.tolist() == [40.0, 1500.0]
    assert 0.4 < f(1499) < 0.6 and f(1500) == 1.0


def test_interval_ks_assignment_and_empty_sides():
    a = [_flow(1, first=0), _flow(3, first=31_000_000), _flow(2, first=32_000_000)]
    b = [_flow(1, first=5_000_000)]
    rows = interval_ks(a, b, 0, 30, 3, "packets")
    assert [r.interval_index for r in rows] == [0, 1, 2]
    assert rows[0].result.statistic_d == 0 and not rows[0].reject
    assert rows[1].result is None and rows[2].result is None
    assert rejection_rate(rows) == 0.0
