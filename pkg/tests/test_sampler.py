import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowlab.sampler import SamplingSpec, bernoulli_sample, systematic_count, systematic_sample
from flowlab.trace import PacketRecord, Trace

from oracles import systematic_indices
from strategies import small_traces


def _trace(n):
    return Trace.from_records(PacketRecord(i, 1, 2, 3, 4, 17, 1 + i % 1500) for i in range(n))


def test_period_one_is_identity():
    t = _trace(37)
    assert systematic_sample(t, 1, 0) == t


def test_ten_packets_every_fifth():
    t = _trace(10)
    assert list(systematic_sample(t, 5, 0)) == [t[0], t[5]]


def test_full_trace_count_at_one_in_thousand():
    # floor((84579462 - 1) / 1000) + 1
    assert systematic_count(84_579_462, 1000, 0) == 84_580


def test_count_law_exhaustive():
    for length in range(51):
        t = _trace(length)
        for n in range(1, 11):
            for phase in range(n):
                expected = systematic_indices(length, n, phase)
                got = systematic_sample(t, n, phase)
                assert len(got) == len(expected) == systematic_count(length, n, phase)
                assert got.ts_us.tolist() == expected


@pytest.mark.parametrize("n,phase", [(5, 5), (5, 7), (0, 0), (3, -1)])
def test_bad_phase_or_period(n, phase):
    with pytest.raises(ValueError):
        systematic_sample(_trace(10), n, phase)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 300))
def test_composition(a, b, length):
    t = _trace(length)
    assert systematic_sample(systematic_sample(t, a, 0), b, 0) == systematic_sample(t, a * b, 0)


def _is_subsequence(sub, full):
    it = iter(full)
    return all(any(x == y for y in it) for x in sub)


@settings(max_examples=50, deadline=None)
@given(small_traces(), st.integers(1, 7), st.data())
def test_systematic_output_is_subsequence(records, n, data):
    phase = data.draw(st.integers(0, n - 1))
    assert _is_subsequence(list(systematic_sample(records, n, phase)), records)


@settings(max_examples=50, deadline=None)
@given(small_traces(), st.floats(0.01, 1.0), st.integers(0, 2**32))
def test_bernoulli_output_is_subsequence(records, q, seed):
    assert _is_subsequence(list(bernoulli_sample(records, q, seed)), records)


def test_bernoulli_q_one_is_identity():
    t = _trace(100)
    assert bernoulli_sample(t, 1.0, 5) == t


def test_bernoulli_concentration():
    n = 1_000_000
    kept = len(bernoulli_sample(_trace(n), 0.5, 2024))
    # binomial sd = sqrt(n q (1-q)) = 500
    assert abs(kept - 500_000) <= 5 * 500


def test_bernoulli_determinism():
    t = _trace(5000)
    assert bernoulli_sample(t, 0.3, 77) == bernoulli_sample(t, 0.3, 77)
    assert bernoulli_sample(t, 0.3, 77) != bernoulli_sample(t, 0.3, 78)


@pytest.mark.parametrize("q", [0.0, -0.1, 1.01])
def test_bernoulli_rejects_bad_q(q):
    with pytest.raises(ValueError):
        bernoulli_sample(_trace(5), q, 0)


def test_spec_dispatch_and_probability():
    t = _trace(100)
    assert SamplingSpec(n=10, phase=3).apply(t) == systematic_sample(t, 10, 3)
    assert SamplingSpec(n=1000).probability == 0.001
    spec = SamplingSpec(mode="bernoulli", q=0.25, seed=4)
    assert spec.apply(t) == bernoulli_sample(t, 0.25, 4)
    assert spec.probability == 0.25
    with pytest.raises(ValueError):
        SamplingSpec(mode="adaptive")
    with pytest.raises(ValueError):
        SamplingSpec(n=4, phase=4)
