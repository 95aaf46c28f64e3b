import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowlab.trace import (
    ACK,
    FIN,
    PROTO_TCP,
    SYN,
    TRACE_HEADER,
    PacketRecord,
    SyntheticConfig,
    Trace,
    TraceFormatError,
    draw_flow_lengths,
    generate_synthetic,
    ip_to_str,
    parse_ip,
    read_trace,
    write_trace,
)

from strategies import small_traces


def _write(path, *rows):
    path.write_text("\n".join((TRACE_HEADER,) + rows) + "\n")


def test_read_empty(tmp_csv):
    _write(tmp_csv)
    assert len(read_trace(tmp_csv)) == 0


def test_read_single_row(tmp_csv):
    _write(tmp_csv, "1000,10.0.0.1,10.0.0.2,1234,80,6,1500,0x02")
    (rec,) = read_trace(tmp_csv)
    assert rec == PacketRecord(1000, parse_ip("10.0.0.1"), parse_ip("10.0.0.2"), 1234, 80, 6, 1500, SYN)
    assert rec.tcp_flags & SYN


def test_read_timestamp_regression_names_line(tmp_csv):
    _write(
        tmp_csv,
        "2000,10.0.0.1,10.0.0.2,1234,80,6,100,0x10",
        "1000,10.0.0.1,10.0.0.2,1234,80,6,100,0x10",
    )
    with pytest.raises(TraceFormatError, match="line 3") as info:
        read_trace(tmp_csv)
    assert info.value.line == 3


@pytest.mark.parametrize(
    "row",
    [
        "1000,10.0.0.1,10.0.0.2,1234,80,6,1500",  # 7 columns
        "1000,10.0.0.1,10.0.0.2,1234,80,6,1500,0x02,9",
        "abc,10.0.0.1,10.0.0.2,1234,80,6,1500,0x02",
        "1000,10.0.0.256,10.0.0.2,1234,80,6,1500,0x02",
        "1000,10.0.1,10.0.0.2,1234,80,6,1500,0x02",
        "1000,10.0.0.1,10.0.0.2,70000,80,6,1500,0x02",
        "1000,10.0.0.1,10.0.0.2,1234,80,300,1500,0x02",
        "1000,10.0.0.1,10.0.0.2,1234,80,6,0,0x02",
        "1000,10.0.0.1,10.0.0.2,1234,80,6,70000,0x02",
        "1000,10.0.0.1,10.0.0.2,1234,80,6,1500,02",
        "1000,10.0.0.1,10.0.0.2,1234,80,6,1500,0x1ff",
        "1000,10.0.0.1,10.0.0.2,1234,53,17,100,0x02",  # flags on UDP
        "-5,10.0.0.1,10.0.0.2,1234,80,6,1500,0x02",
    ],
)
def test_read_malformed_row_names_line(tmp_csv, row):
    _write(tmp_csv, "0,10.0.0.1,10.0.0.2,1234,80,6,1500,0x10", row)
    with pytest.raises(TraceFormatError, match="line 3"):
        read_trace(tmp_csv)


def test_read_bad_header(tmp_csv):
    tmp_csv.write_text("ts,src\n")
    with pytest.raises(TraceFormatError, match="line 1"):
        read_trace(tmp_csv)


def test_write_empty_is_header_only(tmp_csv):
    write_trace([], tmp_csv)
    assert tmp_csv.read_bytes() == (TRACE_HEADER + "\n").encode()


def test_write_rejects_regression_without_touching_disk(tmp_csv):
    recs = [PacketRecord(10, 1, 2, 3, 4, 17, 100), PacketRecord(5, 1, 2, 3, 4, 17, 100)]
    with pytest.raises(TraceFormatError):
        write_trace(recs, tmp_csv)
    assert not tmp_csv.exists()


def test_write_uses_lf_and_hex_flags(tmp_csv):
    write_trace([PacketRecord(7, parse_ip("1.2.3.4"), parse_ip("5.6.7.8"), 1, 2, 6, 40, ACK | FIN)], tmp_csv)
    assert tmp_csv.read_bytes() == (TRACE_HEADER + "\n7,1.2.3.4,5.6.7.8,1,2,6,40,0x11\n").encode()


def test_round_trip_100_records(tmp_path):
    trace = generate_synthetic(SyntheticConfig(duration_s=20, flow_arrival_rate=10, seed=11))[:100]
    assert len(trace) == 100
    path = tmp_path / "t.csv"
    write_trace(trace, path)
    assert read_trace(path) == trace


@settings(max_examples=50, deadline=None)
@given(small_traces())
def test_round_trip_property(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    write_trace(records, path)
    assert list(read_trace(path)) == records


@given(st.integers(0, 2**32 - 1))
def test_ip_text_round_trip(ip):
    assert parse_ip(ip_to_str(ip)) == ip


def test_trace_sequence_behaviour():
    recs = [PacketRecord(i, 1, 2, 3, 4, 17, 10 + i) for i in range(5)]
    trace = Trace.from_records(recs)
    assert len(trace) == 5
    assert trace[2] == recs[2]
    assert list(trace[1:3]) == recs[1:3]
    assert trace == recs
    with pytest.raises(AttributeError):
        trace.ts_us = None
    with pytest.raises(ValueError):
        trace.ts_us[0] = 99


# -- generator ----------------------------------------------------------------


def test_generator_determinism(tmp_path):
    cfg = SyntheticConfig(duration_s=10, flow_arrival_rate=0.2, seed=7)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace(generate_synthetic(cfg), a)
    write_trace(generate_synthetic(cfg), b)
    assert a.read_bytes() == b.read_bytes()


def test_generator_seed_matters():
    a = generate_synthetic(SyntheticConfig(duration_s=30, flow_arrival_rate=5, seed=1))
    b = generate_synthetic(SyntheticConfig(duration_s=30, flow_arrival_rate=5, seed=2))
    assert a != b


def test_flow_lengths_heavy_tail_matches_direct_draw():
    n, alpha, seed = 10_000, 1.2, 123
    lengths = draw_flow_lengths(np.random.Generator(np.random.PCG64(seed)), n, alpha, 1)
    # same stream, drawn independently of the library routine
    rng = np.random.Generator(np.random.PCG64(seed))
    direct = [int(np.floor((1.0 - u) ** (-1.0 / alpha))) for u in rng.random(n)]
    assert lengths.tolist() == direct
    assert min(direct) >= 1
    assert np.mean(direct) > np.median(direct)


def test_large_pkt_prob_one_gives_only_large_packets():
    trace = generate_synthetic(SyntheticConfig(duration_s=20, flow_arrival_rate=5, large_pkt_prob=1.0, seed=3))
    assert len(trace) > 0
    assert set(trace.byte_len.tolist()) == {1500}


def test_generated_trace_structure():
    cfg = SyntheticConfig(duration_s=60, flow_arrival_rate=20, seed=5)
    trace = generate_synthetic(cfg)
    trace.validate()
    assert trace.ts_us.max() < 60_000_000
    # group per flow and check uniqueness of keys and TCP framing
    by_key = {}
    for p in trace:
        by_key.setdefault(p.key, []).append(p)
    # every flow's packets are time ordered and TCP flows close with FIN
    for key, pkts in by_key.items():
        assert [p.ts_us for p in pkts] == sorted(p.ts_us for p in pkts)
        if key.proto == PROTO_TCP:
            assert pkts[0].tcp_flags & SYN
            assert pkts[-1].tcp_flags & FIN
            assert all(not p.tcp_flags & FIN for p in pkts[:-1])
        else:
            assert all(p.tcp_flags == 0 for p in pkts)
    # arrival count is Poisson(1200): a distinct key per flow means ~1200 keys
    assert 1000 < len(by_key) < 1400


def test_tie_break_order():
    trace = generate_synthetic(SyntheticConfig(duration_s=30, flow_arrival_rate=50, mean_ipg_ms=0.005, seed=9))
    keys = list(zip(trace.ts_us.tolist(), trace.src_ip.tolist(), trace.src_port.tolist()))
    assert keys == sorted(keys)


@settings(max_examples=100, deadline=None)
@given(
    duration=st.floats(0.5, 30),
    rate=st.floats(0.1, 40),
    alpha=st.floats(0.3, 3.0),
    xmin=st.integers(1, 5),
    small=st.integers(1, 200),
    large=st.integers(200, 65535),
    prob=st.floats(0, 1),
    ipg=st.floats(0.01, 500),
    seed=st.integers(0, 2**64 - 1),
)
def test_generated_traces_always_valid(duration, rate, alpha, xmin, small, large, prob, ipg, seed):
    cfg = SyntheticConfig(duration, rate, alpha, xmin, small, large, prob, ipg, seed)
    trace = generate_synthetic(cfg)
    trace.validate()
    assert set(trace.byte_len.tolist()) <= {small, large}


@pytest.mark.parametrize(
    "kwargs",
    [
        {"duration_s": 0},
        {"flow_arrival_rate": 0},
        {"flow_arrival_rate": -1},
        {"pareto_alpha": 0},
        {"pareto_xmin": 0},
        {"large_pkt_prob": 1.5},
        {"mean_ipg_ms": 0},
    ],
)
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        SyntheticConfig(**kwargs)
