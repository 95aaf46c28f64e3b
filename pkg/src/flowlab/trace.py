"""Packet records, the trace CSV format and the synthetic trace generator.

Traces are held column-wise (one numpy array per field) because the
experiments routinely push a few million packets through the pipeline.
A :class:`Trace` still behaves as a read-only sequence of
:class:`PacketRecord`, so small inputs can be built from plain lists.

IPv4 addresses are carried as unsigned 32-bit integers and only turned
into dotted-quad strings at the CSV boundary.
"""

from __future__ import annotations

import os
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TRACE_HEADER = "ts_us,src_ip,dst_ip,src_port,dst_port,proto,byte_len,tcp_flags"

PROTO_TCP = 6
PROTO_UDP = 17

FIN = 0x01
SYN = 0x02
RST = 0x04
ACK = 0x10

_FIELDS = ("ts_us", "src_ip", "dst_ip", "src_port", "dst_port", "proto", "byte_len", "tcp_flags")


class TraceFormatError(ValueError):
    """A trace file or record sequence violates the trace contract."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FlowKey(NamedTuple):
    """Unidirectional 5-tuple flow identity."""

    src_ip: int
    dst_ip: int
    src_port: int
    dst_port: int
    proto: int


class PacketRecord(NamedTuple):
    ts_us: int
    src_ip: int
    dst_ip: int
    src_port: int
    dst_port: int
    proto: int
    byte_len: int
    tcp_flags: int = 0

    @property
    def key(self) -> FlowKey:
        return FlowKey(self.src_ip, self.dst_ip, self.src_port, self.dst_port, self.proto)


def ip_to_str(ip: int) -> str:
    return f"{ip >> 24}.{(ip >> 16) & 255}.{(ip >> 8) & 255}.{ip & 255}"


def parse_ip(text: str) -> int:
    parts = text.split(".")
    if len(parts) != 4:
        raise ValueError(f"not a dotted-quad IPv4 address: {text!r}")
    value = 0
    for part in parts:
        if not part.isdigit() or len(part) > 3:
            raise ValueError(f"not a dotted-quad IPv4 address: {text!r}")
        octet = int(part)
        if octet > 255:
            raise ValueError(f"IPv4 octet out of range: {text!r}")
        value = (value << 8) | octet
    return value


class Trace(Sequence):
    """Column-oriented, immutable packet trace.

    Indexing with an integer yields a :class:`PacketRecord`; slicing or
    indexing with an index array yields a new :class:`Trace`.
    """

    __slots__ = _FIELDS

    def __init__(self, ts_us, src_ip, dst_ip, src_port, dst_port, proto, byte_len, tcp_flags):
        cols = (ts_us, src_ip, dst_ip, src_port, dst_port, proto, byte_len, tcp_flags)
        n = None
        for name, col in zip(_FIELDS, cols):
            arr = np.array(col, dtype=np.int64, copy=True).reshape(-1)
            arr.setflags(write=False)
            if n is None:
                n = len(arr)
            elif len(arr) != n:
                raise ValueError(f"column {name} has length {len(arr)}, expected {n}")
            object.__setattr__(self, name, arr)

    def __setattr__(self, name, value):
        raise AttributeError("Trace is immutable")

    @classmethod
    def empty(cls) -> Trace:
        return cls(*([],) * 8)

    @classmethod
    def from_records(cls, records: Iterable[PacketRecord]) -> Trace:
        if isinstance(records, Trace):
            return records
        rows = [tuple(r) for r in records]
        if not rows:
            return cls.empty()
        return cls(*zip(*rows))

    def columns(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, f) for f in _FIELDS)

    def __len__(self) -> int:
        return len(self.ts_us)

    def __getitem__(self, index):
        if isinstance(index, (int, np.integer)):
            return PacketRecord(*(int(col[index]) for col in self.columns()))
        return Trace(*(col[index] for col in self.columns()))

    def __iter__(self) -> Iterator[PacketRecord]:
        for row in zip(*(col.tolist() for col in self.columns())):
            yield PacketRecord(*row)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            if isinstance(other, Sequence):
                other = Trace.from_records(other)
            else:
                return NotImplemented
        return len(self) == len(other) and all(
            np.array_equal(a, b) for a, b in zip(self.columns(), other.columns())
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Trace(<{len(self)} packets>)"

    @property
    def total_bytes(self) -> int:
        return int(self.byte_len.sum())

    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.ts_us) >= 0))

    def validate(self) -> None:
        """Raise :class:`TraceFormatError` naming the first offending record."""
        checks = (
            (self.ts_us < 0, "negative timestamp"),
            ((self.src_ip < 0) | (self.src_ip > 0xFFFFFFFF), "src_ip out of range"),
            ((self.dst_ip < 0) | (self.dst_ip > 0xFFFFFFFF), "dst_ip out of range"),
            ((self.src_port < 0) | (self.src_port > 65535), "src_port out of range"),
            ((self.dst_port < 0) | (self.dst_port > 65535), "dst_port out of range"),
            ((self.proto < 0) | (self.proto > 255), "proto out of range"),
            ((self.byte_len < 1) | (self.byte_len > 65535), "byte_len out of range"),
            ((self.tcp_flags < 0) | (self.tcp_flags > 255), "tcp_flags out of range"),
            ((self.proto != PROTO_TCP) & (self.tcp_flags != 0), "tcp_flags set on non-TCP packet"),
        )
        first_bad = None
        for mask, message in checks:
            hits = np.flatnonzero(mask)
            if len(hits) and (first_bad is None or hits[0] < first_bad[0]):
                first_bad = (int(hits[0]), message)
        regress = np.flatnonzero(np.diff(self.ts_us) < 0)
        if len(regress) and (first_bad is None or regress[0] + 1 < first_bad[0]):
            first_bad = (int(regress[0]) + 1, "timestamp regression")
        if first_bad is not None:
            index, message = first_bad
            raise TraceFormatError(f"record {index}: {message}")


def as_trace(packets: Sequence[PacketRecord] | Trace) -> Trace:
    return packets if isinstance(packets, Trace) else Trace.from_records(packets)


# -- CSV I/O ------------------------------------------------------------------


def _parse_row(line: str, lineno: int) -> tuple[int, ...]:
    fields = line.split(",")
    if len(fields) != 8:
        raise TraceFormatError(f"expected 8 columns, got {len(fields)}", lineno)
    try:
        ts = int(fields[0])
        src = parse_ip(fields[1])
        dst = parse_ip(fields[2])
        sport = int(fields[3])
        dport = int(fields[4])
        proto = int(fields[5])
        blen = int(fields[6])
        flag_text = fields[7]
        if not flag_text.startswith(("0x", "0X")):
            raise ValueError(f"tcp_flags must be hex with 0x prefix: {flag_text!r}")
        flags = int(flag_text[2:], 16)
    except ValueError as exc:
        raise TraceFormatError(str(exc), lineno) from None
    if ts < 0:
        raise TraceFormatError("negative timestamp", lineno)
    if not 0 <= sport <= 65535 or not 0 <= dport <= 65535:
        raise TraceFormatError("port out of range", lineno)
    if not 0 <= proto <= 255:
        raise TraceFormatError("proto out of range", lineno)
    if not 1 <= blen <= 65535:
        raise TraceFormatError("byte_len out of range", lineno)
    if not 0 <= flags <= 255:
        raise TraceFormatError("tcp_flags out of range", lineno)
    if proto != PROTO_TCP and flags:
        raise TraceFormatError("tcp_flags set on non-TCP packet", lineno)
    return ts, src, dst, sport, dport, proto, blen, flags


def read_trace(path: str | os.PathLike) -> Trace:
    """Load a trace CSV, validating every row.

    Errors carry the 1-based file line number (the header is line 1).
    """
    rows = []
    last_ts = None
    with open(path, "r", newline="") as fh:
        header = fh.readline().rstrip("\r\n")
        if header != TRACE_HEADER:
            raise TraceFormatError(f"bad header {header!r}", 1)
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                raise TraceFormatError("empty row", lineno)
            row = _parse_row(line, lineno)
            if last_ts is not None and row[0] < last_ts:
                raise TraceFormatError(f"timestamp regression ({row[0]} < {last_ts})", lineno)
            last_ts = row[0]
            rows.append(row)
    if not rows:
        return Trace.empty()
    return Trace(*zip(*rows))


def _ip_strings(col: np.ndarray) -> list[str]:
    uniq, inverse = np.unique(col, return_inverse=True)
    text = [ip_to_str(int(v)) for v in uniq]
    return [text[i] for i in inverse.tolist()]


def format_trace_lines(packets: Sequence[PacketRecord] | Trace) -> Iterator[str]:
    trace = as_trace(packets)
    trace.validate()
    yield TRACE_HEADER + "\n"
    if not len(trace):
        return
    src = _ip_strings(trace.src_ip)
    dst = _ip_strings(trace.dst_ip)
    for ts, s, d, sp, dp, pr, bl, fl in zip(
        trace.ts_us.tolist(), src, dst, trace.src_port.tolist(), trace.dst_port.tolist(),
        trace.proto.tolist(), trace.byte_len.tolist(), trace.tcp_flags.tolist(),
    ):
        yield f"{ts},{s},{d},{sp},{dp},{pr},{bl},0x{fl:02x}\n"


def write_trace(packets: Sequence[PacketRecord] | Trace, path: str | os.PathLike) -> None:
    """Write a trace CSV. Invalid input raises before the file is touched."""
    lines = list(format_trace_lines(packets))
    with open(path, "w", newline="\n") as fh:
        fh.writelines(lines)


# -- synthetic traffic --------------------------------------------------------


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of the synthetic heavy-tailed trace.

    ``tcp_fraction`` and ``n_servers`` shape the key space only; they do not
    affect the size or timing structure of the traffic.
    """

    duration_s: float = 3600.0
    flow_arrival_rate: float = 200.0
    pareto_alpha: float = 1.2
    pareto_xmin: int = 1
    pkt_size_small: int = 40
    pkt_size_large: int = 1500
    large_pkt_prob: float = 0.5
    mean_ipg_ms: float = 50.0
    seed: int = 0
    tcp_fraction: float = 0.85
    n_servers: int = 4096

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        if not self.flow_arrival_rate > 0:
            raise ValueError("flow_arrival_rate must be positive")
        if not self.pareto_alpha > 0:
            raise ValueError("pareto_alpha must be positive")
        if self.pareto_xmin < 1:
            raise ValueError("pareto_xmin must be at least 1")
        if not 0.0 <= self.large_pkt_prob <= 1.0:
            raise ValueError("large_pkt_prob must lie in [0, 1]")
        if not self.mean_ipg_ms > 0:
            raise ValueError("mean_ipg_ms must be positive")
        for name in ("pkt_size_small", "pkt_size_large"):
            if not 1 <= getattr(self, name) <= 65535:
                raise ValueError(f"{name} must lie in [1, 65535]")
        if not 0.0 <= self.tcp_fraction <= 1.0:
            raise ValueError("tcp_fraction must lie in [0, 1]")
        if self.n_servers < 1:
            raise ValueError("n_servers must be at least 1")


_SERVER_PORTS = np.array([80, 443, 53, 22, 25, 110, 123, 8080, 3306, 6881], dtype=np.int64)
_SERVER_PORT_WEIGHTS = np.array([0.35, 0.3, 0.08, 0.04, 0.04, 0.02, 0.02, 0.06, 0.03, 0.06])
_CLIENT_BASE = 0x0A000000  # 10.0.0.0/8
_SERVER_BASE = 0xC0A80000  # 192.168.0.0/16 onward


def make_rng(seed: int) -> np.random.Generator:
    """The generator every seeded routine uses: numpy PCG64."""
    return np.random.Generator(np.random.PCG64(seed))


def draw_flow_lengths(rng: np.random.Generator, n: int, alpha: float, xmin: int) -> np.ndarray:
    """Discretised Pareto: ``floor(xmin * U**(-1/alpha))`` with U ~ Uniform(0, 1]."""
    u = 1.0 - rng.random(n)
    lengths = np.floor(xmin * u ** (-1.0 / alpha))
    # Astronomically large draws only occur for tiny alpha; clip before the int cast.
    return np.minimum(lengths, 2.0**40).astype(np.int64)


def _unique_keys(rng, src_ip, src_port, dst_ip, dst_port, proto):
    packed = np.stack([src_ip, src_port, dst_ip, dst_port, proto], axis=1)
    while True:
        _, first = np.unique(packed, axis=0, return_index=True)
        dup = np.ones(len(packed), dtype=bool)
        dup[first] = False
        n_dup = int(dup.sum())
        if not n_dup:
            return packed[:, 1]
        packed[dup, 1] = rng.integers(1024, 65536, n_dup)


def generate_synthetic(config: SyntheticConfig) -> Trace:
    """Generate a seeded trace of Poisson-arriving flows with Pareto lengths.

    Per flow: start time uniform over the window (so arrivals are a Poisson
    process), packet count from :func:`draw_flow_lengths`, exponential
    inter-packet gaps, and per-packet sizes from the two-point mixture.
    Packets at or past the end of the window are dropped; TCP flows open
    with SYN and their last emitted packet carries FIN.
    """
    rng = make_rng(config.seed)
    duration_us = int(round(config.duration_s * 1e6))
    n_flows = int(rng.poisson(config.flow_arrival_rate * config.duration_s))
    if n_flows == 0:
        return Trace.empty()

    starts = np.sort(np.floor(rng.random(n_flows) * duration_us).astype(np.int64))
    lengths = draw_flow_lengths(rng, n_flows, config.pareto_alpha, config.pareto_xmin)
    proto = np.where(rng.random(n_flows) < config.tcp_fraction, PROTO_TCP, PROTO_UDP)
    src_ip = _CLIENT_BASE + rng.integers(0, 1 << 24, n_flows)
    src_port = rng.integers(1024, 65536, n_flows)
    dst_ip = _SERVER_BASE + rng.integers(0, config.n_servers, n_flows)
    dst_port = rng.choice(_SERVER_PORTS, size=n_flows, p=_SERVER_PORT_WEIGHTS)
    src_port = _unique_keys(rng, src_ip, src_port, dst_ip, dst_port, proto)

    # Flows cannot outlast the window, so bound the packet count before
    # materialising per-packet arrays; a flow keeps at least its first packet.
    mean_ipg_us = config.mean_ipg_ms * 1e3
    room = (duration_us - starts) / mean_ipg_us
    cap = np.ceil(room + 10.0 * np.sqrt(room) + 10.0).astype(np.int64)
    lengths = np.maximum(np.minimum(lengths, cap), 1)

    total = int(lengths.sum())
    flow_of = np.repeat(np.arange(n_flows), lengths)
    first_idx = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    gaps = np.maximum(np.rint(rng.exponential(mean_ipg_us, total)), 1).astype(np.int64)
    gaps[first_idx] = 0
    offsets = np.cumsum(gaps)
    offsets -= np.repeat(offsets[first_idx], lengths)
    ts = starts[flow_of] + offsets
    sizes = np.where(
        rng.random(total) < config.large_pkt_prob, config.pkt_size_large, config.pkt_size_small
    )

    keep = ts < duration_us
    ts, sizes, flow_of = ts[keep], sizes[keep], flow_of[keep]
    seq = np.arange(len(ts))

    # Packets of each flow are contiguous and time-ordered here.
    is_first = np.ones(len(ts), dtype=bool)
    is_first[1:] = flow_of[1:] != flow_of[:-1]
    is_last = np.ones(len(ts), dtype=bool)
    is_last[:-1] = flow_of[:-1] != flow_of[1:]
    flags = np.full(len(ts), ACK, dtype=np.int64)
    flags[is_first] = SYN
    flags[is_last] = ACK | FIN
    flags[is_first & is_last] = SYN | FIN
    flags[proto[flow_of] != PROTO_TCP] = 0

    order = np.lexsort(
        (seq, proto[flow_of], dst_port[flow_of], dst_ip[flow_of], src_port[flow_of], src_ip[flow_of], ts)
    )
    f = flow_of[order]
    return Trace(
        ts[order], src_ip[f], dst_ip[f], src_port[f], dst_port[f], proto[f], sizes[order], flags[order]
    )
