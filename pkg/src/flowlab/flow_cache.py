"""NetFlow-style flow cache emulation.

Expiry is evaluated lazily at each packet's timestamp, never against a wall
clock, so a run over a trace is fully replayable.  Resident entries are kept
in two insertion-ordered maps: one ordered by last activity (the idle and
pressure-eviction candidates sit at its front) and one ordered by creation
time (the active-timeout candidates sit at its front).
"""

from __future__ import annotations

import math
import os
from collections import OrderedDict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import NamedTuple

from .trace import FIN, PROTO_TCP, RST, FlowKey, PacketRecord, Trace, as_trace, ip_to_str, parse_ip

EXPORT_REASONS = ("inactive", "active", "tcp_end", "pressure", "flush")

FLOW_HEADER = (
    "src_ip,dst_ip,src_port,dst_port,proto,first_ts_us,last_ts_us,packets,bytes,flags_or,export_reason"
)


@dataclass(frozen=True)
class CacheConfig:
    """Flow cache parameters. ``capacity=None`` means unlimited memory."""

    inactive_timeout_s: float = 15.0
    active_timeout_s: float = 1800.0
    capacity: int | None = None
    high_watermark: float = 0.9
    evict_fraction: float = 0.1
    tcp_end_expiry: bool = True

    def __post_init__(self):
        if not self.inactive_timeout_s > 0:
            raise ValueError("inactive_timeout_s must be positive")
        if not self.active_timeout_s > self.inactive_timeout_s:
            raise ValueError("active_timeout_s must exceed inactive_timeout_s")
        if self.capacity is not None and self.capacity < 1:
            raise ValueError("capacity must be at least 1")
        if not 0.0 < self.high_watermark <= 1.0:
            raise ValueError("high_watermark must lie in (0, 1]")
        if not 0.0 < self.evict_fraction < 1.0:
            raise ValueError("evict_fraction must lie in (0, 1)")


class FlowRecord(NamedTuple):
    key: FlowKey
    first_ts_us: int
    last_ts_us: int
    packets: int
    bytes: int
    flags_or: int
    export_reason: str


class _Entry:
    __slots__ = ("first", "last", "packets", "bytes", "flags")

    def __init__(self, ts: int, nbytes: int, flags: int):
        self.first = ts
        self.last = ts
        self.packets = 1
        self.bytes = nbytes
        self.flags = flags


def _sort_key(rec: FlowRecord):
    return rec.first_ts_us, rec.key


class FlowCacheError(ValueError):
    pass


class FlowCache:
    """Stateful flow cache; feed packets in timestamp order via :meth:`offer`."""

    def __init__(self, config: CacheConfig | None = None):
        self.config = config or CacheConfig()
        self._inactive_us = int(round(self.config.inactive_timeout_s * 1e6))
        self._active_us = int(round(self.config.active_timeout_s * 1e6))
        cap = self.config.capacity
        self._pressure_limit = None if cap is None else self.config.high_watermark * cap
        self._by_last: OrderedDict[tuple, _Entry] = OrderedDict()
        self._by_first: OrderedDict[tuple, None] = OrderedDict()
        self._now: int | None = None

    def __len__(self) -> int:
        return len(self._by_last)

    def __contains__(self, key) -> bool:
        return tuple(key) in self._by_last

    def _export(self, key: tuple, reason: str) -> FlowRecord:
        e = self._by_last.pop(key)
        del self._by_first[key]
        return FlowRecord(FlowKey._make(key), e.first, e.last, e.packets, e.bytes, e.flags, reason)

    def offer(self, packet: PacketRecord) -> list[FlowRecord]:
        """Account one packet; return every record its arrival exported."""
        p = packet
        return self._offer(p.ts_us, (p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.proto), p.byte_len, p.tcp_flags)

    def _offer(self, ts: int, key: tuple, nbytes: int, flags: int) -> list[FlowRecord]:
        if self._now is not None and ts < self._now:
            raise FlowCacheError(f"packet at {ts} us offered after {self._now} us; sort the trace first")
        self._now = ts
        out = []
        by_last = self._by_last

        # Idle entries: the front of by_last has the oldest activity.
        idle_cutoff = ts - self._inactive_us
        while by_last:
            k = next(iter(by_last))
            if by_last[k].last > idle_cutoff:
                break
            out.append(self._export(k, "inactive"))
        # Long-lived entries: the front of by_first has the oldest start.
        age_cutoff = ts - self._active_us
        while self._by_first:
            k = next(iter(self._by_first))
            if by_last[k].first > age_cutoff:
                break
            out.append(self._export(k, "active"))

        entry = by_last.get(key)
        if entry is None:
            by_last[key] = _Entry(ts, nbytes, flags)
            self._by_first[key] = None
        else:
            entry.last = ts
            entry.packets += 1
            entry.bytes += nbytes
            entry.flags |= flags
            by_last.move_to_end(key)

        if self.config.tcp_end_expiry and key[4] == PROTO_TCP and flags & (FIN | RST):
            out.append(self._export(key, "tcp_end"))

        if self._pressure_limit is not None and len(by_last) > self._pressure_limit:
            n_evict = max(1, math.ceil(self.config.evict_fraction * len(by_last)))
            for k in list(by_last)[:n_evict]:
                out.append(self._export(k, "pressure"))

        if len(out) > 1:
            out.sort(key=_sort_key)
        return out

    def flush(self) -> list[FlowRecord]:
        """Export every resident entry and leave the cache empty."""
        out = [self._export(k, "flush") for k in list(self._by_last)]
        out.sort(key=_sort_key)
        return out


def build_flows(trace: Sequence[PacketRecord] | Trace, config: CacheConfig | None = None) -> list[FlowRecord]:
    """Run a whole trace through a fresh cache, then flush it."""
    trace = as_trace(trace)
    if not trace.is_sorted():
        raise FlowCacheError("trace is not sorted by ts_us")
    cache = FlowCache(config)
    offer = cache._offer
    out: list[FlowRecord] = []
    cols = [c.tolist() for c in trace.columns()]
    for ts, s, d, sp, dp, pr, bl, fl in zip(*cols):
        exported = offer(ts, (s, d, sp, dp, pr), bl, fl)
        if exported:
            out.extend(exported)
    out.extend(cache.flush())
    return out


# -- CSV I/O ------------------------------------------------------------------


def write_flows(flows: Iterable[FlowRecord], path: str | os.PathLike) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(FLOW_HEADER + "\n")
        for r in flows:
            k = r.key
            fh.write(
                f"{ip_to_str(k.src_ip)},{ip_to_str(k.dst_ip)},{k.src_port},{k.dst_port},{k.proto},"
                f"{r.first_ts_us},{r.last_ts_us},{r.packets},{r.bytes},0x{r.flags_or:02x},{r.export_reason}\n"
            )


def read_flows(path: str | os.PathLike) -> list[FlowRecord]:
    out = []
    with open(path, "r", newline="") as fh:
        header = fh.readline().rstrip("\r\n")
        if header != FLOW_HEADER:
            raise ValueError(f"line 1: bad flow header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            f = line.rstrip("\r\n").split(",")
            if len(f) != 11:
                raise ValueError(f"line {lineno}: expected 11 columns, got {len(f)}")
            try:
                key = FlowKey(parse_ip(f[0]), parse_ip(f[1]), int(f[2]), int(f[3]), int(f[4]))
                rec = FlowRecord(key, int(f[5]), int(f[6]), int(f[7]), int(f[8]), int(f[9], 16), f[10])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            if rec.export_reason not in EXPORT_REASONS:
                raise ValueError(f"line {lineno}: unknown export reason {rec.export_reason!r}")
            if rec.packets < 1 or rec.bytes < rec.packets or rec.first_ts_us > rec.last_ts_us:
                raise ValueError(f"line {lineno}: inconsistent flow record")
            out.append(rec)
    return out
