"""Trace-driven NetFlow sampling, flow export and inversion laboratory."""

__version__ = "0.1.0"

from .distributions import Ecdf, KsResult, ecdf, flow_size_cdf, ks_statistic, ks_test, packet_size_cdf
from .flow_cache import CacheConfig, FlowCache, FlowRecord, build_flows
from .inversion import InvertedSeries, invert_count, invert_series
from .sampler import SamplingSpec, bernoulli_sample, systematic_sample
from .stats import BinnedSeries, MomentSummary, bin_stream, moments, relative_error, table_rows
from .trace import (
    FlowKey,
    PacketRecord,
    SyntheticConfig,
    Trace,
    TraceFormatError,
    generate_synthetic,
    read_trace,
    write_trace,
)

__all__ = [
    "BinnedSeries", "CacheConfig", "Ecdf", "FlowCache", "FlowKey", "FlowRecord", "InvertedSeries",
    "KsResult", "MomentSummary", "PacketRecord", "SamplingSpec", "SyntheticConfig", "Trace",
    "TraceFormatError", "bernoulli_sample", "bin_stream", "build_flows", "ecdf", "flow_size_cdf",
    "generate_synthetic", "invert_count", "invert_series", "ks_statistic", "ks_test", "moments",
    "packet_size_cdf", "read_trace", "relative_error", "systematic_sample", "table_rows", "write_trace",
]
