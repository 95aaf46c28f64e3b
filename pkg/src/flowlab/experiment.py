"""End-to-end experiment: trace -> sampling -> flows -> bins/moments/CDFs/KS -> report."""

from __future__ import annotations

import contextlib
import hashlib
import json
import os
import shutil
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .distributions import (
    FLOW_METRICS,
    Ecdf,
    IntervalKs,
    flow_size_cdf,
    interval_ks,
    packet_size_cdf,
    rejection_rate,
)
from .flow_cache import CacheConfig, FlowRecord, build_flows
from .sampler import SamplingSpec
from .stats import (
    DEFAULT_BIN_WIDTHS,
    BinnedComparison,
    ErrorSummary,
    MomentRow,
    compare_binned,
    error_summary,
    moment_table,
)
from .trace import SyntheticConfig, Trace, generate_synthetic, read_trace

NA = "NA"


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass(frozen=True)
class ExperimentConfig:
    trace_path: str | None = None
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    sampling: SamplingSpec = field(default_factory=lambda: SamplingSpec(n=1000))
    cache: CacheConfig = field(default_factory=CacheConfig)
    bin_widths: tuple[float, ...] = DEFAULT_BIN_WIDTHS
    alpha: float = 0.05
    ks_interval_s: float = 30.0
    figures: bool = True

    def __post_init__(self):
        if not self.bin_widths:
            raise ValueError("at least one bin width is required")
        if any(not w > 0 for w in self.bin_widths):
            raise ValueError("bin widths must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.ks_interval_s > 0:
            raise ValueError("ks_interval_s must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.trace_path is not None:
            d["synthetic"] = None
        d["bin_widths"] = list(self.bin_widths)
        return d


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trace: Trace
    sampled: Trace
    q: float
    start_ts_us: int
    end_ts_us: int
    comparisons: list[BinnedComparison]
    moment_rows: list[MomentRow]
    error_rows: list[ErrorSummary]
    flows_unsampled: list[FlowRecord]
    flows_sampled: list[FlowRecord]
    ks_rows: list[IntervalKs]
    input_digest: str

    def comparison(self, bin_s: float) -> BinnedComparison:
        for c in self.comparisons:
            if c.original.bin_width_s == bin_s:
                return c
        raise KeyError(bin_s)

    def cdfs(self) -> dict[str, Ecdf]:
        out = {
            "packet_size_unsampled": packet_size_cdf(self.trace),
        }
        if len(self.sampled):
            out["packet_size_sampled"] = packet_size_cdf(self.sampled)
        for metric in FLOW_METRICS:
            out[f"flow_{metric}_unsampled"] = flow_size_cdf(self.flows_unsampled, metric)
            if self.flows_sampled:
                out[f"flow_{metric}_sampled"] = flow_size_cdf(self.flows_sampled, metric)
        return out


def trace_digest(trace: Trace) -> str:
    h = hashlib.sha256()
    for col in trace.columns():
        h.update(np.ascontiguousarray(col, dtype="<i8").tobytes())
    return h.hexdigest()


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    if config.trace_path is not None:
        with stage("load"):
            trace = read_trace(config.trace_path)
            digest = "sha256:" + file_digest(config.trace_path)
    else:
        with stage("generate"):
            trace = generate_synthetic(config.synthetic)
            digest = "sha256-columns:" + trace_digest(trace)
    if not len(trace):
        raise StageError("load", ValueError("trace is empty"))

    with stage("sample"):
        sampled = config.sampling.apply(trace)
        q = config.sampling.probability

    start = int(trace.ts_us[0])
    end = int(trace.ts_us[-1]) + 1
    with stage("bins"):
        comparisons = [
            compare_binned(trace, sampled, q, w, start, end) for w in sorted(set(config.bin_widths))
        ]
    with stage("moments"):
        moment_rows = moment_table(comparisons)
        error_rows = [r for c in comparisons for r in error_summary(c)]
    with stage("flows"):
        flows_unsampled = build_flows(trace, config.cache)
        flows_sampled = build_flows(sampled, config.cache)
    with stage("kstest"):
        width_us = int(round(config.ks_interval_s * 1e6))
        n_intervals = -(-(end - start) // width_us)
        ks_rows = []
        for metric in FLOW_METRICS:
            ks_rows.extend(interval_ks(
                flows_unsampled, flows_sampled, start, config.ks_interval_s, n_intervals, metric, config.alpha
            ))

    return ExperimentResult(
        config, trace, sampled, q, start, end, comparisons, moment_rows, error_rows,
        flows_unsampled, flows_sampled, ks_rows, digest,
    )


# -- report writing -----------------------------------------------------------


def fmt(x) -> str:
    """Render a report cell; ``None`` becomes ``NA``."""
    if x is None:
        return NA
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return format(x, ".12g")


def write_csv(path: str | os.PathLike, header: str, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


BINNED_HEADER = "bin_start_us,d,p,dn,pn,e_d,e_p"
MOMENTS_HEADER = "quantity,bin_s,series,mean,std,skewness,kurtosis"
ERRORS_HEADER = "quantity,bin_s,mean_abs_e,rms_e,max_abs_e,n_defined,n_bins"
CDF_HEADER = "value,cum_prob"
KS_HEADER = "interval_index,metric,d_statistic,critical,reject"


def binned_rows(c: BinnedComparison):
    return zip(
        c.original.bin_starts_us.tolist(), c.original.d.tolist(), c.original.p.tolist(),
        c.dn.values.tolist(), c.pn.values.tolist(), c.e_d, c.e_p,
    )


def moment_rows_out(rows: list[MomentRow]):
    for r in rows:
        s = r.summary
        yield r.quantity, r.bin_s, r.series, s.mean, s.std, s.skewness, s.kurtosis_excess


def ks_rows_out(rows: list[IntervalKs]):
    for r in sorted(rows, key=lambda r: (FLOW_METRICS.index(r.metric), r.interval_index)):
        if r.result is None:
            yield r.interval_index, r.metric, None, None, None
        else:
            yield r.interval_index, r.metric, r.result.statistic_d, r.result.critical_value, r.result.reject


def _bin_label(w: float) -> str:
    return fmt(w).replace(".", "p")


def write_report(result: ExperimentResult, out_dir: str | os.PathLike) -> Path:
    """Write every report file, atomically replacing ``out_dir``.

    Files are staged in a sibling temporary directory; on any failure it is
    removed and ``out_dir`` is left untouched.
    """
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not (out_dir / "manifest.json").exists():
        raise StageError("write", FileExistsError(f"{out_dir} exists and is not a flowlab report"))
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    tmp.chmod(0o755)
    try:
        _write_report_files(result, tmp)
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out_dir


def _write_report_files(result: ExperimentResult, out: Path) -> None:
    cfg = result.config
    with stage("write"):
        for c in result.comparisons:
            write_csv(out / f"binned_{_bin_label(c.original.bin_width_s)}s.csv", BINNED_HEADER, binned_rows(c))
        write_csv(out / "moments.csv", MOMENTS_HEADER, moment_rows_out(result.moment_rows))
        write_csv(
            out / "errors.csv", ERRORS_HEADER,
            ((e.quantity, e.bin_s, e.mean_abs, e.rms, e.max_abs, e.n_defined, e.n_bins) for e in result.error_rows),
        )
    with stage("cdf"):
        cdfs = result.cdfs()
        for name, cdf in cdfs.items():
            write_csv(out / f"cdf_{name}.csv", CDF_HEADER, cdf.points)
    with stage("write"):
        write_csv(out / "ks_intervals.csv", KS_HEADER, ks_rows_out(result.ks_rows))
    if cfg.figures:
        from .plotting import render_figures

        with stage("figures"):
            render_figures(result, out / "figures", cdfs)
    with stage("write"):
        _write_manifest(result, out)


def _write_manifest(result: ExperimentResult, out: Path) -> None:
    outputs = {}
    for path in sorted(p for p in out.rglob("*") if p.is_file()):
        outputs[path.relative_to(out).as_posix()] = "sha256:" + file_digest(path)
    ks = {
        metric: rejection_rate([r for r in result.ks_rows if r.metric == metric]) for metric in FLOW_METRICS
    }
    manifest = {
        "flowlab_version": __version__,
        "config": result.config.to_dict(),
        "input": {
            "digest": result.input_digest,
            "packets": len(result.trace),
            "bytes": result.trace.total_bytes,
            "window_us": [result.start_ts_us, result.end_ts_us],
        },
        "sampled": {"packets": len(result.sampled), "bytes": result.sampled.total_bytes, "q": result.q},
        "flows": {"unsampled": len(result.flows_unsampled), "sampled": len(result.flows_sampled)},
        "ks_rejection_rate": ks,
        "outputs": outputs,
    }
    with open(out / "manifest.json", "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
