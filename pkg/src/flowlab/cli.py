"""Command-line front end.

Each stage subcommand reads and writes the CSV contracts so stages compose
through files; ``run`` executes the whole pipeline into a report directory.
"""

from __future__ import annotations

import argparse
import os
import sys

from .distributions import FLOW_METRICS, flow_size_cdf, ks_test, packet_size_cdf
from .experiment import (
    BINNED_HEADER,
    CDF_HEADER,
    MOMENTS_HEADER,
    ExperimentConfig,
    StageError,
    binned_rows,
    moment_rows_out,
    run_experiment,
    stage,
    write_csv,
    write_report,
)
from .flow_cache import CacheConfig, build_flows, read_flows, write_flows
from .sampler import SamplingSpec
from .stats import DEFAULT_BIN_WIDTHS, compare_binned, moment_table
from .trace import SyntheticConfig, generate_synthetic, read_trace, write_trace

SEED_ENV = "FLOWLAB_SEED"


def default_seed() -> int:
    value = os.environ.get(SEED_ENV)
    if value is None or value == "":
        return 0
    try:
        return int(value, 0)
    except ValueError:
        raise SystemExit(f"flowlab: {SEED_ENV} must be an integer, got {value!r}") from None


def _bins(text: str) -> list[float]:
    try:
        widths = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bin list {text!r}") from None
    if not widths or any(not w > 0 for w in widths):
        raise argparse.ArgumentTypeError("bin widths must be positive")
    return widths


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (default: ${SEED_ENV} or 0)")


def _add_synthetic(p):
    d = SyntheticConfig()
    g = p.add_argument_group("synthetic trace")
    g.add_argument("--duration", type=float, default=d.duration_s, help="seconds")
    g.add_argument("--flow-rate", type=float, default=d.flow_arrival_rate, help="flow arrivals per second")
    g.add_argument("--pareto-alpha", type=float, default=d.pareto_alpha)
    g.add_argument("--pareto-xmin", type=int, default=d.pareto_xmin)
    g.add_argument("--pkt-small", type=int, default=d.pkt_size_small)
    g.add_argument("--pkt-large", type=int, default=d.pkt_size_large)
    g.add_argument("--large-prob", type=float, default=d.large_pkt_prob)
    g.add_argument("--mean-ipg-ms", type=float, default=d.mean_ipg_ms)
    g.add_argument("--tcp-fraction", type=float, default=d.tcp_fraction)


def _add_sampling(p, default_n=1000):
    g = p.add_argument_group("sampling")
    m = g.add_mutually_exclusive_group()
    m.add_argument("--sample-n", type=int, default=None, help=f"systematic 1-in-N (default {default_n})")
    m.add_argument("--sample-q", type=float, default=None, help="Bernoulli sampling probability")
    g.add_argument("--sample-phase", type=int, default=0)
    p.set_defaults(_default_n=default_n)


def _add_cache(p):
    d = CacheConfig()
    g = p.add_argument_group("flow cache")
    g.add_argument("--inactive-timeout", type=float, default=d.inactive_timeout_s, help="seconds")
    g.add_argument("--active-timeout", type=float, default=d.active_timeout_s, help="seconds")
    g.add_argument("--capacity", type=int, default=None, help="cache entries (default: unlimited)")
    g.add_argument("--no-tcp-end", action="store_true", help="do not expire flows on FIN/RST")


def _seed(args) -> int:
    return args.seed if args.seed is not None else default_seed()


def _synthetic(args) -> SyntheticConfig:
    return SyntheticConfig(
        duration_s=args.duration, flow_arrival_rate=args.flow_rate, pareto_alpha=args.pareto_alpha,
        pareto_xmin=args.pareto_xmin, pkt_size_small=args.pkt_small, pkt_size_large=args.pkt_large,
        large_pkt_prob=args.large_prob, mean_ipg_ms=args.mean_ipg_ms, seed=_seed(args),
        tcp_fraction=args.tcp_fraction,
    )


def _sampling(args) -> SamplingSpec:
    if args.sample_q is not None:
        return SamplingSpec(mode="bernoulli", q=args.sample_q, seed=_seed(args))
    n = args.sample_n if args.sample_n is not None else args._default_n
    return SamplingSpec(mode="systematic", n=n, phase=args.sample_phase)


def _cache(args) -> CacheConfig:
    return CacheConfig(
        inactive_timeout_s=args.inactive_timeout, active_timeout_s=args.active_timeout,
        capacity=args.capacity, tcp_end_expiry=not args.no_tcp_end,
    )


# -- subcommands --------------------------------------------------------------


def cmd_generate(args) -> int:
    with stage("generate"):
        trace = generate_synthetic(_synthetic(args))
    with stage("write"):
        write_trace(trace, args.out)
    print(f"wrote {len(trace)} packets to {args.out}")
    return 0


def cmd_sample(args) -> int:
    with stage("load"):
        trace = read_trace(args.trace)
    with stage("sample"):
        sampled = _sampling(args).apply(trace)
    with stage("write"):
        write_trace(sampled, args.out)
    print(f"kept {len(sampled)} of {len(trace)} packets")
    return 0


def cmd_flows(args) -> int:
    with stage("load"):
        trace = read_trace(args.trace)
    with stage("flows"):
        flows = build_flows(trace, _cache(args))
    with stage("write"):
        write_flows(flows, args.out)
    print(f"exported {len(flows)} flow records")
    return 0


def _comparisons(args, widths):
    with stage("load"):
        trace = read_trace(args.trace)
        if not len(trace):
            raise ValueError("trace is empty")
        spec = _sampling(args)
        sampled = read_trace(args.sampled) if args.sampled else None
    with stage("sample"):
        if sampled is None:
            sampled = spec.apply(trace)
    start, end = int(trace.ts_us[0]), int(trace.ts_us[-1]) + 1
    with stage("bins"):
        return [compare_binned(trace, sampled, spec.probability, w, start, end) for w in widths]


def cmd_bins(args) -> int:
    if len(args.bins) != 1:
        raise StageError("bins", ValueError("bins writes one series; pass a single --bins width"))
    (comparison,) = _comparisons(args, args.bins)
    with stage("write"):
        write_csv(args.out, BINNED_HEADER, binned_rows(comparison))
    return 0


def cmd_moments(args) -> int:
    comparisons = _comparisons(args, sorted(set(args.bins)))
    with stage("moments"):
        rows = moment_table(comparisons)
    with stage("write"):
        write_csv(args.out, MOMENTS_HEADER, moment_rows_out(rows))
    return 0


def cmd_cdf(args) -> int:
    with stage("cdf"):
        if args.metric == "packet_size":
            if not args.trace:
                raise ValueError("--metric packet_size needs --trace")
            cdf = packet_size_cdf(read_trace(args.trace))
        else:
            if args.flows:
                flows = read_flows(args.flows)
            elif args.trace:
                flows = build_flows(read_trace(args.trace), _cache(args))
            else:
                raise ValueError("flow metrics need --flows or --trace")
            cdf = flow_size_cdf(flows, args.metric)
    with stage("write"):
        write_csv(args.out, CDF_HEADER, cdf.points)
    return 0


def read_samples(path) -> list[float]:
    """Single-column numeric CSV; a non-numeric first line is taken as a header."""
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if "," in text:
                raise ValueError(f"{path}: line {lineno}: expected a single column")
            try:
                values.append(float(text))
            except ValueError:
                if lineno == 1:
                    continue
                raise ValueError(f"{path}: line {lineno}: not a number: {text!r}") from None
    return values


def cmd_kstest(args) -> int:
    try:
        res = ks_test(read_samples(args.file_a), read_samples(args.file_b), args.alpha)
    except (OSError, ValueError) as exc:
        print(f"flowlab kstest: {exc}", file=sys.stderr)
        return 2
    print(f"statistic_d={res.statistic_d:.12g}")
    print(f"n1={res.n1}")
    print(f"n2={res.n2}")
    print(f"critical_value={res.critical_value:.12g}")
    print(f"alpha={res.alpha:g}")
    print(f"reject={'true' if res.reject else 'false'}")
    return 1 if res.reject else 0


def cmd_run(args) -> int:
    with stage("config"):
        config = ExperimentConfig(
            trace_path=args.trace,
            synthetic=_synthetic(args),
            sampling=_sampling(args),
            cache=_cache(args),
            bin_widths=tuple(sorted(set(args.bins))),
            alpha=args.alpha,
            ks_interval_s=args.ks_interval,
            figures=not args.no_figures,
        )
    result = run_experiment(config)
    write_report(result, args.out)
    print(f"report written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowlab", description="NetFlow sampling and inversion laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic heavy-tailed trace")
    _add_seed(p)
    _add_synthetic(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sample", help="sample a trace")
    p.add_argument("--trace", required=True)
    _add_seed(p)
    _add_sampling(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("flows", help="run a trace through the flow cache")
    p.add_argument("--trace", required=True)
    _add_cache(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_flows)

    for name, func, helptext, default_bins in (
        ("bins", cmd_bins, "binned d/p series, original vs inverted", [DEFAULT_BIN_WIDTHS[0]]),
        ("moments", cmd_moments, "moment table per bin width", list(DEFAULT_BIN_WIDTHS)),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--trace", required=True, help="unsampled trace")
        p.add_argument("--sampled", help="pre-sampled trace (default: sample --trace)")
        _add_seed(p)
        _add_sampling(p)
        p.add_argument("--bins", type=_bins, default=default_bins, help="comma-separated seconds")
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("cdf", help="ECDF of packet sizes or per-flow sizes")
    p.add_argument("--trace")
    p.add_argument("--flows")
    p.add_argument("--metric", choices=("packet_size",) + FLOW_METRICS, default="packets")
    _add_cache(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cdf)

    p = sub.add_parser("kstest", help="two-sample KS test; exit 0 keep, 1 reject, 2 error")
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_kstest)

    p = sub.add_parser("run", help="full experiment into a report directory")
    p.add_argument("--trace", help="trace CSV (default: synthetic trace)")
    _add_seed(p)
    _add_synthetic(p)
    _add_sampling(p)
    _add_cache(p)
    p.add_argument("--bins", type=_bins, default=list(DEFAULT_BIN_WIDTHS), help="comma-separated seconds")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--ks-interval", type=float, default=30.0, help="seconds per KS interval")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"flowlab {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
