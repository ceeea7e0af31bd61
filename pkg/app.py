#!/usr/bin/env python3
"""
fts-sentinel command line.

Simulate sparsely observed functional time series, reconstruct them, calibrate
monitoring thresholds, run the open-ended CUSUM detector on files, compare
measures, and run the Monte Carlo experiments.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from typing import List, Optional

import numpy as np

from config import DEFAULT_LINE_HALF_WIDTH, HORIZON_FACTOR, QUANTILE_RESOLUTION
from utils import ConfigError, NumericError, get_logger, set_verbosity

log = get_logger("cli")


def _print_frame(df) -> None:
    df.to_csv(sys.stdout, index=False)


def _parse_alphas(text: str) -> List[float]:
    try:
        return [float(a) for a in text.split(",") if a.strip()]
    except ValueError as e:
        raise ConfigError(f"--alpha expects comma-separated numbers, got {text!r}") from e


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    from data_loaders import read_json, write_series
    from funcspace import GridFunction, Interval
    from synth import GeneratorConfig, density_series_mean, generate_density_series, generate_series

    if args.config:
        cfg = GeneratorConfig.from_dict(read_json(args.config))
    else:
        if args.line or args.densities:
            interval = Interval.line(args.line or DEFAULT_LINE_HALF_WIDTH)
        else:
            interval = Interval(args.lower, args.upper)
        cfg = GeneratorConfig(
            kind=args.kind,
            n_basis=args.n_basis,
            basis_decay=args.decay,
            d=args.d,
            interval=interval,
            n_nodes=args.nodes,
            q_or_rho=args.q_or_rho,
            seed=args.seed,
            scale=args.scale,
        )
    series = generate_density_series(cfg, args.n) if args.densities else generate_series(cfg, args.n)
    write_series(series, args.out)
    log.info(f"wrote {len(series)} {'densities' if args.densities else 'functions'} to {args.out}")
    if args.mean_out:
        if args.densities:
            mean = density_series_mean(cfg)
        else:
            mean = GridFunction.zeros(cfg.interval, cfg.n_nodes, cfg.d)
        write_series([mean], args.mean_out)
        log.info(f"wrote the mean function to {args.mean_out}")
    return 0


def cmd_reconstruct(args) -> int:
    from data_loaders import load_series, write_series
    from synth import BandwidthRule, ReconstructionConfig, reconstruct
    from utils import as_rng

    series = load_series(args.input)
    rule = BandwidthRule("fixed", h=args.bandwidth) if args.bandwidth else BandwidthRule()
    cfg = ReconstructionConfig(
        scheme=args.scheme,
        M=args.M,
        bandwidth=rule,
        design_density=args.design,
        noise_sigma=args.noise,
        d_min=args.d_min,
        d_max=args.d_max,
    )
    rng = as_rng(args.seed)
    estimates = [reconstruct(x, cfg, rng)[0] for x in series]
    write_series(estimates, args.out)
    log.info(f"reconstructed {len(estimates)} functions with scheme {cfg.scheme} (M={cfg.M})")
    return 0


def cmd_threshold(args) -> int:
    import pandas as pd

    from data_loaders import load_kernel
    from gausslimit import scalar_kernel
    from harness import THRESHOLD_COLUMNS, threshold_rows

    kernel = load_kernel(args.kernel) if args.kernel else scalar_kernel(args.variance)
    rows = threshold_rows(kernel, _parse_alphas(args.alpha), args.n_rep, args.resolution, args.seed)
    _print_frame(pd.DataFrame(rows, columns=THRESHOLD_COLUMNS))
    return 0


def cmd_monitor(args) -> int:
    import pandas as pd

    from data_loaders import load_series
    from monitor import ALARM, init_monitor, step

    training = load_series(args.train)
    stream = load_series(args.stream)
    state = init_monitor(training, args.q, strict=not args.audit)
    horizon = args.horizon or int(np.ceil(HORIZON_FACTOR * state.N))
    rows = []
    for x in stream[:horizon]:
        state, decision = step(state, x)
        rows.append({"k": state.k, "gamma": state.gamma_history[-1], "alarmed": decision == ALARM})
        if decision == ALARM:
            break
    _print_frame(pd.DataFrame(rows, columns=["k", "gamma", "alarmed"]))
    if state.alarmed:
        log.info(f"alarm at k={state.alarm_k}")
    else:
        log.info(f"no alarm after {state.k} observations")
    return 0


def cmd_metrics(args) -> int:
    from data_loaders import load_cov, load_measure
    from metrics import prokhorov_discrete, wasserstein2_gaussian

    t0 = time.perf_counter()
    if args.metric == "prokhorov":
        a, b = load_measure(args.a), load_measure(args.b)
        value = prokhorov_discrete(a, b, args.norm)
        dim, size = a.dim, a.size + b.size
    else:
        a, b = load_cov(args.a), load_cov(args.b)
        value = wasserstein2_gaussian(a, b)
        dim, size = a.dim, int(np.linalg.matrix_rank(a.entries))
    wall_ms = (time.perf_counter() - t0) * 1000.0
    print(f"{value:.12g},{dim},{size},{wall_ms:.3f}")
    return 0


def cmd_experiment(args) -> int:
    from dataclasses import replace

    from data_loaders import load_experiment_config
    from harness import emit_report, run_experiment

    cfg = load_experiment_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.n_rep is not None:
        overrides["n_rep"] = args.n_rep
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        cfg = replace(cfg, **overrides)
    log.info(f"running {cfg.experiment} experiment (N={cfg.N}, n_rep={cfg.n_rep}, seed={cfg.master_seed})")
    report = run_experiment(cfg)
    csv_path, _ = emit_report(report, args.out)
    print(csv_path)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fts-sentinel",
        description="Sparse functional time series: simulation, Gaussian approximation and open-ended monitoring",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="Simulate a latent functional series (JSON-lines)")
    p.add_argument("--config", help="Generator config JSON (overrides the flags below)")
    p.add_argument("--kind", default="iid_gauss_basis", choices=["iid_gauss_basis", "fma_q", "far1"])
    p.add_argument("-n", "--n", type=int, default=100, help="Number of functions (default: 100)")
    p.add_argument("--n-basis", type=int, default=8)
    p.add_argument("--decay", type=float, default=2.0, help="Basis coefficient decay exponent")
    p.add_argument("--d", type=int, default=1, help="Output dimension")
    p.add_argument("--nodes", type=int, default=101)
    p.add_argument("--lower", type=float, default=0.0)
    p.add_argument("--upper", type=float, default=1.0)
    p.add_argument("--line", type=float, default=None, help="Use the line truncation [-L, L] (densities default to L=3)")
    p.add_argument("--q-or-rho", type=float, default=0.0, help="MA order (fma_q) or AR coefficient (far1)")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--densities", action="store_true", help="Emit random densities on the line truncation")
    p.add_argument("--mean-out", default=None, help="Also write the exact mean function (JSON-lines)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True, help="Output JSON-lines file")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("reconstruct", help="Reconstruct observed estimators from latent functions")
    p.add_argument("--in", dest="input", required=True, help="Latent series (JSON-lines)")
    p.add_argument("--scheme", default="grid", choices=["nw", "grid", "kde"])
    p.add_argument("--M", type=int, default=100, help="Points per function (or KDE sample size)")
    p.add_argument("--bandwidth", type=float, default=None, help="Fixed bandwidth (default: size^-1/5)")
    p.add_argument("--design", default="uniform", choices=["uniform", "gaussian"])
    p.add_argument("--noise", type=float, default=0.0, help="Measurement noise sd (nw)")
    p.add_argument("--d-min", type=int, default=None, help="Random KDE sample size lower bound")
    p.add_argument("--d-max", type=int, default=None, help="Random KDE sample size upper bound")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("threshold", help="Monte Carlo quantiles of sup |W| as CSV")
    p.add_argument("--kernel", help="CovKernel JSON (default: scalar kernel)")
    p.add_argument("--variance", type=float, default=1.0, help="Scalar long-run variance without --kernel")
    p.add_argument("--alpha", default="0.1,0.05,0.01", help="Comma-separated levels")
    p.add_argument("--n-rep", type=int, default=10000)
    p.add_argument("--resolution", type=int, default=QUANTILE_RESOLUTION)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("monitor", help="Run the detector on a training file and a stream file")
    p.add_argument("--train", required=True, help="Training functions (JSON-lines)")
    p.add_argument("--stream", required=True, help="Monitoring stream (JSON-lines)")
    p.add_argument("--q", type=float, required=True, help="Threshold")
    p.add_argument("--horizon", type=int, default=None, help="Max observations (default: 5N)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict", action="store_true", default=True, help="Reject input after an alarm (default)")
    mode.add_argument("--audit", action="store_true", help="Ignore input after an alarm")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("metrics", help="Distances between measures")
    msub = p.add_subparsers(dest="metric", required=True)
    m = msub.add_parser("prokhorov", help="Prokhorov distance of two finite measures (CSV or JSON)")
    m.add_argument("--a", required=True)
    m.add_argument("--b", required=True)
    m.add_argument("--norm", default="max", choices=["max", "euclidean"])
    m.set_defaults(func=cmd_metrics)
    m = msub.add_parser("w2gauss", help="2-Wasserstein distance of two centred Gaussians")
    m.add_argument("--a", required=True, help="Covariance JSON")
    m.add_argument("--b", required=True, help="Covariance JSON")
    m.set_defaults(func=cmd_metrics)

    p = sub.add_parser("experiment", help="Run a size, power, decay or threshold experiment")
    p.add_argument("--config", required=True, help="Experiment config JSON (or a report sidecar)")
    p.add_argument("-o", "--out", default="output", help="Output directory (default: output)")
    p.add_argument("--seed", type=int, default=None, help="Override master_seed")
    p.add_argument("--n-rep", type=int, default=None, help="Override n_rep")
    p.add_argument("--workers", type=int, default=None, help="Override workers")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    set_verbosity(args.verbose)
    try:
        return args.func(args)
    except NumericError as e:
        print(f"Numeric error: {e}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
