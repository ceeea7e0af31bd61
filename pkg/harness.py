"""
Monte Carlo experiments: size and power of the monitoring scheme, decay of the
distance between the partial-sum field and its Gaussian limit, and threshold
tables.

Every random draw derives from (master_seed, purpose tag, indices) through
utils.derive_seed, so reports do not depend on worker scheduling, and the
calibration draws never share a seed with the monitored replications.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import (
    ATOM_CAP,
    DECAY_FLOOR_CLOUDS,
    DEFAULT_RHO,
    DEFAULT_SIGMA_MESH,
    GRID_COUNT_CONSTANT,
    HORIZON_FACTOR,
    MAX_GRID_POINTS,
    QUANTILE_RESOLUTION,
)
from funcspace import GridFunction
from gausslimit import CovKernel, estimate_lrv, factorize, quantile_from_samples, spacetime_cov, sup_samples
from metrics import EmpiricalMeasure, empirical_cov, prokhorov_discrete, wasserstein2_gaussian
from monitor import scan_detector
from partialsum import discretize, make_grid, partial_sum_from_block, vectorize
from synth import (
    ChangeSpec,
    GeneratorConfig,
    ReconstructionConfig,
    density_series_mean,
    generate_block,
    generate_density_series,
    generate_series,
    make_mean,
    reconstruct,
    true_lrv_kernel,
    with_seed,
)
from utils import ConfigError, as_rng, derive_seed, get_logger, safe_filename

log = get_logger("harness")

EXPERIMENTS = ("size", "power", "decay", "threshold")
CALIBRATIONS = ("estimated", "oracle")


@dataclass(frozen=True)
class GridSpec:
    rho: float = DEFAULT_RHO
    sigma_mesh: float = DEFAULT_SIGMA_MESH
    c_count: float = GRID_COUNT_CONSTANT

    def __post_init__(self):
        if not 0 < self.rho < self.sigma_mesh < 1:
            raise ConfigError(f"Grid needs 0 < rho < sigma_mesh < 1, got rho={self.rho}, sigma_mesh={self.sigma_mesh}")

    def to_dict(self) -> Dict[str, Any]:
        return {"rho": self.rho, "sigma_mesh": self.sigma_mesh, "c_count": self.c_count}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GridSpec":
        unknown = set(data) - {"rho", "sigma_mesh", "c_count"}
        if unknown:
            raise ConfigError(f"Unknown grid keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def _mean_from_json(obj: Optional[Dict[str, Any]], gen: GeneratorConfig) -> GridFunction:
    if obj is None:
        return make_mean("zero", 0.0, gen.interval, gen.n_nodes, gen.d)
    if "shape" in obj:
        extra = set(obj) - {"shape", "amplitude"}
        if extra:
            raise ConfigError(f"Unknown mean shorthand keys: {sorted(extra)}")
        return make_mean(obj["shape"], float(obj.get("amplitude", 0.0)), gen.interval, gen.n_nodes, gen.d)
    try:
        return GridFunction.from_dict(obj)
    except (KeyError, ValueError) as e:
        raise ConfigError(f"Invalid mean function: {e}") from e


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "size"
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    reconstruction: Optional[ReconstructionConfig] = None
    change: Optional[Dict[str, Any]] = None
    N: int = 100
    horizon_factor: float = HORIZON_FACTOR
    alpha: float = 0.05
    n_rep: int = 100
    quantile_reps: int = 1000
    lambda_resolution: int = QUANTILE_RESOLUTION
    grid: GridSpec = field(default_factory=GridSpec)
    master_seed: int = 0
    calibration: str = "estimated"
    lrv_bandwidth: Union[int, str] = "auto"
    workers: int = 1
    N_list: Tuple[int, ...] = ()
    alphas: Tuple[float, ...] = (0.1, 0.05, 0.01)
    atom_cap: int = ATOM_CAP
    label: str = ""

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"Unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.calibration not in CALIBRATIONS:
            raise ConfigError(f"Unknown calibration {self.calibration!r}; expected one of {CALIBRATIONS}")
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if self.n_rep < 1:
            raise ConfigError(f"n_rep must be >= 1, got {self.n_rep}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if any(not 0 < a < 1 for a in self.alphas):
            raise ConfigError(f"alphas must lie in (0, 1), got {list(self.alphas)}")
        if self.quantile_reps < 100:
            raise ConfigError(f"quantile_reps must be >= 100, got {self.quantile_reps}")
        if self.lambda_resolution < 1:
            raise ConfigError(f"lambda_resolution must be >= 1, got {self.lambda_resolution}")
        if not self.horizon_factor > 0:
            raise ConfigError(f"horizon_factor must be positive, got {self.horizon_factor}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise ConfigError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.atom_cap < 1:
            raise ConfigError(f"atom_cap must be >= 1, got {self.atom_cap}")
        if self.N_list:
            if any(n < 8 for n in self.N_list) or list(self.N_list) != sorted(set(self.N_list)):
                raise ConfigError(f"N_list must be strictly increasing with entries >= 8, got {list(self.N_list)}")
        if self.change is not None:
            extra = set(self.change) - {"mu1", "mu2", "k_star"}
            if extra:
                raise ConfigError(f"Unknown change keys: {sorted(extra)}")
        if self.scheme == "kde":
            if self.change is not None and not self.change_spec().is_null:
                raise ConfigError("The kde scheme observes densities; mean changes are not supported")
            if self.calibration == "oracle":
                raise ConfigError("Oracle calibration has no analytic kernel for the kde scheme")

    @property
    def scheme(self) -> Optional[str]:
        return self.reconstruction.scheme if self.reconstruction is not None else None

    @property
    def horizon(self) -> int:
        return int(math.ceil(self.horizon_factor * self.N))

    def change_spec(self) -> ChangeSpec:
        data = self.change or {}
        mu1 = _mean_from_json(data.get("mu1"), self.generator)
        mu2 = _mean_from_json(data.get("mu2", data.get("mu1")), self.generator)
        return ChangeSpec(mu1, mu2, int(data.get("k_star", 0)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment,
            "generator": self.generator.to_dict(),
            "reconstruction": self.reconstruction.to_dict() if self.reconstruction is not None else None,
            "change": self.change,
            "N": self.N,
            "horizon_factor": self.horizon_factor,
            "alpha": self.alpha,
            "n_rep": self.n_rep,
            "quantile_reps": self.quantile_reps,
            "lambda_resolution": self.lambda_resolution,
            "grid": self.grid.to_dict(),
            "master_seed": self.master_seed,
            "calibration": self.calibration,
            "lrv_bandwidth": self.lrv_bandwidth,
            "workers": self.workers,
            "N_list": list(self.N_list),
            "alphas": list(self.alphas),
            "atom_cap": self.atom_cap,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"Unknown experiment config keys: {sorted(unknown)}")
        if isinstance(data.get("generator"), dict):
            data["generator"] = GeneratorConfig.from_dict(data["generator"])
        if isinstance(data.get("reconstruction"), dict):
            data["reconstruction"] = ReconstructionConfig.from_dict(data["reconstruction"])
        if isinstance(data.get("grid"), dict):
            data["grid"] = GridSpec.from_dict(data["grid"])
        if "N_list" in data:
            data["N_list"] = tuple(int(n) for n in data["N_list"])
        if "alphas" in data:
            data["alphas"] = tuple(float(a) for a in data["alphas"])
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid experiment config: {e}") from e


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    columns: List[str]
    rows: List[Dict[str, Any]]
    summary: Dict[str, Any]
    seeds: Dict[str, Any]
    wall_time: float = 0.0

    def frame(self):
        import pandas as pd

        return pd.DataFrame(self.rows, columns=self.columns)


# ---------------------------------------------------------------------------
# Data generation shared by the studies
# ---------------------------------------------------------------------------


def _observed_block(cfg: ExperimentConfig, n: int, seed: int, recon_seed: int,
                    spec: Optional[ChangeSpec] = None, n_train: int = 0) -> np.ndarray:
    """n observed functions as an (n, n_nodes, d) array."""
    gen = with_seed(cfg.generator, seed)
    if cfg.reconstruction is None:
        block = generate_block(gen, n)
        if spec is not None:
            cut = min(n, n_train + spec.k_star)
            block[:cut] += spec.mu1.values
            block[cut:] += spec.mu2.values
        return block
    if cfg.scheme == "kde":
        latent = generate_density_series(gen, n)
    else:
        latent = generate_series(gen, n)
        if spec is not None:
            cut = n_train + spec.k_star
            latent = [GridFunction(x.interval, x.values + (spec.mu1 if i < cut else spec.mu2).values)
                      for i, x in enumerate(latent)]
    rng = as_rng(recon_seed)
    return np.stack([reconstruct(x, cfg.reconstruction, rng)[0].values for x in latent])


def _observed_grid(cfg: ExperimentConfig):
    """Interval and nodes of the observed estimators."""
    gen = cfg.generator
    if cfg.reconstruction is None:
        return gen.interval, np.linspace(gen.interval.lower, gen.interval.upper, gen.n_nodes)
    if cfg.scheme == "kde":
        template = density_series_mean(gen)
    else:
        template = GridFunction.zeros(gen.interval, gen.n_nodes, gen.d)
    est = reconstruct(template, cfg.reconstruction, 0)[0]
    return est.interval, est.nodes


def oracle_kernel(cfg: ExperimentConfig) -> CovKernel:
    """Analytic long-run kernel of the generator on the observed nodes."""
    if cfg.scheme == "kde":
        raise ConfigError("No analytic long-run kernel for density observations")
    interval, nodes = _observed_grid(cfg)
    true = true_lrv_kernel(cfg.generator)
    if len(nodes) == true.n_nodes and np.array_equal(nodes, true.u_grid):
        return true
    return CovKernel(nodes, true.d, true.on_points(nodes), 0, True, interval.truncation_of_line)


def calibration_kernel(cfg: ExperimentConfig, N: Optional[int] = None) -> CovKernel:
    """Kernel for the threshold: oracle, or estimated from a fresh calibration series of length N."""
    if cfg.calibration == "oracle":
        return oracle_kernel(cfg)
    N = cfg.N if N is None else N
    if N < 2:
        raise ConfigError(f"Estimated calibration needs N >= 2, got {N}")
    block = _observed_block(cfg, N, derive_seed(cfg.master_seed, "calibration", N),
                            derive_seed(cfg.master_seed, "calibration-reconstruct", N))
    interval, _ = _observed_grid(cfg)
    series = [GridFunction(interval, x) for x in block]
    return estimate_lrv(series, bandwidth=cfg.lrv_bandwidth)


def calibrate_threshold(cfg: ExperimentConfig) -> Tuple[float, CovKernel, int]:
    c = calibration_kernel(cfg)
    q_seed = derive_seed(cfg.master_seed, "quantile", cfg.N)
    samples = sup_samples(c, cfg.quantile_reps, cfg.lambda_resolution, q_seed)
    return quantile_from_samples(samples, cfg.alpha), c, q_seed


def _parallel_map(fn: Callable[[int], Dict[str, Any]], n: int, workers: int) -> List[Dict[str, Any]]:
    if workers <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n)))


def closed_end_threshold(q: float, N: int, horizon: int) -> float:
    """
    Threshold of the closed-end test over k <= horizon at the level of q.
    gamma(k) follows |W(t)| at t = k / (N + k), and the sup of W over
    [0, H / (N + H)] has the law of sqrt(H / (N + H)) times the sup over [0, 1].
    """
    return q * math.sqrt(horizon / (N + horizon))


def _rate_summary(rows: Sequence[Dict[str, Any]], n_rep: int) -> Dict[str, Any]:
    alarms = sum(1 for r in rows if r["alarmed"])
    rate = alarms / n_rep
    closed = sum(1 for r in rows if r["closed_end"]) / n_rep
    return {
        "rejection_rate": rate,
        "mc_se": math.sqrt(rate * (1.0 - rate) / n_rep),
        "closed_end_rate": closed,
        "closed_end_mc_se": math.sqrt(closed * (1.0 - closed) / n_rep),
        "truncated_share": sum(1 for r in rows if r["truncated"]) / n_rep,
    }


# ---------------------------------------------------------------------------
# Size and power
# ---------------------------------------------------------------------------

MONITOR_COLUMNS = ["rep", "seed", "alarmed", "alarm_k", "max_gamma", "steps_run", "truncated",
                   "closed_end", "closed_alarm_k"]


def _monitor_replications(cfg: ExperimentConfig, q: float, spec: Optional[ChangeSpec]) -> List[Dict[str, Any]]:
    N, H = cfg.N, cfg.horizon
    q_closed = closed_end_threshold(q, N, H)

    def one(i: int) -> Dict[str, Any]:
        seed = derive_seed(cfg.master_seed, "replication", i)
        block = _observed_block(cfg, N + H, seed, derive_seed(cfg.master_seed, "reconstruct", i), spec, N)
        res, _ = scan_detector(block[:N], block[N:], q, H)
        closed, _ = scan_detector(block[:N], block[N:], q_closed, H)
        return {
            "rep": i,
            "seed": seed,
            "alarmed": res.alarmed,
            "alarm_k": res.alarm_k if res.alarm_k is not None else "",
            "max_gamma": res.max_gamma,
            "steps_run": res.steps_run,
            "truncated": res.truncated,
            "closed_end": closed.alarmed,
            "closed_alarm_k": closed.alarm_k if closed.alarm_k is not None else "",
        }

    return _parallel_map(one, cfg.n_rep, cfg.workers)


def run_size_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Null false-alarm rates of the open-ended detector (truncated at the horizon) and of the closed-end test."""
    if cfg.experiment != "size":
        cfg = replace(cfg, experiment="size")
    spec = cfg.change_spec() if cfg.change is not None else None
    if spec is not None and not spec.is_null:
        raise ConfigError("A size experiment needs mu1 == mu2; use the power experiment for changes")
    t0 = time.perf_counter()
    q, c, q_seed = calibrate_threshold(cfg)
    log.info(f"size: calibrated q={q:.4f} (alpha={cfg.alpha}, {cfg.calibration} kernel, trace {c.trace:.4g})")
    rows = _monitor_replications(cfg, q, spec)
    summary = {
        "q": q,
        "q_closed": closed_end_threshold(q, cfg.N, cfg.horizon),
        "alpha": cfg.alpha,
        "horizon": cfg.horizon,
        **_rate_summary(rows, cfg.n_rep),
        "note": ("closed_end_rate tests at level alpha over k <= horizon; rejection_rate is the open-ended "
                 "rate truncated at the horizon, a lower bound on the open-ended false-alarm probability"),
    }
    log.info(f"size: rejection rate {summary['rejection_rate']:.4f} +/- {summary['mc_se']:.4f}, "
             f"closed-end rate {summary['closed_end_rate']:.4f} over {cfg.n_rep} reps")
    return ExperimentReport(cfg, MONITOR_COLUMNS, rows, summary,
                            {"master_seed": cfg.master_seed, "quantile_seed": q_seed},
                            time.perf_counter() - t0)


def run_power_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Rejection rate and detection delay alarm_k - k_star under a mean change."""
    if cfg.experiment != "power":
        cfg = replace(cfg, experiment="power")
    if cfg.change is None:
        raise ConfigError("A power experiment needs a change block")
    spec = cfg.change_spec()
    if spec.is_null:
        raise ConfigError("mu1 == mu2 in a power experiment; use the size experiment")
    t0 = time.perf_counter()
    q, c, q_seed = calibrate_threshold(cfg)
    log.info(f"power: calibrated q={q:.4f}, change at k*={spec.k_star}")
    rows = _monitor_replications(cfg, q, spec)
    for r in rows:
        r["delay"] = r["alarm_k"] - spec.k_star if r["alarmed"] else ""
    delays = np.array([r["delay"] for r in rows if r["alarmed"]], dtype=float)
    summary = {
        "q": q,
        "q_closed": closed_end_threshold(q, cfg.N, cfg.horizon),
        "alpha": cfg.alpha,
        "horizon": cfg.horizon,
        "k_star": spec.k_star,
        **_rate_summary(rows, cfg.n_rep),
        "mean_delay": float(delays.mean()) if delays.size else None,
        "delay_q10": float(np.quantile(delays, 0.1)) if delays.size else None,
        "delay_median": float(np.median(delays)) if delays.size else None,
        "delay_q90": float(np.quantile(delays, 0.9)) if delays.size else None,
    }
    log.info(f"power: rejection rate {summary['rejection_rate']:.4f}, mean delay {summary['mean_delay']}")
    return ExperimentReport(cfg, MONITOR_COLUMNS + ["delay"], rows, summary,
                            {"master_seed": cfg.master_seed, "quantile_seed": q_seed},
                            time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Decay of the distance to the Gaussian limit
# ---------------------------------------------------------------------------

DECAY_COLUMNS = ["N", "lambda_points", "u_points", "total_points", "n_rep", "atoms", "centering",
                 "D", "floor_sq", "floor_sq_sd", "D_excess", "pi"]


def _sampling_floor(target, L: np.ndarray, n: int, seeds: Sequence[int]) -> np.ndarray:
    """Squared W2 between the sample covariance of n exact Gaussian draws and target, one per seed."""
    out = []
    for s in seeds:
        z = as_rng(s).standard_normal((n, L.shape[1]))
        out.append(wasserstein2_gaussian(empirical_cov(z @ L.T), target) ** 2)
    return np.array(out)


def _decay_row(cfg: ExperimentConfig, N: int) -> Dict[str, Any]:
    grid = make_grid(N, cfg.grid.rho, cfg.grid.sigma_mesh, cfg.grid.c_count)
    if grid.total_points > MAX_GRID_POINTS:
        raise ConfigError(f"Grid for N={N} has {grid.total_points} points (> {MAX_GRID_POINTS}); "
                          f"lower rho/sigma_mesh or N")
    interval, nodes = _observed_grid(cfg)
    c = calibration_kernel(cfg, N)
    def block(r: int) -> np.ndarray:
        return _observed_block(cfg, N, derive_seed(cfg.master_seed, "decay", N, r),
                               derive_seed(cfg.master_seed, "decay-reconstruct", N, r))

    # reconstructions of zero-mean latent functions stay zero-mean; density estimates are
    # centred by their mean pooled over all replications (a second, identical pass)
    if cfg.scheme == "kde":
        center = sum(block(r).mean(axis=0) for r in range(cfg.n_rep)) / cfg.n_rep
        centering = "pooled"
    else:
        center = np.zeros((len(nodes), c.d))
        centering = "exact"

    vectors = []
    for r in range(cfg.n_rep):
        P = partial_sum_from_block(block(r), interval, center)
        vectors.append(vectorize(discretize(P, grid)))
    V = np.stack(vectors)

    target = spacetime_cov(c, grid.lambda_points, grid.u_points, zero_outside=True)
    D = wasserstein2_gaussian(empirical_cov(V), target)

    m = min(cfg.n_rep, cfg.atom_cap)
    L = factorize(target.entries)
    # n_rep draws from the limit itself already sit this far from target in W2
    floors = _sampling_floor(target, L, cfg.n_rep,
                             [derive_seed(cfg.master_seed, "decay-floor", N, r) for r in range(DECAY_FLOOR_CLOUDS)])
    floor = float(floors.mean())
    z = as_rng(derive_seed(cfg.master_seed, "decay-gauss", N)).standard_normal((m, L.shape[1]))
    pi = prokhorov_discrete(EmpiricalMeasure.uniform(V[:m]), EmpiricalMeasure.uniform(z @ L.T), norm="max")
    log.info(f"decay: N={N} grid={grid.total_points} D={D:.5f} floor={math.sqrt(floor):.5f} pi={pi:.4f}")
    return {
        "N": N,
        "lambda_points": len(grid.lambda_points),
        "u_points": len(grid.u_points),
        "total_points": grid.total_points,
        "n_rep": cfg.n_rep,
        "atoms": m,
        "centering": centering,
        "D": D,
        "floor_sq": floor,
        "floor_sq_sd": float(floors.std(ddof=1)),
        "D_excess": math.sqrt(max(D**2 - floor, 0.0)),
        "pi": pi,
    }


def run_decay_experiment(cfg: ExperimentConfig, N_list: Optional[Sequence[int]] = None) -> ExperimentReport:
    """
    For each N: the Gaussian-fit W2 distance D(N) between the covariance of the
    discretized partial sums and that of the discretized limit, plus the
    Prokhorov distance between the sample cloud and an equal-size Gaussian cloud.

    D(N) includes the sampling floor of an n_rep-sample covariance, which grows
    with the grid dimension. D_excess removes the floor measured on exact
    Gaussian clouds; excess_inversions counts only increases of D^2 - floor
    beyond three noise standard deviations.
    """
    N_list = tuple(int(n) for n in (N_list if N_list is not None else cfg.N_list))
    if not N_list:
        raise ConfigError("The decay experiment needs a non-empty N_list")
    cfg = replace(cfg, experiment="decay", N_list=N_list)
    t0 = time.perf_counter()
    rows = [_decay_row(cfg, N) for N in N_list]
    Ds = np.array([r["D"] for r in rows])
    inversions = int(np.sum(np.diff(Ds) > 0))
    # D^2 minus the floor estimate carries the floor's spread plus that of its mean
    excess = Ds**2 - np.array([r["floor_sq"] for r in rows])
    noise = np.array([r["floor_sq_sd"] for r in rows]) * math.sqrt(1.0 + 1.0 / DECAY_FLOOR_CLOUDS)
    excess_inversions = int(np.sum(np.diff(excess) > 3.0 * np.hypot(noise[1:], noise[:-1])))
    slope = None
    if len(rows) >= 2 and np.all(Ds > 0):
        # descriptive only: no rate is asserted
        slope = float(np.polyfit(np.log(N_list), np.log(Ds), 1)[0])
    summary = {
        "D_values": Ds.tolist(),
        "pi_values": [r["pi"] for r in rows],
        "inversions": inversions,
        "D_excess_values": [r["D_excess"] for r in rows],
        "excess_inversions": excess_inversions,
        "floor_clouds": DECAY_FLOOR_CLOUDS,
        "loglog_slope": slope,
        "calibration": cfg.calibration,
    }
    return ExperimentReport(cfg, DECAY_COLUMNS, rows, summary, {"master_seed": cfg.master_seed},
                            time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Threshold tables
# ---------------------------------------------------------------------------

THRESHOLD_COLUMNS = ["alpha", "q", "n_rep", "resolution", "seed"]


def threshold_rows(c: CovKernel, alphas: Sequence[float], n_rep: int, resolution: int, seed: int) -> List[Dict[str, Any]]:
    """One simulation of sup |W| shared by all alphas."""
    if n_rep < 100:
        raise ConfigError(f"n_rep must be >= 100 for a quantile estimate, got {n_rep}")
    samples = sup_samples(c, n_rep, resolution, seed)
    return [
        {"alpha": a, "q": quantile_from_samples(samples, a), "n_rep": n_rep, "resolution": resolution, "seed": seed}
        for a in alphas
    ]


def run_threshold_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    cfg = replace(cfg, experiment="threshold")
    t0 = time.perf_counter()
    c = calibration_kernel(cfg)
    seed = derive_seed(cfg.master_seed, "quantile", cfg.N)
    rows = threshold_rows(c, cfg.alphas, cfg.quantile_reps, cfg.lambda_resolution, seed)
    log.info(f"threshold: {len(rows)} alphas from {cfg.quantile_reps} paths at resolution {cfg.lambda_resolution}")
    return ExperimentReport(cfg, THRESHOLD_COLUMNS, rows, {"kernel_trace": c.trace, "calibration": cfg.calibration},
                            {"master_seed": cfg.master_seed, "quantile_seed": seed}, time.perf_counter() - t0)


RUNNERS = {
    "size": run_size_experiment,
    "power": run_power_experiment,
    "decay": run_decay_experiment,
    "threshold": run_threshold_experiment,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    return RUNNERS[cfg.experiment](cfg)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _json_safe(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def report_stem(report: ExperimentReport) -> str:
    base = report.config.label or report.config.experiment
    return safe_filename(f"{base}_seed{report.config.master_seed}", suffix="", fallback=report.config.experiment)


def emit_report(report: ExperimentReport, out_dir: Union[str, Path]) -> Tuple[Path, Path]:
    """Write <stem>.csv (header + one row per replication or N) and the <stem>.json sidecar."""
    out = Path(out_dir)
    stem = report_stem(report)
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    sidecar = {
        "config": report.config.to_dict(),
        "seeds": report.seeds,
        "summary": report.summary,
        "wall_time_s": report.wall_time,
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        report.frame().to_csv(csv_path, index=False)
        json_path.write_text(json.dumps(_json_safe(sidecar), indent=2), encoding="utf-8")
    except OSError as e:
        raise OSError(f"Could not write report to {out}: {e}") from e
    log.info(f"wrote {csv_path.name} and {json_path.name} to {out}")
    return csv_path, json_path
