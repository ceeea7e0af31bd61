"""
Latent functional time series, the change-point model and sparse estimators.

Latent functions are finite Fourier expansions
    X_n(u) = sum_j xi_{n,j} phi_j(u),   sd(xi_{n,j}) = scale * j^(-basis_decay)
whose coefficient processes are i.i.d., a moving average of order q or an AR(1)
with operator rho * identity. Stationarity holds by construction (the AR(1)
starts in its stationary law), and the coefficient processes are geometrically
mixing. For basis_decay > 1.5 the paths have finite Hölder moments for any
xi < 1.

Three reconstruction schemes turn a latent function into an observable
estimator: Nadaraya-Watson smoothing of noisy point observations, linear
interpolation of grid observations, and kernel density estimation from samples
of a latent density.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, signal, stats

from config import BANDWIDTH_EXPONENT, DENSITY_NORMALIZATION_TOL, NW_DENOMINATOR_FLOOR
from funcspace import GridFunction, Interval, restrict
from gausslimit import CovKernel
from utils import ConfigError, as_rng, get_logger

GENERATOR_KINDS = ("iid_gauss_basis", "fma_q", "far1")
SCHEMES = ("nw", "grid", "kde")
MA_DECAY = 0.5  # fma_q weights theta_j = MA_DECAY**j

log = get_logger("synth")

Seed = Union[int, np.random.Generator]


@dataclass(frozen=True)
class GeneratorConfig:
    kind: str = "iid_gauss_basis"
    n_basis: int = 8
    basis_decay: float = 2.0
    d: int = 1
    interval: Interval = field(default_factory=lambda: Interval(0.0, 1.0))
    n_nodes: int = 101
    q_or_rho: float = 0.0
    seed: int = 0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ConfigError(f"Unknown generator kind {self.kind!r}; expected one of {GENERATOR_KINDS}")
        if self.n_basis < 1:
            raise ConfigError(f"n_basis must be >= 1, got {self.n_basis}")
        if not self.basis_decay > 0:
            raise ConfigError(f"basis_decay must be positive, got {self.basis_decay}")
        if self.d < 1 or self.n_nodes < 2:
            raise ConfigError(f"Need d >= 1 and n_nodes >= 2, got d={self.d}, n_nodes={self.n_nodes}")
        if self.scale < 0:
            raise ConfigError(f"scale must be non-negative, got {self.scale}")
        if self.kind == "far1" and not abs(self.q_or_rho) < 1:
            raise ConfigError(f"far1 needs |rho| < 1, got {self.q_or_rho}")
        if self.kind == "fma_q" and (self.q_or_rho < 0 or self.q_or_rho != int(self.q_or_rho)):
            raise ConfigError(f"fma_q needs an integer order q >= 0, got {self.q_or_rho}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def coefficient_sd(self) -> np.ndarray:
        j = np.arange(1, self.n_basis + 1, dtype=float)
        return self.scale * j ** (-self.basis_decay)

    @property
    def ma_weights(self) -> np.ndarray:
        q = int(self.q_or_rho) if self.kind == "fma_q" else 0
        return MA_DECAY ** np.arange(q + 1, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["interval"] = self.interval.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GeneratorConfig":
        data = dict(data)
        if "interval" in data and isinstance(data["interval"], dict):
            data["interval"] = Interval.from_dict(data["interval"])
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"Unknown generator keys: {sorted(unknown)}")
        return cls(**data)


def basis_matrix(interval: Interval, nodes: np.ndarray, n_basis: int) -> np.ndarray:
    """Fourier basis (constant, sin, cos, ...) at the nodes; shape (len(nodes), n_basis)."""
    t = (np.asarray(nodes, dtype=float) - interval.lower) / interval.width
    cols = [np.ones_like(t)]
    k = 1
    while len(cols) < n_basis:
        cols.append(math.sqrt(2.0) * np.sin(2 * np.pi * k * t))
        if len(cols) < n_basis:
            cols.append(math.sqrt(2.0) * np.cos(2 * np.pi * k * t))
        k += 1
    B = np.column_stack(cols)
    if interval.truncation_of_line:
        # Gaussian envelope gives the exponential tail decay required on the line
        B = B * np.exp(-0.5 * np.asarray(nodes, dtype=float) ** 2)[:, None]
    return B


def generate_coefficients(cfg: GeneratorConfig, n: int) -> np.ndarray:
    """Basis-coefficient process of shape (n, n_basis, d)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = as_rng(cfg.seed)
    sd = cfg.coefficient_sd[None, :, None]
    shape = (cfg.n_basis, cfg.d)
    if cfg.kind == "iid_gauss_basis":
        return rng.standard_normal((n,) + shape) * sd
    if cfg.kind == "fma_q":
        theta = cfg.ma_weights
        q = len(theta) - 1
        eps = rng.standard_normal((n + q,) + shape) * sd
        out = np.zeros((n,) + shape)
        for j, w in enumerate(theta):
            out += w * eps[q - j : q - j + n]
        return out
    rho = float(cfg.q_or_rho)
    start = rng.standard_normal(shape) * sd[0] / math.sqrt(1.0 - rho**2)
    eps = rng.standard_normal((n,) + shape) * sd
    out, _ = signal.lfilter([1.0], [1.0, -rho], eps, axis=0, zi=(rho * start)[None])
    return out


def stationary_variances(cfg: GeneratorConfig) -> np.ndarray:
    """Marginal variance of each basis coefficient."""
    var = cfg.coefficient_sd**2
    if cfg.kind == "fma_q":
        return var * float(np.sum(cfg.ma_weights**2))
    if cfg.kind == "far1":
        return var / (1.0 - cfg.q_or_rho**2)
    return var


def long_run_variances(cfg: GeneratorConfig) -> np.ndarray:
    """Sum over all lags of the autocovariance of each basis coefficient."""
    var = cfg.coefficient_sd**2
    if cfg.kind == "fma_q":
        return var * float(np.sum(cfg.ma_weights)) ** 2
    if cfg.kind == "far1":
        return var / (1.0 - cfg.q_or_rho) ** 2
    return var


def generate_block(cfg: GeneratorConfig, n: int) -> np.ndarray:
    """Latent node values of shape (n, n_nodes, d)."""
    coeffs = generate_coefficients(cfg, n)
    nodes = np.linspace(cfg.interval.lower, cfg.interval.upper, cfg.n_nodes)
    B = basis_matrix(cfg.interval, nodes, cfg.n_basis)
    return np.einsum("gb,nbd->ngd", B, coeffs)


def generate_series(cfg: GeneratorConfig, n: int) -> List[GridFunction]:
    block = generate_block(cfg, n)
    return [GridFunction(cfg.interval, block[i]) for i in range(n)]


def true_lrv_kernel(cfg: GeneratorConfig, u_grid: Optional[np.ndarray] = None) -> CovKernel:
    """Analytic long-run covariance kernel of the generator on u_grid (default: its own grid)."""
    if u_grid is None:
        u_grid = np.linspace(cfg.interval.lower, cfg.interval.upper, cfg.n_nodes)
    u_grid = np.asarray(u_grid, dtype=float)
    B = basis_matrix(cfg.interval, u_grid, cfg.n_basis)
    K = (B * long_run_variances(cfg)[None, :]) @ B.T
    K = 0.5 * (K + K.T)
    return CovKernel(u_grid=u_grid, d=cfg.d, matrix=np.kron(K, np.eye(cfg.d)), lag_bandwidth=0, psd_projected=True)


# --- change-point model ---


@dataclass(frozen=True)
class ChangeSpec:
    mu1: GridFunction
    mu2: GridFunction
    k_star: int = 0

    def __post_init__(self):
        if not self.mu1.same_grid(self.mu2):
            raise ValueError("mu1 and mu2 must share the same grid")
        if self.k_star < 0:
            raise ValueError(f"k_star must be >= 0, got {self.k_star}")

    @property
    def is_null(self) -> bool:
        return bool(np.array_equal(self.mu1.values, self.mu2.values))


def make_mean(shape: str, amplitude: float, interval: Interval, n_nodes: int, d: int = 1) -> GridFunction:
    """Mean-function shorthand; sup-norm equals |amplitude| whenever the peak falls on a node."""
    t = np.linspace(0.0, 1.0, int(n_nodes))
    if shape == "zero":
        vals = np.zeros_like(t)
    elif shape == "constant":
        vals = np.full_like(t, amplitude)
    elif shape == "sine":
        vals = amplitude * np.sin(2 * np.pi * t)
    elif shape == "bump":
        vals = amplitude * np.exp(-0.5 * ((t - 0.5) / 0.15) ** 2)
    else:
        raise ConfigError(f"Unknown mean shape {shape!r}; expected zero, constant, sine or bump")
    return GridFunction(interval, np.tile(vals[:, None], (1, int(d))))


def apply_change(series: Sequence[GridFunction], spec: ChangeSpec, n_train: int) -> List[GridFunction]:
    """Add mu1 to entries 1..n_train + k_star and mu2 to the later ones (1-based indices)."""
    cut = n_train + spec.k_star
    out = []
    for i, x in enumerate(series, start=1):
        if not x.same_grid(spec.mu1):
            raise ValueError(f"Series entry {i} does not share the grid of the mean functions")
        mu = spec.mu1 if i <= cut else spec.mu2
        out.append(GridFunction(x.interval, x.values + mu.values))
    return out


# --- reconstruction ---


@dataclass(frozen=True)
class BandwidthRule:
    """fixed: h; power: h = c * size^(-b)."""

    kind: str = "power"
    h: float = 0.05
    c: float = 1.0
    b: float = BANDWIDTH_EXPONENT

    def __post_init__(self):
        if self.kind not in ("fixed", "power"):
            raise ConfigError(f"Unknown bandwidth rule {self.kind!r}")

    def evaluate(self, size: int) -> float:
        h = self.h if self.kind == "fixed" else self.c * float(size) ** (-self.b)
        if not h > 0:
            raise ValueError(f"Bandwidth must be positive, got {h}")
        return float(h)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BandwidthRule":
        return cls(**data)


@dataclass(frozen=True)
class ReconstructionConfig:
    scheme: str = "grid"
    M: int = 100
    bandwidth: BandwidthRule = field(default_factory=BandwidthRule)
    target: Optional[Interval] = None
    target_nodes: Optional[int] = None
    design_density: str = "uniform"
    noise_sigma: float = 0.0
    d_min: Optional[int] = None
    d_max: Optional[int] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"Unknown reconstruction scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.M < 1:
            raise ConfigError(f"M must be >= 1, got {self.M}")
        if self.design_density not in ("uniform", "gaussian"):
            raise ConfigError(f"Unknown design density {self.design_density!r}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        if (self.d_min is None) != (self.d_max is None):
            raise ConfigError("d_min and d_max must be given together")
        if self.d_min is not None and not 1 <= self.d_min <= self.d_max:
            raise ConfigError(f"Need 1 <= d_min <= d_max, got {self.d_min}, {self.d_max}")

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["target"] = self.target.to_dict() if self.target is not None else None
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ReconstructionConfig":
        data = dict(data)
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"Unknown reconstruction keys: {sorted(unknown)}")
        if isinstance(data.get("bandwidth"), dict):
            data["bandwidth"] = BandwidthRule.from_dict(data["bandwidth"])
        if isinstance(data.get("target"), dict):
            data["target"] = Interval.from_dict(data["target"])
        return cls(**data)


@dataclass(frozen=True)
class NWObservation:
    design_points: np.ndarray
    responses: np.ndarray
    noise_sigma: float

    def to_dict(self) -> Dict[str, Any]:
        return {"scheme": "nw", "design_points": self.design_points.tolist(),
                "responses": self.responses.tolist(), "noise_sigma": self.noise_sigma}


@dataclass(frozen=True)
class GridObservation:
    node_values: np.ndarray
    M: int

    def to_dict(self) -> Dict[str, Any]:
        return {"scheme": "grid", "node_values": self.node_values.tolist(), "M": self.M}


@dataclass(frozen=True)
class KDEObservation:
    sample_points: np.ndarray
    D: int

    def to_dict(self) -> Dict[str, Any]:
        return {"scheme": "kde", "sample_points": self.sample_points.tolist(), "D": self.D}


ObservationRecord = Union[NWObservation, GridObservation, KDEObservation]


def _target_nodes(latent: GridFunction, target: Optional[Interval], n_target: Optional[int]) -> Tuple[Interval, np.ndarray]:
    target = target or latent.interval
    if not latent.interval.contains(target):
        raise ValueError(f"Target [{target.lower}, {target.upper}] lies outside the latent interval "
                         f"[{latent.interval.lower}, {latent.interval.upper}]")
    if n_target is None:
        n_target = latent.n_nodes if target == latent.interval else max(2, int(round(target.width / latent.mesh)) + 1)
    return target, np.linspace(target.lower, target.upper, int(n_target))


def reconstruct_nw(
    latent: GridFunction,
    cfg: ReconstructionConfig,
    design_density: str = "uniform",
    noise_sigma: float = 0.0,
    seed: Seed = 0,
) -> Tuple[GridFunction, NWObservation]:
    """Nadaraya-Watson estimate from M noisy observations at random design points."""
    if cfg.scheme != "nw":
        raise ValueError(f"reconstruct_nw needs scheme 'nw', got {cfg.scheme!r}")
    target, u = _target_nodes(latent, cfg.target, cfg.target_nodes)
    rng = as_rng(seed)
    lo, up = latent.interval.lower, latent.interval.upper
    if design_density == "uniform":
        design = rng.uniform(lo, up, size=cfg.M)
    elif design_density == "gaussian":
        loc, scale = 0.5 * (lo + up), latent.interval.width / 4.0
        design = stats.truncnorm.rvs((lo - loc) / scale, (up - loc) / scale, loc=loc, scale=scale,
                                     size=cfg.M, random_state=rng)
    else:
        raise ValueError(f"Unknown design density {design_density!r}")
    y = latent(design) + noise_sigma * rng.standard_normal((cfg.M, latent.d))

    h = cfg.bandwidth.evaluate(cfg.M)
    weights = stats.norm.pdf((u[:, None] - design[None, :]) / h) / h
    denom = weights.sum(axis=1)
    starved = denom < NW_DENOMINATOR_FLOOR
    est = np.empty((len(u), latent.d))
    ok = ~starved
    est[ok] = (weights[ok] @ y) / denom[ok, None]
    if np.any(starved):
        log.debug("NW denominator below floor at %d of %d points", int(starved.sum()), len(u))
        nearest = np.argmin(np.abs(u[starved, None] - design[None, :]), axis=1)
        est[starved] = y[nearest]
    return GridFunction(target, est), NWObservation(design, y, float(noise_sigma))


def reconstruct_grid(latent: GridFunction, M: int) -> Tuple[GridFunction, GridObservation]:
    """Linear interpolation of the M + 1 equispaced samples, resampled on the latent grid."""
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    sites = np.linspace(latent.interval.lower, latent.interval.upper, int(M) + 1)
    samples = latent(sites)
    nodes = latent.nodes
    est = np.column_stack([np.interp(nodes, sites, samples[:, j]) for j in range(latent.d)])
    return GridFunction(latent.interval, est), GridObservation(samples, int(M))


def _check_density(density: GridFunction) -> float:
    if density.d != 1:
        raise ValueError(f"A density must be scalar-valued, got d={density.d}")
    if np.min(density.values) < -DENSITY_NORMALIZATION_TOL:
        raise ValueError(f"Density is negative (min {np.min(density.values):.3g})")
    mass = float(integrate.trapezoid(density.values[:, 0], density.nodes))
    if abs(mass - 1.0) > DENSITY_NORMALIZATION_TOL:
        raise ValueError(f"Density integrates to {mass:.8f}, not 1")
    return mass


def sample_density(density: GridFunction, D: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws from the trapezoid-integrated grid density."""
    nodes = density.nodes
    cdf = integrate.cumulative_trapezoid(np.clip(density.values[:, 0], 0.0, None), nodes, initial=0.0)
    cdf = cdf / cdf[-1]
    p = rng.random(int(D))
    hi = np.clip(np.searchsorted(cdf, p, side="right"), 1, len(nodes) - 1)
    lo = hi - 1
    width = cdf[hi] - cdf[lo]
    frac = np.divide(p - cdf[lo], width, out=np.zeros_like(p), where=width > 0)
    return nodes[lo] + frac * (nodes[hi] - nodes[lo])


def kde_on_grid(samples: np.ndarray, h: float, u: np.ndarray) -> np.ndarray:
    out = np.zeros(len(u))
    for start in range(0, len(samples), 8192):
        chunk = samples[start : start + 8192]
        out += stats.norm.pdf((u[:, None] - chunk[None, :]) / h).sum(axis=1)
    return out / (len(samples) * h)


def reconstruct_kde(
    latent_density: GridFunction,
    D: int,
    bandwidth_rule: Optional[BandwidthRule] = None,
    seed: Seed = 0,
    target: Optional[Interval] = None,
    target_nodes: Optional[int] = None,
) -> Tuple[GridFunction, KDEObservation]:
    """Gaussian-kernel density estimate from D draws of the latent density."""
    if D < 1:
        raise ValueError(f"D must be >= 1, got {D}")
    _check_density(latent_density)
    target, u = _target_nodes(latent_density, target, target_nodes)
    rng = as_rng(seed)
    samples = sample_density(latent_density, D, rng)
    h = (bandwidth_rule or BandwidthRule()).evaluate(D)
    return GridFunction(target, kde_on_grid(samples, h, u)), KDEObservation(samples, int(D))


def reconstruct(latent: GridFunction, cfg: ReconstructionConfig, seed: Seed) -> Tuple[GridFunction, ObservationRecord]:
    """Apply the configured scheme and return the estimator on cfg.target."""
    rng = as_rng(seed)
    if cfg.scheme == "nw":
        return reconstruct_nw(latent, cfg, cfg.design_density, cfg.noise_sigma, rng)
    if cfg.scheme == "grid":
        est, obs = reconstruct_grid(latent, cfg.M)
        if cfg.target is not None:
            est = restrict(est, cfg.target)
        return est, obs
    D = cfg.M if cfg.d_min is None else int(rng.integers(cfg.d_min, cfg.d_max + 1))
    return reconstruct_kde(latent, D, cfg.bandwidth, rng, cfg.target, cfg.target_nodes)


def mean_estimate(series: Sequence[GridFunction]) -> GridFunction:
    if len(series) == 0:
        raise ValueError("mean_estimate needs a non-empty slice")
    first = series[0]
    for i, x in enumerate(series):
        if not x.same_grid(first):
            raise ValueError(f"Entry {i} does not share the grid of entry 0")
    return GridFunction(first.interval, np.mean([x.values for x in series], axis=0))


# --- random densities for the KDE scheme ---


def _location_sd(cfg: GeneratorConfig) -> float:
    return float(math.sqrt(stationary_variances(cfg)[0]))


def generate_density_series(cfg: GeneratorConfig, n: int, shift: float = 0.5, width: float = 1.0) -> List[GridFunction]:
    """
    Stationary series of random densities: Gaussian bumps of the given width
    centred at shift * xi_{n,1}, renormalized on the grid. Needs a line truncation.
    """
    if not cfg.interval.truncation_of_line:
        raise ConfigError("Density series need a line-truncation interval")
    if cfg.d != 1:
        raise ConfigError("Density series are scalar (d = 1)")
    loc = shift * generate_coefficients(cfg, n)[:, 0, 0]
    nodes = np.linspace(cfg.interval.lower, cfg.interval.upper, cfg.n_nodes)
    out = []
    for m in loc:
        dens = stats.norm.pdf(nodes, loc=m, scale=width)
        dens = dens / integrate.trapezoid(dens, nodes)
        out.append(GridFunction(cfg.interval, dens))
    return out


def density_series_mean(cfg: GeneratorConfig, shift: float = 0.5, width: float = 1.0, order: int = 40) -> GridFunction:
    """Exact mean of generate_density_series via Gauss-Hermite quadrature over the location."""
    nodes = np.linspace(cfg.interval.lower, cfg.interval.upper, cfg.n_nodes)
    z, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / w.sum()
    sd = shift * _location_sd(cfg)
    acc = np.zeros_like(nodes)
    for zi, wi in zip(z, w):
        dens = stats.norm.pdf(nodes, loc=sd * zi, scale=width)
        acc += wi * dens / integrate.trapezoid(dens, nodes)
    return GridFunction(cfg.interval, acc)


def with_seed(cfg: GeneratorConfig, seed: int) -> GeneratorConfig:
    return replace(cfg, seed=int(seed))
