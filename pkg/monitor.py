"""
Open-ended CUSUM monitoring.

After a stable training period X_1..X_N the detector compares, for each new
observation k = 1, 2, ...,

    gamma(k) = || (k/N) * sum_{i<=N} X_i - sum_{N<i<=N+k} X_i ||_inf / (sqrt(N) * (1 + k/N))

with the threshold q and raises an alarm the first time gamma(k) > q.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from config import GAMMA_HISTORY_CAP
from funcspace import GridFunction
from utils import get_logger

log = get_logger("monitor")

CONTINUE = "continue"
ALARM = "alarm"


def _stack(series: Sequence[GridFunction]) -> np.ndarray:
    if len(series) == 0:
        raise ValueError("Cannot stack an empty list of observations")
    first = series[0]
    for i, x in enumerate(series):
        if not x.same_grid(first):
            raise ValueError(f"Observation {i} is not on the grid of observation 0")
    return np.stack([x.values for x in series])


def _train_sum(block: np.ndarray) -> np.ndarray:
    return np.sum(block, axis=0)


def _gamma_values(k, N: int, train_sum: np.ndarray, monitor_sums: np.ndarray) -> np.ndarray:
    """gamma for arrays of k with matching monitor sums (len(k), n, d)."""
    k = np.asarray(k, dtype=float)
    diff = k[:, None, None] * train_sum[None] - N * monitor_sums
    return np.max(np.abs(diff), axis=(1, 2)) / (math.sqrt(N) * (N + k))


def _check_q(q: float) -> float:
    q = float(q)
    if math.isnan(q) or q < 0:
        raise ValueError(f"Threshold q must be >= 0, got {q}")
    return q


@dataclass
class DetectorState:
    N: int
    train_sum: GridFunction
    q: float
    k: int = 0
    monitor_sum: Optional[GridFunction] = None
    alarmed: bool = False
    alarm_k: Optional[int] = None
    gamma_history: Deque[float] = field(default_factory=lambda: deque(maxlen=GAMMA_HISTORY_CAP))
    strict: bool = True

    def __post_init__(self):
        if self.monitor_sum is None:
            self.monitor_sum = GridFunction.zeros(self.train_sum.interval, self.train_sum.n_nodes, self.train_sum.d)


@dataclass(frozen=True)
class MonitorResult:
    alarmed: bool
    alarm_k: Optional[int]
    max_gamma: float
    steps_run: int
    truncated: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alarmed": self.alarmed,
            "alarm_k": self.alarm_k,
            "max_gamma": self.max_gamma,
            "steps_run": self.steps_run,
            "truncated": self.truncated,
        }


def init_monitor(training: Sequence[GridFunction], q: float, strict: bool = True) -> DetectorState:
    if len(training) == 0:
        raise ValueError("Training set is empty")
    block = _stack(training)
    first = training[0]
    return DetectorState(
        N=len(training),
        train_sum=GridFunction(first.interval, _train_sum(block)),
        q=_check_q(q),
        strict=strict,
    )


def gamma(state: DetectorState) -> float:
    if state.k < 1:
        raise ValueError("gamma is defined for k >= 1; ingest an observation first")
    return float(
        _gamma_values([state.k], state.N, state.train_sum.values, state.monitor_sum.values[None])[0]
    )


def step(state: DetectorState, x: GridFunction) -> Tuple[DetectorState, str]:
    """Ingest one observation; alarm iff gamma > q."""
    if state.alarmed:
        if state.strict:
            raise RuntimeError(f"Detector already alarmed at k={state.alarm_k}; no further observations accepted")
        return state, ALARM
    if not x.same_grid(state.train_sum):
        raise ValueError("Observation is not on the training grid")
    state.monitor_sum = GridFunction(x.interval, state.monitor_sum.values + x.values)
    state.k += 1
    g = gamma(state)
    state.gamma_history.append(g)
    if g > state.q:
        state.alarmed = True
        state.alarm_k = state.k
        log.debug(f"alarm at k={state.k}: gamma={g:.6g} > q={state.q:.6g}")
        return state, ALARM
    return state, CONTINUE


def run_monitor(state: DetectorState, stream: Iterable[GridFunction], horizon: int) -> MonitorResult:
    """Step through stream until an alarm, the end of the stream, or horizon observations."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    start_k = state.k
    max_gamma = 0.0
    for x in itertools.islice(stream, horizon):
        state, decision = step(state, x)
        max_gamma = max(max_gamma, state.gamma_history[-1])
        if decision == ALARM:
            break
    steps = state.k - start_k
    return MonitorResult(
        alarmed=state.alarmed,
        alarm_k=state.alarm_k,
        max_gamma=max_gamma,
        steps_run=steps,
        truncated=(not state.alarmed) and steps >= horizon,
    )


def gamma_path(train_block: np.ndarray, monitor_block: np.ndarray) -> np.ndarray:
    """gamma(k) for k = 1..len(monitor_block) from (N, n, d) and (K, n, d) arrays."""
    N = train_block.shape[0]
    sums = np.cumsum(monitor_block, axis=0)
    return _gamma_values(np.arange(1, monitor_block.shape[0] + 1), N, _train_sum(train_block), sums)


def scan_detector(
    train_block: Union[np.ndarray, Sequence[GridFunction]],
    monitor_block: Union[np.ndarray, Sequence[GridFunction]],
    q: float,
    horizon: Optional[int] = None,
) -> Tuple[MonitorResult, np.ndarray]:
    """
    Vectorized replay of init_monitor + run_monitor over whole blocks.
    Returns the same MonitorResult and the gamma values of the steps run.
    """
    T = np.asarray(train_block if isinstance(train_block, np.ndarray) else _stack(train_block), dtype=float)
    M = np.asarray(monitor_block if isinstance(monitor_block, np.ndarray) else _stack(monitor_block), dtype=float)
    if T.shape[0] == 0:
        raise ValueError("Training set is empty")
    if T.shape[1:] != M.shape[1:]:
        raise ValueError(f"Training grid {T.shape[1:]} and monitoring grid {M.shape[1:]} differ")
    q = _check_q(q)
    if horizon is None:
        horizon = M.shape[0]
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    M = M[:horizon]
    gammas = gamma_path(T, M) if M.shape[0] else np.zeros(0)
    hits = np.nonzero(gammas > q)[0]
    if hits.size:
        k = int(hits[0]) + 1
        run = gammas[:k]
        return MonitorResult(True, k, float(run.max()), k, False), run
    steps = len(gammas)
    max_gamma = float(gammas.max()) if steps else 0.0
    return MonitorResult(False, None, max_gamma, steps, steps >= horizon), gammas
