"""
File I/O for series, measures, covariance files and experiment configs.

Important: keep imports light at module import time (Streamlit startup).
pandas is imported only inside functions.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np

from funcspace import GridFunction
from gausslimit import CovKernel, CovMatrix
from metrics import EmpiricalMeasure
from utils import ConfigError

PathLike = Union[str, Path]


def read_json(path: PathLike) -> Any:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise OSError(f"Could not read {p}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {p}: {e}") from e


def load_series(path: PathLike) -> List[GridFunction]:
    """One GridFunction JSON object per line (keys lower, upper, line_truncation, d, values)."""
    import pandas as pd

    p = Path(path)
    if not p.exists():
        raise OSError(f"Series file not found: {p}")
    try:
        df = pd.read_json(p, lines=True, orient="records", dtype=False, precise_float=True)
    except ValueError as e:
        raise ValueError(f"Could not parse JSON-lines series in {p}: {e}") from e
    if "values" not in df.columns:
        raise ValueError(f"Series file {p} needs a 'values' field. Columns: {list(df.columns)}")
    out = []
    for i, rec in enumerate(df.to_dict(orient="records")):
        try:
            out.append(GridFunction.from_dict(rec))
        except (KeyError, ValueError) as e:
            raise ValueError(f"{p}, line {i + 1}: {e}") from e
    return out


def write_series(series: Sequence[GridFunction], path: PathLike) -> Path:
    """Shortest round-trip float repr, so load_series gives back identical values."""
    p = Path(path)
    try:
        p.write_text("".join(json.dumps(g.to_dict()) + "\n" for g in series), encoding="utf-8")
    except OSError as e:
        raise OSError(f"Could not write series to {p}: {e}") from e
    return p


def load_measure(path: PathLike) -> EmpiricalMeasure:
    """
    Finite measure from CSV or JSON.
    - CSV: one atom per row; an optional 'weight' column, all other columns are coordinates.
      Without weights the measure is uniform.
    - JSON: {"atoms": [[...], ...], "weights": [...]}.
    """
    import pandas as pd

    p = Path(path)
    if p.suffix.lower() == ".json":
        data = read_json(p)
        try:
            return EmpiricalMeasure.from_dict(data)
        except KeyError as e:
            raise ValueError(f"Measure JSON {p} is missing {e}") from e
    try:
        df = pd.read_csv(p)
    except OSError as e:
        raise OSError(f"Could not read measure file {p}: {e}") from e
    df.columns = [str(c).strip() for c in df.columns]
    coords = [c for c in df.columns if c.lower() != "weight"]
    if not coords:
        raise ValueError(f"Measure file {p} has no coordinate columns. Columns: {list(df.columns)}")
    atoms = df[coords].to_numpy(dtype=float)
    if len(coords) == len(df.columns):
        return EmpiricalMeasure.uniform(atoms)
    wcol = next(c for c in df.columns if c.lower() == "weight")
    return EmpiricalMeasure(atoms, df[wcol].to_numpy(dtype=float))


def load_cov(path: PathLike) -> CovMatrix:
    """Covariance matrix JSON: {"entries": [[...]]}, {"matrix": [[...]]} or a bare nested list."""
    data = read_json(path)
    if isinstance(data, dict):
        raw = data.get("entries", data.get("matrix"))
        if raw is None:
            raise ValueError(f"Covariance JSON {path} needs 'entries' or 'matrix'. Keys: {sorted(data)}")
    else:
        raw = data
    M = np.asarray(raw, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"Covariance in {path} must be square, got shape {M.shape}")
    return CovMatrix(M.shape[0], M)


def load_kernel(path: PathLike) -> CovKernel:
    return CovKernel.from_dict(read_json(path))


def write_json(data: Dict[str, Any], path: PathLike) -> Path:
    p = Path(path)
    try:
        p.write_text(json.dumps(data, indent=2), encoding="utf-8")
    except OSError as e:
        raise OSError(f"Could not write {p}: {e}") from e
    return p


def load_experiment_config(path: PathLike):
    """ExperimentConfig from a bare config JSON or from a report sidecar (its 'config' key)."""
    from harness import ExperimentConfig

    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"Experiment config {path} must be a JSON object")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return ExperimentConfig.from_dict(data)
