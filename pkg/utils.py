import hashlib
import logging
import re
import sys
import time
from typing import Union

import numpy as np

_T0 = time.perf_counter()
_LEVEL = logging.INFO


class ConfigError(ValueError):
    """Invalid experiment or CLI configuration (exit code 2)."""


class NumericError(RuntimeError):
    """Numerical failure that survived all fallbacks (exit code 3)."""


class _ElapsedFilter(logging.Filter):
    def filter(self, record: logging.LogRecord) -> bool:
        record.elapsed = time.perf_counter() - _T0
        return True


def get_logger(tag: str) -> logging.Logger:
    """
    Logger printing `[tag] +1.234s message` lines to stderr.
    Handlers are attached once per tag.
    """
    logger = logging.getLogger(f"fts.{tag}")
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.addFilter(_ElapsedFilter())
        handler.setFormatter(logging.Formatter(f"[{tag}] +%(elapsed).3fs %(message)s"))
        logger.addHandler(handler)
        logger.propagate = False
        logger.setLevel(_LEVEL)
    return logger


def set_verbosity(verbose: bool) -> None:
    global _LEVEL
    level = _LEVEL = logging.DEBUG if verbose else logging.INFO
    for name, logger in logging.Logger.manager.loggerDict.items():
        if name.startswith("fts.") and isinstance(logger, logging.Logger):
            logger.setLevel(level)


def _tag_to_int(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest(), "little")


def derive_seed(master_seed: int, tag: str, *indices: int) -> int:
    """
    Derive an independent 64-bit seed from (master_seed, purpose tag, indices).
    Uses SeedSequence spawn keys, so streams never overlap across tags/indices.
    """
    if master_seed < 0:
        raise ConfigError(f"master_seed must be non-negative, got {master_seed}")
    key = (_tag_to_int(tag),) + tuple(int(i) for i in indices)
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def as_rng(seed: Union[int, np.random.Generator, None]) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("A seed is required; unseeded draws are not reproducible.")
    return np.random.default_rng(int(seed))


def safe_filename(name: str, suffix: str = ".csv", fallback: str = "report") -> str:
    """
    Convert an experiment label into a safe file name.
    - Uses only letters/numbers/spaces/_/-/.
    - Collapses whitespace to underscores
    - Falls back to `fallback`
    """
    raw = "" if name is None else str(name)
    safe = re.sub(r"[^A-Za-z0-9 _.-]+", "", raw).strip()
    safe = re.sub(r"\s+", "_", safe).strip(".")
    if not safe:
        safe = fallback
    return f"{safe}{suffix}"
