"""
Small helpers shared by the engines and the CLI: seed splitting, the worker
thread cap, strict TOML key checking and exact-precision CSV output.
"""

import os
import re
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Union

import numpy as np
import pandas as pd

from .errors import ConfigError

THREADS_ENV = "EXPCTL_THREADS"
CSV_FLOAT_FORMAT = "%.17g"


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """
    Independent generator for trial ``trial`` of a run seeded with ``seed``.

    The stream of trial ``k`` depends only on ``(seed, k)``, so adding trials
    never changes the earlier ones.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def thread_count() -> int:
    """
    Worker threads allowed for Monte-Carlo trials (``EXPCTL_THREADS``, default 1).

    Raises:
        ConfigError: If the variable is set to something other than a positive integer
    """
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got '{raw}'")
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be positive, got {value}")
    return value


def locate_key(text: str, key: str) -> Optional[int]:
    """1-based line of the first ``key = ...`` assignment or quoted ``"key"`` in ``text``."""
    pattern = re.compile(rf'^\s*{re.escape(key)}\s*=|"{re.escape(key)}"')
    for k, line in enumerate(text.splitlines()):
        if pattern.search(line):
            return k + 1
    return None


def reject_unknown_keys(
    data: Mapping[str, Any], allowed: Iterable[str], text: str, prefix: str = ""
) -> None:
    """
    Raise a ConfigError for the first key of ``data`` not in ``allowed``.

    Args:
        data: Parsed TOML table
        allowed: Permitted keys of that table
        text: Source text, used to find the offending line
        prefix: Dotted path of the table, prepended to the field name
    """
    allowed = set(allowed)
    for key in data:
        if key not in allowed:
            path = f"{prefix}.{key}" if prefix else key
            raise ConfigError(
                f"unknown key '{key}'", field=path, line=locate_key(text, key)
            )


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> None:
    """Write ``frame`` with round-trip exact float formatting and no index."""
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)


def frame_to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT)
