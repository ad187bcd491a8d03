"""
Sampled trajectories shared by the Markov and mean-field engines.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .utils import frame_to_csv, write_csv

BASE_COLUMNS = ("t", "mean_frac_any", "se_any")
TAIL_COLUMNS = ("mean_beta", "mean_q")


def csv_columns(virus_names: Sequence[str]) -> list:
    """Frozen CSV column order for a model with the given virus names."""
    return [*BASE_COLUMNS, *(f"mean_frac_{name}" for name in virus_names), *TAIL_COLUMNS]


def default_grid(horizon: float, points: int = 101) -> np.ndarray:
    return np.linspace(0.0, horizon, points)


def check_grid(grid: np.ndarray, horizon: float) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-d array")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if grid[0] < 0 or grid[-1] > horizon * (1 + 1e-12):
        raise ValueError(f"grid must lie within [0, {horizon}]")
    return grid


@dataclass
class Trajectory:
    """
    Infection fractions, patch rates and filter probability on a time grid.

    Attributes:
        t: Strictly increasing sample times, shape ``(K,)``
        host_virus: Per-host per-virus infection probability (or Monte-Carlo
                    mean indicator), shape ``(K, n, m)``
        host_any: Per-host probability of holding any virus, shape ``(K, n)``
        beta: Per-host patch rates, shape ``(K, n)``
        q: Filter probability, shape ``(K,)``
        se_any: Standard error of the host-averaged any-virus fraction
                (zeros for deterministic trajectories)
        se_virus: Standard error per virus, shape ``(K, m)``
        host_sets: Optional per-host per-set probabilities ``(K, n, |R|)``
        trials: Number of Monte-Carlo trials aggregated (1 when deterministic)
    """

    t: np.ndarray
    host_virus: np.ndarray
    host_any: np.ndarray
    beta: np.ndarray
    q: np.ndarray
    se_any: np.ndarray
    se_virus: np.ndarray
    host_sets: Optional[np.ndarray] = None
    trials: int = 1

    @property
    def frac_any(self) -> np.ndarray:
        return self.host_any.mean(axis=1)

    @property
    def frac_virus(self) -> np.ndarray:
        return self.host_virus.mean(axis=1)

    @property
    def mean_beta(self) -> np.ndarray:
        return self.beta.mean(axis=1)

    def to_frame(self, virus_names: Sequence[str]) -> pd.DataFrame:
        """Trajectory as a table with the frozen CSV column order."""
        data = {"t": self.t, "mean_frac_any": self.frac_any, "se_any": self.se_any}
        for v, name in enumerate(virus_names):
            data[f"mean_frac_{name}"] = self.frac_virus[:, v]
        data["mean_beta"] = self.mean_beta
        data["mean_q"] = self.q
        return pd.DataFrame(data, columns=csv_columns(virus_names))

    def to_csv(self, virus_names: Sequence[str], path=None) -> str:
        frame = self.to_frame(virus_names)
        if path is not None:
            write_csv(frame, path)
        return frame_to_csv(frame)
