"""Error metrics for state estimates against reference trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .rom import PodBasis, lift, project


def relative_error(z_hat: np.ndarray, z_true: np.ndarray) -> float:
    """Relative L2 error ||z_hat - z_true|| / ||z_true||."""
    z_hat = np.asarray(z_hat, dtype=np.float64)
    z_true = np.asarray(z_true, dtype=np.float64)
    if z_hat.shape != z_true.shape:
        raise InvalidInputError(
            f"shape mismatch: {z_hat.shape} vs {z_true.shape}"
        )
    denom = np.linalg.norm(z_true)
    if denom == 0:
        raise InvalidInputError("reference state has zero norm")
    return float(np.linalg.norm(z_hat - z_true) / denom)


def relative_error_series(z_hat: np.ndarray, z_true: np.ndarray) -> np.ndarray:
    """Per-row relative errors for (steps, n) blocks."""
    z_hat = np.asarray(z_hat, dtype=np.float64)
    z_true = np.asarray(z_true, dtype=np.float64)
    if z_hat.shape != z_true.shape:
        raise InvalidInputError(f"shape mismatch: {z_hat.shape} vs {z_true.shape}")
    denom = np.linalg.norm(z_true, axis=-1)
    if np.any(denom == 0):
        raise InvalidInputError("reference state has zero norm at some step")
    return np.linalg.norm(z_hat - z_true, axis=-1) / denom


def projection_floor(z_true: np.ndarray, basis: PodBasis):
    """Relative error of the orthogonal projection onto the basis range.

    This is the smallest relative error any lifted estimate can achieve,
    so estimator error curves sit on or above it.
    """
    z_true = np.asarray(z_true, dtype=np.float64)
    projected = lift(project(z_true, basis), basis)
    if z_true.ndim == 1:
        return relative_error(projected, z_true)
    return relative_error_series(projected, z_true)


@dataclass
class MetricSeries:
    """Per-step error values plus their aggregates.

    ``seed_mean``/``seed_std`` are filled once runs are grouped across
    repeated seeds; they stay None for a single run.
    """

    values: np.ndarray
    time_average: float
    last_half_average: float
    seed_mean: float | None = None
    seed_std: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if np.any(self.values < 0):
            raise InvalidInputError("error values must be non-negative")
        if self.seed_std is not None and self.seed_std < 0:
            raise InvalidInputError("std must be non-negative")

    @classmethod
    def from_values(cls, values: np.ndarray) -> "MetricSeries":
        values = np.asarray(values, dtype=np.float64)
        half = values[values.shape[0] // 2:]
        return cls(
            values=values,
            time_average=float(values.mean()),
            last_half_average=float(half.mean()),
        )
