"""Moments and output samples from fitted expansions; robust scale estimate."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from pcegrid.errors import SizeError
from pcegrid.regression import PceModel

__all__ = [
    "MomentReport",
    "pce_mean",
    "pce_variance",
    "pce_std",
    "pce_moments",
    "surrogate_sample",
    "robust_std",
    "empirical_moments",
    "MAD_NORMAL_CONSISTENCY",
]

MAD_NORMAL_CONSISTENCY = 1.4826


@dataclass(frozen=True)
class MomentReport:
    mean: float
    std: float
    source: str  # "PceAnalytic" or "McsEmpirical"

    def __post_init__(self):
        if not self.std >= 0:
            raise ValueError(f"standard deviation must be non-negative, got {self.std}")

    @property
    def three_sigma_lower(self) -> float:
        return self.mean - 3.0 * self.std

    def to_dict(self):
        return {
            "mean": self.mean,
            "std": self.std,
            "three_sigma_lower": self.three_sigma_lower,
            "source": self.source,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def pce_mean(model: PceModel) -> float:
    """Coefficient of the zero multi-index."""
    return float(model.coefficients[0])


def pce_variance(model: PceModel) -> float:
    """Sum of squared coefficients of all non-constant terms."""
    return float(np.sum(model.coefficients[1:] ** 2))


def pce_std(model: PceModel) -> float:
    return math.sqrt(pce_variance(model))


def pce_moments(model: PceModel) -> MomentReport:
    return MomentReport(pce_mean(model), pce_std(model), "PceAnalytic")


def surrogate_sample(model: PceModel, n: int, seed: int) -> np.ndarray:
    """Evaluate the expansion on ``n`` Monte Carlo draws from its input law."""
    if n < 1:
        raise SizeError("n must be >= 1")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    x = model.joint.sample(n, rng)
    return model.predict(x)


def robust_std(data, scaled: bool = True) -> float:
    """Median absolute deviation, times 1.4826 when ``scaled`` so it estimates
    the standard deviation of normally distributed data."""
    data = np.asarray(data, dtype=float).ravel()
    if data.size < 2:
        raise SizeError("robust_std needs at least two values")
    mad = float(np.median(np.abs(data - np.median(data))))
    return MAD_NORMAL_CONSISTENCY * mad if scaled else mad


def empirical_moments(data, robust: bool = True, scaled: bool = True) -> MomentReport:
    """Sample mean plus either the robust or the ordinary (ddof=1) spread."""
    data = np.asarray(data, dtype=float).ravel()
    std = robust_std(data, scaled) if robust else float(np.std(data, ddof=1))
    return MomentReport(float(np.mean(data)), std, "McsEmpirical")


def sample_to_csv(data, name: str = "y") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([name])
    writer.writerows([[repr(float(v))] for v in np.ravel(data)])
    return buf.getvalue()
