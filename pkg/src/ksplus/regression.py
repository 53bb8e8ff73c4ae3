"""Simple least-squares line fitting against input size."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class LinearModel:
    """``y = slope * x + intercept``.

    ``y_min`` is the smallest training target; predictors derive extrapolation
    floors from it.
    """

    slope: float
    intercept: float
    n_train: int
    y_min: float = 0.0

    def __post_init__(self) -> None:
        if self.n_train < 1:
            raise ValueError("n_train must be at least 1")
        if not (math.isfinite(self.slope) and math.isfinite(self.intercept)):
            raise ValueError("slope and intercept must be finite")

    def __call__(self, x: float) -> float:
        return self.slope * x + self.intercept

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "n_train": self.n_train,
            "y_min": self.y_min,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(float(d["slope"]), float(d["intercept"]), int(d["n_train"]), float(d.get("y_min", 0.0)))


def constant(value: float, n_train: int = 1) -> LinearModel:
    return LinearModel(0.0, float(value), n_train, float(value))


def fit(points: Iterable[tuple[float, float]]) -> LinearModel:
    """Ordinary least squares of ``y`` on ``x``.

    One point, or points sharing a single ``x``, give the constant model at
    ``mean(y)``.
    """
    pts = list(points)
    if not pts:
        raise ValueError("cannot fit a linear model to zero points")
    x = np.array([p[0] for p in pts], dtype=np.float64)
    y = np.array([p[1] for p in pts], dtype=np.float64)
    n = len(pts)
    y_mean = float(y.mean())
    y_min = float(y.min())
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if n == 1 or sxx == 0.0:
        return LinearModel(0.0, y_mean, n, y_min)
    slope = float(xc @ (y - y_mean)) / sxx
    intercept = y_mean - slope * float(x.mean())
    return LinearModel(slope, intercept, n, y_min)


def predict(model: LinearModel, x: float, floor: float = 0.0) -> float:
    return max(model.slope * x + model.intercept, floor)
