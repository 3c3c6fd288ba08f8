"""Space-filling and surrogate-uncertainty summaries of a finished design."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial.distance import pdist

from .design import DesignMatrix
from .gp import GpModel


@dataclass(frozen=True)
class MetricReport:
    """One design's summary: average inter-point distances and, when
    surrogates were fitted, the mean posterior variance per component."""

    method: str
    n: int
    aid_x: float
    aid_h: float
    mpv: tuple


def _as_array(points) -> np.ndarray:
    if isinstance(points, DesignMatrix):
        return points.points
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2:
        raise ValueError("points must form a 2-d array")
    return arr


def aid(points, metric=None) -> float:
    """Average inter-point distance over all unordered pairs.

    ``metric`` may be a callable (x_i, x_j) -> distance; the default is
    Euclidean.
    """
    arr = _as_array(points)
    n = arr.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    if metric is None:
        return float(pdist(arr).mean())
    total = 0.0
    for i, j in combinations(range(n), 2):
        total += float(metric(arr[i], arr[j]))
    return 2.0 * total / (n * (n - 1))


def mpv(model: GpModel, test_points) -> float:
    """Mean posterior variance of a fitted surrogate over a set of test points."""
    arr = _as_array(test_points)
    if arr.shape[0] < 1:
        raise ValueError("need at least one test point")
    _, var = model.posterior(arr)
    return float(np.mean(var))
