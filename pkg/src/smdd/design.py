"""Designs on the unit hypercube.

Latin hypercube construction, the reciprocal-distance criterion phi_q used to
rank designs by spread, simulated-annealing maximin optimization, and sliced
Latin hypercubes for candidate pools.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DegenerateDistanceError

MIDPOINT = "midpoint"
RANDOM_IN_CELL = "random-in-cell"
LEVEL_STYLES = (MIDPOINT, RANDOM_IN_CELL)

#: Pairs closer than this are treated as duplicates everywhere in the package.
DUPLICATE_TOL = 1e-12

DEFAULT_Q = 15.0

#: Default annealing budget is this many swap proposals per input dimension.
SWAPS_PER_DIM = 10_000

_MAX_TOTAL_VALUES = 50_000_000


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class DesignMatrix:
    """A set of n distinct points in [0, 1]^k, one row per run."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True, order="C")
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(
                f"design must be a 2-d array of points, got shape {np.shape(self.points)}"
            )
        if not np.all(np.isfinite(pts)):
            raise ValueError("design contains non-finite entries")
        if pts.min() < 0.0 or pts.max() > 1.0:
            raise ValueError("design entries must lie in [0, 1]")
        if pts.shape[0] > 1 and float(pdist(pts).min()) <= DUPLICATE_TOL:
            raise ValueError("design contains (near-)duplicate rows")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def k(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class LhdDesign(DesignMatrix):
    """A Latin hypercube: each column occupies all n cells of a 1/n grid.

    With the midpoint style every entry sits exactly at a cell centre
    (level + 0.5) / n; the random-in-cell style places entries uniformly
    within their cells.
    """

    level_style: str = MIDPOINT

    def __post_init__(self):
        super().__post_init__()
        if self.level_style not in LEVEL_STYLES:
            raise ValueError(f"unknown level style {self.level_style!r}")
        n = self.n
        cells = np.floor(self.points * n).astype(int)
        np.clip(cells, 0, n - 1, out=cells)
        expect = np.arange(n)[:, None]
        if not np.array_equal(np.sort(cells, axis=0), np.broadcast_to(expect, cells.shape)):
            raise ValueError("each column must occupy n distinct cells of width 1/n")
        if self.level_style == MIDPOINT:
            mid = (cells + 0.5) / n
            if not np.allclose(self.points, mid, rtol=0.0, atol=1e-12):
                raise ValueError("midpoint-style entries must sit at cell centres")

    def levels(self) -> np.ndarray:
        """Integer grid level of every entry."""
        lv = np.floor(self.points * self.n).astype(int)
        return np.clip(lv, 0, self.n - 1)


@dataclass(frozen=True)
class SlicedCandidateSet:
    """t Latin hypercube slices of m points each whose union is again a
    Latin hypercube on the finer t*m grid."""

    slices: tuple

    def __post_init__(self):
        sl = tuple(self.slices)
        if len(sl) < 1:
            raise ValueError("need at least one slice")
        if not all(isinstance(s, LhdDesign) for s in sl):
            raise TypeError("slices must be LhdDesign instances")
        m = sl[0].n
        k = sl[0].k
        if any(s.n != m or s.k != k for s in sl):
            raise ValueError("all slices must share the same shape")
        total = len(sl) * m
        pts = np.vstack([s.points for s in sl])
        cells = np.floor(pts * total).astype(int)
        np.clip(cells, 0, total - 1, out=cells)
        expect = np.arange(total)[:, None]
        if not np.array_equal(np.sort(cells, axis=0), np.broadcast_to(expect, cells.shape)):
            raise ValueError("slice union must be a Latin hypercube on the t*m grid")
        object.__setattr__(self, "slices", sl)

    @property
    def t(self) -> int:
        return len(self.slices)

    @property
    def m(self) -> int:
        return self.slices[0].n

    @property
    def k(self) -> int:
        return self.slices[0].k

    @property
    def n_total(self) -> int:
        return self.t * self.m

    @property
    def points(self) -> np.ndarray:
        """All candidate points, slice by slice."""
        return np.vstack([s.points for s in self.slices])


def euclidean_distance(x, y) -> float:
    """Plain Euclidean distance between two equal-length vectors."""
    a = np.asarray(x, dtype=float).ravel()
    b = np.asarray(y, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def phi_q(distances, q: float = DEFAULT_Q) -> float:
    """Aggregate inter-point distances into the reciprocal-distance criterion
    (sum of d^-q) ** (1/q).

    Smaller is better-separated.  For large q the ranking approaches that of
    the negated minimum distance.  The smallest distance is factored out so the
    powers stay bounded regardless of scale.
    """
    d = np.asarray(distances, dtype=float).ravel()
    if d.size == 0:
        raise ValueError("need at least one distance")
    if not (q > 0):
        raise ValueError("q must be positive")
    if not np.all(np.isfinite(d)) or np.any(d <= 0.0):
        raise DegenerateDistanceError("all distances must be finite and positive")
    dmin = float(d.min())
    return float(np.power(dmin / d, q).sum() ** (1.0 / q) / dmin)


def generate_lhd(n: int, k: int, style: str = MIDPOINT, seed=None) -> LhdDesign:
    """Random Latin hypercube with n runs in k dimensions.

    Each column is an independent uniform random permutation of the n grid
    levels.  The same seed always yields the same design.
    """
    if n < 2:
        raise ValueError("a Latin hypercube needs at least 2 runs")
    if k < 1:
        raise ValueError("need at least one input dimension")
    if style not in LEVEL_STYLES:
        raise ValueError(f"unknown level style {style!r}")
    rng = _as_rng(seed)
    levels = np.empty((n, k), dtype=float)
    for j in range(k):
        levels[:, j] = rng.permutation(n)
    if style == MIDPOINT:
        pts = (levels + 0.5) / n
    else:
        pts = (levels + rng.random((n, k))) / n
    return LhdDesign(pts, level_style=style)


def _swap_proposal(rng, n, k):
    c = int(rng.integers(k))
    i = int(rng.integers(n))
    j = int(rng.integers(n - 1))
    if j >= i:
        j += 1
    return c, i, j


def _anneal_column_swaps(points, q, budget, rng, row_ok=None, cool_ratio=0.95):
    """Minimize phi_q over within-column value swaps by simulated annealing.

    A proposal exchanges the column-c values of two rows, which preserves the
    one-dimensional level occupancy of the point set.  ``row_ok``, when given,
    vetoes proposals whose swapped rows would leave the admissible region.
    Returns the best configuration seen, never worse than the input.
    """
    pts = np.array(points, dtype=float)
    n, k = pts.shape
    if budget <= 0 or n < 3:
        return pts
    half_q = q / 2.0
    dup2 = DUPLICATE_TOL ** 2

    d2 = squareform(pdist(pts, "sqeuclidean"))
    np.fill_diagonal(d2, np.inf)
    s = 0.5 * float(np.power(d2, -half_q).sum())
    phi = s ** (1.0 / q)
    best_pts = pts.copy()
    best_phi = phi

    def evaluate(c, i, j):
        # Row i takes row j's value in column c and vice versa; only distances
        # involving rows i and j change, and d(i, j) itself is invariant.
        col = pts[:, c]
        vi = col[i]
        vj = col[j]
        shift = (col - vj) ** 2 - (col - vi) ** 2
        di_new = d2[i] + shift
        dj_new = d2[j] - shift
        di_new[i] = np.inf
        dj_new[j] = np.inf
        di_new[j] = d2[i, j]
        dj_new[i] = d2[i, j]
        if min(di_new.min(), dj_new.min()) <= dup2:
            return None
        delta = float(
            np.power(di_new, -half_q).sum()
            - np.power(d2[i], -half_q).sum()
            + np.power(dj_new, -half_q).sum()
            - np.power(d2[j], -half_q).sum()
        )
        return delta, di_new, dj_new, vi, vj

    # Probe random swaps to set the starting temperature so that roughly half
    # of the initially worsening moves would be accepted.
    probes = min(200, max(20, budget // 20))
    worsening = []
    for _ in range(probes):
        c, i, j = _swap_proposal(rng, n, k)
        ev = evaluate(c, i, j)
        if ev is None:
            continue
        s_new = s + ev[0]
        if s_new > s:
            worsening.append(s_new ** (1.0 / q) - phi)
    temp = (float(np.median(worsening)) / math.log(2.0)) if worsening else 1e-9
    temp = max(temp, 1e-300)

    cool_every = max(20, n)
    remaining = max(0, budget - probes)
    for it in range(remaining):
        if it and it % 8192 == 0:
            # Guard against drift in the incrementally maintained distances.
            d2 = squareform(pdist(pts, "sqeuclidean"))
            np.fill_diagonal(d2, np.inf)
            s = 0.5 * float(np.power(d2, -half_q).sum())
            phi = s ** (1.0 / q)
        if it % cool_every == 0 and it:
            temp = max(temp * cool_ratio, 1e-300)
        c, i, j = _swap_proposal(rng, n, k)
        ev = evaluate(c, i, j)
        if ev is None:
            continue
        delta, di_new, dj_new, vi, vj = ev
        if row_ok is not None:
            row_i = pts[i].copy()
            row_j = pts[j].copy()
            row_i[c] = vj
            row_j[c] = vi
            if not (row_ok(row_i) and row_ok(row_j)):
                continue
        s_new = s + delta
        if not (s_new > 0.0) or s_new < 1e-9 * abs(delta):
            # Removing a dominant close-pair term cancels catastrophically;
            # rebuild the candidate sum exactly before judging the move.
            new_d2 = d2.copy()
            new_d2[i, :] = di_new
            new_d2[:, i] = di_new
            new_d2[j, :] = dj_new
            new_d2[:, j] = dj_new
            new_d2[i, j] = di_new[j]
            new_d2[j, i] = di_new[j]
            s_new = 0.5 * float(np.power(new_d2, -half_q).sum())
        phi_new = s_new ** (1.0 / q)
        if phi_new > phi and rng.random() >= math.exp(-(phi_new - phi) / temp):
            continue
        pts[i, c] = vj
        pts[j, c] = vi
        d2[i, :] = di_new
        d2[:, i] = di_new
        d2[j, :] = dj_new
        d2[:, j] = dj_new
        d2[i, j] = di_new[j]
        d2[j, i] = di_new[j]
        s = s_new
        phi = phi_new
        if phi < best_phi:
            best_phi = phi
            best_pts = pts.copy()
    return best_pts


def optimize_mmlhd(n: int, k: int, q: float = DEFAULT_Q, budget: int | None = None,
                   seed=None, style: str = MIDPOINT) -> LhdDesign:
    """Maximin-optimized Latin hypercube via annealed within-column swaps.

    ``budget`` counts swap proposals (default SWAPS_PER_DIM * k, split across
    a few annealing restarts).  The result never has a larger phi_q than the
    random starting hypercube.
    """
    if budget is None:
        budget = SWAPS_PER_DIM * k
    if budget < 0:
        raise ValueError("budget must be non-negative")
    rng = _as_rng(seed)
    first = generate_lhd(n, k, style=style, seed=rng)
    if budget == 0 or n == 2:
        return first
    restarts = 1 if budget < 6000 else min(4, max(1, budget // 5000))
    per_restart = budget // restarts
    best_pts = first.points
    best_phi = phi_q(pdist(first.points), q)
    start = first.points
    for r in range(restarts):
        if r > 0:
            start = generate_lhd(n, k, style=style, seed=rng).points
        out = _anneal_column_swaps(start, q, per_restart, rng)
        f = phi_q(pdist(out), q)
        if f < best_phi:
            best_phi = f
            best_pts = out
    return LhdDesign(best_pts, level_style=style)


def generate_slhd(t: int, m: int, k: int, q: float = DEFAULT_Q,
                  budget: int | None = None, seed=None,
                  style: str = MIDPOINT) -> SlicedCandidateSet:
    """Sliced Latin hypercube: t slices of m runs on a common t*m grid.

    Construction is permutation based.  For every column, each of the m coarse
    cells holds t consecutive fine levels which are dealt out one per slice in
    shuffled order; each slice then visits its m cells in an independent random
    order.  That makes every slice a Latin hypercube on the coarse m-grid while
    the union fills the fine t*m grid.  Each slice is afterwards annealed on its
    own phi_q with within-column swaps, which leaves both properties intact.
    """
    if t < 1:
        raise ValueError("need at least one slice")
    if m < 2:
        raise ValueError("each slice needs at least 2 runs")
    if k < 1:
        raise ValueError("need at least one input dimension")
    total = t * m
    if total * k > _MAX_TOTAL_VALUES:
        raise ValueError("candidate set too large")
    if style not in LEVEL_STYLES:
        raise ValueError(f"unknown level style {style!r}")
    if budget is None:
        budget = SWAPS_PER_DIM * k
    rng = _as_rng(seed)

    fine = np.empty((t, m, k), dtype=np.int64)
    for j in range(k):
        # deal[cell, c] is the fine sub-level within `cell` owned by slice c
        deal = np.stack([rng.permutation(t) for _ in range(m)])
        for c in range(t):
            order = rng.permutation(m)
            fine[c, :, j] = order * t + deal[order, c]
    if style == MIDPOINT:
        offset = 0.5
    else:
        offset = rng.random((t, m, k))
    raw = (fine + offset) / total

    per_slice = budget // t
    slices = []
    for c in range(t):
        pts = raw[c]
        if per_slice > 0 and m >= 3:
            pts = _anneal_column_swaps(pts, q, per_slice, rng)
        # Slice entries live on the fine grid, not at coarse-cell centres.
        slices.append(LhdDesign(pts, level_style=RANDOM_IN_CELL))
    return SlicedCandidateSet(tuple(slices))
