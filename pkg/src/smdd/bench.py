"""Benchmark problems and the replication harness for method comparisons.

Two inner models are bundled: a two-output combination of the three-hump and
six-hump camel functions on [0, 1]^2, and a ten-output function on [0, 1]^8.
Outer models (a modified Branin-Hoo and a zigzag) are carried along for
completeness; design construction never evaluates them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics as metrics_mod
from . import pca
from .design import MIDPOINT, LhdDesign, generate_lhd, optimize_mmlhd, _anneal_column_swaps
from .engine import SmddConfig, SmddState, VARIANT_DETERMINISTIC, VARIANT_STOCHASTIC, \
    fit_surrogate_stack

logger = logging.getLogger(__name__)

METHOD_SMDD = "SMDD"
METHOD_SMDD_DET = "SMDD-Det"
METHOD_MMLHD = "MmLHD"
METHODS = (METHOD_SMDD, METHOD_SMDD_DET, METHOD_MMLHD)

INITIAL_SPACE_FILLING = "ID1"
INITIAL_POORLY_FILLED = "ID2"
INITIALS = (INITIAL_SPACE_FILLING, INITIAL_POORLY_FILLED)

#: Test-set size for mean-posterior-variance summaries.
MPV_TEST_SIZE = 500

#: Coefficient matrix of the ten-output inner model, one row per output.
HIGHDIM_COEFFS = np.array([
    [0.614, 0.965, 0.761, 0.296],
    [0.453, 0.400, 0.410, 0.189],
    [0.264, 0.189, 0.691, 0.561],
    [0.354, 0.574, 0.872, 0.775],
    [0.850, 0.323, 0.248, 0.945],
    [0.514, 0.791, 0.574, 0.002],
    [0.040, 0.093, 0.386, 0.356],
    [0.958, 0.813, 0.086, 0.615],
    [0.142, 0.617, 0.135, 0.819],
    [0.717, 0.221, 0.938, 0.435],
])


def _check_unit_domain(x: np.ndarray, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != dim:
        raise ValueError(f"{name} expects points with {dim} coordinates")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} is defined on the unit hypercube")
    return arr


def camel_inner(x) -> np.ndarray:
    """Three-hump and six-hump camel values after mapping [0,1]^2 to [-1,1]^2."""
    arr = _check_unit_domain(x, 2, "camel_inner")
    x1 = 2.0 * arr[..., 0] - 1.0
    x2 = 2.0 * arr[..., 1] - 1.0
    h1 = 2.0 * x1 ** 2 - 1.05 * x1 ** 4 + x1 ** 6 / 6.0 + x1 * x2 + x2 ** 2
    h2 = (4.0 - 2.1 * x1 ** 2 + x1 ** 4 / 3.0) * x1 ** 2 + x1 * x2 \
        + (-4.0 + 4.0 * x2 ** 2) * x2 ** 2
    return np.stack([h1, h2], axis=-1)


def highdim_inner(x) -> np.ndarray:
    """Ten weighted combinations of four fixed nonlinear terms on [0, 1]^8."""
    arr = _check_unit_domain(x, 8, "highdim_inner")
    x1 = arr[..., 0]
    x2 = arr[..., 1]
    x3 = arr[..., 2]
    t1 = (x1 - 2.0 + 8.0 * x2 - 8.0 * x2 ** 2) ** 2
    t2 = (3.0 - 4.0 * x2) ** 2
    t3 = np.sqrt(x3 + 1.0) * (2.0 * x3 - 1.0) ** 2
    # i * ln(1 + x3 + ... + xi) summed over i = 3..8 (empty sums drop out)
    csum = np.cumsum(arr[..., 2:], axis=-1)
    weights = np.arange(3, 9, dtype=float)
    t4 = np.sum(weights * np.log1p(csum), axis=-1)
    terms = np.stack([4.0 * t1, t2, 16.0 * t3, t4], axis=-1)
    return terms @ HIGHDIM_COEFFS.T


def branin_mod_outer(h1, h2):
    """Modified Branin-Hoo with a cos(5 h1) ripple, on [-5, 10] x [0, 15]."""
    a1 = np.asarray(h1, dtype=float)
    a2 = np.asarray(h2, dtype=float)
    if a1.size and (a1.min() < -5.0 or a1.max() > 10.0):
        raise ValueError("h1 must lie in [-5, 10]")
    if a2.size and (a2.min() < 0.0 or a2.max() > 15.0):
        raise ValueError("h2 must lie in [0, 15]")
    out = (a2 - 5.1 / (4.0 * math.pi ** 2) * a1 ** 2 + 5.0 / math.pi * a1 - 6.0) ** 2 \
        + 10.0 * (1.0 - 1.0 / (8.0 * math.pi)) * np.cos(5.0 * a1) + 10.0
    if np.isscalar(h1) and np.isscalar(h2):
        return float(out)
    return out


def zigzag_outer(h1, h2):
    """Piecewise-linear sawtooth h1 + 2 h2 - floor(0.5 + h1) - floor(0.4 + h2)."""
    a1 = np.asarray(h1, dtype=float)
    a2 = np.asarray(h2, dtype=float)
    out = a1 + 2.0 * a2 - np.floor(0.5 + a1) - np.floor(0.4 + a2)
    if np.isscalar(h1) and np.isscalar(h2):
        return float(out)
    return out


@dataclass(frozen=True)
class TestProblem:
    """An inner model plus dimensions, with an optional outer model attached."""

    # not a test case despite the name
    __test__ = False

    name: str
    inner: object
    k: int
    l: int
    outer: object = None

    def inner_point(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.inner(x), dtype=float).ravel()


PROBLEMS = {
    "camel": TestProblem(name="camel", inner=camel_inner, k=2, l=2,
                         outer=branin_mod_outer),
    "highdim": TestProblem(name="highdim", inner=highdim_inner, k=8, l=10),
}


def exclusion_threshold(k: int) -> float:
    """Poorly-filled starts avoid the corner where the coordinate sum is below
    k / 4 (for two inputs: x1 + x2 < 0.5)."""
    return k / 4.0


def _feasible_midpoint_levels(n: int, k: int, rng, threshold: float) -> np.ndarray:
    """Midpoint Latin hypercube whose every row satisfies the sum constraint.

    Starts from random permutations and repairs violating rows by trading
    column values with the row currently holding the largest sum.
    """
    for _ in range(200):
        pts = np.stack([(rng.permutation(n) + 0.5) / n for _ in range(k)], axis=1)
        sums = pts.sum(axis=1)
        for _ in range(20 * n):
            bad = int(np.argmin(sums))
            if sums[bad] >= threshold:
                break
            good = int(np.argmax(sums))
            col = int(np.argmax(pts[good] - pts[bad]))
            gain = pts[good, col] - pts[bad, col]
            if gain <= 0:
                break
            pts[[bad, good], col] = pts[[good, bad], col]
            sums[bad] += gain
            sums[good] -= gain
        if sums.min() >= threshold:
            return pts
    raise RuntimeError("could not build a feasible poorly-filled start")


def initial_design(kind: str, n0: int, k: int, q: float = 15.0,
                   budget: int | None = None, seed=None) -> LhdDesign:
    """Initial design of the requested kind.

    ID1 is a plain maximin Latin hypercube.  ID2 is maximin-optimized under
    the constraint that no point enters the low-coordinate-sum corner, so one
    region of the input space stays deliberately unexplored.
    """
    if kind == INITIAL_SPACE_FILLING:
        return optimize_mmlhd(n0, k, q=q, budget=budget, seed=seed)
    if kind != INITIAL_POORLY_FILLED:
        raise ValueError(f"unknown initial-design kind {kind!r}")
    from .design import SWAPS_PER_DIM, _as_rng
    rng = _as_rng(seed)
    if budget is None:
        budget = SWAPS_PER_DIM * k
    threshold = exclusion_threshold(k)
    start = _feasible_midpoint_levels(n0, k, rng, threshold)
    ok = lambda row: row.sum() >= threshold
    pts = _anneal_column_swaps(start, q, budget, rng, row_ok=ok)
    return LhdDesign(pts, level_style=MIDPOINT)


@dataclass(frozen=True)
class ReplicationPlan:
    """What to run: methods x initial designs x final sizes x replicates."""

    problem: str
    methods: tuple = METHODS
    initials: tuple = (INITIAL_SPACE_FILLING, INITIAL_POORLY_FILLED)
    replicates: int = 20
    n_final: tuple = (40,)
    n_initial: int | None = None
    base_seed: int = 0
    candidate_multiplier: float = 5.0
    q: float = 15.0
    kernel_family: str = "matern"
    nu: float = 2.5
    pc_threshold: float = 0.90
    budget: int | None = None
    mpv_test_size: int = MPV_TEST_SIZE

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        methods = tuple(self.methods)
        if not methods:
            raise ValueError("plan needs at least one method")
        for m in methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        initials = tuple(self.initials)
        if not initials:
            raise ValueError("plan needs at least one initial design kind")
        for ini in initials:
            if ini not in INITIALS:
                raise ValueError(f"unknown initial-design kind {ini!r}")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        n_final = tuple(int(v) for v in np.atleast_1d(self.n_final))
        if not n_final:
            raise ValueError("plan needs at least one final size")
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "initials", initials)
        object.__setattr__(self, "n_final", n_final)


@dataclass(frozen=True)
class BenchRow:
    problem: str
    method: str
    initial: str
    seed: int
    n: int
    aid_x: float
    aid_h: float
    mpv: tuple


@dataclass(frozen=True)
class MpvTraceRow:
    problem: str
    method: str
    initial: str
    seed: int
    n: int
    mpv: tuple


def _stream(base_seed: int, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((base_seed,) + tuple(key)))


def _design_metrics(x: np.ndarray, y: np.ndarray, threshold: float):
    """AID over inputs and over realized component scores of the responses."""
    score_matrix, _, _ = pca.realized_scores(y, threshold)
    return metrics_mod.aid(x), metrics_mod.aid(score_matrix)


def _mpv_vector(fs, test_points: np.ndarray) -> tuple:
    return tuple(
        metrics_mod.mpv(fs.gps[col], test_points) if fs.gps[col] is not None else math.nan
        for col in range(len(fs.gps))
    )


def run_replication(plan: ReplicationPlan, problem: TestProblem | None = None):
    """Execute the plan and return (rows, mpv_trace).

    Every (method, initial, final size, replicate) combination yields one
    BenchRow.  Sequential methods also emit one MpvTraceRow per fit, from the
    initial size to the final one; the space-filling baseline has no nested
    sequence, so it reports variance only at its final size.  The outer model
    is never evaluated.
    """
    prob = problem if problem is not None else PROBLEMS[plan.problem]
    rows: list[BenchRow] = []
    trace: list[MpvTraceRow] = []
    n0_default = max(10 * prob.k, 3 * prob.l)
    n0 = plan.n_initial if plan.n_initial is not None else n0_default

    for n_final in plan.n_final:
        for rep in range(plan.replicates):
            seed = plan.base_seed + rep
            test_pts = optimize_mmlhd(
                plan.mpv_test_size, prob.k, q=plan.q, budget=plan.budget,
                seed=_stream(seed, 90, n_final),
            ).points

            baseline = None
            if METHOD_MMLHD in plan.methods:
                design = optimize_mmlhd(n_final, prob.k, q=plan.q,
                                        budget=plan.budget,
                                        seed=_stream(seed, 10, n_final))
                y = np.vstack([prob.inner_point(row) for row in design.points])
                cfg = _plan_config(plan, prob, n0, n_final, seed,
                                   VARIANT_STOCHASTIC)
                fs = fit_surrogate_stack(design.points, y, cfg)
                aid_x, aid_h = _design_metrics(design.points, y, plan.pc_threshold)
                baseline = (design, y, aid_x, aid_h, _mpv_vector(fs, test_pts))

            for initial in plan.initials:
                start = initial_design(initial, n0, prob.k, q=plan.q,
                                       budget=plan.budget,
                                       seed=_stream(seed, 20, INITIALS.index(initial)))
                y0 = np.vstack([prob.inner_point(row) for row in start.points])
                for method in plan.methods:
                    if method == METHOD_MMLHD:
                        design, y, aid_x, aid_h, mpv_vec = baseline
                        rows.append(BenchRow(prob.name, method, initial, seed,
                                             n_final, aid_x, aid_h, mpv_vec))
                        trace.append(MpvTraceRow(prob.name, method, initial,
                                                 seed, n_final, mpv_vec))
                        continue
                    variant = (VARIANT_DETERMINISTIC if method == METHOD_SMDD_DET
                               else VARIANT_STOCHASTIC)
                    cfg = _plan_config(plan, prob, n0, n_final, seed, variant)
                    state = SmddState.initialize(cfg, inner=prob.inner_point,
                                                 design=start, responses=y0)

                    def on_fit(st, fs, _method=method, _initial=initial):
                        trace.append(MpvTraceRow(prob.name, _method, _initial,
                                                 seed, st.n,
                                                 _mpv_vector(fs, test_pts)))

                    state.run(prob.inner_point, on_fit=on_fit)
                    aid_x, aid_h = _design_metrics(state.x, state.y,
                                                   plan.pc_threshold)
                    final_mpv = _mpv_vector(state.fit_surrogates(), test_pts)
                    rows.append(BenchRow(prob.name, method, initial, seed,
                                         n_final, aid_x, aid_h, final_mpv))
    return rows, trace


def _plan_config(plan: ReplicationPlan, prob: TestProblem, n0: int,
                 n_final: int, seed: int, variant: str) -> SmddConfig:
    return SmddConfig(
        k=prob.k,
        l=prob.l,
        n_final=n_final,
        n_initial=n0,
        candidate_multiplier=plan.candidate_multiplier,
        q=plan.q,
        kernel_family=plan.kernel_family,
        nu=plan.nu,
        pc_threshold=plan.pc_threshold,
        distance_variant=variant,
        seed=seed,
        budget=plan.budget,
    )
