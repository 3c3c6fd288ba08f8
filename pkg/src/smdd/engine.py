"""Sequential design driven by distances between predicted inner responses.

Starting from an initial space-filling design, each round standardizes the
inner-model outputs, projects them onto leading principal components, fits one
Gaussian process per component, and adds the candidate point whose predicted
component values are farthest (in the phi_q sense) from everything already in
the design.  The distance between a candidate and an observed point folds in
the posterior predictive variance, so unexplored regions win ties; a
deterministic variant drops that variance term.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.spatial.distance import cdist

from . import pca
from .design import (DUPLICATE_TOL, DesignMatrix, MIDPOINT, SWAPS_PER_DIM,
                     generate_slhd, optimize_mmlhd)
from .errors import (DegenerateOutputError, DesignComplete, ExhaustedCandidatesError,
                     IllConditionedError, ProtocolError, StateFileError)
from .gp import KERNEL_FAMILIES, MATERN, GpModel, fit_gp

logger = logging.getLogger(__name__)

MODE_CANDIDATE = "candidate"
MODE_WEIGHTED = "weighted"
MODES = (MODE_CANDIDATE, MODE_WEIGHTED)

VARIANT_STOCHASTIC = "stochastic"
VARIANT_DETERMINISTIC = "deterministic"
VARIANTS = (VARIANT_STOCHASTIC, VARIANT_DETERMINISTIC)

#: A told point must match the pending proposal to within this, per coordinate.
TELL_MATCH_TOL = 1e-9

STATE_FORMAT = "smdd-state/1"


@dataclass(frozen=True)
class SmddConfig:
    """Static settings of one sequential design run.

    ``k`` and ``l`` are the input and output dimensions of the inner model,
    ``n_final`` the total run budget.  ``n_initial`` defaults to
    max(10 k, 3 l).  The candidate pool holds
    candidate_multiplier * (n_final - n_initial) * k points arranged as a
    sliced Latin hypercube with one slice per sequential step.
    """

    k: int
    l: int
    n_final: int
    n_initial: int | None = None
    candidate_multiplier: float = 5.0
    q: float = 15.0
    mode: str = MODE_CANDIDATE
    weight: float | None = None
    pc_threshold: float = pca.DEFAULT_VARIATION_THRESHOLD
    kernel_family: str = MATERN
    nu: float = 2.5
    skip_pca: bool = False
    distance_variant: str = VARIANT_STOCHASTIC
    seed: int = 0
    budget: int | None = None
    warm_start: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.l < 1:
            raise ValueError("l must be at least 1")
        if self.n_initial is not None and self.n_initial < 3:
            raise ValueError("n_initial must be at least 3")
        if self.n_final <= self.n0:
            raise ValueError("n_final must exceed the initial design size")
        if not (self.candidate_multiplier >= 1):
            raise ValueError("candidate_multiplier must be at least 1")
        if not (self.q > 0):
            raise ValueError("q must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == MODE_WEIGHTED:
            if self.weight is None:
                raise ValueError("weighted mode requires an explicit weight")
            if not (0.0 <= self.weight <= 1.0):
                raise ValueError("weight must lie in [0, 1]")
        if not (0.0 < self.pc_threshold <= 1.0):
            raise ValueError("pc_threshold must be in (0, 1]")
        if self.kernel_family not in KERNEL_FAMILIES:
            raise ValueError(f"kernel_family must be one of {KERNEL_FAMILIES}")
        if not (self.nu > 0):
            raise ValueError("nu must be positive")
        if self.distance_variant not in VARIANTS:
            raise ValueError(f"distance_variant must be one of {VARIANTS}")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be non-negative")

    @property
    def n0(self) -> int:
        """Initial design size; defaults to max(10 k, 3 l)."""
        if self.n_initial is not None:
            return self.n_initial
        return max(10 * self.k, 3 * self.l)

    @property
    def n_steps(self) -> int:
        return self.n_final - self.n0

    @property
    def slice_size(self) -> int:
        return max(2, int(round(self.candidate_multiplier * self.k)))

    @property
    def n_candidates(self) -> int:
        return self.n_steps * self.slice_size

    @property
    def design_budget(self) -> int:
        return self.budget if self.budget is not None else SWAPS_PER_DIM * self.k

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "SmddConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class MixedDistanceTerms:
    """Per-component pieces of a candidate-to-observation distance: the mean
    differences mu and predictive variances tau2."""

    mu: np.ndarray
    tau2: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).ravel()
        tau2 = np.asarray(self.tau2, dtype=float).ravel()
        if mu.shape != tau2.shape:
            raise ValueError("mu and tau2 must have matching lengths")
        if np.any(tau2 < 0):
            raise ValueError("tau2 entries must be non-negative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "tau2", tau2)


def mixed_distance_sq_h(terms: MixedDistanceTerms) -> float:
    """Expected squared output distance: sum of mu_l^2 + tau_l^2."""
    return float(np.sum(terms.mu ** 2 + terms.tau2))


def dist_h(x, index: int, gps, score_matrix, variant: str = VARIANT_STOCHASTIC) -> float:
    """Distance between the predicted outputs at x and observed run ``index``.

    ``gps`` holds one fitted surrogate per score column (None entries are
    skipped); ``score_matrix`` the observed component scores.  The stochastic
    variant adds the predictive variances, so it can only exceed the
    deterministic one.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    sc = np.asarray(score_matrix, dtype=float)
    if not (0 <= index < sc.shape[0]):
        raise ValueError("index out of range")
    total = 0.0
    for col, model in enumerate(gps):
        if model is None:
            continue
        mean, var = model.posterior(np.asarray(x, dtype=float))
        mu = mean - sc[index, col]
        total += mu * mu
        if variant == VARIANT_STOCHASTIC:
            total += var
    return math.sqrt(total)


def mixed_distance_outer(x, x_i, dist_h_value: float, weight: float) -> float:
    """Convex combination of output-space and input-space distances."""
    if not (0.0 <= weight <= 1.0):
        raise ValueError("weight must lie in [0, 1]")
    if dist_h_value < 0:
        raise ValueError("dist_h_value must be non-negative")
    a = np.asarray(x, dtype=float).ravel()
    b = np.asarray(x_i, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return weight * dist_h_value + (1.0 - weight) * float(np.linalg.norm(a - b))


@dataclass
class FittedSurrogates:
    """Per-iteration fit artifacts: component scores, one GP per component,
    and which components survived fitting."""

    pca_model: pca.PcaModel | None
    score_matrix: np.ndarray
    gps: tuple
    active: tuple
    l_pc: int
    kept_columns: tuple
    variance_fractions: tuple | None


@dataclass(frozen=True)
class _Selection:
    point: np.ndarray
    index: int
    criterion: float
    min_dist_h: float
    l_pc: int


def _phi_rows(dh: np.ndarray, q: float) -> np.ndarray:
    """phi_q of each row of a (candidates x observations) distance matrix.

    Rows containing a zero distance get +inf so they can never be selected.
    """
    out = np.full(dh.shape[0], np.inf)
    dmin = dh.min(axis=1)
    ok = dmin > 0
    if np.any(ok):
        ratios = dmin[ok, None] / dh[ok]
        out[ok] = np.power(ratios, q).sum(axis=1) ** (1.0 / q) / dmin[ok]
    return out


def fit_surrogate_stack(x, y, config: SmddConfig,
                        theta_hints=None) -> FittedSurrogates:
    """Standardize responses, project onto components, and fit one GP each.

    With ``skip_pca`` the standardized output columns are used directly as
    components.  Degenerate output columns and components whose GP fit fails
    are dropped with a warning; if nothing survives the design cannot proceed.
    """
    pts = x.points if isinstance(x, DesignMatrix) else np.asarray(x, dtype=float)
    values = np.asarray(y, dtype=float)
    kept = np.arange(values.shape[1])
    try:
        ystar, means, sds = pca.standardize(values)
    except DegenerateOutputError as err:
        kept = np.setdiff1d(kept, np.asarray(err.columns))
        logger.warning("dropping constant response column(s) %s", list(err.columns))
        if kept.size == 0:
            raise
        ystar, means, sds = pca.standardize(values[:, kept])

    if config.skip_pca:
        model = None
        score_matrix = ystar
        l_pc = ystar.shape[1]
        fractions = None
    else:
        model = pca.fit_pca(ystar, means, sds, threshold=config.pc_threshold)
        l_pc = pca.select_num_pcs(model, config.pc_threshold)
        score_matrix = pca.scores(model, ystar, l_pc).scores
        fractions = tuple(float(v) for v in model.variance_fractions)

    gps = []
    for col in range(score_matrix.shape[1]):
        hint = None
        if theta_hints is not None and col < len(theta_hints):
            hint = theta_hints[col]
        try:
            gps.append(fit_gp(pts, score_matrix[:, col], family=config.kernel_family,
                              nu=config.nu, theta_hint=hint))
        except IllConditionedError:
            logger.warning("surrogate fit failed for component %d; dropping it", col)
            gps.append(None)
    active = tuple(i for i, g in enumerate(gps) if g is not None)
    if not active:
        raise IllConditionedError("every component surrogate failed to fit")
    return FittedSurrogates(
        pca_model=model,
        score_matrix=score_matrix,
        gps=tuple(gps),
        active=active,
        l_pc=l_pc,
        kept_columns=tuple(int(c) for c in kept),
        variance_fractions=fractions,
    )


class SmddState:
    """Mutable run state: the growing design, its responses, the remaining
    candidate pool, and cached surrogates.

    Use :meth:`initialize` to start a run, then either drive it with
    :meth:`step`/:meth:`run` and an inner-model callable, or externally via
    :meth:`ask`/:meth:`tell`.  States serialize losslessly to JSON.
    """

    def __init__(self, config: SmddConfig, x, y, candidates, iteration: int,
                 rng: np.random.Generator, pending=None, fit_summary=None):
        self.config = config
        self._x = np.array(x, dtype=float)
        self._y = np.array(y, dtype=float)
        self._candidates = np.array(candidates, dtype=float)
        self.iteration = int(iteration)
        self._rng = rng
        self._pending = pending
        self._fit: FittedSurrogates | None = None
        self._fit_n = -1
        self.fit_summary = fit_summary
        self._validate()

    def _validate(self):
        cfg = self.config
        if self._x.ndim != 2 or self._x.shape[1] != cfg.k:
            raise ValueError("design must have one column per input dimension")
        if self._y.shape != (self._x.shape[0], cfg.l):
            raise ValueError("responses must have one row per run and l columns")
        if not (np.all(np.isfinite(self._x)) and np.all(np.isfinite(self._y))):
            raise ValueError("state arrays contain non-finite values")
        if self._candidates.size and self._candidates.shape[1] != cfg.k:
            raise ValueError("candidates must have one column per input dimension")
        if not (cfg.n0 <= self.n <= cfg.n_final):
            raise ValueError("run count must lie between n_initial and n_final")
        if self.iteration != self.n - cfg.n0:
            raise ValueError("iteration must equal runs added so far")

    # ------------------------------------------------------------------ setup

    @classmethod
    def initialize(cls, config: SmddConfig, inner=None, design=None,
                   responses=None, candidates=None) -> "SmddState":
        """Build the starting state.

        The initial design and the candidate pool are generated from the
        config seed unless supplied.  Responses for the initial design come
        either from ``responses`` or by evaluating ``inner`` row by row.
        """
        seq = np.random.SeedSequence(config.seed)
        design_seed, cand_seed, state_seed = seq.spawn(3)

        if design is None:
            design_pts = optimize_mmlhd(config.n0, config.k, q=config.q,
                                        budget=config.design_budget,
                                        seed=np.random.default_rng(design_seed)).points
        else:
            design_pts = design.points if isinstance(design, DesignMatrix) \
                else np.asarray(design, dtype=float)
            if design_pts.shape != (config.n0, config.k):
                raise ValueError(
                    f"initial design must be {config.n0} x {config.k}, "
                    f"got {design_pts.shape}"
                )

        if candidates is None:
            pool = generate_slhd(config.n_steps, config.slice_size, config.k,
                                 q=config.q, budget=config.design_budget,
                                 seed=np.random.default_rng(cand_seed),
                                 style=MIDPOINT).points
        else:
            pool = np.asarray(candidates, dtype=float)
            if pool.ndim != 2 or pool.shape[1] != config.k:
                raise ValueError("candidates must have one column per input dimension")
            if pool.shape[0] < config.n_steps:
                raise ValueError("candidate pool smaller than the number of steps")

        if responses is not None:
            resp = np.asarray(responses, dtype=float)
            if resp.shape != (design_pts.shape[0], config.l):
                raise ValueError(
                    f"initial responses must be {design_pts.shape[0]} x {config.l}"
                )
        elif inner is not None:
            resp = np.vstack([_eval_inner(inner, row, config.l) for row in design_pts])
        else:
            raise ValueError("provide initial responses or an inner-model callable")

        return cls(config, design_pts, resp, pool, 0,
                   np.random.default_rng(state_seed))

    # ------------------------------------------------------------- properties

    @property
    def x(self) -> np.ndarray:
        return self._x.copy()

    @property
    def y(self) -> np.ndarray:
        return self._y.copy()

    @property
    def candidates(self) -> np.ndarray:
        return self._candidates.copy()

    @property
    def n(self) -> int:
        return self._x.shape[0]

    @property
    def finished(self) -> bool:
        return self.n >= self.config.n_final

    # ------------------------------------------------------------ surrogates

    def fit_surrogates(self) -> FittedSurrogates:
        """Fit (or reuse) the PCA and per-component GPs for the current data."""
        if self._fit is not None and self._fit_n == self.n:
            return self._fit
        hints = None
        if self.config.warm_start and self.fit_summary:
            hints = self.fit_summary.get("theta")
        fs = fit_surrogate_stack(self._x, self._y, self.config, theta_hints=hints)
        self._fit = fs
        self._fit_n = self.n
        self.fit_summary = {
            "n": self.n,
            "l_pc": fs.l_pc,
            "variance_fractions": list(fs.variance_fractions) if fs.variance_fractions else None,
            "theta": [g.kernel.theta if g is not None else None for g in fs.gps],
            "kept_columns": list(fs.kept_columns),
        }
        return fs

    def _invalidate(self):
        self._fit = None
        self._fit_n = -1

    # -------------------------------------------------------------- selection

    def _score_distances(self, fs: FittedSurrogates, query: np.ndarray):
        """Distances dist_h between every query point and every observed run.

        Returns ``(dh, dup)`` where dup flags query rows that coincide with an
        existing design point in input space.
        """
        n = self.n
        d2 = np.zeros((query.shape[0], n))
        for col in fs.active:
            mean, var = fs.gps[col].posterior(query)
            diff = mean[:, None] - fs.score_matrix[None, :, col]
            d2 += diff ** 2
            if self.config.distance_variant == VARIANT_STOCHASTIC:
                d2 += var[:, None]
        dh = np.sqrt(np.maximum(d2, 0.0))
        dx = cdist(query, self._x)
        dup = dx.min(axis=1) < DUPLICATE_TOL
        return dh, dx, dup

    def _select(self) -> _Selection:
        if self._candidates.shape[0] == 0:
            raise ExhaustedCandidatesError("candidate pool is empty")
        fs = self.fit_surrogates()
        cfg = self.config
        dh, dx, dup = self._score_distances(fs, self._candidates)
        if cfg.mode == MODE_CANDIDATE:
            crit = _phi_rows(dh, cfg.q)
            crit[dup] = np.inf
            best = int(np.argmin(crit))
            if not math.isfinite(crit[best]):
                raise ExhaustedCandidatesError("no admissible candidate remains")
            value = float(crit[best])
        else:
            mixed = cfg.weight * dh + (1.0 - cfg.weight) * dx
            crit = mixed.min(axis=1)
            crit[dup] = -np.inf
            crit[dh.min(axis=1) <= 0.0] = -np.inf
            best = int(np.argmax(crit))
            if not math.isfinite(crit[best]):
                raise ExhaustedCandidatesError("no admissible candidate remains")
            value = float(crit[best])
        return _Selection(
            point=self._candidates[best].copy(),
            index=best,
            criterion=value,
            min_dist_h=float(dh[best].min()),
            l_pc=fs.l_pc,
        )

    def select_next(self) -> np.ndarray:
        """Pick the next run and remove it from the candidate pool.

        The design itself is not extended; callers append via :meth:`tell` or
        by evaluating the inner model themselves.
        """
        sel = self._select()
        self._pop_candidate(sel.index)
        return sel.point

    def _pop_candidate(self, index: int):
        self._candidates = np.delete(self._candidates, index, axis=0)
        self._pending = None

    def _append(self, point: np.ndarray, values: np.ndarray):
        self._x = np.vstack([self._x, point[None, :]])
        self._y = np.vstack([self._y, values[None, :]])
        self.iteration += 1
        self._invalidate()

    # ------------------------------------------------------------------ loop

    def step(self, inner) -> dict:
        """Run one sequential round: select, evaluate the inner model, append.

        Returns a trace record for the new run.
        """
        if self.finished:
            raise DesignComplete("design already holds its final run count")
        sel = self._select()
        values = _eval_inner(inner, sel.point, self.config.l)
        self._pop_candidate(sel.index)
        self._append(sel.point, values)
        return {
            "iteration": self.iteration,
            "point": sel.point.copy(),
            "criterion": sel.criterion,
            "min_dist_h": sel.min_dist_h,
            "l_pc": sel.l_pc,
        }

    def run(self, inner, on_fit=None) -> list:
        """Drive the loop to the final run count; returns all trace records.

        ``on_fit(state, surrogates)`` is invoked after every fresh fit,
        including one final fit on the completed design.
        """
        trace = []
        while not self.finished:
            fs = self.fit_surrogates()
            if on_fit is not None:
                on_fit(self, fs)
            trace.append(self.step(inner))
        fs = self.fit_surrogates()
        if on_fit is not None:
            on_fit(self, fs)
        return trace

    # --------------------------------------------------------------- ask/tell

    def ask(self) -> np.ndarray:
        """Propose the next run without changing any state.

        Repeated calls (including after a save/load round trip) return the
        same point until :meth:`tell` supplies its response.
        """
        if self.finished:
            raise DesignComplete("design already holds its final run count")
        if self._pending is None:
            sel = self._select()
            self._pending = {"point": sel.point.copy(), "index": sel.index}
        return self._pending["point"].copy()

    def tell(self, point, values) -> None:
        """Accept the inner-model response for the previously asked point."""
        if self._pending is None:
            raise ProtocolError("tell received before ask")
        given = np.asarray(point, dtype=float).ravel()
        expected = self._pending["point"]
        if given.shape != expected.shape:
            raise ProtocolError("told point has the wrong dimension")
        if np.any(np.abs(given - expected) > TELL_MATCH_TOL):
            raise ProtocolError("told point does not match the pending proposal")
        resp = np.asarray(values, dtype=float).ravel()
        if resp.shape != (self.config.l,):
            raise ValueError(f"expected {self.config.l} response values")
        if not np.all(np.isfinite(resp)):
            raise ValueError("response values must be finite")
        index = self._pending["index"]
        # Append the proposal's own coordinates so externally-driven runs stay
        # bit-identical with internally-driven ones.
        self._pop_candidate(index)
        self._append(expected, resp)

    # ---------------------------------------------------------- serialization

    def to_doc(self) -> dict:
        doc = {
            "format": STATE_FORMAT,
            "config": self.config.to_dict(),
            "x": self._x.tolist(),
            "y": self._y.tolist(),
            "candidates": self._candidates.tolist(),
            "iteration": self.iteration,
            "rng_state": self._rng.bit_generator.state,
            "pending": None,
            "fit_summary": self.fit_summary,
        }
        if self._pending is not None:
            doc["pending"] = {
                "point": [float(v) for v in self._pending["point"]],
                "index": int(self._pending["index"]),
            }
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "SmddState":
        if not isinstance(doc, dict) or doc.get("format") != STATE_FORMAT:
            raise StateFileError("unrecognized state document")
        try:
            config = SmddConfig.from_dict(doc["config"])
            rng = np.random.default_rng()
            rng.bit_generator.state = doc["rng_state"]
            pending = doc.get("pending")
            if pending is not None:
                pending = {
                    "point": np.asarray(pending["point"], dtype=float),
                    "index": int(pending["index"]),
                }
            state = cls(config, doc["x"], doc["y"], doc["candidates"],
                        doc["iteration"], rng, pending=pending,
                        fit_summary=doc.get("fit_summary"))
        except (KeyError, TypeError, ValueError) as err:
            raise StateFileError(f"corrupt state document: {err}") from err
        return state

    def save(self, path) -> None:
        from .io import atomic_write_text
        atomic_write_text(path, json.dumps(self.to_doc()))

    @classmethod
    def load(cls, path) -> "SmddState":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError as err:
            raise StateFileError(f"state file not found: {path}") from err
        except (OSError, json.JSONDecodeError) as err:
            raise StateFileError(f"unreadable state file: {err}") from err
        return cls.from_doc(doc)


def _eval_inner(inner, point: np.ndarray, l_out: int) -> np.ndarray:
    values = np.asarray(inner(np.asarray(point, dtype=float)), dtype=float).ravel()
    if values.shape != (l_out,):
        raise ValueError(
            f"inner model must return {l_out} values, got shape {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError("inner model returned non-finite values")
    return values


def acquisition_phi_q(x, state: SmddState) -> float:
    """phi_q of the output-space distances between x and every observed run.

    Returns +inf when x coincides with a design point or any distance
    degenerates to zero.
    """
    fs = state.fit_surrogates()
    query = np.asarray(x, dtype=float)[None, :]
    dh, _, dup = state._score_distances(fs, query)
    if dup[0]:
        return math.inf
    return float(_phi_rows(dh, state.config.q)[0])
