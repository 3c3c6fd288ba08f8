"""Column standardization and SVD-based principal components of a response
matrix, plus the rule for how many components to keep."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateOutputError

#: Columns with sample standard deviation at or below this are degenerate.
SD_FLOOR = 1e-12

DEFAULT_VARIATION_THRESHOLD = 0.90


def standardize(values):
    """Center each column to mean zero and scale to unit sample variance.

    Returns ``(ystar, means, sds)``.  Constant columns cannot be scaled and
    raise DegenerateOutputError carrying the offending indices so the caller
    can drop or flag them.
    """
    y = np.asarray(values, dtype=float)
    if y.ndim != 2:
        raise ValueError("responses must be a 2-d array")
    n = y.shape[0]
    if n < 3:
        raise ValueError("standardization needs at least 3 rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("responses contain non-finite values")
    means = y.mean(axis=0)
    sds = y.std(axis=0, ddof=1)
    bad = np.flatnonzero(sds <= SD_FLOOR)
    if bad.size:
        raise DegenerateOutputError(bad)
    return (y - means) / sds, means, sds


@dataclass(frozen=True)
class PcaModel:
    """Principal components of a standardized n x L response matrix.

    ``loadings`` is the full L x L orthonormal rotation; ``singular_values``
    and ``variance_fractions`` cover the min(n, L) components that can carry
    variance.  ``l_pc`` is the component count selected at the default
    cumulative-variation threshold.
    """

    col_means: np.ndarray
    col_sds: np.ndarray
    loadings: np.ndarray
    singular_values: np.ndarray
    variance_fractions: np.ndarray
    n_samples: int
    l_pc: int

    @property
    def n_outputs(self) -> int:
        return self.loadings.shape[0]


@dataclass(frozen=True)
class PcScores:
    """Projection of standardized responses onto the leading components."""

    scores: np.ndarray

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def l_pc(self) -> int:
        return self.scores.shape[1]


def fit_pca(ystar, col_means=None, col_sds=None,
            threshold: float = DEFAULT_VARIATION_THRESHOLD) -> PcaModel:
    """Singular value decomposition of an already-standardized matrix.

    Loading signs are fixed so each column's largest-magnitude entry is
    positive, making the decomposition reproducible.  The standardization
    constants are carried along purely as bookkeeping.
    """
    ys = np.asarray(ystar, dtype=float)
    if ys.ndim != 2 or ys.shape[0] < 2 or ys.shape[1] < 1:
        raise ValueError("need a 2-d matrix with at least 2 rows")
    if not np.all(np.isfinite(ys)):
        raise ValueError("matrix contains non-finite values")
    n, l_out = ys.shape
    # full_matrices=True keeps the rotation square (and orthonormal) even when
    # there are fewer rows than output dimensions
    _, sing, vt = np.linalg.svd(ys, full_matrices=True)
    loadings = vt.T
    for j in range(loadings.shape[1]):
        col = loadings[:, j]
        if col[int(np.argmax(np.abs(col)))] < 0:
            loadings[:, j] = -col
    total = float((sing ** 2).sum())
    if total <= 0.0:
        raise ValueError("matrix has no variance")
    fractions = sing ** 2 / total
    means = np.zeros(l_out) if col_means is None else np.asarray(col_means, float).copy()
    sds = np.ones(l_out) if col_sds is None else np.asarray(col_sds, float).copy()
    if means.shape != (l_out,) or sds.shape != (l_out,):
        raise ValueError("standardization constants must have one entry per column")
    model = PcaModel(
        col_means=means,
        col_sds=sds,
        loadings=loadings,
        singular_values=sing.copy(),
        variance_fractions=fractions,
        n_samples=n,
        l_pc=0,
    )
    object.__setattr__(model, "l_pc", select_num_pcs(model, threshold))
    return model


def select_num_pcs(model: PcaModel, threshold: float = DEFAULT_VARIATION_THRESHOLD) -> int:
    """Smallest component count whose cumulative variance fraction exceeds the
    threshold, capped at min(L, n - 1)."""
    if not (0.0 < threshold <= 1.0):
        raise ValueError("threshold must be in (0, 1]")
    cap = max(1, min(model.n_outputs, model.n_samples - 1))
    csum = np.cumsum(model.variance_fractions)
    above = np.flatnonzero(csum > threshold)
    count = int(above[0]) + 1 if above.size else len(csum)
    return min(count, cap)


def scores(model: PcaModel, ystar, l_pc: int) -> PcScores:
    """Project standardized rows onto the first ``l_pc`` components.

    Scores are left on their natural scale; their column variances decrease
    with component index.
    """
    ys = np.asarray(ystar, dtype=float)
    if ys.ndim != 2 or ys.shape[1] != model.n_outputs:
        raise ValueError("matrix shape does not match the fitted model")
    if not (1 <= l_pc <= model.n_outputs):
        raise ValueError(f"l_pc must be in [1, {model.n_outputs}]")
    return PcScores(ys @ model.loadings[:, :l_pc])


def realized_scores(values, threshold: float = DEFAULT_VARIATION_THRESHOLD):
    """Standardize raw responses, fit components, and project.

    Degenerate columns are dropped.  Returns ``(scores, model, kept_columns)``.
    """
    y = np.asarray(values, dtype=float)
    kept = np.arange(y.shape[1])
    try:
        ystar, means, sds = standardize(y)
    except DegenerateOutputError as err:
        kept = np.setdiff1d(kept, np.asarray(err.columns))
        if kept.size == 0:
            raise
        ystar, means, sds = standardize(y[:, kept])
    model = fit_pca(ystar, means, sds, threshold=threshold)
    l_pc = select_num_pcs(model, threshold)
    return scores(model, ystar, l_pc).scores, model, kept
