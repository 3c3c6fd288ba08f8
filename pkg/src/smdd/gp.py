"""Universal-kriging Gaussian process with a constant trend.

The correlation model is either the Gaussian kernel exp(-theta * ||x - x'||^2)
or an isotropic Matern kernel with smoothness nu, written with argument
s = 2 * sqrt(nu) * r / theta and normalized so the kernel equals one at zero
separation.  The range parameter theta is estimated by maximizing the profile
log-likelihood on a bounded interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist, pdist
from scipy.special import gammaln, kv

from .design import DUPLICATE_TOL, DesignMatrix
from .errors import IllConditionedError

GAUSSIAN = "gaussian"
MATERN = "matern"
KERNEL_FAMILIES = (GAUSSIAN, MATERN)

BASE_JITTER = 1e-8
MAX_JITTER = 1e-4

THETA_MIN = 1e-2
THETA_MAX = 1e3
_GRID_SIZE = 20
_REFINE_TOL = 1e-4


@dataclass(frozen=True)
class Kernel:
    """Correlation kernel: family name, range theta, and (Matern) smoothness."""

    family: str
    theta: float
    nu: float = 2.5

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise ValueError("theta must be positive and finite")
        if self.family == MATERN and not (self.nu > 0 and math.isfinite(self.nu)):
            raise ValueError("nu must be positive and finite")


@dataclass(frozen=True)
class BasisSpec:
    """Trend basis.  Only the constant basis b(x) = 1 is provided."""

    kind: str = "constant"

    def __post_init__(self):
        if self.kind != "constant":
            raise ValueError(f"unsupported basis {self.kind!r}")

    @property
    def size(self) -> int:
        return 1

    def matrix(self, x: np.ndarray) -> np.ndarray:
        return np.ones((x.shape[0], 1))


def _matern_from_s(s: np.ndarray, nu: float) -> np.ndarray:
    """Matern correlation as a function of the scaled argument s >= 0."""
    if nu == 0.5:
        return np.exp(-s)
    if nu == 1.5:
        return (1.0 + s) * np.exp(-s)
    if nu == 2.5:
        return (1.0 + s + s * s / 3.0) * np.exp(-s)
    out = np.ones_like(s)
    pos = s > 1e-8
    sp = s[pos]
    log_val = (1.0 - nu) * math.log(2.0) - gammaln(nu) + nu * np.log(sp)
    out[pos] = np.exp(log_val) * kv(nu, sp)
    return out


def _corr_matrix(kernel: Kernel, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if kernel.family == GAUSSIAN:
        return np.exp(-kernel.theta * cdist(a, b, "sqeuclidean"))
    r = cdist(a, b)
    s = (2.0 * math.sqrt(kernel.nu) / kernel.theta) * r
    return _matern_from_s(s, kernel.nu)


def kernel_eval(kernel: Kernel, x, y) -> float:
    """Correlation between two points; one at zero separation."""
    a = np.asarray(x, dtype=float).ravel()
    b = np.asarray(y, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(_corr_matrix(kernel, a[None, :], b[None, :])[0, 0])


def factor_with_jitter(mat: np.ndarray, base: float = BASE_JITTER,
                       maximum: float = MAX_JITTER):
    """Cholesky-factor a symmetric matrix after adding a diagonal jitter.

    The jitter starts at ``base`` and escalates tenfold until factorization
    succeeds or ``maximum`` is exceeded, in which case the matrix is declared
    numerically singular.
    Returns ``(cho, jitter)`` where cho is a scipy cho_factor pair.
    """
    if not np.all(np.isfinite(mat)):
        raise ValueError("matrix contains non-finite entries")
    n = mat.shape[0]
    eye = np.eye(n)
    jitter = base
    while jitter <= maximum * (1.0 + 1e-12):
        try:
            cho = cho_factor(mat + jitter * eye, lower=True, check_finite=False)
            return cho, jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise IllConditionedError(
        f"correlation matrix not positive definite up to jitter {maximum:g}"
    )


def _as_points(x) -> np.ndarray:
    if isinstance(x, DesignMatrix):
        return x.points
    pts = np.asarray(x, dtype=float)
    if pts.ndim != 2:
        raise ValueError("training inputs must be a 2-d array")
    return pts


@dataclass
class GpModel:
    """Fitted universal-kriging model for one scalar response."""

    x: np.ndarray
    y: np.ndarray
    kernel: Kernel
    basis: BasisSpec
    beta_hat: np.ndarray
    sigma2_hat: float
    jitter: float
    _cho: tuple = field(repr=False)
    _alpha: np.ndarray = field(repr=False)
    _rinv_b: np.ndarray = field(repr=False)
    _btrb_inv: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, x, y, kernel: Kernel, basis: BasisSpec | None = None) -> "GpModel":
        """Fit the trend and process variance for a fixed kernel."""
        pts = _as_points(x)
        resp = np.asarray(y, dtype=float).ravel()
        if resp.shape[0] != pts.shape[0]:
            raise ValueError("response length must match the number of runs")
        if not np.all(np.isfinite(resp)):
            raise ValueError("responses contain non-finite values")
        basis = basis or BasisSpec()
        n = pts.shape[0]
        bmat = basis.matrix(pts)
        corr = _corr_matrix(kernel, pts, pts)
        cho, jitter = factor_with_jitter(corr)
        rinv_b = cho_solve(cho, bmat, check_finite=False)
        btrb = bmat.T @ rinv_b
        btrb_inv = np.linalg.inv(btrb)
        rinv_y = cho_solve(cho, resp, check_finite=False)
        beta = btrb_inv @ (bmat.T @ rinv_y)
        resid = resp - bmat @ beta
        alpha = cho_solve(cho, resid, check_finite=False)
        rss = float(resid @ alpha)
        sigma2 = max(rss, 0.0) / (n - 1) if n > 1 else 0.0
        return cls(
            x=pts.copy(),
            y=resp.copy(),
            kernel=kernel,
            basis=basis,
            beta_hat=beta,
            sigma2_hat=sigma2,
            jitter=jitter,
            _cho=cho,
            _alpha=alpha,
            _rinv_b=rinv_b,
            _btrb_inv=btrb_inv,
        )

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[1]

    def posterior(self, x):
        """Posterior mean and variance at one point (k,) or a batch (p, k).

        The variance includes the trend-estimation term, so far away from the
        data it tends to sigma2 * (1 + b' (B' R^-1 B)^-1 b) rather than just
        sigma2.  Tiny negative values from round-off are clamped to zero.
        """
        query = np.asarray(x, dtype=float)
        scalar = query.ndim == 1
        if scalar:
            query = query[None, :]
        if query.ndim != 2 or query.shape[1] != self.k:
            raise ValueError(
                f"query points must have {self.k} columns, got shape {query.shape}"
            )
        bq = self.basis.matrix(query)
        r = _corr_matrix(self.kernel, query, self.x)
        mean = bq @ self.beta_hat + r @ self._alpha
        v = cho_solve(self._cho, r.T, check_finite=False)
        quad = np.einsum("pn,np->p", r, v)
        u = bq.T - self._rinv_b.T @ r.T
        ucorr = np.einsum("qp,qr,rp->p", u, self._btrb_inv, u)
        var = self.sigma2_hat * (1.0 - quad + ucorr)
        var = np.maximum(var, 0.0)
        if scalar:
            return float(mean[0]), float(var[0])
        return mean, var


def posterior(model: GpModel, x):
    """Functional alias for GpModel.posterior."""
    return model.posterior(x)


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    """Golden-section maximization of a unimodal-ish function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = f(c)
    fd = f(d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def fit_gp(x, y, family: str = MATERN, nu: float = 2.5,
           basis: BasisSpec | None = None, theta_hint: float | None = None) -> GpModel:
    """Fit a universal-kriging model, estimating theta by profile likelihood.

    The search runs over log(theta) in [log(1e-2), log(1e3)]: a 20-point grid
    followed by golden-section refinement of the bracketing interval down to
    1e-4 in log(theta).  ``theta_hint`` adds one extra grid point, which lets
    sequential refits start near the previous optimum.
    """
    pts = _as_points(x)
    resp = np.asarray(y, dtype=float).ravel()
    basis = basis or BasisSpec()
    n = pts.shape[0]
    if resp.shape[0] != n:
        raise ValueError("response length must match the number of runs")
    if not np.all(np.isfinite(resp)):
        raise ValueError("responses contain non-finite values")
    if not np.all(np.isfinite(pts)):
        raise ValueError("inputs contain non-finite values")
    if n < basis.size + 2:
        raise ValueError(
            f"need at least {basis.size + 2} runs to fit trend and variance, got {n}"
        )
    if float(pdist(pts).min()) <= DUPLICATE_TOL:
        raise ValueError("training inputs contain duplicate rows")
    if family not in KERNEL_FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}")

    bmat = basis.matrix(pts)
    if family == GAUSSIAN:
        dist = cdist(pts, pts, "sqeuclidean")
    else:
        dist = cdist(pts, pts)
    scale = 2.0 * math.sqrt(nu)

    def profile(log_theta: float) -> float:
        theta = math.exp(log_theta)
        if family == GAUSSIAN:
            corr = np.exp(-theta * dist)
        else:
            corr = _matern_from_s((scale / theta) * dist, nu)
        try:
            cho, _ = factor_with_jitter(corr)
        except IllConditionedError:
            return -math.inf
        rinv_b = cho_solve(cho, bmat, check_finite=False)
        btrb = bmat.T @ rinv_b
        try:
            btrb_inv = np.linalg.inv(btrb)
        except np.linalg.LinAlgError:
            return -math.inf
        rinv_y = cho_solve(cho, resp, check_finite=False)
        beta = btrb_inv @ (bmat.T @ rinv_y)
        resid = resp - bmat @ beta
        rss = float(resid @ cho_solve(cho, resid, check_finite=False))
        sigma2 = max(rss, 0.0) / max(n - 1, 1)
        logdet = 2.0 * float(np.log(np.diag(cho[0])).sum())
        return -0.5 * (n * math.log(max(sigma2, 1e-300)) + logdet)

    lo = math.log(THETA_MIN)
    hi = math.log(THETA_MAX)
    grid = list(np.linspace(lo, hi, _GRID_SIZE))
    if theta_hint is not None and theta_hint > 0:
        grid.append(min(max(math.log(theta_hint), lo), hi))
        grid.sort()
    values = [profile(g) for g in grid]
    best = int(np.argmax(values))
    if not math.isfinite(values[best]):
        raise IllConditionedError("profile likelihood is degenerate everywhere")
    left = grid[best - 1] if best > 0 else lo
    right = grid[best + 1] if best < len(grid) - 1 else hi
    log_theta = _golden_max(profile, left, right, _REFINE_TOL)
    if profile(log_theta) < values[best]:
        log_theta = grid[best]
    kernel = Kernel(family=family, theta=math.exp(log_theta), nu=nu)
    return GpModel.build(pts, resp, kernel, basis)
