"""Low-rank factorization of coordinate matrices: PCA and Bregman EPCA.

Matrices here follow the convention columns = observations: a data
matrix ``Z`` has shape (d, n) for d coordinates and n observations.
``pca_fit`` is ordinary principal component analysis via the singular
value decomposition of the column-centered matrix. ``epca_fit``
generalizes it by minimizing a Bregman divergence between ``Z`` and a
rank-l reconstruction ``V.T @ A`` over loadings ``V`` (orthonormal
rows) and scores ``A``, using alternating blockwise descent with
backtracking line searches. With the squared-norm divergence the
minimizer coincides with PCA; with the exponential divergence the
factorization adapts to data whose natural parameters live on a log
scale.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import (
    DimensionMismatchError,
    DomainError,
    NonConvergenceWarning,
    RankDeficientError,
    WrongMethodError,
    ZeroComponentError,
)
from .logratio import _clr_rows

__all__ = [
    "BregmanSpec",
    "EpcaOptions",
    "FactorizationResult",
    "bregman",
    "pca_fit",
    "variance_explained",
    "epca_loss",
    "epca_gradient",
    "epca_fit",
    "epca_project",
    "CompositionalPCA",
    "CompositionalEPCA",
]

PCA = "pca"
EPCA = "epca"

# Natural parameters are clipped to this band before exponentiation so
# the exponential divergence and its gradient stay finite.
THETA_CLAMP = 30.0


class BregmanSpec(enum.Enum):
    """Supported Bregman divergences, identified by their generating function."""

    #: F(t) = t^2 / 2, giving D(x, y) = ||x - y||^2 / 2.
    SQUARED_NORM = "squared_norm"
    #: F(t) = e^t, giving D(x, y) = sum e^y * (e^(x-y) - 1 - (x - y)).
    EXP_SUM = "exp_sum"


def bregman(spec: BregmanSpec, x, y) -> float:
    """Bregman divergence between two arrays of identical shape.

    Summed over all elements; nonnegative, and zero iff ``x == y``.

    Examples
    --------
    >>> round(bregman(BregmanSpec.SQUARED_NORM, [1.0, 2.0], [0.0, 0.0]), 10)
    2.5
    """
    spec = BregmanSpec(spec)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"shapes differ: {x.shape} vs {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("arguments contain non-finite entries")
    if spec is BregmanSpec.SQUARED_NORM:
        diff = x - y
        return 0.5 * float(np.sum(diff * diff))
    delta = x - y
    # e^y * (e^delta - 1 - delta), with expm1 keeping small deltas exact
    return float(np.sum(np.exp(y) * (np.expm1(delta) - delta)))


@dataclass(frozen=True)
class EpcaOptions:
    """Tuning constants for the alternating EPCA optimizer.

    Attributes
    ----------
    max_iters : int
        Cap on outer iterations (one scores update plus one loadings
        update each).
    rel_tol : float
        Stop when ``|loss_prev - loss| <= rel_tol * max(1, |loss_prev|)``.
    step_init : float
        Initial step size of each backtracking line search.
    step_shrink : float
        Multiplicative factor applied on each backtrack, in (0, 1).
    armijo : float
        Sufficient-decrease constant of the line searches, in (0, 1).
    max_backtracks : int
        Backtracks per line search before the block update is skipped.
    """

    max_iters: int = 500
    rel_tol: float = 1e-6
    step_init: float = 1.0
    step_shrink: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 60

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise DomainError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (np.isfinite(self.rel_tol) and self.rel_tol >= 0.0):
            raise DomainError(f"rel_tol must be nonnegative, got {self.rel_tol}")
        if not (np.isfinite(self.step_init) and self.step_init > 0.0):
            raise DomainError(f"step_init must be positive, got {self.step_init}")
        if not 0.0 < self.step_shrink < 1.0:
            raise DomainError(f"step_shrink must lie in (0, 1), got {self.step_shrink}")
        if not 0.0 < self.armijo < 1.0:
            raise DomainError(f"armijo must lie in (0, 1), got {self.armijo}")
        if int(self.max_backtracks) < 1:
            raise DomainError(f"max_backtracks must be >= 1, got {self.max_backtracks}")


@dataclass
class FactorizationResult:
    """Fitted low-rank factorization of a (d, n) coordinate matrix.

    The reconstruction of the centered data is ``loadings.T @ scores``;
    add ``center`` per row to reconstruct the original matrix.

    Attributes
    ----------
    method : str
        ``"pca"`` or ``"epca"``.
    loadings : numpy.ndarray, shape (l, d)
        Orthonormal rows; each row's largest-magnitude entry is
        positive.
    scores : numpy.ndarray, shape (l, n)
        Component scores of the fitted observations, ordered by
        decreasing variance.
    center : numpy.ndarray, shape (d,)
        Row means of the training matrix.
    loss_trace : numpy.ndarray
        Objective value per outer iteration (including the initial
        value); non-increasing.
    divergence : BregmanSpec
        Divergence the loss measures.
    singular_values : numpy.ndarray or None
        All singular values of the centered matrix, descending. PCA
        only.
    converged : bool
        Whether the stopping tolerance was met within the iteration cap.
    n_clamped : int
        Number of natural-parameter cells clamped in the final loss
        evaluation (exponential divergence only).
    step_trace : numpy.ndarray or None
        Accepted (scores, loadings) step sizes per iteration; zero
        marks a skipped block update. EPCA only.
    """

    method: str
    loadings: np.ndarray
    scores: np.ndarray
    center: np.ndarray
    loss_trace: np.ndarray
    divergence: BregmanSpec
    singular_values: Optional[np.ndarray] = None
    converged: bool = True
    n_clamped: int = 0
    step_trace: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.method not in (PCA, EPCA):
            raise WrongMethodError(f"unknown method {self.method!r}")
        V = np.asarray(self.loadings, dtype=float)
        A = np.asarray(self.scores, dtype=float)
        center = np.asarray(self.center, dtype=float)
        if V.ndim != 2 or A.ndim != 2 or center.ndim != 1:
            raise DimensionMismatchError("loadings and scores must be 2-d, center 1-d")
        l, d = V.shape
        if A.shape[0] != l:
            raise DimensionMismatchError(f"scores have {A.shape[0]} rows, loadings {l}")
        if center.size != d:
            raise DimensionMismatchError(f"center has length {center.size}, expected {d}")
        n = A.shape[1]
        if not 1 <= l <= min(d - 1, n):
            raise DimensionMismatchError(
                f"l={l} violates 1 <= l <= min(d - 1, n) = {min(d - 1, n)}"
            )
        if not np.allclose(V @ V.T, np.eye(l), atol=1e-8, rtol=0.0):
            raise DomainError("loading rows are not orthonormal")
        trace = np.asarray(self.loss_trace, dtype=float)
        if trace.ndim != 1 or trace.size < 1:
            raise DimensionMismatchError("loss_trace must be a nonempty vector")
        slack = 1e-12 * np.maximum(1.0, np.abs(trace[:-1]))
        if np.any(np.diff(trace) > slack):
            raise DomainError("loss trace increases")
        for name, arr in (("loadings", V), ("scores", A), ("center", center),
                          ("loss_trace", trace)):
            arr = arr.copy()
            arr.flags.writeable = False
            setattr(self, name, arr)
        if self.singular_values is not None:
            s = np.asarray(self.singular_values, dtype=float).copy()
            s.flags.writeable = False
            self.singular_values = s
        if self.step_trace is not None:
            st = np.asarray(self.step_trace, dtype=float).copy()
            st.flags.writeable = False
            self.step_trace = st
        self.divergence = BregmanSpec(self.divergence)

    @property
    def l(self) -> int:
        """Number of retained components."""
        return self.loadings.shape[0]

    @property
    def d(self) -> int:
        """Number of coordinates."""
        return self.loadings.shape[1]

    @property
    def n(self) -> int:
        """Number of fitted observations."""
        return self.scores.shape[1]

    @property
    def loss(self) -> float:
        """Final objective value."""
        return float(self.loss_trace[-1])


def _as_data_matrix(Z) -> np.ndarray:
    arr = np.asarray(Z, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("matrix contains non-finite entries")
    return arr


def _check_rank(l: int, d: int, n: int) -> int:
    l = int(l)
    limit = min(d - 1, n)
    if not 1 <= l <= limit:
        raise DimensionMismatchError(
            f"l={l} violates 1 <= l <= min(d - 1, n) = {limit} for shape ({d}, {n})"
        )
    return l


def _fix_signs(V: np.ndarray, A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Flip each component so its largest-magnitude loading is positive;
    # flipping both factors leaves the reconstruction unchanged.
    for k in range(V.shape[0]):
        j = int(np.argmax(np.abs(V[k])))
        if V[k, j] < 0.0:
            V[k] = -V[k]
            A[k] = -A[k]
    return V, A


def pca_fit(Z, l: int) -> FactorizationResult:
    """Principal component analysis of a (d, n) matrix by SVD.

    Columns are observations. Rows are centered by their means; the
    loadings are the top ``l`` left singular vectors of the centered
    matrix and the scores are their projections.

    Parameters
    ----------
    Z : array-like, shape (d, n)
    l : int
        Components to retain, ``1 <= l <= min(d - 1, n)``.

    Raises
    ------
    RankDeficientError
        If the centered matrix has fewer than ``l`` positive singular
        values.
    """
    Z = _as_data_matrix(Z)
    d, n = Z.shape
    l = _check_rank(l, d, n)
    center = Z.mean(axis=1)
    Zc = Z - center[:, None]
    U, s, _ = np.linalg.svd(Zc, full_matrices=False)
    tol = s[0] * max(d, n) * np.finfo(float).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    if rank < l:
        raise RankDeficientError(
            f"need {l} positive singular values, centered matrix has rank {rank}"
        )
    V = np.ascontiguousarray(U[:, :l].T)
    A = V @ Zc
    V, A = _fix_signs(V, A)
    residual = Zc - V.T @ A
    loss = 0.5 * float(np.sum(residual * residual))
    return FactorizationResult(
        method=PCA,
        loadings=V,
        scores=A,
        center=center,
        loss_trace=np.array([loss]),
        divergence=BregmanSpec.SQUARED_NORM,
        singular_values=s,
    )


def variance_explained(result: FactorizationResult) -> np.ndarray:
    """Fraction of total variance per component of a PCA result.

    Returns ``s_i^2 / sum_j s_j^2`` for every singular value, in the
    fitted (descending) order; slice the first ``result.l`` entries for
    the retained components.
    """
    if not isinstance(result, FactorizationResult) or result.method != PCA:
        raise WrongMethodError("variance_explained requires a pca result")
    s = result.singular_values
    total = float(np.sum(s * s))
    return (s * s) / total


def _theta_loss(spec: BregmanSpec, Zc: np.ndarray, theta: np.ndarray) -> tuple[float, int]:
    if spec is BregmanSpec.SQUARED_NORM:
        diff = Zc - theta
        return 0.5 * float(np.sum(diff * diff)), 0
    clipped = np.clip(theta, -THETA_CLAMP, THETA_CLAMP)
    n_clamped = int(np.count_nonzero(clipped != theta))
    delta = Zc - clipped
    loss = float(np.sum(np.exp(clipped) * (np.expm1(delta) - delta)))
    return loss, n_clamped


def _theta_grad(spec: BregmanSpec, Zc: np.ndarray, theta: np.ndarray) -> np.ndarray:
    if spec is BregmanSpec.SQUARED_NORM:
        return theta - Zc
    clipped = np.clip(theta, -THETA_CLAMP, THETA_CLAMP)
    return (clipped - Zc) * np.exp(clipped)


def epca_loss(Z, A, V) -> float:
    """Exponential-divergence reconstruction loss ``D(Z, V.T @ A)``.

    ``Z`` is (d, n), ``A`` is (l, n), ``V`` is (l, d). Natural
    parameters outside ``[-THETA_CLAMP, THETA_CLAMP]`` are clipped
    before exponentiation.
    """
    Z = _as_data_matrix(Z)
    A = _as_data_matrix(A)
    V = _as_data_matrix(V)
    d, n = Z.shape
    if V.shape[1] != d or A.shape[1] != n or V.shape[0] != A.shape[0]:
        raise DimensionMismatchError(
            f"incompatible shapes: Z {Z.shape}, A {A.shape}, V {V.shape}"
        )
    loss, _ = _theta_loss(BregmanSpec.EXP_SUM, Z, V.T @ A)
    return loss


def epca_gradient(Z, A, V) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`epca_loss` with respect to ``A`` and ``V``.

    With ``G = (theta - Z) * exp(theta)`` elementwise at
    ``theta = V.T @ A``, the gradients are ``V @ G`` for the scores and
    ``A @ G.T`` for the loadings.
    """
    Z = _as_data_matrix(Z)
    A = _as_data_matrix(A)
    V = _as_data_matrix(V)
    d, n = Z.shape
    if V.shape[1] != d or A.shape[1] != n or V.shape[0] != A.shape[0]:
        raise DimensionMismatchError(
            f"incompatible shapes: Z {Z.shape}, A {A.shape}, V {V.shape}"
        )
    G = _theta_grad(BregmanSpec.EXP_SUM, Z, V.T @ A)
    return V @ G, A @ G.T


def _retract_rows(M: np.ndarray) -> np.ndarray:
    # Orthonormalize the rows of M by QR of its transpose, signing each
    # column so diag(R) > 0; the map is then deterministic and reduces
    # to the identity on already-orthonormal input.
    q, r = np.linalg.qr(M.T)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return (q * signs).T


def _descend_scores(spec, Zc, A, V, loss, opt):
    G = _theta_grad(spec, Zc, V.T @ A)
    grad = V @ G
    gnorm2 = float(np.sum(grad * grad))
    if gnorm2 == 0.0:
        return A, loss, 0.0
    t = opt.step_init
    for _ in range(opt.max_backtracks):
        cand = A - t * grad
        cand_loss, _ = _theta_loss(spec, Zc, V.T @ cand)
        if cand_loss <= loss - opt.armijo * t * gnorm2:
            return cand, cand_loss, t
        t *= opt.step_shrink
    return A, loss, 0.0


def _descend_loadings(spec, Zc, A, V, loss, opt):
    G = _theta_grad(spec, Zc, V.T @ A)
    grad = A @ G.T
    # Project onto the tangent space of the orthonormal-rows manifold
    # so the Armijo condition is satisfiable under the retraction.
    sym = grad @ V.T
    xi = grad - 0.5 * (sym + sym.T) @ V
    xnorm2 = float(np.sum(xi * xi))
    if xnorm2 == 0.0:
        return V, loss, 0.0
    t = opt.step_init
    for _ in range(opt.max_backtracks):
        cand = _retract_rows(V - t * xi)
        cand_loss, _ = _theta_loss(spec, Zc, cand.T @ A)
        if cand_loss <= loss - opt.armijo * t * xnorm2:
            return cand, cand_loss, t
        t *= opt.step_shrink
    return V, loss, 0.0


def epca_fit(Z, l: int, options: EpcaOptions | None = None, *,
             divergence: BregmanSpec = BregmanSpec.EXP_SUM,
             init: tuple | None = None) -> FactorizationResult:
    """Fit a rank-l Bregman factorization by alternating descent.

    Starting from the PCA solution (or a supplied ``(A0, V0)`` pair),
    each outer iteration runs a backtracking gradient step on the
    scores followed by a projected step on the loadings, retracted to
    the orthonormal-rows manifold by QR. The loss never increases and
    the whole procedure is deterministic.

    Parameters
    ----------
    Z : array-like, shape (d, n)
        Coordinate matrix, columns = observations. Rows are centered
        internally; the loss is measured against the centered matrix.
    l : int
        Components to retain, ``1 <= l <= min(d - 1, n)``.
    options : EpcaOptions, optional
    divergence : BregmanSpec, optional
        Defaults to the exponential divergence. With
        ``BregmanSpec.SQUARED_NORM`` the minimum coincides with PCA.
    init : tuple (A0, V0), optional
        Warm start; ``V0`` must have orthonormal rows. Defaults to the
        PCA factorization of ``Z``, which guarantees the final loss is
        no worse than the PCA initialization.

    Returns
    -------
    FactorizationResult
        Components ordered by decreasing score variance, loadings
        sign-fixed, with the full loss trace and accepted step sizes.
        If the tolerance is not met within ``max_iters`` a
        :class:`NonConvergenceWarning` is issued and ``converged`` is
        False.
    """
    Z = _as_data_matrix(Z)
    d, n = Z.shape
    l = _check_rank(l, d, n)
    divergence = BregmanSpec(divergence)
    opt = options if options is not None else EpcaOptions()
    center = Z.mean(axis=1)
    Zc = Z - center[:, None]
    if init is None:
        base = pca_fit(Z, l)
        V = base.loadings.copy()
        A = base.scores.copy()
    else:
        A0, V0 = init
        A = np.array(A0, dtype=float)
        V = np.array(V0, dtype=float)
        if A.shape != (l, n) or V.shape != (l, d):
            raise DimensionMismatchError(
                f"init shapes must be A ({l}, {n}) and V ({l}, {d}), "
                f"got {A.shape} and {V.shape}"
            )
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(V)):
            raise DomainError("init contains non-finite entries")
        if not np.allclose(V @ V.T, np.eye(l), atol=1e-8, rtol=0.0):
            raise DomainError("init loadings are not orthonormal")
    loss, _ = _theta_loss(divergence, Zc, V.T @ A)
    trace = [loss]
    steps = []
    converged = False
    for _ in range(int(opt.max_iters)):
        prev = loss
        A, loss, t_scores = _descend_scores(divergence, Zc, A, V, loss, opt)
        V, loss, t_loadings = _descend_loadings(divergence, Zc, A, V, loss, opt)
        trace.append(loss)
        steps.append((t_scores, t_loadings))
        if abs(prev - loss) <= opt.rel_tol * max(1.0, abs(prev)):
            converged = True
            break
    if not converged:
        warnings.warn(
            f"EPCA stopped after {opt.max_iters} iterations without meeting "
            f"rel_tol={opt.rel_tol}",
            NonConvergenceWarning,
            stacklevel=2,
        )
    order = np.argsort(-A.var(axis=1), kind="stable")
    A = A[order]
    V = V[order]
    V, A = _fix_signs(V, A)
    _, n_clamped = _theta_loss(divergence, Zc, V.T @ A)
    return FactorizationResult(
        method=EPCA,
        loadings=V,
        scores=A,
        center=center,
        loss_trace=np.asarray(trace),
        divergence=divergence,
        converged=converged,
        n_clamped=n_clamped,
        step_trace=np.asarray(steps) if steps else np.zeros((0, 2)),
    )


def epca_project(Z, result: FactorizationResult,
                 options: EpcaOptions | None = None) -> np.ndarray:
    """Scores for new observations under fixed fitted loadings.

    Centers ``Z`` with the training means, then minimizes the fitted
    divergence over the scores only, starting from the linear
    projection ``loadings @ Zc``. Returns an (l, n_new) array.
    """
    if not isinstance(result, FactorizationResult):
        raise WrongMethodError("epca_project expects a FactorizationResult")
    Z = _as_data_matrix(Z)
    d, n = Z.shape
    if d != result.d:
        raise DimensionMismatchError(f"matrix has {d} rows, loadings expect {result.d}")
    opt = options if options is not None else EpcaOptions()
    V = result.loadings
    Zc = Z - result.center[:, None]
    A = V @ Zc
    if result.divergence is BregmanSpec.SQUARED_NORM:
        return A
    loss, _ = _theta_loss(result.divergence, Zc, V.T @ A)
    converged = False
    for _ in range(int(opt.max_iters)):
        prev = loss
        A, loss, _ = _descend_scores(result.divergence, Zc, A, V, loss, opt)
        if abs(prev - loss) <= opt.rel_tol * max(1.0, abs(prev)):
            converged = True
            break
    if not converged:
        warnings.warn(
            f"score projection stopped after {opt.max_iters} iterations without "
            f"meeting rel_tol={opt.rel_tol}",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return A


def _validate_positive_rows(X) -> np.ndarray:
    X = check_array(X, dtype=float)
    if X.shape[1] < 2:
        raise DimensionMismatchError("need at least two parts per row")
    if np.any(X <= 0.0):
        raise ZeroComponentError("all entries must be strictly positive")
    return X


class CompositionalPCA(BaseEstimator, TransformerMixin):
    """PCA of compositions in clr coordinates.

    Rows of ``X`` are compositions (any positive scale). Each row is
    mapped to clr coordinates and the stacked coordinate matrix is
    factorized by :func:`pca_fit`.

    Parameters
    ----------
    n_components : int, default 2

    Attributes
    ----------
    components_ : numpy.ndarray, shape (n_components, d)
    mean_ : numpy.ndarray, shape (d,)
        Mean clr vector of the training rows.
    explained_variance_ratio_ : numpy.ndarray, shape (n_components,)
    singular_values_ : numpy.ndarray
    result_ : FactorizationResult
    """

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def fit(self, X, y=None):
        self.fit_transform(X)
        return self

    def fit_transform(self, X, y=None) -> np.ndarray:
        X = _validate_positive_rows(X)
        result = pca_fit(_clr_rows(X).T, self.n_components)
        self.n_features_in_ = X.shape[1]
        self.result_ = result
        self.components_ = result.loadings
        self.mean_ = result.center
        ratios = variance_explained(result)
        self.explained_variance_ratio_ = ratios[: result.l]
        self.singular_values_ = result.singular_values
        return result.scores.T

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "components_")
        X = _validate_positive_rows(X)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"fitted for d={self.n_features_in_}, got d={X.shape[1]}"
            )
        Zc = _clr_rows(X) - self.mean_
        return Zc @ self.components_.T


class CompositionalEPCA(BaseEstimator, TransformerMixin):
    """Exponential-divergence EPCA of compositions in clr coordinates.

    Rows of ``X`` are compositions (any positive scale). The clr
    coordinate matrix is factorized by :func:`epca_fit`;
    ``fit_transform`` returns the jointly fitted scores, while
    ``transform`` re-projects rows onto the fixed loadings by score
    optimization.

    Parameters
    ----------
    n_components : int, default 2
    max_iters, rel_tol, step_init, step_shrink, armijo, max_backtracks
        Optimizer constants; see :class:`EpcaOptions`.
    """

    def __init__(self, n_components: int = 2, max_iters: int = 500,
                 rel_tol: float = 1e-6, step_init: float = 1.0,
                 step_shrink: float = 0.5, armijo: float = 1e-4,
                 max_backtracks: int = 60):
        self.n_components = n_components
        self.max_iters = max_iters
        self.rel_tol = rel_tol
        self.step_init = step_init
        self.step_shrink = step_shrink
        self.armijo = armijo
        self.max_backtracks = max_backtracks

    def _options(self) -> EpcaOptions:
        return EpcaOptions(
            max_iters=self.max_iters,
            rel_tol=self.rel_tol,
            step_init=self.step_init,
            step_shrink=self.step_shrink,
            armijo=self.armijo,
            max_backtracks=self.max_backtracks,
        )

    def fit(self, X, y=None):
        self.fit_transform(X)
        return self

    def fit_transform(self, X, y=None) -> np.ndarray:
        X = _validate_positive_rows(X)
        result = epca_fit(_clr_rows(X).T, self.n_components, self._options())
        self.n_features_in_ = X.shape[1]
        self.result_ = result
        self.components_ = result.loadings
        self.mean_ = result.center
        return result.scores.T

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "components_")
        X = _validate_positive_rows(X)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"fitted for d={self.n_features_in_}, got d={X.shape[1]}"
            )
        return epca_project(_clr_rows(X).T, self.result_, self._options()).T
