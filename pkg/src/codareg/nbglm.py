"""Negative binomial count regression with exposure offsets.

The response model is NB(r, p_i) in the count parameterization

    P(Y = j) = C(j + r - 1, r - 1) * p^r * (1 - p)^j,

with mean r(1-p)/p and variance r(1-p)/p^2, linked to covariates
through the log mean

    mu_i = E_i * exp(x_i' beta),      p_i = r / (r + mu_i),

where E_i is a known positive exposure. Estimation maximizes the exact
likelihood jointly in (log r, beta) with analytic gradient and Hessian;
the covariance of the coefficient estimates is the beta block of the
inverse observed information, which is invariant to how the dispersion
is parameterized.

Also provided: mapping of coefficient vectors on isometric-logratio
coordinates back to a composition, and an ordinary least squares helper
for linear models on such coordinates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize, special
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .composition import Composition, CompositionMatrix
from .errors import (
    DimensionMismatchError,
    DomainError,
    MissingCovarianceError,
    NonConvergenceWarning,
    RankDeficientError,
)
from .logratio import ContrastMatrix, _clr_inv_rows, transform_matrix

__all__ = [
    "DesignMatrix",
    "NegBinFit",
    "WaldTable",
    "nb_pmf",
    "nb_mean_var",
    "nb_loglik",
    "nb_fit",
    "nb_predict",
    "wald",
    "backtransform_ilr_coeffs",
    "fit_compositional_linear",
    "NegativeBinomialRegressor",
]

# Bounds on log(dispersion) during line searches; r stays in [1e-6, 1e6].
_LOG_R_BOUND = 6.0 * np.log(10.0)


class DesignMatrix:
    """A named regression design with a leading intercept column.

    Parameters
    ----------
    values : array-like of float, shape (n, q)
        First column must be identically 1. No other column may be
        constant and no two columns may be identical.
    names : sequence of str
        One unique nonempty name per column.
    """

    __slots__ = ("_values", "_names")

    def __init__(self, values, names):
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"expected a 2-d design, got shape {arr.shape}")
        n, q = arr.shape
        if n < 1 or q < 1:
            raise DimensionMismatchError(f"design must be nonempty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("design contains non-finite entries")
        if not np.all(arr[:, 0] == 1.0):
            raise DomainError("first design column must be the intercept (all ones)")
        for j in range(1, q):
            col = arr[:, j]
            if np.all(col == col[0]):
                raise DomainError(f"column {j} is constant and collinear with the intercept")
        for j in range(q):
            for k in range(j + 1, q):
                if np.array_equal(arr[:, j], arr[:, k]):
                    raise DomainError(f"columns {j} and {k} are identical")
        names = tuple(str(s) for s in names)
        if len(names) != q or len(set(names)) != q or any(not s for s in names):
            raise DimensionMismatchError("need one unique nonempty name per column")
        arr = arr.copy()
        arr.flags.writeable = False
        self._values = arr
        self._names = names

    @property
    def values(self) -> np.ndarray:
        """Read-only array, shape (n, q)."""
        return self._values

    @property
    def names(self) -> tuple:
        return self._names

    @property
    def n(self) -> int:
        return self._values.shape[0]

    @property
    def q(self) -> int:
        return self._values.shape[1]

    def __repr__(self) -> str:
        return f"DesignMatrix(n={self.n}, names={self._names})"


@dataclass
class NegBinFit:
    """Maximum likelihood estimates of a negative binomial regression.

    Attributes
    ----------
    beta : numpy.ndarray, shape (q,)
        Coefficients, intercept first.
    dispersion : float
        Estimated r > 0.
    cov : numpy.ndarray or None, shape (q, q)
        Covariance of ``beta``; None when the observed information
        could not be inverted.
    loglik : float
        Maximized log likelihood.
    converged : bool
    n_iterations : int
    names : tuple of str
        Column names of the design the model was fitted on.
    """

    beta: np.ndarray
    dispersion: float
    cov: Optional[np.ndarray]
    loglik: float
    converged: bool
    n_iterations: int
    names: tuple

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 1 or not np.all(np.isfinite(beta)):
            raise DomainError("beta must be a finite vector")
        if not (np.isfinite(self.dispersion) and self.dispersion > 0.0):
            raise DomainError(f"dispersion must be positive, got {self.dispersion}")
        if not np.isfinite(self.loglik):
            raise DomainError("log likelihood is not finite")
        names = tuple(str(s) for s in self.names)
        if len(names) != beta.size or len(set(names)) != beta.size:
            raise DimensionMismatchError("need one unique name per coefficient")
        if self.cov is not None:
            cov = np.asarray(self.cov, dtype=float)
            q = beta.size
            if cov.shape != (q, q) or not np.all(np.isfinite(cov)):
                raise DimensionMismatchError(f"cov must be finite with shape ({q}, {q})")
            scale = max(1.0, float(np.abs(cov).max()))
            if np.abs(cov - cov.T).max() > 1e-8 * scale:
                raise DomainError("cov is not symmetric")
            eigs = np.linalg.eigvalsh(0.5 * (cov + cov.T))
            if eigs.min() < -1e-8 * scale:
                raise DomainError("cov is not positive semidefinite")
            cov = 0.5 * (cov + cov.T)
            cov.flags.writeable = False
            self.cov = cov
        beta = beta.copy()
        beta.flags.writeable = False
        self.beta = beta
        self.names = names


@dataclass
class WaldTable:
    """Coefficient estimates with standard errors and two-sided p-values."""

    names: tuple
    estimate: np.ndarray
    std_error: np.ndarray
    z_value: np.ndarray
    p_value: np.ndarray

    def __post_init__(self):
        q = len(self.names)
        for field_name in ("estimate", "std_error", "z_value", "p_value"):
            arr = np.asarray(getattr(self, field_name), dtype=float).copy()
            if arr.shape != (q,):
                raise DimensionMismatchError(f"{field_name} must have shape ({q},)")
            arr.flags.writeable = False
            setattr(self, field_name, arr)
        self.names = tuple(str(s) for s in self.names)

    def as_dataframe(self):
        """Rows indexed by coefficient name."""
        import pandas as pd

        return pd.DataFrame(
            {
                "estimate": self.estimate,
                "std_error": self.std_error,
                "z_value": self.z_value,
                "p_value": self.p_value,
            },
            index=list(self.names),
        )


def _check_rp(r: float, p: float) -> tuple[float, float]:
    r = float(r)
    p = float(p)
    if not (np.isfinite(r) and r > 0.0):
        raise DomainError(f"r must be positive and finite, got {r}")
    if not (np.isfinite(p) and 0.0 < p < 1.0):
        raise DomainError(f"p must lie in (0, 1), got {p}")
    return r, p


def nb_pmf(j, r: float, p: float):
    """Negative binomial probability mass at count(s) ``j``.

    ``C(j + r - 1, r - 1) * p**r * (1 - p)**j`` evaluated through log
    gamma functions, so large counts and non-integer ``r`` are exact to
    rounding. ``j`` may be a scalar or an array of nonnegative
    integers; the return matches its shape.
    """
    r, p = _check_rp(r, p)
    arr = np.asarray(j)
    if not np.issubdtype(arr.dtype, np.integer):
        f = np.asarray(j, dtype=float)
        if not np.all(np.isfinite(f)) or np.any(f != np.round(f)):
            raise DomainError("counts must be integers")
        arr = f.astype(np.int64)
    if np.any(arr < 0):
        raise DomainError("counts must be nonnegative")
    log_pmf = (
        special.gammaln(arr + r)
        - special.gammaln(r)
        - special.gammaln(arr + 1.0)
        + r * np.log(p)
        + arr * np.log1p(-p)
    )
    out = np.exp(log_pmf)
    return float(out) if np.isscalar(j) or arr.ndim == 0 else out


def nb_mean_var(r: float, p: float) -> tuple[float, float]:
    """Mean ``r(1-p)/p`` and variance ``r(1-p)/p^2``."""
    r, p = _check_rp(r, p)
    mean = r * (1.0 - p) / p
    return mean, mean / p


def _check_response(y) -> np.ndarray:
    arr = np.asarray(y)
    if not np.issubdtype(arr.dtype, np.integer):
        f = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(f)) or np.any(f != np.round(f)):
            raise DomainError("response must be integer counts")
        arr = f.astype(np.int64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"response must be a vector, got shape {arr.shape}")
    if np.any(arr < 0):
        raise DomainError("response contains negative counts")
    return arr.astype(np.int64)


def _check_exposure(exposure, n: int) -> np.ndarray:
    arr = np.asarray(exposure, dtype=float)
    if arr.ndim != 1 or arr.size != n:
        raise DimensionMismatchError(f"exposure must be a vector of length {n}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError("exposure must be strictly positive and finite")
    return arr


def _eval_loglik(theta: np.ndarray, Xv: np.ndarray, y: np.ndarray,
                 log_exposure: np.ndarray, order: int):
    """Log likelihood in (s, beta) with s = log r; optionally gradient and Hessian.

    All intermediate quantities are formed from log(r + mu) via
    logaddexp, so arbitrarily large linear predictors stay finite.
    """
    s = theta[0]
    beta = theta[1:]
    r = np.exp(s)
    eta = Xv @ beta + log_exposure
    lse = np.logaddexp(s, eta)          # log(r + mu)
    logp = s - lse                      # log r/(r + mu)
    log1mp = eta - lse                  # log mu/(r + mu)
    n = y.size
    ll = float(
        np.sum(special.gammaln(y + r) + r * logp + y * log1mp)
        - n * special.gammaln(r)
        - np.sum(special.gammaln(y + 1.0))
    )
    if order == 0:
        return ll
    p = np.exp(logp)
    q1 = np.exp(log1mp)                 # 1 - p
    inv = np.exp(-lse)                  # 1/(r + mu)
    u = y * p - r * q1                  # r(y - mu)/(r + mu)
    g_beta = Xv.T @ u
    dldr = float(np.sum(special.digamma(y + r) + logp + q1 - y * inv)
                 - n * special.digamma(r))
    grad = np.concatenate(([r * dldr], g_beta))
    if order == 1:
        return ll, grad
    w = (r + y) * p * q1                # r mu (r + y)/(r + mu)^2
    h_bb = -(Xv.T * w) @ Xv
    c = q1 * (y * inv - q1)             # mu (y - mu)/(r + mu)^2
    h_bs = r * (Xv.T @ c)
    d2ldr2 = float(np.sum(q1 / r - q1 * inv + y * inv * inv
                          + special.polygamma(1, y + r))
                   - n * special.polygamma(1, r))
    hess = np.empty((theta.size, theta.size))
    hess[0, 0] = r * dldr + r * r * d2ldr2
    hess[0, 1:] = h_bs
    hess[1:, 0] = h_bs
    hess[1:, 1:] = h_bb
    return ll, grad, hess


def nb_loglik(r: float, beta, X: DesignMatrix, y, exposure) -> float:
    """Exact log likelihood of the data under ``(r, beta)``."""
    if not isinstance(X, DesignMatrix):
        raise DimensionMismatchError("X must be a DesignMatrix")
    r = float(r)
    if not (np.isfinite(r) and r > 0.0):
        raise DomainError(f"r must be positive and finite, got {r}")
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (X.q,) or not np.all(np.isfinite(beta)):
        raise DimensionMismatchError(f"beta must be a finite vector of length {X.q}")
    y = _check_response(y)
    if y.size != X.n:
        raise DimensionMismatchError(f"response has {y.size} rows, design has {X.n}")
    exposure = _check_exposure(exposure, X.n)
    theta = np.concatenate(([np.log(r)], beta))
    return _eval_loglik(theta, X.values, y, np.log(exposure), order=0)


def nb_fit(X: DesignMatrix, y, exposure, *, tol: float = 1e-8,
           max_iter: int = 500) -> NegBinFit:
    """Maximum likelihood fit of the negative binomial regression.

    A quasi-Newton pass over (log r, beta) with analytic gradients is
    polished by full Newton steps with the analytic Hessian until the
    gradient norm drops below ``tol``. Deterministic: no randomness is
    involved at any point.

    Parameters
    ----------
    X : DesignMatrix
    y : array-like of int, shape (n,)
        Nonnegative counts, not identically zero.
    exposure : array-like of float, shape (n,)
        Strictly positive exposures E_i.
    tol : float, optional
        Convergence threshold on the max absolute gradient entry.
    max_iter : int, optional

    Returns
    -------
    NegBinFit
        With a :class:`NonConvergenceWarning` (and ``converged=False``)
        if the threshold was not reached.
    """
    if not isinstance(X, DesignMatrix):
        raise DimensionMismatchError("X must be a DesignMatrix")
    y = _check_response(y)
    if y.size != X.n:
        raise DimensionMismatchError(f"response has {y.size} rows, design has {X.n}")
    exposure = _check_exposure(exposure, X.n)
    if X.n <= X.q:
        raise DimensionMismatchError(
            f"need more observations than coefficients, got n={X.n}, q={X.q}"
        )
    if np.linalg.matrix_rank(X.values) < X.q:
        raise RankDeficientError("design columns are linearly dependent")
    if y.sum() == 0:
        raise DomainError("response is identically zero; the intercept is unbounded below")
    log_exposure = np.log(exposure)

    # Moment starting values: intercept matches the aggregate rate and
    # r comes from the marginal mean/variance relation.
    ybar = y.mean()
    yvar = y.var(ddof=1) if y.size > 1 else 0.0
    r0 = ybar * ybar / (yvar - ybar) if yvar > ybar else 1e3
    r0 = min(max(r0, 1e-3), 1e3)
    theta0 = np.zeros(X.q + 1)
    theta0[0] = np.log(r0)
    theta0[1] = np.log(y.sum() / exposure.sum())

    def objective(theta):
        ll, grad = _eval_loglik(theta, X.values, y, log_exposure, order=1)
        return -ll, -grad

    bounds = [(-_LOG_R_BOUND, _LOG_R_BOUND)] + [(None, None)] * X.q
    res = optimize.minimize(
        objective, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": int(max_iter), "ftol": 1e-14, "gtol": 1e-10},
    )
    theta = np.asarray(res.x, dtype=float)
    iterations = int(res.nit)

    ll, grad, hess = _eval_loglik(theta, X.values, y, log_exposure, order=2)
    for _ in range(50):
        if np.abs(grad).max() < tol:
            break
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        accepted = False
        scale = 1.0
        for _ in range(30):
            cand = theta - scale * step
            cand_ll = _eval_loglik(cand, X.values, y, log_exposure, order=0)
            if np.isfinite(cand_ll) and cand_ll >= ll - 1e-10 * (1.0 + abs(ll)):
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            break
        theta = cand
        iterations += 1
        new_ll, grad, hess = _eval_loglik(theta, X.values, y, log_exposure, order=2)
        if abs(new_ll - ll) <= 1e-13 * (1.0 + abs(ll)) and np.abs(grad).max() >= tol:
            ll = new_ll
            break
        ll = new_ll

    converged = bool(np.abs(grad).max() < tol)
    if not converged:
        warnings.warn(
            f"negative binomial fit stopped with max |gradient| = {np.abs(grad).max():.3e} "
            f"(threshold {tol})",
            NonConvergenceWarning,
            stacklevel=2,
        )

    cov_beta = None
    try:
        cov_full = np.linalg.inv(-hess)
        cov_full = 0.5 * (cov_full + cov_full.T)
        cand = cov_full[1:, 1:]
        scale = max(1.0, float(np.abs(cand).max()))
        if (np.all(np.isfinite(cand))
                and np.linalg.eigvalsh(cand).min() >= -1e-8 * scale):
            cov_beta = cand
    except np.linalg.LinAlgError:
        pass
    if cov_beta is None:
        warnings.warn(
            "observed information is singular; no covariance is available",
            NonConvergenceWarning,
            stacklevel=2,
        )

    return NegBinFit(
        beta=theta[1:],
        dispersion=float(np.exp(theta[0])),
        cov=cov_beta,
        loglik=float(ll),
        converged=converged,
        n_iterations=iterations,
        names=X.names,
    )


def nb_predict(fit: NegBinFit, X: DesignMatrix, exposure) -> np.ndarray:
    """Fitted means ``mu_i = E_i * exp(x_i' beta)``."""
    if not isinstance(X, DesignMatrix):
        raise DimensionMismatchError("X must be a DesignMatrix")
    if X.q != fit.beta.size:
        raise DimensionMismatchError(
            f"design has {X.q} columns, fit has {fit.beta.size} coefficients"
        )
    exposure = _check_exposure(exposure, X.n)
    return exposure * np.exp(X.values @ fit.beta)


def wald(fit: NegBinFit) -> WaldTable:
    """Wald z-tests of each coefficient against zero.

    Two-sided p-values come from the standard normal tail,
    ``p = erfc(|z| / sqrt(2))``.
    """
    if fit.cov is None:
        raise MissingCovarianceError("fit carries no covariance matrix")
    se = np.sqrt(np.maximum(np.diag(fit.cov), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = fit.beta / se
        z = np.where(se > 0.0, raw,
                     np.where(fit.beta == 0.0, 0.0, np.inf * np.sign(fit.beta)))
    p = special.erfc(np.abs(z) / np.sqrt(2.0))
    return WaldTable(names=fit.names, estimate=fit.beta.copy(), std_error=se,
                     z_value=z, p_value=p)


def backtransform_ilr_coeffs(beta, basis: ContrastMatrix) -> Composition:
    """Map a coefficient vector on ilr coordinates to a composition.

    The coefficients are rotated to clr space through the basis and
    inverted, producing the unit-sum composition whose ilr coordinates
    are proportional to the fitted effect direction.
    """
    if not isinstance(basis, ContrastMatrix):
        raise DimensionMismatchError("basis must be a ContrastMatrix")
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (basis.d - 1,):
        raise DimensionMismatchError(
            f"expected {basis.d - 1} coefficients for d={basis.d}, got shape {beta.shape}"
        )
    if not np.all(np.isfinite(beta)):
        raise DomainError("coefficients contain non-finite entries")
    return Composition(_clr_inv_rows(beta @ basis.entries, 1.0), 1.0)


def fit_compositional_linear(X: CompositionMatrix, y, basis: ContrastMatrix
                             ) -> tuple[float, np.ndarray, Composition]:
    """Least squares of a numeric response on ilr coordinates.

    Returns the intercept, the coordinate coefficients, and their
    backtransformed composition.
    """
    if not isinstance(X, CompositionMatrix):
        raise DimensionMismatchError("X must be a CompositionMatrix")
    if not isinstance(basis, ContrastMatrix):
        raise DimensionMismatchError("basis must be a ContrastMatrix")
    if basis.d != X.d:
        raise DimensionMismatchError(f"basis is for d={basis.d}, matrix has d={X.d}")
    y = np.asarray(y, dtype=float)
    if y.shape != (X.n,) or not np.all(np.isfinite(y)):
        raise DimensionMismatchError(f"response must be a finite vector of length {X.n}")
    if X.n <= X.d:
        raise DimensionMismatchError(
            f"need more observations than coefficients, got n={X.n} for d={X.d}"
        )
    coords = transform_matrix(X, "ilr", basis)
    design = np.column_stack([np.ones(X.n), coords])
    solution, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise RankDeficientError("ilr coordinates are linearly dependent")
    return float(solution[0]), solution[1:], backtransform_ilr_coeffs(solution[1:], basis)


class NegativeBinomialRegressor(BaseEstimator, RegressorMixin):
    """Negative binomial regression with optional exposure offsets.

    ``X`` is an ordinary (n, q) covariate array; an intercept column is
    added internally. ``predict`` returns expected counts.

    Parameters
    ----------
    tol : float, default 1e-8
        Gradient threshold of the underlying fit.
    max_iter : int, default 500

    Attributes
    ----------
    coef_ : numpy.ndarray, shape (q,)
    intercept_ : float
    dispersion_ : float
    fit_ : NegBinFit
    """

    def __init__(self, tol: float = 1e-8, max_iter: int = 500):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y, exposure=None):
        X, y = check_X_y(X, y, dtype=float)
        if exposure is None:
            exposure = np.ones(X.shape[0])
        names = ["(Intercept)"] + [f"x{j + 1}" for j in range(X.shape[1])]
        design = DesignMatrix(np.column_stack([np.ones(X.shape[0]), X]), names)
        fit = nb_fit(design, y, exposure, tol=self.tol, max_iter=self.max_iter)
        self.n_features_in_ = X.shape[1]
        self.fit_ = fit
        self.intercept_ = float(fit.beta[0])
        self.coef_ = fit.beta[1:].copy()
        self.dispersion_ = fit.dispersion
        return self

    def predict(self, X, exposure=None) -> np.ndarray:
        check_is_fitted(self, "fit_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"fitted for q={self.n_features_in_}, got q={X.shape[1]}"
            )
        if exposure is None:
            exposure = np.ones(X.shape[0])
        exposure = _check_exposure(exposure, X.shape[0])
        return exposure * np.exp(self.intercept_ + X @ self.coef_)
