"""Pearson chi-square comparison of observed and model-predicted counts.

For a fitted count regression, the observed frequency of each count
value j = 0..m is compared with its expected frequency under the model,

    E_j = sum_i P(Y_i = j | r, p_i),

and summarized by chi^2 = sum_j (O_j - E_j)^2 / E_j. Cells whose
expected frequency is numerically zero are skipped (and counted), since
their terms are 0/0 up to rounding. The report also carries the
log-scale scatter pairs used to eyeball calibration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import AllZeroExpectedError, DimensionMismatchError, DomainError
from .nbglm import DesignMatrix, NegBinFit, _check_exposure, _check_response

__all__ = [
    "MIN_EXPECTED",
    "ChiSquareReport",
    "observed_counts",
    "predicted_counts",
    "pearson_chisq",
    "scatter_data",
    "chi_square_report",
]

# Expected frequencies at or below this threshold are excluded from the
# statistic; their contribution is 0/0 at double precision.
MIN_EXPECTED = 1e-12

_CHUNK = 4096


@dataclass
class ChiSquareReport:
    """Observed versus expected count frequencies and their statistic.

    Attributes
    ----------
    observed : numpy.ndarray of int, shape (m + 1,)
        O_j, the number of responses equal to j.
    expected : numpy.ndarray of float, shape (m + 1,)
        E_j under the fitted model.
    m : int
        Largest count value tabulated.
    statistic : float
        Pearson chi-square over the usable cells.
    n_skipped : int
        Cells excluded because E_j <= MIN_EXPECTED.
    scatter : numpy.ndarray, shape (m + 1, 2)
        Columns ``log1p(observed)`` and ``log1p(expected)``.
    """

    observed: np.ndarray
    expected: np.ndarray
    m: int
    statistic: float
    n_skipped: int
    scatter: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observed)
        exp_ = np.asarray(self.expected, dtype=float)
        size = self.m + 1
        if obs.shape != (size,) or exp_.shape != (size,):
            raise DimensionMismatchError(f"observed and expected must have shape ({size},)")
        scatter = np.asarray(self.scatter, dtype=float)
        if scatter.shape != (size, 2):
            raise DimensionMismatchError(f"scatter must have shape ({size}, 2)")
        obs = obs.astype(np.int64).copy()
        obs.flags.writeable = False
        exp_ = exp_.copy()
        exp_.flags.writeable = False
        scatter = scatter.copy()
        scatter.flags.writeable = False
        self.observed = obs
        self.expected = exp_
        self.scatter = scatter

    def to_dict(self) -> dict:
        """Plain-types view, ready for JSON serialization."""
        return {
            "m": int(self.m),
            "statistic": float(self.statistic),
            "n_skipped": int(self.n_skipped),
            "observed": [int(v) for v in self.observed],
            "expected": [float(v) for v in self.expected],
        }


def observed_counts(y, m: int) -> np.ndarray:
    """Frequency of each count value 0..m in the response vector.

    Responses larger than ``m`` fall outside the table and are ignored.
    """
    y = _check_response(y)
    m = int(m)
    if m < 0:
        raise DomainError(f"m must be nonnegative, got {m}")
    return np.bincount(y, minlength=m + 1)[: m + 1]


def predicted_counts(fit: NegBinFit, X: DesignMatrix, exposure, m: int) -> np.ndarray:
    """Expected frequency of each count value 0..m under a fitted model.

    ``E_j = sum_i P(Y_i = j)`` with ``p_i = r / (r + mu_i)`` evaluated
    in blocks of observations so the (n, m + 1) probability table never
    materializes at once.
    """
    if not isinstance(X, DesignMatrix):
        raise DimensionMismatchError("X must be a DesignMatrix")
    exposure = _check_exposure(exposure, X.n)
    m = int(m)
    if m < 0:
        raise DomainError(f"m must be nonnegative, got {m}")
    r = fit.dispersion
    s = np.log(r)
    eta = X.values @ fit.beta + np.log(exposure)
    lse = np.logaddexp(s, eta)
    logp = s - lse
    log1mp = eta - lse
    js = np.arange(m + 1)
    base = special.gammaln(js + r) - special.gammaln(r) - special.gammaln(js + 1.0)
    expected = np.zeros(m + 1)
    for start in range(0, eta.size, _CHUNK):
        stop = min(start + _CHUNK, eta.size)
        block = (base
                 + r * logp[start:stop, None]
                 + js * log1mp[start:stop, None])
        expected += np.exp(block).sum(axis=0)
    return expected


def pearson_chisq(observed, expected, *, min_expected: float = MIN_EXPECTED) -> float:
    """Pearson statistic over the cells with usable expected frequency."""
    statistic, _ = _chisq_terms(observed, expected, min_expected)
    return statistic


def _chisq_terms(observed, expected, min_expected: float) -> tuple[float, int]:
    obs = np.asarray(observed, dtype=float)
    exp_ = np.asarray(expected, dtype=float)
    if obs.shape != exp_.shape or obs.ndim != 1 or obs.size == 0:
        raise DimensionMismatchError("observed and expected must be matching nonempty vectors")
    if not np.all(np.isfinite(obs)) or not np.all(np.isfinite(exp_)):
        raise DomainError("frequencies contain non-finite entries")
    if np.any(obs < 0.0) or np.any(exp_ < 0.0):
        raise DomainError("frequencies must be nonnegative")
    usable = exp_ > min_expected
    n_skipped = int(np.count_nonzero(~usable))
    if not np.any(usable):
        raise AllZeroExpectedError("every expected frequency is numerically zero")
    diff = obs[usable] - exp_[usable]
    statistic = float(np.sum(diff * diff / exp_[usable]))
    return statistic, n_skipped


def scatter_data(observed, expected) -> np.ndarray:
    """Pairs ``(log1p(observed_j), log1p(expected_j))``, one row per cell."""
    obs = np.asarray(observed, dtype=float)
    exp_ = np.asarray(expected, dtype=float)
    if obs.shape != exp_.shape or obs.ndim != 1:
        raise DimensionMismatchError("observed and expected must be matching vectors")
    if np.any(obs < 0.0) or np.any(exp_ < 0.0):
        raise DomainError("frequencies must be nonnegative")
    return np.column_stack([np.log1p(obs), np.log1p(exp_)])


def chi_square_report(y, fit: NegBinFit, X: DesignMatrix, exposure,
                      m: int = 99) -> ChiSquareReport:
    """Tabulate observed and expected frequencies and their statistic."""
    observed = observed_counts(y, m)
    if np.asarray(y).size != X.n:
        raise DimensionMismatchError(f"response has {np.asarray(y).size} rows, design has {X.n}")
    expected = predicted_counts(fit, X, exposure, m)
    statistic, n_skipped = _chisq_terms(observed, expected, MIN_EXPECTED)
    return ChiSquareReport(
        observed=observed,
        expected=expected,
        m=int(m),
        statistic=statistic,
        n_skipped=n_skipped,
        scatter=scatter_data(observed, expected),
    )
