"""Logratio coordinates for compositions: clr, alr, and ilr.

The centered logratio (clr) maps a composition to a zero-sum vector in
d dimensions; the isometric logratio (ilr) composes clr with an
orthonormal contrast matrix to obtain d-1 unconstrained coordinates
that preserve Aitchison geometry exactly; the additive logratio (alr)
divides by a reference part and is simpler but not isometric. All
logarithms are natural.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .composition import Composition, CompositionMatrix
from .errors import (
    DimensionMismatchError,
    DomainError,
    IndexOutOfRangeError,
    WrongMethodError,
    ZeroComponentError,
)

__all__ = [
    "CLR",
    "ALR",
    "ILR",
    "ContrastMatrix",
    "LogratioVector",
    "contrast_matrix",
    "clr",
    "clr_inv",
    "alr",
    "ilr",
    "ilr_inv",
    "transform_matrix",
    "LogratioTransformer",
]

CLR = "clr"
ALR = "alr"
ILR = "ilr"

_METHODS = (CLR, ALR, ILR)

# Tolerance used when checking orthonormality of contrast rows.
_ORTHO_ATOL = 1e-10


class ContrastMatrix:
    """An orthonormal basis of the clr hyperplane, one row per coordinate.

    A valid contrast matrix ``R`` has shape (d-1, d) and satisfies
    ``R @ R.T = I`` and ``R.T @ R = I - (1/d) * ones((d, d))``; its rows
    therefore span the zero-sum subspace of R^d.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries, *, atol: float = _ORTHO_ATOL):
        arr = np.asarray(entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] - 1 or arr.shape[1] < 2:
            raise DimensionMismatchError(
                f"a contrast matrix must have shape (d-1, d) with d >= 2, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise DomainError("contrast matrix contains non-finite entries")
        d = arr.shape[1]
        gram = arr @ arr.T
        if not np.allclose(gram, np.eye(d - 1), atol=atol, rtol=0.0):
            raise DomainError("contrast rows are not orthonormal")
        centering = np.eye(d) - np.full((d, d), 1.0 / d)
        if not np.allclose(arr.T @ arr, centering, atol=atol, rtol=0.0):
            raise DomainError("contrast rows do not span the zero-sum subspace")
        arr = arr.copy()
        arr.flags.writeable = False
        self._entries = arr

    @property
    def entries(self) -> np.ndarray:
        """Read-only array of shape (d-1, d)."""
        return self._entries

    @property
    def d(self) -> int:
        """Number of parts the matrix applies to."""
        return self._entries.shape[1]

    def __repr__(self) -> str:
        return f"ContrastMatrix(d={self.d})"


def contrast_matrix(d: int) -> ContrastMatrix:
    """Canonical contrast matrix for ``d`` parts.

    Row ``k`` (1-based) contrasts the mean of the first ``k`` parts
    against part ``k + 1``:

        h_k = (e_1 + ... + e_k - k * e_{k+1}) / sqrt(k * (k + 1))

    so the first nonzero entry of each row is positive. For d = 2 the
    single row is ``(1/sqrt(2), -1/sqrt(2))``.

    Examples
    --------
    >>> contrast_matrix(2).entries
    array([[ 0.70710678, -0.70710678]])
    """
    d = int(d)
    if d < 2:
        raise DomainError(f"need at least two parts, got d={d}")
    rows = np.zeros((d - 1, d))
    for k in range(1, d):
        norm = np.sqrt(k * (k + 1.0))
        rows[k - 1, :k] = 1.0 / norm
        rows[k - 1, k] = -k / norm
    return ContrastMatrix(rows)


@dataclass(frozen=True)
class LogratioVector:
    """Coordinates of a composition under one logratio method.

    Attributes
    ----------
    coords : numpy.ndarray
        The coordinate vector: length d for clr, d-1 for alr and ilr.
    method : str
        One of ``"clr"``, ``"alr"``, ``"ilr"``.
    d : int
        Number of parts of the source composition.
    contrast : ContrastMatrix, optional
        The basis used, for ilr vectors only.
    """

    coords: np.ndarray
    method: str
    d: int
    contrast: Optional[ContrastMatrix] = field(default=None)

    def __post_init__(self):
        if self.method not in _METHODS:
            raise WrongMethodError(f"unknown method {self.method!r}")
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 1:
            raise DimensionMismatchError(f"coords must be one-dimensional, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise DomainError("coords contain non-finite entries")
        expected = self.d if self.method == CLR else self.d - 1
        if coords.size != expected:
            raise DimensionMismatchError(
                f"{self.method} coords for d={self.d} must have length {expected}, got {coords.size}"
            )
        if self.method == CLR and abs(coords.sum()) > 1e-9:
            raise DomainError(f"clr coords must sum to zero, got {coords.sum()!r}")
        if self.method == ILR:
            if self.contrast is not None and self.contrast.d != self.d:
                raise DimensionMismatchError(
                    f"contrast is for d={self.contrast.d}, coords say d={self.d}"
                )
        elif self.contrast is not None:
            raise WrongMethodError(f"{self.method} vectors carry no contrast matrix")
        coords = coords.copy()
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)

    def __len__(self) -> int:
        return self.coords.size


def _clr_rows(x: np.ndarray) -> np.ndarray:
    logs = np.log(x)
    return logs - logs.mean(axis=-1, keepdims=True)


def _clr_inv_rows(z: np.ndarray, kappa: float) -> np.ndarray:
    # Subtracting the row max keeps exp() from overflowing; the shift
    # cancels in the normalization.
    shifted = z - z.max(axis=-1, keepdims=True)
    expz = np.exp(shifted)
    return kappa * expz / expz.sum(axis=-1, keepdims=True)


def clr(x: Composition) -> LogratioVector:
    """Centered logratio: ``log(x_j) - mean(log(x))`` per part.

    The result sums to zero and has length ``x.d``.
    """
    if not isinstance(x, Composition):
        x = Composition(x)
    return LogratioVector(_clr_rows(x.values), CLR, x.d)


def clr_inv(z: LogratioVector, kappa: float = 1.0) -> Composition:
    """Invert a clr vector back to a composition with constant ``kappa``."""
    if not isinstance(z, LogratioVector):
        raise WrongMethodError("clr_inv expects a LogratioVector")
    if z.method != CLR:
        raise WrongMethodError(f"clr_inv requires a clr vector, got {z.method!r}")
    return Composition(_clr_inv_rows(z.coords, kappa), kappa)


def alr(x: Composition, ref_index: int | None = None) -> LogratioVector:
    """Additive logratio against one reference part.

    Parameters
    ----------
    x : Composition
    ref_index : int, optional
        1-based index of the reference part; defaults to the last
        part, ``x.d``. The remaining parts keep their order.

    Returns
    -------
    LogratioVector
        ``log(x_j / x_ref)`` for ``j != ref_index``, length d-1.
    """
    if not isinstance(x, Composition):
        x = Composition(x)
    if ref_index is None:
        ref_index = x.d
    ref_index = int(ref_index)
    if not 1 <= ref_index <= x.d:
        raise IndexOutOfRangeError(f"ref_index must be in 1..{x.d}, got {ref_index}")
    ref = ref_index - 1
    logs = np.log(x.values)
    coords = np.delete(logs, ref) - logs[ref]
    return LogratioVector(coords, ALR, x.d)


def ilr(x: Composition, basis: ContrastMatrix) -> LogratioVector:
    """Isometric logratio coordinates of ``x`` in the given basis.

    Equals the contrast matrix applied to the clr vector and is an
    isometry: Aitchison inner products of compositions equal Euclidean
    inner products of their ilr coordinates.
    """
    if not isinstance(x, Composition):
        x = Composition(x)
    if not isinstance(basis, ContrastMatrix):
        raise WrongMethodError("ilr requires a ContrastMatrix")
    if basis.d != x.d:
        raise DimensionMismatchError(f"basis is for d={basis.d}, composition has d={x.d}")
    coords = basis.entries @ _clr_rows(x.values)
    return LogratioVector(coords, ILR, x.d, contrast=basis)


def ilr_inv(z: LogratioVector, basis: ContrastMatrix | None = None,
            kappa: float = 1.0) -> Composition:
    """Invert ilr coordinates back to a composition.

    ``basis`` defaults to the contrast matrix stored on the vector.
    """
    if not isinstance(z, LogratioVector):
        raise WrongMethodError("ilr_inv expects a LogratioVector")
    if z.method != ILR:
        raise WrongMethodError(f"ilr_inv requires an ilr vector, got {z.method!r}")
    if basis is None:
        basis = z.contrast
    if basis is None:
        raise DomainError("no contrast matrix available; pass one explicitly")
    if basis.d != z.d:
        raise DimensionMismatchError(f"basis is for d={basis.d}, coords say d={z.d}")
    return Composition(_clr_inv_rows(z.coords @ basis.entries, kappa), kappa)


def transform_matrix(x: CompositionMatrix, method: str,
                     basis: ContrastMatrix | None = None) -> np.ndarray:
    """Apply one logratio method to every row of a composition matrix.

    Parameters
    ----------
    x : CompositionMatrix
    method : str
        ``"clr"``, ``"alr"`` (reference = last part), or ``"ilr"``.
    basis : ContrastMatrix
        Required exactly when ``method == "ilr"``.

    Returns
    -------
    numpy.ndarray
        Shape (n, d) for clr, (n, d-1) for alr and ilr. Row ``i`` equals
        the corresponding single-composition transform of row ``i``.
    """
    if not isinstance(x, CompositionMatrix):
        raise WrongMethodError("transform_matrix expects a CompositionMatrix")
    if method not in _METHODS:
        raise WrongMethodError(f"unknown method {method!r}")
    if method == ILR:
        if basis is None:
            raise DomainError("ilr requires a contrast matrix")
        if basis.d != x.d:
            raise DimensionMismatchError(f"basis is for d={basis.d}, matrix has d={x.d}")
    elif basis is not None:
        raise DomainError(f"method {method!r} does not take a contrast matrix")
    if method == CLR:
        return _clr_rows(x.values)
    if method == ALR:
        logs = np.log(x.values)
        return logs[:, :-1] - logs[:, -1:]
    return _clr_rows(x.values) @ basis.entries.T


class LogratioTransformer(BaseEstimator, TransformerMixin):
    """Rowwise logratio coordinates for strictly positive arrays.

    Accepts a plain (n, d) array of positive values, closes nothing and
    checks nothing beyond positivity: logratio coordinates are scale
    invariant, so rows need not sum to a common constant.

    Parameters
    ----------
    method : str, default "ilr"
        ``"clr"``, ``"alr"``, or ``"ilr"``.
    basis : ContrastMatrix, optional
        Basis to use for ilr; defaults to the canonical contrast
        matrix for the fitted dimension. Ignored by clr and alr.
    kappa : float, default 1.0
        Closure constant used by ``inverse_transform``.

    Examples
    --------
    >>> t = LogratioTransformer(method="clr")
    >>> t.fit_transform([[0.2, 0.3, 0.5]]).shape
    (1, 3)
    """

    def __init__(self, method: str = ILR, basis: ContrastMatrix | None = None,
                 kappa: float = 1.0):
        self.method = method
        self.basis = basis
        self.kappa = kappa

    def fit(self, X, y=None):
        if self.method not in _METHODS:
            raise WrongMethodError(f"unknown method {self.method!r}")
        X = check_array(X, dtype=float)
        if X.shape[1] < 2:
            raise DimensionMismatchError("need at least two parts per row")
        if np.any(X <= 0.0):
            raise ZeroComponentError("all entries must be strictly positive")
        self.n_features_in_ = X.shape[1]
        if self.method == ILR:
            basis = self.basis if self.basis is not None else contrast_matrix(X.shape[1])
            if basis.d != X.shape[1]:
                raise DimensionMismatchError(
                    f"basis is for d={basis.d}, data has d={X.shape[1]}"
                )
            self.basis_ = basis
        else:
            self.basis_ = None
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"fitted for d={self.n_features_in_}, got d={X.shape[1]}"
            )
        if np.any(X <= 0.0):
            raise ZeroComponentError("all entries must be strictly positive")
        if self.method == CLR:
            return _clr_rows(X)
        if self.method == ALR:
            logs = np.log(X)
            return logs[:, :-1] - logs[:, -1:]
        return _clr_rows(X) @ self.basis_.entries.T

    def inverse_transform(self, Z) -> np.ndarray:
        """Map coordinates back to compositions closed to ``kappa``."""
        check_is_fitted(self, "n_features_in_")
        Z = check_array(Z, dtype=float)
        if self.method == ALR:
            raise NotImplementedError("alr inversion is not provided")
        if self.method == CLR:
            if Z.shape[1] != self.n_features_in_:
                raise DimensionMismatchError(
                    f"fitted for d={self.n_features_in_}, got {Z.shape[1]} coordinates"
                )
            return _clr_inv_rows(Z, self.kappa)
        if Z.shape[1] != self.n_features_in_ - 1:
            raise DimensionMismatchError(
                f"fitted for d={self.n_features_in_}, got {Z.shape[1]} coordinates"
            )
        return _clr_inv_rows(Z @ self.basis_.entries, self.kappa)
