"""Simplex-valued data types and Aitchison-geometry primitives.

A composition is a vector of strictly positive parts carrying relative
information only: scaling all parts by a common factor changes nothing.
The types here pin each vector to a fixed closure constant ``kappa``
(total sum) so downstream transforms can rely on it, and the module
functions implement the standard operations on that geometry: closure,
zero replacement, geometric mean, the Aitchison inner product, row
proportions of count tables, and amalgamation of table rows.
"""

from __future__ import annotations

import warnings
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    AllZeroError,
    ClosureError,
    DimensionMismatchError,
    DomainError,
    EmptyRowError,
    UnknownLabelError,
    ZeroComponentError,
    ZeroReplacementWarning,
)

__all__ = [
    "CLOSURE_RTOL",
    "Composition",
    "CompositionMatrix",
    "CountTable",
    "close",
    "replace_zeros",
    "geometric_mean",
    "aitchison_inner",
    "row_proportions",
    "amalgamate",
]

# Relative tolerance on |sum - kappa| accepted at construction.
CLOSURE_RTOL = 1e-9


def _positive_vector(values, *, name: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < 2:
        raise DimensionMismatchError(f"{name} needs at least two parts, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    if np.any(arr <= 0.0):
        bad = int(np.argmax(arr <= 0.0))
        raise ZeroComponentError(f"{name}[{bad}] = {arr[bad]} is not strictly positive")
    return arr


def _check_kappa(kappa: float) -> float:
    kappa = float(kappa)
    if not np.isfinite(kappa) or kappa <= 0.0:
        raise DomainError(f"closure constant must be positive and finite, got {kappa}")
    return kappa


class Composition:
    """A strictly positive vector whose parts sum to ``kappa``.

    Parameters
    ----------
    values : array-like of float, shape (d,)
        Strictly positive parts, d >= 2.
    kappa : float, optional
        Closure constant the parts must sum to. Defaults to 1.
    rtol : float, optional
        Relative tolerance on ``|sum(values) - kappa|``. Constructing
        from a vector outside this band raises :class:`ClosureError`.

    Examples
    --------
    >>> x = Composition([0.2, 0.3, 0.5])
    >>> x.d
    3
    """

    __slots__ = ("_values", "_kappa")

    def __init__(self, values, kappa: float = 1.0, *, rtol: float = CLOSURE_RTOL):
        arr = _positive_vector(values)
        kappa = _check_kappa(kappa)
        total = float(arr.sum())
        if abs(total - kappa) > rtol * kappa:
            raise ClosureError(
                f"parts sum to {total!r}, expected {kappa!r} within relative tolerance {rtol!r}"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        self._values = arr
        self._kappa = kappa

    @property
    def values(self) -> np.ndarray:
        """Read-only array of parts, shape (d,)."""
        return self._values

    @property
    def kappa(self) -> float:
        """Closure constant."""
        return self._kappa

    @property
    def d(self) -> int:
        """Number of parts."""
        return self._values.size

    def __len__(self) -> int:
        return self._values.size

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        if dtype is None:
            return self._values.copy()
        return self._values.astype(dtype)

    def __repr__(self) -> str:
        parts = np.array2string(self._values, separator=", ", max_line_width=200)
        return f"Composition({parts}, kappa={self._kappa!r})"


class CompositionMatrix:
    """A stack of compositions sharing one closure constant.

    Rows are observations, columns are parts. Every row must consist of
    strictly positive entries summing to ``kappa`` within ``rtol``.
    """

    __slots__ = ("_values", "_kappa")

    def __init__(self, values, kappa: float = 1.0, *, rtol: float = CLOSURE_RTOL):
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"expected a 2-d array, got shape {arr.shape}")
        n, d = arr.shape
        if n < 1 or d < 2:
            raise DimensionMismatchError(f"need at least one row and two parts, got shape {arr.shape}")
        kappa = _check_kappa(kappa)
        if not np.all(np.isfinite(arr)):
            raise DomainError("matrix contains non-finite entries")
        if np.any(arr <= 0.0):
            i, j = np.unravel_index(int(np.argmax(arr <= 0.0)), arr.shape)
            raise ZeroComponentError(f"entry ({i}, {j}) = {arr[i, j]} is not strictly positive")
        sums = arr.sum(axis=1)
        off = np.abs(sums - kappa)
        if np.any(off > rtol * kappa):
            i = int(np.argmax(off))
            raise ClosureError(
                f"row {i} sums to {sums[i]!r}, expected {kappa!r} within relative tolerance {rtol!r}"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        self._values = arr
        self._kappa = kappa

    @property
    def values(self) -> np.ndarray:
        """Read-only array, shape (n, d)."""
        return self._values

    @property
    def kappa(self) -> float:
        return self._kappa

    @property
    def n(self) -> int:
        return self._values.shape[0]

    @property
    def d(self) -> int:
        return self._values.shape[1]

    def row(self, i: int) -> Composition:
        """Return row ``i`` as a :class:`Composition`."""
        return Composition(self._values[i], self._kappa, rtol=1e-6)

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[Composition]:
        for i in range(self.n):
            yield self.row(i)

    def __repr__(self) -> str:
        return f"CompositionMatrix(n={self.n}, d={self.d}, kappa={self._kappa!r})"


class CountTable:
    """A labelled table of nonnegative integer counts.

    Parameters
    ----------
    cells : array-like of int, shape (nrows, ncols)
        Nonnegative counts. Every row must contain at least one
        positive cell.
    row_labels, col_labels : sequence of str, optional
        Unique labels; default to ``"r0", "r1", ...`` and
        ``"c0", "c1", ...``.
    """

    __slots__ = ("_cells", "_row_labels", "_col_labels")

    def __init__(self, cells, row_labels: Sequence[str] | None = None,
                 col_labels: Sequence[str] | None = None):
        arr = np.asarray(cells)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"expected a 2-d table, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            f = np.asarray(cells, dtype=float)
            if not np.all(np.isfinite(f)) or np.any(f != np.round(f)):
                raise DomainError("cells must be integers")
            arr = f.astype(np.int64)
        else:
            arr = arr.astype(np.int64)
        if np.any(arr < 0):
            i, j = np.unravel_index(int(np.argmax(arr < 0)), arr.shape)
            raise DomainError(f"cell ({i}, {j}) = {arr[i, j]} is negative")
        zero_rows = np.flatnonzero(arr.sum(axis=1) == 0)
        if zero_rows.size:
            raise EmptyRowError(f"row {zero_rows[0]} has no positive cell")
        nr, nc = arr.shape
        row_labels = tuple(map(str, row_labels)) if row_labels is not None else tuple(f"r{i}" for i in range(nr))
        col_labels = tuple(map(str, col_labels)) if col_labels is not None else tuple(f"c{j}" for j in range(nc))
        if len(row_labels) != nr or len(set(row_labels)) != nr:
            raise DimensionMismatchError("row labels must be unique and match the number of rows")
        if len(col_labels) != nc or len(set(col_labels)) != nc:
            raise DimensionMismatchError("column labels must be unique and match the number of columns")
        arr.flags.writeable = False
        self._cells = arr
        self._row_labels = row_labels
        self._col_labels = col_labels

    @property
    def cells(self) -> np.ndarray:
        """Read-only integer array, shape (nrows, ncols)."""
        return self._cells

    @property
    def row_labels(self) -> tuple:
        return self._row_labels

    @property
    def col_labels(self) -> tuple:
        return self._col_labels

    @property
    def shape(self) -> tuple:
        return self._cells.shape

    def __repr__(self) -> str:
        return f"CountTable(shape={self._cells.shape}, rows={self._row_labels}, cols={self._col_labels})"


def close(values, kappa: float = 1.0) -> Composition:
    """Scale a nonnegative vector to sum to ``kappa``.

    Parameters
    ----------
    values : array-like of float, shape (d,)
        Nonnegative parts with a positive total.
    kappa : float, optional
        Target closure constant.

    Returns
    -------
    Composition

    Raises
    ------
    AllZeroError
        If every entry is zero.
    ZeroComponentError
        If some (but not all) entries are zero; closure cannot make
        them positive. Replace zeros first.

    Examples
    --------
    >>> close([1.0, 1.0, 2.0]).values
    array([0.25, 0.25, 0.5 ])
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise DimensionMismatchError(f"expected a vector with at least two parts, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("values contain non-finite entries")
    if np.any(arr < 0.0):
        bad = int(np.argmax(arr < 0.0))
        raise DomainError(f"values[{bad}] = {arr[bad]} is negative")
    kappa = _check_kappa(kappa)
    total = arr.sum()
    if total == 0.0:
        raise AllZeroError("cannot close a vector whose entries are all zero")
    if np.any(arr == 0.0):
        bad = int(np.argmax(arr == 0.0))
        raise ZeroComponentError(
            f"values[{bad}] is zero; apply replace_zeros before closing"
        )
    return Composition(kappa * arr / total, kappa)


def replace_zeros(values, delta: float) -> np.ndarray:
    """Substitute ``delta`` for every zero entry of a nonnegative vector.

    The result is returned as a plain array and is deliberately not
    re-closed: the substitution perturbs the total by at most
    ``delta`` times the number of zeros, and callers decide whether to
    renormalize.

    Parameters
    ----------
    values : array-like of float, shape (d,)
        Nonnegative entries.
    delta : float
        Positive replacement value. A warning is issued when ``delta``
        is not smaller than the smallest positive entry.

    Returns
    -------
    numpy.ndarray

    Examples
    --------
    >>> replace_zeros([0.0, 0.3, 0.7], 1e-6)
    array([1.e-06, 3.e-01, 7.e-01])
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise DimensionMismatchError(f"expected a nonempty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("values contain non-finite entries")
    if np.any(arr < 0.0):
        bad = int(np.argmax(arr < 0.0))
        raise DomainError(f"values[{bad}] = {arr[bad]} is negative")
    delta = float(delta)
    if not np.isfinite(delta) or delta <= 0.0:
        raise DomainError(f"delta must be positive and finite, got {delta}")
    positive = arr[arr > 0.0]
    if positive.size and delta >= positive.min():
        warnings.warn(
            f"replacement value {delta} is not smaller than the smallest positive part "
            f"{positive.min()}",
            ZeroReplacementWarning,
            stacklevel=2,
        )
    out = arr.copy()
    out[out == 0.0] = delta
    return out


def geometric_mean(x: Composition) -> float:
    """Geometric mean of the parts of a composition."""
    if not isinstance(x, Composition):
        x = Composition(x)
    return float(np.exp(np.mean(np.log(x.values))))


def aitchison_inner(x: Composition, y: Composition) -> float:
    """Aitchison inner product of two compositions of equal dimension.

    Computed as the Euclidean inner product of the centered log vectors
    ``log(x) - mean(log(x))`` and ``log(y) - mean(log(y))``; the value
    does not depend on either closure constant.
    """
    if not isinstance(x, Composition):
        x = Composition(x)
    if not isinstance(y, Composition):
        y = Composition(y)
    if x.d != y.d:
        raise DimensionMismatchError(f"dimensions differ: {x.d} vs {y.d}")
    cx = np.log(x.values)
    cx -= cx.mean()
    cy = np.log(y.values)
    cy -= cy.mean()
    return float(cx @ cy)


def _table_cells(table) -> np.ndarray:
    if isinstance(table, CountTable):
        return table.cells
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-d table, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("table contains non-finite entries")
    if np.any(arr < 0.0):
        raise DomainError("table contains negative entries")
    return arr


def row_proportions(table) -> np.ndarray:
    """Divide each row of a count table by its row total.

    Parameters
    ----------
    table : CountTable or array-like, shape (nrows, ncols)

    Returns
    -------
    numpy.ndarray of float, shape (nrows, ncols)
        Each row sums to 1.

    Raises
    ------
    EmptyRowError
        If any row total is zero.
    """
    cells = _table_cells(table)
    totals = cells.sum(axis=1, dtype=float)
    zero_rows = np.flatnonzero(totals == 0.0)
    if zero_rows.size:
        raise EmptyRowError(f"row {zero_rows[0]} has zero total")
    return cells / totals[:, None]


def amalgamate(table: CountTable, groups: Mapping[str, Sequence[str]]) -> CountTable:
    """Merge table rows by summing counts within labelled groups.

    ``groups`` maps each new row label to the row labels it absorbs.
    The groups must partition the existing rows exactly: every row
    appears in exactly one group. Column labels are preserved and new
    rows follow the iteration order of ``groups``.

    Examples
    --------
    >>> t = CountTable([[1, 2], [3, 4], [5, 6]], row_labels=["a", "b", "c"])
    >>> merged = amalgamate(t, {"ab": ["a", "b"], "c": ["c"]})
    >>> merged.cells
    array([[4, 6],
           [5, 6]])
    """
    if not isinstance(table, CountTable):
        raise DimensionMismatchError("amalgamate expects a CountTable")
    index = {label: i for i, label in enumerate(table.row_labels)}
    seen: set[str] = set()
    new_rows = []
    new_labels = []
    for new_label, members in groups.items():
        members = list(members)
        if not members:
            raise UnknownLabelError(f"group {new_label!r} is empty")
        rows = []
        for label in members:
            if label not in index:
                raise UnknownLabelError(f"unknown row label {label!r}")
            if label in seen:
                raise UnknownLabelError(f"row label {label!r} appears in more than one group")
            seen.add(label)
            rows.append(index[label])
        new_rows.append(table.cells[rows].sum(axis=0))
        new_labels.append(str(new_label))
    missing = [label for label in table.row_labels if label not in seen]
    if missing:
        raise UnknownLabelError(f"rows not covered by any group: {missing}")
    return CountTable(np.vstack(new_rows), row_labels=new_labels, col_labels=table.col_labels)
