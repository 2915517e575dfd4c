"""State indexing, response-matrix validation and forward folding.

Conventions used throughout the package:

* qubit ``q`` is bit ``q`` of the basis-state index (qubit 0 is the least
  significant bit); bitstrings are printed most-significant bit first, so
  ``|00011>`` is state 3;
* response matrices are column-stochastic, ``R[i, j] = Pr(measure i | true j)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ColumnSumViolation,
    DimensionMismatch,
    NegativeEntry,
    NonSquare,
    NotPowerOfTwo,
    ValidationError,
)

#: tolerance on column sums for ingested matrices
COLUMN_SUM_TOL = 1e-6
MAX_QUBITS = 14


def n_qubits_for(size: int) -> int:
    """Return ``n`` such that ``size == 2**n``, or raise :class:`NotPowerOfTwo`."""
    size = int(size)
    if size < 2 or size & (size - 1):
        raise NotPowerOfTwo(f"dimension {size} is not 2**n for n >= 1")
    return size.bit_length() - 1


def state_bitstring(index: int, n_qubits: int) -> str:
    """Bitstring of a basis state, most significant bit first.

    >>> state_bitstring(3, 5)
    '00011'
    """
    if n_qubits < 1:
        raise ValidationError(f"n_qubits must be positive, got {n_qubits}")
    if not 0 <= index < 2**n_qubits:
        raise ValidationError(f"state index {index} out of range for {n_qubits} qubits")
    return format(index, f"0{n_qubits}b")


def parse_bitstring(bits: str) -> int:
    """Inverse of :func:`state_bitstring`."""
    if not bits or set(bits) - {"0", "1"}:
        raise ValidationError(f"not a bitstring: {bits!r}")
    return int(bits, 2)


def qubit_value(index: int, qubit: int) -> int:
    return (index >> qubit) & 1


@dataclass(frozen=True, eq=False)
class ResponseMatrix:
    """Validated column-stochastic response matrix.

    ``n_qubits`` is ``None`` for binned spectra whose size is not a power of
    two (e.g. the 21-bin migration example).
    """

    entries: np.ndarray
    n_qubits: int | None = None

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def validate_response(raw, binned: bool = False, tol: float = COLUMN_SUM_TOL) -> ResponseMatrix:
    """Check that ``raw`` is a column-stochastic matrix and wrap it.

    Parameters
    ----------
    raw : array_like or ResponseMatrix
        Square matrix, rows indexed by measured state, columns by true state.
    binned : bool
        Skip the power-of-two dimension check (binned spectra).
    tol : float
        Allowed deviation of each column sum from 1.
    """
    if isinstance(raw, ResponseMatrix):
        return raw
    mat = np.array(raw, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise NonSquare(f"response matrix must be square, got shape {mat.shape}")
    if binned:
        if mat.shape[0] < 2:
            raise ValidationError("a binned response needs at least 2 bins")
        n = None
    else:
        n = n_qubits_for(mat.shape[0])
    if not np.all(np.isfinite(mat)):
        raise ValidationError("response matrix has non-finite entries")
    if np.any(mat < 0):
        i, j = np.argwhere(mat < 0)[0]
        raise NegativeEntry(f"entry ({i}, {j}) is negative: {mat[i, j]}")
    if np.any(mat > 1 + tol):
        i, j = np.argwhere(mat > 1 + tol)[0]
        raise ValidationError(f"entry ({i}, {j}) exceeds 1: {mat[i, j]}")
    sums = mat.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        j = bad[0]
        raise ColumnSumViolation(f"column {j} sums to {sums[j]:.12g}")
    return ResponseMatrix(mat, n)


def as_response(R) -> ResponseMatrix:
    """Coerce to :class:`ResponseMatrix`, accepting binned (non power-of-two) sizes."""
    if isinstance(R, ResponseMatrix):
        return R
    mat = np.asarray(R, dtype=float)
    binned = mat.ndim == 2 and mat.shape[0] >= 2 and (mat.shape[0] & (mat.shape[0] - 1)) != 0
    return validate_response(mat, binned=binned)


def validate_counts(counts, size: int | None = None) -> np.ndarray:
    """Return ``counts`` as a non-negative integer array."""
    arr = np.asarray(counts)
    if arr.ndim != 1:
        raise ValidationError(f"count vector must be one-dimensional, got shape {arr.shape}")
    if size is not None and arr.size != size:
        raise DimensionMismatch(f"count vector has length {arr.size}, expected {size}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise ValidationError("count vector entries must be integers")
    if np.any(arr < 0):
        raise NegativeEntry("count vector has negative entries")
    return arr.astype(np.int64)


def validate_vector(values, size: int | None = None, nonnegative: bool = True) -> np.ndarray:
    """Return ``values`` as a float array, checking length and sign."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"vector must be one-dimensional, got shape {arr.shape}")
    if size is not None and arr.size != size:
        raise DimensionMismatch(f"vector has length {arr.size}, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("vector has non-finite entries")
    if nonnegative and np.any(arr < 0):
        raise NegativeEntry("vector has negative entries")
    return arr


def fold(R, t) -> np.ndarray:
    """Forward-fold a true spectrum: ``m = R t``.

    The entry sum of ``t`` is preserved for any column-stochastic ``R``.
    """
    R = as_response(R)
    t = validate_vector(t, nonnegative=False)
    if t.size != R.size:
        raise DimensionMismatch(f"matrix of size {R.size} cannot fold a vector of length {t.size}")
    return R.entries @ t
