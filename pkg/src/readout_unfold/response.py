"""Response-matrix constructors.

Matrices can be measured from calibration histograms (one histogram per
prepared basis state), assembled from per-qubit flip probabilities, or taken
from the two analytic migration examples used to illustrate inversion
pathologies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ResponseMatrix, as_response, n_qubits_for, validate_counts, validate_response
from .errors import DimensionMismatch, EpsOutOfRange, ShotMismatch, ValidationError
from .rng import CALIBRATION, ensure_rng


@dataclass(frozen=True, eq=False)
class CalibrationData:
    """Calibration histograms; ``histograms[j]`` is the outcome histogram
    recorded while preparing basis state ``j``."""

    n_qubits: int
    shots_per_state: int
    histograms: np.ndarray

    def __post_init__(self):
        hist = np.asarray(self.histograms)
        size = 2**self.n_qubits
        if hist.ndim != 2 or hist.shape != (size, size):
            raise DimensionMismatch(
                f"expected {size} histograms of length {size}, got shape {hist.shape}"
            )
        if self.shots_per_state < 1:
            raise ValidationError("shots_per_state must be at least 1")
        hist = np.vstack([validate_counts(h) for h in hist])
        totals = hist.sum(axis=1)
        bad = np.flatnonzero(totals != self.shots_per_state)
        if bad.size:
            j = bad[0]
            raise ShotMismatch(
                f"histogram for state {j} has {totals[j]} shots, expected {self.shots_per_state}"
            )
        hist.setflags(write=False)
        object.__setattr__(self, "histograms", hist)


@dataclass(frozen=True)
class NoiseModel:
    """Independent per-qubit readout flips.

    ``p01[q]`` is the probability that a prepared 0 on qubit ``q`` is read as
    1, ``p10[q]`` that a prepared 1 is read as 0.
    """

    p01: tuple
    p10: tuple

    def __post_init__(self):
        p01 = tuple(float(p) for p in np.atleast_1d(self.p01))
        p10 = tuple(float(p) for p in np.atleast_1d(self.p10))
        if len(p01) != len(p10) or not p01:
            raise DimensionMismatch("p01 and p10 must be non-empty and of equal length")
        if any(not 0.0 <= p <= 1.0 for p in p01 + p10):
            raise ValidationError("flip probabilities must lie in [0, 1]")
        object.__setattr__(self, "p01", p01)
        object.__setattr__(self, "p10", p10)

    @property
    def n_qubits(self) -> int:
        return len(self.p01)

    @classmethod
    def uniform(cls, n_qubits: int, p01: float, p10: float) -> "NoiseModel":
        return cls((p01,) * n_qubits, (p10,) * n_qubits)


def build_from_calibration(calib: CalibrationData) -> ResponseMatrix:
    """Normalize each calibration histogram into a column of ``R``."""
    R = calib.histograms.T.astype(float) / calib.shots_per_state
    return validate_response(R)


def qubit_matrix(p01: float, p10: float) -> np.ndarray:
    return np.array([[1.0 - p01, p10], [p01, 1.0 - p10]])


def from_noise_model(nm: NoiseModel) -> ResponseMatrix:
    """Tensor product of the single-qubit response matrices.

    Qubit 0 is the least significant bit, so it is the rightmost Kronecker
    factor.
    """
    R = np.ones((1, 1))
    for p01, p10 in zip(nm.p01, nm.p10):
        R = np.kron(qubit_matrix(p01, p10), R)
    # renormalize away roundoff so columns sum to 1 within 1e-12
    R /= R.sum(axis=0, keepdims=True)
    return ResponseMatrix(R, nm.n_qubits)


def _check_eps(eps: float) -> None:
    if not 0.0 < eps < 0.5:
        raise EpsOutOfRange(f"eps must lie in (0, 1/2), got {eps}")


def tridiagonal_example(n_bins: int, eps: float) -> ResponseMatrix:
    """Symmetric one-bin migration matrix.

    Each bin leaks a fraction ``eps`` to each neighbour; edge bins only have
    one neighbour and keep ``1 - eps``.  Any ``n_bins >= 2`` is allowed, so
    the result is only a qubit-indexed matrix when ``n_bins`` is a power of two.
    """
    _check_eps(eps)
    if n_bins < 2:
        raise ValidationError("n_bins must be at least 2")
    R = np.zeros((n_bins, n_bins))
    idx = np.arange(n_bins)
    R[idx, idx] = 1.0 - 2.0 * eps
    R[0, 0] = R[-1, -1] = 1.0 - eps
    R[idx[:-1], idx[1:]] = eps
    R[idx[1:], idx[:-1]] = eps
    return validate_response(R, binned=bool(n_bins & (n_bins - 1)))


def two_level_example(eps: float) -> ResponseMatrix:
    """Two-state symmetric flip matrix ``[[1-eps, eps], [eps, 1-eps]]``."""
    return tridiagonal_example(2, eps)


def two_level_inverse(eps: float) -> np.ndarray:
    """Closed-form inverse of :func:`two_level_example`."""
    _check_eps(eps)
    return np.array([[1 - eps, -eps], [-eps, 1 - eps]]) / (1 - 2 * eps)


def simulate_calibration(R, shots_per_state: int, seed) -> CalibrationData:
    """Sample calibration histograms from a known response matrix.

    Column ``j`` of ``R`` is the outcome distribution when preparing state
    ``j``; each prepared state is measured ``shots_per_state`` times.
    """
    R = as_response(R)
    n = n_qubits_for(R.size)
    rng = ensure_rng(seed, CALIBRATION)
    hist = np.vstack([rng.multinomial(shots_per_state, _pvals(R.entries[:, j])) for j in range(R.size)])
    return CalibrationData(n, int(shots_per_state), hist)


def _pvals(col: np.ndarray) -> np.ndarray:
    # multinomial() rejects pvals whose sum exceeds 1 by roundoff
    col = np.clip(col, 0.0, None)
    return col / col.sum()
