"""Fit independent-flip readout models to a response matrix.

The model entry for ``R[i, j]`` (true ``j``, measured ``i``) is the product
over qubits of one of ``p01``, ``1 - p01``, ``p10``, ``1 - p10`` depending on
that qubit's (true, measured) bit pair.  Fits minimize the unweighted sum of
squared differences over all entries of ``R`` inside the box ``[0, 1/2]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .core import as_response, n_qubits_for
from .errors import DimensionMismatch, QubitOutOfRange, ValidationError

P_MAX = 0.5
GRAD_TOL = 1e-10
MAX_ITER = 100_000
ARMIJO = 1e-4

# per-qubit (true bit, measured bit) categories
HOLD0, FLIP01, FLIP10, HOLD1 = 0, 1, 2, 3


class FlipExponents(NamedTuple):
    alpha: int  # 0 -> 1
    alpha_prime: int  # 0 -> 0
    beta: int  # 1 -> 0
    beta_prime: int  # 1 -> 1


def exponent_counts(true_state: int, measured_state: int, n_qubits: int) -> FlipExponents:
    """Classify every qubit of a (true, measured) pair of basis states.

    >>> exponent_counts(0b01101, 0b01010, 5)
    FlipExponents(alpha=1, alpha_prime=1, beta=2, beta_prime=1)
    """
    size = 2**n_qubits
    if not (0 <= true_state < size and 0 <= measured_state < size):
        raise DimensionMismatch(f"states must lie in [0, {size}) for {n_qubits} qubits")
    counts = [0, 0, 0, 0]
    for q in range(n_qubits):
        counts[2 * ((true_state >> q) & 1) + ((measured_state >> q) & 1)] += 1
    # index 2*t + m -> (0,0)=hold0, (0,1)=0->1, (1,0)=1->0, (1,1)=hold1
    return FlipExponents(alpha=counts[1], alpha_prime=counts[0], beta=counts[2], beta_prime=counts[3])


def category_matrices(n_qubits: int) -> np.ndarray:
    """``C[q, i, j]`` = category of qubit ``q`` for measured ``i``, true ``j``."""
    idx = np.arange(2**n_qubits)
    q = np.arange(n_qubits)[:, None, None]
    meas = (idx[None, :, None] >> q) & 1
    true = (idx[None, None, :] >> q) & 1
    cat = np.where(true == 0, np.where(meas == 0, HOLD0, FLIP01), np.where(meas == 0, FLIP10, HOLD1))
    return cat.astype(np.int8)


def exponent_matrices(n_qubits: int) -> np.ndarray:
    """Stacked ``(alpha, alpha', beta, beta')`` count matrices, shape ``(4, 2**n, 2**n)``."""
    cat = category_matrices(n_qubits)
    return np.stack([(cat == k).sum(axis=0) for k in (FLIP01, HOLD0, FLIP10, HOLD1)])


@dataclass(frozen=True, eq=False)
class FitResult:
    p01: np.ndarray
    p10: np.ndarray
    objective: float
    converged: bool
    iterations: int


def _pow(x, k):
    return x ** k


def _dpow(x, k):
    # d/dx x**k, with the k = 0 case exactly 0 even at x = 0
    return k * x ** np.maximum(k - 1, 0)


def global_objective(R: np.ndarray, expo: np.ndarray, p01: float, p10: float) -> tuple[float, np.ndarray]:
    """Objective and gradient for the two-parameter universal model."""
    a, a_, b, b_ = expo
    fa, fa_ = _pow(p01, a), _pow(1 - p01, a_)
    fb, fb_ = _pow(p10, b), _pow(1 - p10, b_)
    model = fa * fa_ * fb * fb_
    resid = R - model
    d01 = (_dpow(p01, a) * fa_ - fa * _dpow(1 - p01, a_)) * fb * fb_
    d10 = fa * fa_ * (_dpow(p10, b) * fb_ - fb * _dpow(1 - p10, b_))
    grad = -2.0 * np.array([np.sum(resid * d01), np.sum(resid * d10)])
    return float(np.sum(resid**2)), grad


def per_qubit_objective(R: np.ndarray, cat: np.ndarray, p01: np.ndarray, p10: np.ndarray) -> tuple[float, np.ndarray]:
    """Objective and gradient for independent per-qubit rates.

    Returns the gradient as ``[d/dp01_0, ..., d/dp01_{n-1}, d/dp10_0, ...]``.
    """
    n = cat.shape[0]
    factors = np.empty(cat.shape)
    for q in range(n):
        table = np.array([1 - p01[q], p01[q], p10[q], 1 - p10[q]])
        factors[q] = table[cat[q]]
    # products of all factors except q, via prefix and suffix products
    prefix = np.ones_like(factors)
    suffix = np.ones_like(factors)
    for q in range(1, n):
        prefix[q] = prefix[q - 1] * factors[q - 1]
        suffix[n - 1 - q] = suffix[n - q] * factors[n - q]
    others = prefix * suffix
    model = others[0] * factors[0]
    resid = R - model
    grad = np.empty(2 * n)
    for q in range(n):
        c = cat[q]
        d01 = np.where(c == FLIP01, 1.0, np.where(c == HOLD0, -1.0, 0.0))
        d10 = np.where(c == FLIP10, 1.0, np.where(c == HOLD1, -1.0, 0.0))
        grad[q] = -2.0 * np.sum(resid * others[q] * d01)
        grad[n + q] = -2.0 * np.sum(resid * others[q] * d10)
    return float(np.sum(resid**2)), grad


def _project(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, P_MAX)


def projected_gradient(fun: Callable[[np.ndarray], tuple[float, np.ndarray]], x0: np.ndarray, tol: float = GRAD_TOL, max_iter: int = MAX_ITER):
    """Box-constrained descent with Armijo backtracking (step halving).

    Converged when the projected-gradient norm ``||x - P(x - g)||_inf``
    drops below ``tol``.  A step that cannot decrease the objective even at
    the smallest trial length ends the run with ``converged=False``.
    """
    x = _project(np.asarray(x0, dtype=float))
    f, g = fun(x)
    step = 1.0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(x - _project(x - g))) < tol:
            return x, f, True, it - 1
        step = min(2.0 * step, 1e6)
        while True:
            x_new = _project(x - step * g)
            f_new, g_new = fun(x_new)
            if f_new <= f + ARMIJO * np.dot(g, x_new - x):
                break
            step *= 0.5
            if step < 1e-20:
                return x, f, False, it
        if np.array_equal(x_new, x):
            return x, f, False, it
        x, f, g = x_new, f_new, g_new
    return x, f, bool(np.max(np.abs(x - _project(x - g))) < tol), max_iter


def _matrix(R) -> tuple[np.ndarray, int]:
    R = as_response(R)
    return R.entries, n_qubits_for(R.size)


def fit_global(R, x0=(0.05, 0.05), tol: float = GRAD_TOL, max_iter: int = MAX_ITER) -> FitResult:
    """Fit one ``p01`` and one ``p10`` shared by all qubits."""
    A, n = _matrix(R)
    expo = exponent_matrices(n)
    x, f, ok, it = projected_gradient(lambda p: global_objective(A, expo, p[0], p[1]), np.array(x0), tol, max_iter)
    return FitResult(x[:1], x[1:], f, ok, it)


def fit_per_qubit(R, x0: float = 0.05, tol: float = GRAD_TOL, max_iter: int = MAX_ITER) -> FitResult:
    """Fit separate ``p01[q]``, ``p10[q]`` for every qubit (``2 n`` parameters)."""
    A, n = _matrix(R)
    cat = category_matrices(n)
    x, f, ok, it = projected_gradient(
        lambda p: per_qubit_objective(A, cat, p[:n], p[n:]), np.full(2 * n, float(x0)), tol, max_iter
    )
    return FitResult(x[:n], x[n:], f, ok, it)


def conditioned_transitions(R, qubit: int) -> tuple[np.ndarray, np.ndarray]:
    """Flip probabilities of one qubit with the others held fixed.

    For every configuration ``c`` of the remaining qubits (in increasing
    order), ``p01[c] = R[s1, s0]`` and ``p10[c] = R[s0, s1]`` where ``s0`` and
    ``s1`` embed ``c`` with the chosen qubit set to 0 and 1.
    """
    A, n = _matrix(R)
    if not 0 <= qubit < n:
        raise QubitOutOfRange(f"qubit {qubit} out of range for {n} qubits")
    c = np.arange(2 ** (n - 1))
    low = c & ((1 << qubit) - 1)
    s0 = ((c >> qubit) << (qubit + 1)) | low
    s1 = s0 | (1 << qubit)
    return A[s1, s0].copy(), A[s0, s1].copy()


def fit_report(R) -> dict:
    """Global fit, per-qubit fit and conditioned transitions in one mapping."""
    _, n = _matrix(R)
    if n > 10:
        raise ValidationError("noise-model fits are limited to 10 qubits")
    g = fit_global(R)
    pq = fit_per_qubit(R)
    cond = {}
    for q in range(n):
        a, b = conditioned_transitions(R, q)
        cond[q] = {"p01_list": a.tolist(), "p10_list": b.tolist()}
    return {
        "global": {"p01": float(g.p01[0]), "p10": float(g.p10[0]), "objective": g.objective, "converged": g.converged},
        "per_qubit": {
            "p01": pq.p01.tolist(),
            "p10": pq.p10.tolist(),
            "objective": pq.objective,
            "converged": pq.converged,
        },
        "conditioned": cond,
    }
