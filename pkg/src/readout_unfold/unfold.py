"""Unfolding estimators: matrix inversion, simplex-constrained least squares
and iterative Bayesian unfolding (IBU, a.k.a. Richardson-Lucy).

All three preserve the entry sum of the measured spectrum.  Only the last two
are guaranteed non-negative.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .core import as_response, validate_vector
from .errors import DimensionMismatch, MaxIterationsExceeded, SingularMatrix, ValidationError, ZeroDenominator

METHODS = ("inversion", "least_squares", "ibu")
_ALIASES = {"ls": "least_squares", "ignis": "least_squares", "matrix": "inversion"}

#: IBU denominators below this are treated as zero
DENOMINATOR_FLOOR = 1e-30
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class UnfoldConfig:
    """Estimator choice and its settings.

    ``iterations`` and ``prior`` only apply to IBU; ``prior`` is either the
    string ``"uniform"`` or a strictly positive vector.  ``ls_tolerance`` and
    ``ls_max_iterations`` only apply to least squares.
    """

    method: str = "ibu"
    iterations: int = 10
    prior: object = "uniform"
    ls_tolerance: float = 1e-10
    ls_max_iterations: int = 100_000

    def __post_init__(self):
        method = _ALIASES.get(self.method, self.method)
        if method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}; expected one of {METHODS}")
        object.__setattr__(self, "method", method)
        if method == "ibu" and int(self.iterations) < 1:
            raise ValidationError("IBU needs at least one iteration")
        if not isinstance(self.prior, str):
            prior = validate_vector(self.prior)
            if np.any(prior <= 0):
                raise ValidationError("IBU prior must be strictly positive")
            prior.setflags(write=False)
            object.__setattr__(self, "prior", prior)
        elif self.prior != "uniform":
            raise ValidationError(f"prior must be 'uniform' or a vector, got {self.prior!r}")
        if self.ls_tolerance <= 0 or self.ls_max_iterations < 1:
            raise ValidationError("least-squares tolerance and iteration cap must be positive")

    def with_iterations(self, n: int) -> "UnfoldConfig":
        return UnfoldConfig(self.method, n, self.prior, self.ls_tolerance, self.ls_max_iterations)


@dataclass(frozen=True, eq=False)
class UnfoldResult:
    estimate: np.ndarray
    method: str
    iterations_used: int
    residual_norm: float
    converged: bool


def _prepare(R, m, nonnegative: bool):
    R = as_response(R)
    m = validate_vector(m, nonnegative=nonnegative)
    if m.size != R.size:
        raise DimensionMismatch(f"measured vector has length {m.size}, response is {R.size}x{R.size}")
    return R, m


def _residual(R, t, m) -> float:
    return float(np.linalg.norm(m - R.entries @ t))


def unfold_inversion(R, m) -> UnfoldResult:
    """Solve ``R t = m`` by LU decomposition with partial pivoting.

    Raises :class:`SingularMatrix` when the factorization breaks down or the
    1-norm condition number estimate exceeds ``1e12``.
    """
    R, m = _prepare(R, m, nonnegative=False)
    A = R.entries
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        try:
            lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise SingularMatrix(str(exc)) from exc
    if np.any(np.diag(lu) == 0):
        raise SingularMatrix("response matrix is exactly singular")
    rcond, info = scipy.linalg.lapack.dgecon(lu, np.linalg.norm(A, 1), norm="1")
    if info != 0 or rcond * MAX_CONDITION < 1:
        raise SingularMatrix(f"response matrix condition estimate {1 / max(rcond, 1e-300):.3g} exceeds 1e12")
    t = scipy.linalg.lu_solve((lu, piv), m, check_finite=False)
    return UnfoldResult(t, "inversion", 0, _residual(R, t, m), True)


def project_simplex(y: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``{x >= 0, sum(x) = total}``."""
    if total <= 0:
        return np.zeros_like(y)
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, y.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(y - theta, 0.0)


def spectral_norm_sq(A: np.ndarray, n_iter: int = 50) -> float:
    """Largest eigenvalue of ``A.T @ A`` by power iteration from a flat start."""
    v = np.full(A.shape[1], 1.0 / np.sqrt(A.shape[1]))
    lam = 0.0
    for _ in range(n_iter):
        w = A.T @ (A @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return float(v @ (A.T @ (A @ v)))


def unfold_least_squares(R, m, cfg: UnfoldConfig | None = None) -> UnfoldResult:
    """Minimize ``||m - R t||^2`` over ``t >= 0`` with ``sum(t) = sum(m)``.

    Accelerated projected gradient with a fixed ``1/L`` step and adaptive
    momentum restart.  Stops when the projected-gradient step
    ``||t - P(t - grad/L)||_inf`` drops below ``ls_tolerance * sum(m)``.
    """
    cfg = cfg or UnfoldConfig("least_squares")
    R, m = _prepare(R, m, nonnegative=True)
    A = R.entries
    total = float(m.sum())
    if total == 0:
        return UnfoldResult(np.zeros_like(m), "least_squares", 0, 0.0, True)
    # 1% margin: power iteration approaches L from below
    L = 1.01 * spectral_norm_sq(A)
    AtA = A.T @ A
    Atm = A.T @ m
    tol = cfg.ls_tolerance * total

    x = np.full(m.size, total / m.size)
    y = x.copy()
    theta = 1.0
    converged = False
    it = 0
    for it in range(1, cfg.ls_max_iterations + 1):
        x_new = project_simplex(y - (AtA @ y - Atm) / L, total)
        check = project_simplex(x_new - (AtA @ x_new - Atm) / L, total)
        if np.max(np.abs(check - x_new)) <= tol:
            x = x_new
            converged = True
            break
        if np.dot(y - x_new, x_new - x) > 0:
            theta = 1.0
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        y = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
        x, theta = x_new, theta_new
    if not converged:
        warnings.warn(
            f"least squares did not converge in {cfg.ls_max_iterations} iterations",
            MaxIterationsExceeded,
            stacklevel=2,
        )
    return UnfoldResult(x, "least_squares", it, _residual(R, x, m), converged)


def _initial_prior(prior, m: np.ndarray) -> np.ndarray:
    if isinstance(prior, str):
        return np.full(m.size, m.sum() / m.size)
    t0 = validate_vector(prior, size=m.size)
    if np.any(t0 <= 0):
        raise ValidationError("IBU prior must be strictly positive")
    return t0.astype(float)


def ibu_step(A: np.ndarray, t: np.ndarray, m: np.ndarray) -> np.ndarray:
    """One Bayes update ``t_i <- sum_j R_ji t_i m_j / sum_k R_jk t_k``."""
    denom = A @ t
    small = denom < DENOMINATOR_FLOOR
    if np.any(small):
        if np.any(m[small] > 0):
            j = int(np.flatnonzero(small & (m > 0))[0])
            raise ZeroDenominator(f"measured state {j} is unreachable from the current estimate")
        ratio = np.where(small, 0.0, m / np.where(small, 1.0, denom))
    else:
        ratio = m / denom
    return t * (A.T @ ratio)


def ibu_path(R, m, iterations: Iterable[int], prior="uniform") -> dict[int, np.ndarray]:
    """Run IBU once and return the iterate after each requested count.

    Equivalent to calling :func:`unfold_ibu` for every ``N`` in
    ``iterations`` but costs a single run to ``max(iterations)``.
    """
    R, m = _prepare(R, m, nonnegative=True)
    wanted = sorted({int(n) for n in iterations})
    if not wanted or wanted[0] < 1:
        raise ValidationError("iteration counts must be positive")
    A = R.entries
    t = _initial_prior(prior, m)
    out = {}
    for n in range(1, wanted[-1] + 1):
        t = ibu_step(A, t, m)
        if n in wanted:
            out[n] = t.copy()
    return out


def unfold_ibu(R, m, cfg: UnfoldConfig | None = None) -> UnfoldResult:
    """Iterative Bayesian unfolding with ``cfg.iterations`` updates from ``cfg.prior``."""
    cfg = cfg or UnfoldConfig("ibu")
    R, m = _prepare(R, m, nonnegative=True)
    n = int(cfg.iterations)
    t = ibu_path(R, m, [n], cfg.prior)[n]
    return UnfoldResult(t, "ibu", n, _residual(R, t, m), True)


def unfold(R, m, cfg: UnfoldConfig) -> UnfoldResult:
    if cfg.method == "inversion":
        return unfold_inversion(R, m)
    if cfg.method == "least_squares":
        return unfold_least_squares(R, m, cfg)
    return unfold_ibu(R, m, cfg)


def unfold_many(R, m, cfg: UnfoldConfig, iterations: Sequence[int]) -> dict[int, np.ndarray]:
    """Estimates at several IBU iteration counts; the other methods do not
    depend on ``N`` and return the same estimate for every key."""
    if cfg.method == "ibu":
        return ibu_path(R, m, iterations, cfg.prior)
    est = unfold(R, m, cfg).estimate
    return {int(n): est for n in iterations}


def poisson_loglike(R, t, m) -> float:
    """Poisson log-likelihood of counts ``m`` given expectation ``R t``, up to a constant."""
    R = as_response(R)
    nu = R.entries @ np.asarray(t, dtype=float)
    m = np.asarray(m, dtype=float)
    pos = m > 0
    return float(np.sum(m[pos] * np.log(nu[pos])) - nu.sum())
