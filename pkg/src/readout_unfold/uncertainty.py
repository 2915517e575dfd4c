"""Uncertainty components for unfolded spectra and scans over the IBU
iteration count.

Four components are estimated per state, in count units:

``stat_m``
    spread of the estimate under Poisson resampling of the measured counts;
``stat_R``
    spread under multinomial resampling of the calibration histograms;
``nonclosure``
    how well unfolding recovers a prior reweighted to the data;
``systematic_R``
    shift when an alternate response matrix is used.

State averages are arithmetic means of the per-state values.  The total is
the quadrature sum of the averaged ``stat_m``, ``stat_R`` and ``nonclosure``;
``systematic_R`` is reported but left out of the total.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import as_response, validate_counts
from .errors import DimensionMismatch, EmptyIterationList, InvalidB, ValidationError
from .response import CalibrationData, NoiseModel, build_from_calibration, from_noise_model
from .rng import BOOT_MEASURED, BOOT_RESPONSE, make_rng
from .unfold import UnfoldConfig, ibu_path, unfold, unfold_many

COMPONENTS = ("stat_m", "stat_R", "nonclosure", "systematic_R")


@dataclass(frozen=True, eq=False)
class UncertaintyReport:
    """Uncertainty components at one iteration count.

    ``per_state`` maps component name to a per-state array; components that
    were not evaluated are simply absent and count as zero in the total.
    """

    iterations: int
    per_state: dict

    def __post_init__(self):
        unknown = set(self.per_state) - set(COMPONENTS)
        if unknown:
            raise ValidationError(f"unknown uncertainty components {sorted(unknown)}")
        for name, v in self.per_state.items():
            if np.any(np.asarray(v) < 0):
                raise ValidationError(f"component {name} has negative entries")

    @property
    def averaged(self) -> dict:
        return {c: float(np.mean(v)) for c, v in self.per_state.items()}

    @property
    def total(self) -> float:
        a = self.averaged
        return float(np.sqrt(sum(a.get(c, 0.0) ** 2 for c in COMPONENTS[:3])))


@dataclass(frozen=True, eq=False)
class ScanRow:
    iterations: int
    report: UncertaintyReport | None = None
    bias: float | None = None
    mse: float | None = None


@dataclass(frozen=True, eq=False)
class ScanTable:
    rows: list
    baselines: dict = field(default_factory=dict)  # method -> {"bias": .., "mse": ..}

    def __post_init__(self):
        ns = [r.iterations for r in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValidationError("scan iteration counts must be strictly increasing")

    @property
    def iterations(self) -> list[int]:
        return [r.iterations for r in self.rows]

    def column(self, name: str) -> np.ndarray:
        if name == "total":
            return np.array([r.report.total for r in self.rows])
        if name in COMPONENTS:
            return np.array([r.report.averaged.get(name, np.nan) for r in self.rows])
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def recommended(self) -> int:
        """Iteration count with the smallest total uncertainty (first on ties)."""
        return self.rows[int(np.argmin(self.column("total")))].iterations

    def best_bias(self) -> int:
        return self.rows[int(np.argmin(self.column("bias")))].iterations


def _iteration_list(iterations) -> list[int]:
    ns = sorted({int(n) for n in iterations})
    if not ns:
        raise EmptyIterationList("at least one iteration count is required")
    if ns[0] < 1:
        raise ValidationError("iteration counts must be positive")
    return ns


def _check_b(B: int) -> None:
    if int(B) < 2:
        raise InvalidB(f"need at least 2 bootstrap replicas, got {B}")


def _replicas(fn: Callable[[int], dict], B: int, threads: int) -> list[dict]:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(B)))
    return [fn(b) for b in range(B)]


def _std_by_n(reps: list[dict], ns: list[int]) -> dict[int, np.ndarray]:
    return {n: np.std(np.array([r[n] for r in reps]), axis=0, ddof=1) for n in ns}


def bootstrap_measurement_scan(R, m, cfg: UnfoldConfig, B: int, seed: int, iterations, threads: int = 1):
    """Per-state std of the estimate under Poisson resampling of ``m``, for
    each iteration count in ``iterations``."""
    _check_b(B)
    R = as_response(R)
    m = validate_counts(m, R.size)
    ns = _iteration_list(iterations)

    def replica(b):
        mb = make_rng(seed, BOOT_MEASURED, b).poisson(m)
        return unfold_many(R, mb, cfg, ns)

    return _std_by_n(_replicas(replica, int(B), threads), ns)


def bootstrap_measurement(R, m, cfg: UnfoldConfig, B: int, seed: int, threads: int = 1) -> np.ndarray:
    """Per-state standard deviation (ddof=1) over ``B`` Poisson replicas of ``m``."""
    n = cfg.iterations
    return bootstrap_measurement_scan(R, m, cfg, B, seed, [n], threads)[n]


def resample_calibration(calib: CalibrationData, rng: np.random.Generator) -> CalibrationData:
    """Multinomially resample every histogram from its own empirical frequencies."""
    shots = calib.shots_per_state
    hist = np.vstack([rng.multinomial(shots, h / shots) for h in calib.histograms])
    return CalibrationData(calib.n_qubits, shots, hist)


def bootstrap_response_scan(calib: CalibrationData, m, cfg: UnfoldConfig, B: int, seed: int, iterations, threads: int = 1):
    """Per-state std of the estimate when ``R`` is rebuilt from resampled
    calibration data, for each iteration count in ``iterations``."""
    _check_b(B)
    m = validate_counts(m, 2**calib.n_qubits)
    ns = _iteration_list(iterations)

    def replica(b):
        Rb = build_from_calibration(resample_calibration(calib, make_rng(seed, BOOT_RESPONSE, b)))
        return unfold_many(Rb, m, cfg, ns)

    return _std_by_n(_replicas(replica, int(B), threads), ns)


def bootstrap_response(calib: CalibrationData, m, cfg: UnfoldConfig, B: int, seed: int, threads: int = 1) -> np.ndarray:
    n = cfg.iterations
    return bootstrap_response_scan(calib, m, cfg, B, seed, [n], threads)[n]


def nonclosure_scan(R, m, iterations, prior="uniform") -> dict[int, np.ndarray]:
    """Non-closure of IBU with the nominal result as the reweighted prior.

    For each ``N``: the nominal estimate ``t0`` is folded to ``m0 = R t0``,
    ``m0`` is unfolded with the nominal prior and ``N`` iterations, and the
    absolute difference to ``t0`` is returned.
    """
    R = as_response(R)
    ns = _iteration_list(iterations)
    nominal = ibu_path(R, m, ns, prior)
    out = {}
    for n in ns:
        m0 = R.entries @ nominal[n]
        out[n] = np.abs(ibu_path(R, m0, [n], prior)[n] - nominal[n])
    return out


def nonclosure(R, m, cfg: UnfoldConfig) -> np.ndarray:
    if cfg.method != "ibu":
        raise ValidationError("non-closure is defined for IBU only")
    return nonclosure_scan(R, m, [cfg.iterations], cfg.prior)[cfg.iterations]


def perturbed_response(R, lam: float):
    """Compose ``R`` with extra symmetric flip noise of rate ``lam`` on every qubit."""
    R = as_response(R)
    if R.n_qubits is None:
        raise ValidationError("flip-noise perturbation needs a qubit-indexed response")
    if not 0.0 <= lam <= 0.5:
        raise ValidationError("lambda must lie in [0, 1/2]")
    if lam == 0.0:
        return R
    extra = from_noise_model(NoiseModel.uniform(R.n_qubits, lam, lam))
    return as_response(extra.entries @ R.entries)


def systematic_response_scan(R_nominal, R_alt, m, cfg: UnfoldConfig, iterations) -> dict[int, np.ndarray]:
    R_nominal, R_alt = as_response(R_nominal), as_response(R_alt)
    if R_nominal.size != R_alt.size:
        raise DimensionMismatch("nominal and alternate responses differ in size")
    ns = _iteration_list(iterations)
    a = unfold_many(R_nominal, m, cfg, ns)
    b = unfold_many(R_alt, m, cfg, ns)
    return {n: np.abs(a[n] - b[n]) for n in ns}


def systematic_response(R_nominal, R_alt, m, cfg: UnfoldConfig) -> np.ndarray:
    """Per-state ``|unfold(R_nominal, m) - unfold(R_alt, m)|``."""
    n = cfg.iterations
    return systematic_response_scan(R_nominal, R_alt, m, cfg, [n])[n]


def bias_scan(truth, R, m, iterations, cfg: UnfoldConfig | None = None) -> ScanTable:
    """Mean absolute bias and mean squared error of IBU against a known truth.

    The iteration-independent inversion and least-squares results are stored
    in ``baselines`` for comparison.
    """
    truth = np.asarray(truth, dtype=float)
    R = as_response(R)
    if truth.size != R.size:
        raise DimensionMismatch("truth and response differ in size")
    ns = _iteration_list(iterations)
    prior = cfg.prior if cfg is not None else "uniform"
    path = ibu_path(R, m, ns, prior)
    rows = [
        ScanRow(n, bias=float(np.mean(np.abs(path[n] - truth))), mse=float(np.mean((path[n] - truth) ** 2)))
        for n in ns
    ]
    baselines = {}
    for meth in ("inversion", "least_squares"):
        base = UnfoldConfig(meth) if cfg is None else UnfoldConfig(meth, 1, "uniform", cfg.ls_tolerance, cfg.ls_max_iterations)
        est = unfold(R, m, base).estimate
        baselines[meth] = {"bias": float(np.mean(np.abs(est - truth))), "mse": float(np.mean((est - truth) ** 2))}
    return ScanTable(rows, baselines)


def uncertainty_scan(
    calib: CalibrationData | None,
    R,
    m,
    iterations: Sequence[int],
    B: int,
    seed: int,
    lam: float = 0.01,
    cfg: UnfoldConfig | None = None,
    R_alt=None,
    truth=None,
    threads: int = 1,
) -> ScanTable:
    """All four uncertainty components for IBU at every iteration count.

    ``R`` defaults to the matrix built from ``calib``; without calibration
    data ``stat_R`` is not evaluated.  ``R_alt`` defaults to ``R`` composed
    with uniform flip noise of rate ``lam``.  When ``truth`` is given, rows
    also carry bias and MSE.
    """
    cfg = cfg or UnfoldConfig("ibu")
    if cfg.method != "ibu":
        raise ValidationError("the iteration scan applies to IBU only")
    if R is None:
        if calib is None:
            raise ValidationError("need a response matrix or calibration data")
        R = build_from_calibration(calib)
    R = as_response(R)
    m = validate_counts(m, R.size)
    ns = _iteration_list(iterations)
    if R_alt is None:
        R_alt = perturbed_response(R, lam)
    comps = {
        "stat_m": bootstrap_measurement_scan(R, m, cfg, B, seed, ns, threads),
        "nonclosure": nonclosure_scan(R, m, ns, cfg.prior),
        "systematic_R": systematic_response_scan(R, R_alt, m, cfg, ns),
    }
    if calib is not None:
        comps["stat_R"] = bootstrap_response_scan(calib, m, cfg, B, seed, ns, threads)
    bias = bias_scan(truth, R, m, ns, cfg) if truth is not None else None
    rows = []
    for i, n in enumerate(ns):
        report = UncertaintyReport(n, {c: comps[c][n] for c in COMPONENTS if c in comps})
        b = bias.rows[i] if bias is not None else None
        rows.append(ScanRow(n, report, b.bias if b else None, b.mse if b else None))
    return ScanTable(rows, bias.baselines if bias is not None else {})
