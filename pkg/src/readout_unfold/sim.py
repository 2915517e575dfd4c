"""Synthetic truth spectra, readout-noise sampling and pseudo-experiments."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .core import as_response, validate_counts, validate_vector
from .errors import DimensionMismatch, ValidationError
from .rng import PSEUDO, READOUT, TRUTH, ensure_rng, make_rng
from .unfold import UnfoldConfig, unfold


def gaussian_truth(n_qubits: int, sigma: float) -> np.ndarray:
    """Discretized Gaussian over basis states, centred on ``2**(n-1)``.

    ``t(b) ~ exp(-(b - 2**(n-1))**2 / (2 * sigma))``.  Note the width
    parameter enters linearly, not squared.
    """
    if n_qubits < 1 or sigma <= 0:
        raise ValidationError("need n_qubits >= 1 and sigma > 0")
    b = np.arange(2**n_qubits, dtype=float)
    w = np.exp(-((b - 2 ** (n_qubits - 1)) ** 2) / (2.0 * sigma))
    return w / w.sum()


def binned_gaussian_truth(n_bins: int = 21, mean: float = 0.0, sd: float = 3.0, lo: float = -10.0, hi: float = 10.0) -> np.ndarray:
    """Normal distribution integrated over ``n_bins`` uniform bins centred on ``lo, ..., hi``.

    With the defaults the bins have unit width and are centred on the
    integers -10..10. The first and last bins absorb the tails.
    """
    if n_bins < 2 or sd <= 0 or hi <= lo:
        raise ValidationError("need n_bins >= 2, sd > 0 and hi > lo")
    dist = NormalDist(mean, sd)
    half = 0.5 * (hi - lo) / (n_bins - 1)
    edges = np.linspace(lo - half, hi + half, n_bins + 1)
    cdf = np.array([dist.cdf(e) for e in edges])
    cdf[0], cdf[-1] = 0.0, 1.0
    return np.diff(cdf)


def w_state_truth(n_qubits: int) -> np.ndarray:
    """Uniform distribution over the one-hot basis states."""
    if n_qubits < 1:
        raise ValidationError("n_qubits must be positive")
    t = np.zeros(2**n_qubits)
    t[[1 << q for q in range(n_qubits)]] = 1.0 / n_qubits
    return t


def truth_vector(kind: str, n: int, sigma: float = 3.5) -> np.ndarray:
    if kind == "gaussian":
        return gaussian_truth(n, sigma)
    if kind == "w_state":
        return w_state_truth(n)
    if kind == "binned_gaussian":
        return binned_gaussian_truth(n, sd=sigma)
    raise ValidationError(f"unknown truth kind {kind!r}")


@dataclass(frozen=True)
class TruthSpec:
    kind: str
    n: int
    sigma: float = 3.5

    def __post_init__(self):
        if self.kind in ("gaussian", "binned_gaussian") and self.sigma <= 0:
            raise ValidationError("sigma must be positive")

    def probabilities(self) -> np.ndarray:
        return truth_vector(self.kind, self.n, self.sigma)


def sample_counts(t, shots: int, seed) -> np.ndarray:
    """One multinomial draw of ``shots`` outcomes from distribution ``t``."""
    t = validate_vector(t)
    if shots < 1:
        raise ValidationError("shots must be at least 1")
    if t.sum() <= 0:
        raise ValidationError("distribution has zero total")
    rng = ensure_rng(seed, TRUTH)
    return rng.multinomial(int(shots), t / t.sum()).astype(np.int64)


def apply_readout_noise(R, true_counts, seed) -> np.ndarray:
    """Misread every shot: the ``true_counts[j]`` shots prepared in state ``j``
    are redistributed multinomially over column ``j`` of ``R``."""
    R = as_response(R)
    counts = validate_counts(true_counts)
    if counts.size != R.size:
        raise DimensionMismatch(f"count vector of length {counts.size} for a {R.size}-state response")
    rng = ensure_rng(seed, READOUT)
    out = np.zeros(R.size, dtype=np.int64)
    for j in np.flatnonzero(counts):
        col = np.clip(R.entries[:, j], 0.0, None)
        out += rng.multinomial(int(counts[j]), col / col.sum())
    return out


def mse(estimate, reference) -> float:
    a = np.asarray(estimate, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return float(np.mean((a - b) ** 2))


@dataclass(frozen=True, eq=False)
class PseudoExperimentReport:
    """Pooled ``true - predicted`` differences, one row per experiment."""

    shots: int
    n_experiments: int
    truth: np.ndarray  # (n_experiments, n_states)
    predicted: dict = field(default_factory=dict)  # method -> (n_experiments, n_states)

    def differences(self, method: str) -> np.ndarray:
        return (self.truth - self.predicted[method]).ravel()

    def std(self, method: str) -> float:
        return float(np.std(self.differences(method), ddof=1))

    def mean(self, method: str) -> float:
        return float(np.mean(self.differences(method)))

    def standard_error(self, method: str) -> float:
        d = self.differences(method)
        return float(np.std(d, ddof=1) / np.sqrt(d.size))

    @property
    def methods(self) -> list[str]:
        return list(self.predicted)


def _one_experiment(t, R, shots, configs, seed, k, reference):
    rng = make_rng(seed, PSEUDO, k)
    true_counts = sample_counts(t, shots, rng)
    measured = apply_readout_noise(R, true_counts, rng)
    ref = true_counts if reference is None else reference
    return ref, [unfold(R, measured, cfg).estimate for cfg in configs]


def pseudo_experiments(
    spec: TruthSpec,
    R,
    shots: int,
    n_experiments: int,
    methods: Sequence[str] = ("inversion", "least_squares", "ibu"),
    cfg: UnfoldConfig | None = None,
    seed: int = 0,
    threads: int = 1,
    reference: str = "sampled",
) -> PseudoExperimentReport:
    """Repeat sample -> misread -> unfold ``n_experiments`` times.

    The sampled (pre-readout) counts are the truth unless
    ``reference="theory"``, in which case every experiment is compared to
    ``shots * t``.  Experiment ``k`` draws from its own stream, so the report
    does not depend on ``threads``.
    """
    if n_experiments < 1:
        raise ValidationError("n_experiments must be at least 1")
    if reference not in ("sampled", "theory"):
        raise ValidationError("reference must be 'sampled' or 'theory'")
    R = as_response(R)
    t = spec.probabilities()
    if t.size != R.size:
        raise DimensionMismatch(f"truth has {t.size} states, response {R.size}")
    cfg = cfg or UnfoldConfig("ibu", 100)
    configs = [
        UnfoldConfig(meth, cfg.iterations, cfg.prior, cfg.ls_tolerance, cfg.ls_max_iterations)
        for meth in methods
    ]
    ref = shots * t / t.sum() if reference == "theory" else None

    def run(k):
        return _one_experiment(t, R, shots, configs, seed, k, ref)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(n_experiments)))
    else:
        results = [run(k) for k in range(n_experiments)]
    truth = np.array([r[0] for r in results], dtype=float)
    predicted = {c.method: np.array([r[1][i] for r in results]) for i, c in enumerate(configs)}
    return PseudoExperimentReport(int(shots), int(n_experiments), truth, predicted)

