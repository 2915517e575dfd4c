"""Acceptance gate.

Each test carries a ``criterion`` marker; ``conftest.py`` folds the outcomes
into one PASS/FAIL line per criterion at the end of the run.  Thresholds are
the contract values and are not tuned to make a run pass.  All stochastic
inputs are drawn from seed 0.
"""

import time

import numpy as np
import pytest
from scipy.stats import skew

from readout_unfold.cli import run
from readout_unfold.noisefit import category_matrices, exponent_matrices, fit_global, fit_per_qubit, global_objective, per_qubit_objective
from readout_unfold.response import (
    NoiseModel,
    build_from_calibration,
    from_noise_model,
    simulate_calibration,
    tridiagonal_example,
    two_level_example,
)
from readout_unfold.sim import TruthSpec, apply_readout_noise, gaussian_truth, mse, pseudo_experiments, sample_counts, w_state_truth
from readout_unfold.uncertainty import uncertainty_scan
from readout_unfold.unfold import (
    UnfoldConfig,
    ibu_path,
    unfold_ibu,
    unfold_inversion,
    unfold_least_squares,
)

SEED = 0
criterion = pytest.mark.criterion


def sign_alternations(d):
    s = np.sign(d)
    return int(np.sum(s[1:] * s[:-1] < 0))


# -- 1: pathological migration matrix --------------------------------------


@pytest.fixture(scope="module")
def migration():
    """16-state tridiagonal matrix, eps = 0.25, Gaussian truth, 1e6 shots for m
    and 1e6 calibration shots in total (62 500 per prepared state)."""
    start = time.perf_counter()
    R_true = tridiagonal_example(16, 0.25)
    truth = sample_counts(gaussian_truth(4, 3.5), 10**6, SEED)
    m = apply_readout_noise(R_true, truth, SEED)
    calib = simulate_calibration(R_true, 10**6 // 16, SEED)
    R = build_from_calibration(calib)
    inv = unfold_inversion(R, m).estimate
    ls = unfold_least_squares(R, m).estimate
    ibu = unfold_ibu(R, m, UnfoldConfig("ibu", 10)).estimate
    elapsed = time.perf_counter() - start
    return dict(R=R, calib=calib, truth=truth, m=m, inv=inv, ls=ls, ibu=ibu, elapsed=elapsed)


@criterion(1, "MSE(IBU,10) < 0.1 MSE(inversion)")
def test_c1_mse(migration, detail):
    a, b = mse(migration["ibu"], migration["truth"]), mse(migration["inv"], migration["truth"])
    detail(f"ratio {a / b:.3g}")
    assert a < 0.1 * b


@criterion(1, "inversion oscillates")
def test_c1_oscillation(migration, detail):
    k = sign_alternations(migration["inv"] - migration["truth"])
    detail(f"{k} adjacent sign alternations")
    assert k >= 3


@criterion(1, "ignis = inversion when inversion >= 0")
def test_c1_ignis_matches_inversion(migration, detail):
    inv, ls, m = migration["inv"], migration["ls"], migration["m"]
    if np.any(inv < 0):
        detail(f"vacuous: inversion has negative entries (min {inv.min():.1f})")
        return
    gap = np.abs(ls - inv).max()
    detail(f"max gap {gap:.3g}")
    assert gap < 1e-4 * m.sum()


@criterion(1, "runtime < 10 s")
def test_c1_runtime(migration, detail):
    detail(f"{migration['elapsed']:.2f} s")
    assert migration["elapsed"] < 10


# -- 2: estimator equivalences ---------------------------------------------


def readout_like(rng, n):
    """Identity blended with a random stochastic matrix: R = (1-f) I + f D."""
    f = rng.uniform(0, 0.5, size=n)
    return np.eye(n) * (1 - f) + rng.dirichlet(np.ones(n), size=n).T * f


@pytest.fixture(scope="module")
def equivalences():
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    rows = []
    for _ in range(100):
        R = readout_like(rng, 4)
        m = rng.poisson(R @ (rng.dirichlet(np.ones(4)) * 1e4)).astype(float)
        inv = unfold_inversion(R, m).estimate
        if np.any(inv < 0):
            continue
        ls = unfold_least_squares(R, m).estimate
        ibu = unfold_ibu(R, m, UnfoldConfig("ibu", 10**4)).estimate
        rows.append((np.abs(ls - inv).max() / m.sum(), np.abs(ibu - inv).sum() / m.sum()))
    return np.array(rows), time.perf_counter() - start


@criterion(2, "(a) ignis = inversion")
def test_c2_ignis(equivalences, detail):
    rows, _ = equivalences
    detail(f"{len(rows)} qualifying instances, worst {rows[:, 0].max():.2e}")
    assert np.all(rows[:, 0] < 1e-4)


@criterion(2, "(b) IBU(1e4) = inversion")
def test_c2_ibu(equivalences, detail):
    rows, _ = equivalences
    detail(f"{len(rows)} qualifying instances, worst {rows[:, 1].max():.2e}")
    assert np.all(rows[:, 1] < 1e-3)


@criterion(2, "runtime < 60 s")
def test_c2_runtime(equivalences, detail):
    detail(f"{equivalences[1]:.1f} s")
    assert equivalences[1] < 60


# -- 3: IBU invariants ------------------------------------------------------


@criterion(3, "sum and sign on 1000 instances, fixed points, < 10 s")
def test_c3_invariants(detail):
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(1000):
        size = 2 ** int(rng.integers(1, 6))
        R = rng.dirichlet(np.ones(size), size=size).T
        m = rng.poisson(rng.uniform(0, 500, size))
        prior = rng.uniform(0.1, 10, size)
        est = unfold_ibu(R, m, UnfoldConfig("ibu", int(rng.integers(1, 51)), prior)).estimate
        assert np.all(est >= 0)
        if m.sum():
            worst = max(worst, abs(est.sum() - m.sum()) / m.sum())
    assert worst < 1e-9
    fixed = 0.0
    for _ in range(100):
        size = 2 ** int(rng.integers(1, 6))
        R = rng.dirichlet(np.ones(size), size=size).T
        t = rng.uniform(1, 1000, size)
        for n in (1, 10):
            est = unfold_ibu(R, R @ t, UnfoldConfig("ibu", n, t)).estimate
            fixed = max(fixed, np.abs(est - t).max() / t.max())
    assert fixed < 1e-12
    elapsed = time.perf_counter() - start
    detail(f"sum rel err {worst:.1e}, fixed-point err {fixed:.1e}, {elapsed:.1f} s")
    assert elapsed < 10


# -- 4: hand-derived oracle values -------------------------------------------


@criterion(4, "IBU one step")
def test_c4_ibu():
    est = unfold_ibu([[0.9, 0.2], [0.1, 0.8]], [100, 100], UnfoldConfig("ibu", 1)).estimate
    np.testing.assert_allclose(est, [92.9293, 107.0707], atol=1e-4)
    np.testing.assert_allclose(est, [9200 / 99, 10600 / 99], rtol=1e-9)


@criterion(4, "inversion")
def test_c4_inversion():
    np.testing.assert_allclose(unfold_inversion([[0.9, 0.2], [0.1, 0.8]], [110, 90]).estimate, [100, 100], rtol=1e-9)


@criterion(4, "least-squares boundary")
def test_c4_least_squares():
    res = unfold_least_squares([[0.9, 0.2], [0.1, 0.8]], [200, 0])
    np.testing.assert_allclose(res.estimate, [200, 0], atol=1e-6 * 200)
    assert res.residual_norm**2 == pytest.approx(800, rel=1e-6)


# -- 5: noise-model fits -----------------------------------------------------


@criterion(5, "global fit recovers 0.032 / 0.075")
def test_c5_global(detail):
    fit = fit_global(from_noise_model(NoiseModel.uniform(5, 0.032, 0.075)))
    detail(f"p01 {fit.p01[0]:.9f}, p10 {fit.p10[0]:.9f}, objective {fit.objective:.1e}")
    assert abs(fit.p01[0] - 0.032) < 1e-6 and abs(fit.p10[0] - 0.075) < 1e-6
    assert fit.objective < 1e-12


@criterion(5, "per-qubit fit recovers exact models")
def test_c5_per_qubit():
    rng = np.random.default_rng(SEED)
    for n in range(1, 6):
        nm = NoiseModel(tuple(rng.uniform(0.001, 0.3, n)), tuple(rng.uniform(0.001, 0.3, n)))
        fit = fit_per_qubit(from_noise_model(nm))
        np.testing.assert_allclose(fit.p01, nm.p01, atol=1e-6)
        np.testing.assert_allclose(fit.p10, nm.p10, atol=1e-6)


@criterion(5, "gradients match finite differences")
def test_c5_gradients():
    rng = np.random.default_rng(SEED)
    h = 1e-6
    for n in range(1, 5):
        R = rng.dirichlet(np.ones(2**n), size=2**n).T
        expo, cat = exponent_matrices(n), category_matrices(n)
        x = rng.uniform(0.01, 0.49, 2)
        g = global_objective(R, expo, *x)[1]
        fd = [(global_objective(R, expo, *(x + h * e))[0] - global_objective(R, expo, *(x - h * e))[0]) / (2 * h) for e in np.eye(2)]
        np.testing.assert_allclose(g, fd, rtol=1e-4)
        y = rng.uniform(0.01, 0.49, 2 * n)
        g = per_qubit_objective(R, cat, y[:n], y[n:])[1]
        fd = []
        for e in np.eye(2 * n):
            up, dn = y + h * e, y - h * e
            fd.append((per_qubit_objective(R, cat, up[:n], up[n:])[0] - per_qubit_objective(R, cat, dn[:n], dn[n:])[0]) / (2 * h))
        np.testing.assert_allclose(g, fd, rtol=1e-4)


# -- 6: pull study -----------------------------------------------------------


@pytest.fixture(scope="module")
def pulls():
    start = time.perf_counter()
    R = from_noise_model(NoiseModel.uniform(5, 0.032, 0.075))
    rep = pseudo_experiments(TruthSpec("gaussian", 5, 3.5), R, 10**4, 1000, cfg=UnfoldConfig("ibu", 100), seed=SEED)
    return rep, time.perf_counter() - start


@criterion(6, "std(IBU) < std(inversion)")
def test_c6_std_inversion(pulls, detail):
    rep, _ = pulls
    detail(f"{rep.std('ibu'):.4f} vs {rep.std('inversion'):.4f}")
    assert rep.std("ibu") < rep.std("inversion")


@criterion(6, "std(IBU) <= 1.02 std(ignis)")
def test_c6_std_ignis(pulls, detail):
    rep, _ = pulls
    detail(f"{rep.std('ibu'):.4f} vs {rep.std('least_squares'):.4f}")
    assert rep.std("ibu") <= 1.02 * rep.std("least_squares")


@criterion(6, "IBU and ignis pooled means > 0")
def test_c6_means_positive(pulls, detail):
    rep, _ = pulls
    # every estimator returns exactly as many counts as were measured, so the
    # pooled difference is zero up to rounding; anything below 1e-9 shots is rounding
    means = {k: rep.mean(k) for k in ("ibu", "least_squares")}
    skews = {k: skew(rep.differences(k)) for k in ("ibu", "least_squares")}
    detail(
        f"means {means['ibu']:.2e}, {means['least_squares']:.2e} (zero by count conservation); "
        f"skewness {skews['ibu']:.2f}, {skews['least_squares']:.2f}"
    )
    assert all(v > 1e-9 * rep.shots for v in means.values())


@criterion(6, "inversion mean within 2 SE of 0")
def test_c6_inversion_mean(pulls, detail):
    rep, _ = pulls
    detail(f"mean {rep.mean('inversion'):.2e}, SE {rep.standard_error('inversion'):.3f}")
    assert abs(rep.mean("inversion")) <= 2 * rep.standard_error("inversion")


@criterion(6, "runtime < 5 min")
def test_c6_runtime(pulls, detail):
    detail(f"{pulls[1]:.1f} s")
    assert pulls[1] < 300


# -- 7: regularization scan --------------------------------------------------

SCAN_NS = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 50, 100]
MONOTONE_NS = [1, 2, 5, 10, 50, 100]


@pytest.fixture(scope="module")
def scan(migration):
    start = time.perf_counter()
    table = uncertainty_scan(migration["calib"], migration["R"], migration["m"], SCAN_NS, B=200, seed=SEED, truth=migration["truth"])
    return table, time.perf_counter() - start


@criterion(7, "stat_m, stat_R non-decreasing (2% slack)")
def test_c7_monotone(scan, detail):
    table, _ = scan
    idx = [SCAN_NS.index(n) for n in MONOTONE_NS]
    parts = []
    ok = True
    for c in ("stat_m", "stat_R"):
        col = table.column(c)[idx]
        parts.append(f"{c} " + " ".join(f"{v:.0f}" for v in col))
        ok &= bool(np.all(col[1:] >= 0.98 * col[:-1]))
    detail("; ".join(parts))
    assert ok


@criterion(7, "bias argmin in {2,3,4}")
def test_c7_bias(scan, detail):
    table, _ = scan
    bias = table.column("bias")
    k = int(np.argmin(bias))
    detail(f"argmin N={SCAN_NS[k]}; bias " + " ".join(f"{b:.0f}" for b in bias))
    assert 0 < k < len(bias) - 1
    assert SCAN_NS[k] in (2, 3, 4)


@criterion(7, "recommended N in {2,3}")
def test_c7_recommended(scan, detail):
    table, _ = scan
    detail(f"recommended N={table.recommended()}; total " + " ".join(f"{v:.0f}" for v in table.column("total")))
    assert table.recommended() in (2, 3)


@criterion(7, "runtime < 5 min")
def test_c7_runtime(scan, detail):
    detail(f"{scan[1]:.1f} s")
    assert scan[1] < 300


# -- 8: W state --------------------------------------------------------------


@pytest.fixture(scope="module")
def w_study():
    start = time.perf_counter()
    R = from_noise_model(NoiseModel.uniform(5, 0.032, 0.075))
    ideal = 1000 * w_state_truth(5)
    truth = sample_counts(w_state_truth(5), 1000, SEED)
    m = apply_readout_noise(R, truth, SEED)
    out = dict(
        inv=unfold_inversion(R, m).estimate,
        ls=unfold_least_squares(R, m).estimate,
        path=ibu_path(R, m, range(1, 51)),
        ideal=ideal,
    )
    out["elapsed"] = time.perf_counter() - start
    return out


@criterion(8, "inversion has a negative entry")
def test_c8_inversion_negative(w_study, detail):
    detail(f"min {w_study['inv'].min():.2f}")
    assert w_study["inv"].min() < 0


@criterion(8, "IBU and ignis non-negative")
def test_c8_nonnegative(w_study):
    assert np.all(w_study["ls"] >= 0)
    assert all(np.all(est >= 0) for est in w_study["path"].values())


@criterion(8, "MSE(IBU, N) < MSE(ignis) for some N <= 50")
def test_c8_mse(w_study, detail):
    ref = w_study["ideal"]
    ibu = {n: mse(est, ref) for n, est in w_study["path"].items()}
    best = min(ibu, key=ibu.get)
    ls = mse(w_study["ls"], ref)
    detail(f"best IBU MSE {ibu[best]:.3f} at N={best} vs ignis {ls:.3f} (against the ideal W distribution)")
    assert ibu[best] < ls


@criterion(8, "runtime < 60 s")
def test_c8_runtime(w_study, detail):
    detail(f"{w_study['elapsed']:.2f} s")
    assert w_study["elapsed"] < 60


# -- 9: inverse amplification --------------------------------------------------


@criterion(9, "max |R^-1| = (1-eps)/(1-2 eps)")
@pytest.mark.parametrize("eps", [0.1, 0.25, 0.4, 0.45])
def test_c9_amplification(eps):
    amp = np.max(np.abs(np.linalg.inv(two_level_example(eps).entries)))
    assert amp == pytest.approx((1 - eps) / (1 - 2 * eps), rel=1e-9)


# -- 10: CLI determinism --------------------------------------------------------

STOCHASTIC = {
    "gen-truth": ["gen-truth", "--truth", "gaussian", "--qubits", "5", "--shots", "10000", "--seed", "0"],
    "apply-noise": ["apply-noise", "--response", "R.json", "--counts", "t.json", "--seed", "0"],
    "calibrate": ["calibrate", "--response", "R.json", "--shots", "2000", "--seed", "0"],
    "bootstrap": ["bootstrap", "--calibration", "cal.json", "--measured", "m.json", "--B", "40", "--seed", "0"],
    "scan": ["scan", "--calibration", "cal.json", "--measured", "m.json", "--truth", "t.json", "--B", "40", "--seed", "0"],
    "pseudo": ["pseudo", "--qubits", "4", "--shots", "2000", "--experiments", "40", "--seed", "0"],
}
THREADED = {"bootstrap", "scan", "pseudo"}


@pytest.fixture(scope="module")
def cli_inputs(tmp_path_factory):
    d = tmp_path_factory.mktemp("c10")
    args = [
        ["examples", "--name", "uniform-flip", "--qubits", "4", "--p01", "0.032", "--p10", "0.075", "--out", str(d / "R.json")],
        ["gen-truth", "--truth", "gaussian", "--qubits", "4", "--shots", "10000", "--seed", "0", "--out", str(d / "t.json")],
        ["apply-noise", "--response", str(d / "R.json"), "--counts", str(d / "t.json"), "--seed", "0", "--out", str(d / "m.json")],
        ["calibrate", "--response", str(d / "R.json"), "--shots", "2000", "--seed", "0", "--out", str(d / "cal.json")],
    ]
    for a in args:
        assert run(a) == 0
    return d


def _outputs(directory, stem):
    return {p.name.replace(stem, ""): p.read_bytes() for p in sorted(directory.glob(stem + "*")) if not p.name.endswith("manifest.json")}


@criterion(10, "byte-identical outputs, threads 1 and 4")
@pytest.mark.parametrize("name", sorted(STOCHASTIC))
def test_c10_determinism(cli_inputs, monkeypatch, name):
    monkeypatch.chdir(cli_inputs)
    runs = [("a", 1), ("b", 1)] + ([("c", 4)] if name in THREADED else [])
    results = []
    for tag, threads in runs:
        args = STOCHASTIC[name] + ["--out", f"{name}-{tag}.out"]
        if name in THREADED:
            args += ["--threads", str(threads)]
        assert run(args) == 0
        results.append(_outputs(cli_inputs, f"{name}-{tag}.out"))
    assert results[0]
    assert all(r == results[0] for r in results)
    # identical invocations also produce identical manifests
    assert (cli_inputs / f"{name}-a.out.manifest.json").read_text().replace("-a.out", "") == (
        cli_inputs / f"{name}-b.out.manifest.json"
    ).read_text().replace("-b.out", "")
