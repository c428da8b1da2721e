"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""

import time

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import spearmanr

from ckrr.cli import main as cli_main
from ckrr.cpd_solver import fit, fit_direct_oracle, predict, projection_matrix, residual_gram
from ckrr.experiments import ExperimentConfig, run_conditioning_cost, run_k_sweep
from ckrr.experiments.data import gen_sphere_dataset
from ckrr.features import EmptyBasis, FourierPairs, fit_nystrom, sample_random_feature_basis
from ckrr.kernels import EmpiricalFeatures, FourierSeries, FourierTail, Gaussian, Laplace, Matern32, NngpErf, gram
from ckrr.rfrr import fit_rfrr, predict_rfrr
from ckrr.risk_theory import solve_kappa_features, solve_kappa_ridge
from ckrr.spectrum import Spectrum, exponential_spectrum, power_spectrum
from ckrr.thermo import estimate_ratio, fit_c

THREADS = 8


@pytest.fixture
def verdict(capsys):
    def report(label, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        assert ok, f"{label}: {detail}"

    return report


def _random_instance(rng, variant):
    n = int(rng.integers(10, 61))
    k = int(rng.integers(0, 6))
    if variant == "fourier_series":
        spec = FourierSeries(s=float(rng.uniform(0.75, 2.0)), J=int(rng.integers(20, 200)))
        X = rng.uniform(0, 2 * np.pi, (n, 1))
        Z = np.linspace(0, 2 * np.pi, 100)[:, None]
        # 2h + 1 <= 5 functions
        basis = FourierPairs(k // 2) if k else EmptyBasis()
    else:
        d = int(rng.integers(1, 4))
        gamma = float(rng.uniform(0.2, 2.0))
        spec = Gaussian(gamma=gamma) if variant == "gaussian" else Laplace(gamma=gamma)
        X = rng.standard_normal((n, d))
        Z = rng.standard_normal((100, d))
        # ReLU units on a line are collinear whenever their slopes share a sign
        act = ["tanh", "cos"][int(rng.integers(2))]
        basis = sample_random_feature_basis(act, d, k, seed=int(rng.integers(1 << 30))) if k else EmptyBasis()
    y = np.sin(X.sum(axis=1)) + 0.3 * rng.standard_normal(n)
    lam = float(10 ** rng.uniform(-4, 0))
    return spec, basis, X, y, Z, lam


def test_two_stage_matches_saddle_point(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for i in range(50):
        spec, basis, X, y, Z, lam = _random_instance(rng, ["fourier_series", "gaussian", "laplace"][i % 3])
        a = predict(fit(spec, basis, X, y, lam), Z)
        b = predict(fit_direct_oracle(spec, basis, X, y, lam), Z)
        worst = max(worst, float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)))
    elapsed = time.perf_counter() - t0
    verdict("1 two-stage vs saddle-point", worst < 1e-7 and elapsed < 30,
            f"max rel diff {worst:.2e} (< 1e-7), {elapsed:.1f}s")


def test_residual_gram_is_psd(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = np.inf
    for i in range(100):
        n = int(rng.integers(5, 80))
        k = int(rng.integers(0, 6))
        choice = i % 6
        if choice in (0, 1):
            spec = FourierSeries(s=float(rng.uniform(0.6, 2)), J=100) if choice == 0 else FourierTail(1.0, 100, 2)
            X = rng.uniform(0, 2 * np.pi, (n, 1))
            basis = FourierPairs(min(k // 2, 2))
        else:
            d = int(rng.integers(1, 5))
            spec = [Gaussian(gamma=0.7), Laplace(gamma=0.5), Matern32(lengthscale=1.3), NngpErf(1.5, 0.2)][choice - 2]
            X = rng.standard_normal((n, d))
            basis = sample_random_feature_basis(["tanh", "cos"][i % 2], d, k, seed=i) if k else EmptyBasis()
        F = basis.feature_matrix(X)
        G = gram(spec, X)
        Pi, _ = projection_matrix(F) if F.shape[0] else (np.zeros((n, n)), 0)
        R = residual_gram(G, Pi)
        worst = min(worst, float(np.linalg.eigvalsh(R)[0] / np.trace(G)))
    elapsed = time.perf_counter() - t0
    verdict("2 residual Gram PSD", worst >= -1e-10 and elapsed < 30,
            f"min eig / trace {worst:.2e} (>= -1e-10), {elapsed:.1f}s")


def test_no_features_is_plain_krr(verdict):
    rng = np.random.default_rng(303)
    worst = 0.0
    for i in range(20):
        spec, _, X, y, _, lam = _random_instance(rng, ["fourier_series", "gaussian", "laplace"][i % 3])
        model = fit(spec, EmptyBasis(), X, y, lam)
        n = y.size
        closed = np.linalg.solve(gram(spec, X) + lam * n * np.eye(n), y)
        worst = max(worst, float(np.max(np.abs(model.alpha - closed)) / np.max(np.abs(closed))))
    verdict("3 k=0 reduces to KRR", worst < 1e-10, f"max rel diff {worst:.2e} (< 1e-10)")


def test_u_shape_and_pure_noise(verdict):
    t0 = time.perf_counter()
    base = dict(k_grid=list(range(9)), n=100, sigma2=0.25, lam=0.01, reps=20, threads=THREADS)
    rows = run_k_sweep(ExperimentConfig.from_dict(base)).rows
    mse = {int(r.value): r.test_mse for r in rows}
    noise = run_k_sweep(ExperimentConfig.from_dict({**base, "target": {"type": "zero"}})).rows
    rho = spearmanr([r.value for r in noise], [r.test_mse for r in noise])[0]
    elapsed = time.perf_counter() - t0
    ok = mse[5] < mse[0] and rho > 0.8 and elapsed < 300
    verdict("4 U-shape in k", ok,
            f"MSE k=0 {mse[0]:.3f}, k=5 {mse[5]:.3f}; pure-noise Spearman {rho:.3f} (> 0.8), {elapsed:.1f}s")


def test_conditioning_cost_decay(verdict):
    t0 = time.perf_counter()
    grid = [50, 100, 200, 400, 800]
    # k = 5: the unpenalized span contains the whole target
    base = dict(k=5, sigma2=0.25, lam=0.01, reps=20, threads=THREADS)
    rows = run_conditioning_cost(ExperimentConfig.from_dict({**base, "n_grid": grid})).rows
    slope = float(np.polyfit(np.log(grid), np.log([r.c_con for r in rows]), 1)[0])
    zero = run_conditioning_cost(ExperimentConfig.from_dict({**base, "k_grid": [0], "n": 100})).rows[0].c_con
    s2 = [0.1, 0.4, 0.9, 1.6]
    rows = run_conditioning_cost(ExperimentConfig.from_dict({**base, "sigma2_grid": s2, "n": 200})).rows
    rho = spearmanr(s2, [r.c_con for r in rows])[0]
    elapsed = time.perf_counter() - t0
    ok = -1.3 <= slope <= -0.7 and zero <= 1e-16 and rho > 0.9 and elapsed < 600
    verdict("5 cost of conditioning", ok,
            f"log-log slope {slope:.3f} (in [-1.3, -0.7]), k=0 cost {zero:.1e}, sigma2 Spearman {rho:.2f}, {elapsed:.1f}s")


def test_random_features_converge(verdict):
    t0 = time.perf_counter()
    gaps = {500: [], 4000: []}
    for seed in range(10):
        train = gen_sphere_dataset(80, 3, "sin_cos", 0.01, [seed, 0])
        test = gen_sphere_dataset(200, 3, "sin_cos", 0.0, [seed, 1])
        phi = sample_random_feature_basis("relu", 3, 3, seed=[seed, 2], bias_law="zero")
        # cos(w.x + b) / sqrt(m) with w ~ N(0, I) averages to exp(-|x - z|^2 / 2) / 2
        exact = predict(fit(Gaussian(gamma=0.5, variance=0.5), phi, train.inputs, train.targets, 0.01), test.inputs)
        for m in gaps:
            psi = sample_random_feature_basis("cos", 3, m, seed=[seed, 3, m], penalized=True)
            approx = predict_rfrr(fit_rfrr(phi, psi, train.inputs, train.targets, 0.01), test.inputs)
            gaps[m].append(float(np.sqrt(np.mean((approx - exact) ** 2))))
    g500, g4000 = np.median(gaps[500]), np.median(gaps[4000])
    elapsed = time.perf_counter() - t0
    verdict("6 RFRR -> conditional KRR", g4000 < g500 and elapsed < 300,
            f"median gap m=500 {g500:.4f}, m=4000 {g4000:.4f}, {elapsed:.1f}s")


def test_kernel_trick_identity(verdict):
    rng = np.random.default_rng(707)
    worst = 0.0
    for i in range(10):
        d = int(rng.integers(1, 4))
        X = rng.standard_normal((40, d))
        y = rng.standard_normal(40)
        Z = rng.standard_normal((25, d))
        psi = sample_random_feature_basis(["cos", "tanh"][i % 2], d, 60, seed=i, penalized=True)
        a = predict_rfrr(fit_rfrr(EmptyBasis(), psi, X, y, 0.05), Z)
        b = predict(fit(EmpiricalFeatures(psi), EmptyBasis(), X, y, 0.05), Z)
        worst = max(worst, float(np.max(np.abs(a - b))))
    verdict("7 kernel-trick identity", worst < 1e-9, f"max abs diff {worst:.2e} (< 1e-9)")


def test_nystrom_orthonormal(verdict):
    X = gen_sphere_dataset(300, 3, "zero", 0.0, 808).inputs
    basis = fit_nystrom(Gaussian(gamma=1.0), X, 50)
    F = basis.feature_matrix(X)
    err = float(np.max(np.abs(F @ F.T / 300 - np.eye(basis.dimension))))
    verdict("8 Nystrom orthonormality", basis.dimension == 50 and err < 1e-6,
            f"{basis.dimension} functions, max deviation {err:.2e} (< 1e-6)")


def test_shrinkage_fit(verdict):
    t0 = time.perf_counter()
    cs, trace = {}, 0.0
    for a in (2.0, 4.0):
        est = estimate_ratio(power_spectrum(a, 4000), 100, 50, 400, seed=0, threads=THREADS)
        cs[a] = fit_c(est)
        trace = max(trace, float(est.trace_errors.max()))
    single = estimate_ratio(Spectrum(np.array([1.0])), 1, 2, 1).rho_mean[0]
    elapsed = time.perf_counter() - t0
    ok = all(abs(c - a) <= 0.25 * a for a, c in cs.items()) and trace < 1e-8 and single == 0 and elapsed < 300
    verdict("9 shrinkage profile fit", ok,
            f"c(a=2) {cs[2.0]:.3f}, c(a=4) {cs[4.0]:.3f} (within 25%), trace err {trace:.1e}, "
            f"J=1 ratio {single}, {elapsed:.1f}s")


def _brentq_root(fn, target):
    f = lambda t: fn(t) - target  # noqa: E731
    hi = 1.0
    while f(hi) > 0:
        hi *= 4
    lo = hi
    while f(lo) < 0:
        lo /= 4
    return brentq(f, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)


def test_kappa_solvers(verdict):
    rng = np.random.default_rng(1010)
    worst_res, worst_rel = 0.0, 0.0
    for i in range(20):
        J = int(rng.integers(50, 2000))
        if i % 2:
            spec = power_spectrum(float(rng.uniform(1.1, 4)), J)
        else:
            # keep exp(-rate * J) well above underflow
            spec = exponential_spectrum(float(rng.uniform(0.05, 0.3)), J)
        lam_i = spec.eigenvalues
        N, lam = int(rng.integers(5, min(J, 500))), float(10 ** rng.uniform(-4, 0))
        k = float(rng.uniform(1, min(J - 1, 200)))
        ridge = lambda t: float(np.sum(lam_i / (lam_i + t))) + lam / t  # noqa: E731
        feat = lambda t: float(np.sum(lam_i / (lam_i + t)))  # noqa: E731
        a, b = solve_kappa_ridge(spec, N, lam), solve_kappa_features(spec, k)
        worst_res = max(worst_res, abs(ridge(a) - N) / N, abs(feat(b) - k) / k)
        worst_rel = max(worst_rel, abs(a / _brentq_root(ridge, N) - 1), abs(b / _brentq_root(feat, k) - 1))
    exact = solve_kappa_features(Spectrum(np.array([2.0])), 0.5)
    ok = worst_res < 1e-12 and worst_rel < 1e-10 and abs(exact - 2) <= 1e-12 * 2
    verdict("10 kappa solvers", ok,
            f"max residual/scale {worst_res:.1e} (< 1e-12), max rel diff to oracle {worst_rel:.1e}, "
            f"spectrum {{2}}, k=0.5 -> {exact!r}")


CLI_SMALL = ["--set", "kernel.J=80", "--set", "n=40", "--set", "reps=3", "--set", "test_size=80"]


def _cli_outputs(tmp, threads):
    tmp.mkdir()
    data, model = tmp / "data.csv", tmp / "model.json"
    steps = {
        "gen": ["gen", "--out", data, *CLI_SMALL],
        "fit": ["fit", "--data", data, "--model", model, *CLI_SMALL, "--set", "k=2"],
        "predict": ["predict", "--model", model, "--data", data, "--out", tmp / "predict.csv"],
        "sweep-k": ["sweep-k", "--out", tmp / "sweep-k.csv", *CLI_SMALL, "--set", "k_grid=[0, 1, 2, 4]"],
        "sweep-lambda": ["sweep-lambda", "--out", tmp / "sweep-lambda.csv", *CLI_SMALL,
                         "--set", "lam_grid=[0.1, 0.01, 0.001]"],
        "cost": ["cost", "--out", tmp / "cost.csv", *CLI_SMALL, "--set", "n_grid=[20, 40]", "--set", "k=2"],
        "thermo": ["thermo", "--out", tmp / "thermo.csv", "--set", "spectrum.J=300", "--set", "k=10",
                   "--set", "trials=10", "--set", "i_max=60"],
        "risk": ["risk", "--out", tmp / "risk.csv"],
        "nystrom": ["nystrom", "--data", data, "--out", tmp / "nystrom.csv", "--features", tmp / "features.csv",
                    "--set", "k=6"],
    }
    for name, argv in steps.items():
        assert cli_main([str(a) for a in [*argv, "--threads", threads, "--seed", 9]]) == 0, name
    return {p.name: p.read_bytes() for p in sorted(tmp.iterdir())}


def test_cli_determinism(verdict, tmp_path, capsys):
    runs = [_cli_outputs(tmp_path / f"run{i}", t) for i, t in enumerate((1, 1, 8))]
    capsys.readouterr()
    same = runs[0] == runs[1] == runs[2]
    differing = sorted(n for n in runs[0] if not runs[0][n] == runs[1].get(n) == runs[2].get(n))
    verdict("11 CLI determinism", same and len(runs[0]) == 10,
            f"{len(runs[0])} output files over 9 subcommands, identical across 2 runs and 1 vs 8 threads"
            if same else f"differing: {differing}")
