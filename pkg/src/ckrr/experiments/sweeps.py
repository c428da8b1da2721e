"""Repeated-trial sweeps: test error versus k or lambda, and the cost of conditioning.

Seed schedule: a training set is drawn from the stream ``(seed, N, rep, 0)``
and the test set from ``(seed, rep, 1)``. Cells that only change ``k``,
``lambda`` or the noise level therefore share data within a repetition
(``sigma2`` scales the same standard-normal noise draw). Each task owns its
generators, so a cell can be recomputed in isolation and results do not depend
on the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ckrr.cpd_solver import fit, predict
from ckrr.errors import ConfigError, NystromRankError
from ckrr.features import (
    EmptyBasis,
    FourierPairs,
    fit_nystrom,
    load_relu_units,
    sample_gaussian_field_basis,
    sample_random_feature_basis,
)
from ckrr.kernels import FourierSeries, FourierTail, kernel_from_dict
from ckrr.rfrr import fit_rfrr, predict_rfrr
from ckrr.spectrum import fourier_spectrum

from .config import ExperimentConfig
from .data import (
    Dataset,
    fourier_target_values,
    gen_fourier_dataset,
    gen_sphere_dataset,
    load_csv_dataset,
    split_fold,
)

__all__ = ["SweepRow", "SweepResult", "build_basis", "run_k_sweep", "run_lambda_sweep", "run_conditioning_cost", "aggregate"]

Z95 = 1.96


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    train_mse: float
    test_mse: float
    test_mse_ci95: float
    c_con: float
    c_con_ci95: float
    reps: int


@dataclass
class SweepResult:
    axis: str
    rows: list[SweepRow] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def series(self) -> dict[str, list[SweepRow]]:
        out: dict[str, list[SweepRow]] = {}
        for row in self.rows:
            out.setdefault(row.axis, []).append(row)
        return out


def _mean_ci(values):
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(Z95 * v.std(ddof=1) / math.sqrt(v.size))


def aggregate(cells: dict, order: list, checkable: dict | None = None) -> SweepResult:
    """Reduce ``{(series, value): [(train, test, c_con) or None, ...]}`` to rows.

    ``None`` entries are skipped cells; ``order`` fixes the series order and
    rows within a series are sorted by value. Cells flagged in ``checkable``
    (those with ``N >= 2k``) get a warning when mean train MSE exceeds mean
    test MSE.
    """
    result = SweepResult(axis=order[0] if order else "")
    for name in order:
        for value in sorted(v for s, v in cells if s == name):
            got = [c for c in cells[(name, value)] if c is not None]
            skipped = len(cells[(name, value)]) - len(got)
            arr = np.array(got, dtype=np.float64).reshape(-1, 3)
            train, _ = _mean_ci(arr[:, 0])
            test, test_ci = _mean_ci(arr[:, 1])
            if np.all(np.isnan(arr[:, 2])):
                c_con, c_ci = math.nan, math.nan
            else:
                c_con, c_ci = _mean_ci(arr[:, 2])
            result.rows.append(SweepRow(name, value, train, test, test_ci, c_con, c_ci, len(got)))
            if skipped:
                result.warnings.append(f"{name}={value}: {skipped} skipped cell(s)")
            if got and train > test and (checkable or {}).get((name, value), True):
                result.warnings.append(f"{name}={value}: mean train MSE {train:.4g} exceeds test MSE {test:.4g}")
    return result


def _pool_map(fn, tasks, threads):
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _mse(a, b) -> float:
    d = a - b
    return float(d @ d / d.size)


# --------------------------------------------------------------------------- data


def _synthetic_pair(cfg: ExperimentConfig, n: int, sigma2: float, rep: int):
    """``(train, test)`` for the synthetic target families."""
    kind = cfg.target_type()
    tr_seed, te_seed = [cfg.seed, n, rep, 0], [cfg.seed, rep, 1]
    if kind in ("fourier", "zero"):
        terms = cfg.fourier_terms()
        return (
            gen_fourier_dataset(n, terms, sigma2, tr_seed),
            gen_fourier_dataset(cfg.test_size, terms, sigma2, te_seed),
        )
    if kind == "sphere":
        d, tag = int(cfg.target.get("d", 3)), cfg.target.get("tag", "sin_cos")
        return (
            gen_sphere_dataset(n, d, tag, sigma2, tr_seed),
            gen_sphere_dataset(cfg.test_size, d, tag, sigma2, te_seed),
        )
    raise ConfigError(f"target type {kind!r} is not synthetic")


def _splits(cfg: ExperimentConfig):
    """Task list of ``(label, train, test)`` for a k or lambda sweep."""
    if cfg.target_type() == "csv":
        ds = load_csv_dataset(
            cfg.target["path"], cfg.target.get("label_column", -1), folds=cfg.cv_folds, seed=cfg.seed
        )
        return [(fold, *split_fold(ds, fold, cfg.standardize)) for fold in range(cfg.cv_folds)]
    return [(rep, *_synthetic_pair(cfg, cfg.n, cfg.sigma2, rep)) for rep in range(cfg.reps)]


# --------------------------------------------------------------------------- learners


def _fourier_kernel(cfg) -> FourierSeries:
    kernel = kernel_from_dict(cfg.kernel)
    if not isinstance(kernel, FourierSeries):
        raise ConfigError(f"this recipe needs the fourier_series kernel, got {kernel.variant!r}")
    return kernel


def _basis_factory(cfg: ExperimentConfig, train: Dataset, rep: int, k_max: int):
    """``k -> FeatureBasis`` for the configured recipe, fitted or sampled once per task."""
    b = cfg.basis
    recipe = b["recipe"]
    d = train.inputs.shape[1]
    if recipe == "fourier_pairs":
        if d != 1:
            raise ConfigError("fourier_pairs needs one-dimensional inputs")
        return lambda k: FourierPairs(k)
    if recipe == "nystrom":
        if k_max == 0:
            return lambda k: EmptyBasis()
        full = fit_nystrom(kernel_from_dict(cfg.kernel), train.inputs, k_max, b.get("drop_tol", 1e-10))
        return full.head
    if recipe == "gaussian_field":
        kernel = _fourier_kernel(cfg)
        spectrum = fourier_spectrum(kernel.s, kernel.J)
        if k_max == 0:
            return lambda k: EmptyBasis()
        J = b.get("field_J")
        full = sample_gaussian_field_basis(spectrum, k_max, J, seed=[cfg.seed, train.targets.size, rep, 3])
        # rows of the coefficient draw are nested, so a prefix is the k-field sample
        return lambda k: type(full)(full.spectrum, full.xi[:k], full.seed)
    if recipe == "random_feature":
        def make(k):
            return sample_random_feature_basis(
                b.get("activation", "cos"),
                d,
                k,
                seed=[cfg.seed, train.targets.size, rep, 3],
                bias_law=b.get("bias_law"),
                omega_scale=float(b.get("omega_scale", 1.0)),
            )
        return make
    if recipe == "relu_units":
        units = load_relu_units(b["path"])
        return units.head
    raise ConfigError(f"unknown basis recipe {recipe!r}")


def _make_basis(factory, k):
    return EmptyBasis() if k == 0 else factory(k)


def _learner(cfg: ExperimentConfig, train: Dataset, rep: int):
    """``(basis, lam) -> (train predictions, test-point predictor)``."""
    if cfg.solver == "krr":
        kernel = kernel_from_dict(cfg.kernel)

        def run(basis, lam):
            model = fit(kernel, basis, train.inputs, train.targets, lam, diagnostics=False)
            return predict(model, train.inputs), lambda Z: predict(model, Z)

        return run
    p = cfg.penalized
    psi = sample_random_feature_basis(
        p.get("activation", "cos"),
        train.inputs.shape[1],
        int(p.get("m", 1000)),
        seed=[cfg.seed, train.targets.size, rep, 2],
        bias_law=p.get("bias_law"),
        omega_scale=float(p.get("omega_scale", 1.0)),
        penalized=True,
    )

    def run(basis, lam):
        model = fit_rfrr(basis, psi, train.inputs, train.targets, lam)
        return predict_rfrr(model, train.inputs), lambda Z: predict_rfrr(model, Z)

    return run


def _evaluate(run, basis, lam, train, test):
    fitted, predictor = run(basis, lam)
    return (_mse(fitted, train.targets), _mse(predictor(test.inputs), test.targets), math.nan)


# --------------------------------------------------------------------------- sweeps


def run_k_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Train/test MSE for each ``k`` in ``k_grid``, averaged over repetitions or folds.

    A ``k`` beyond the retained Nystrom rank is recorded as a skipped cell.
    """
    cfg.require_axis({"k"})
    grid = [int(k) for k in cfg.grid("k")]
    k_max = max(grid)
    splits = _splits(cfg)

    def task(item):
        label, train, test = item
        factory = _basis_factory(cfg, train, label, k_max) if k_max else None
        run = _learner(cfg, train, label)
        out = {}
        for k in grid:
            try:
                basis = _make_basis(factory, k)
            except NystromRankError:
                out[k] = None
                continue
            out[k] = _evaluate(run, basis, cfg.lam, train, test)
        return out, train.targets.size

    results = _pool_map(task, splits, cfg.threads)
    cells = {("k", k): [r[0][k] for r in results] for k in grid}
    n_min = min(r[1] for r in results)
    return aggregate(cells, ["k"], {("k", k): n_min >= 2 * k for k in grid})


def _series_names(k_list) -> list[str]:
    names, seen = [], {}
    for k in k_list:
        base = f"lambda[k={int(k)}]"
        seen[base] = seen.get(base, 0) + 1
        names.append(base if seen[base] == 1 else f"{base}#{seen[base]}")
    return names


def run_lambda_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Test MSE versus ridge for every ``k`` in ``k_list``; one series per entry."""
    cfg.require_axis({"lambda"})
    lams = [float(v) for v in cfg.grid("lambda")]
    ks = [int(k) for k in cfg.k_list]
    if not ks:
        raise ConfigError("k_list is empty")
    names = _series_names(ks)
    k_max = max(ks)
    splits = _splits(cfg)

    def task(item):
        label, train, test = item
        factory = _basis_factory(cfg, train, label, k_max) if k_max else None
        run = _learner(cfg, train, label)
        out = {}
        for name, k in zip(names, ks):
            try:
                basis = _make_basis(factory, k)
            except NystromRankError:
                for lam in lams:
                    out[(name, lam)] = None
                continue
            for lam in lams:
                out[(name, lam)] = _evaluate(run, basis, lam, train, test)
        return out, train.targets.size

    results = _pool_map(task, splits, cfg.threads)
    cells = {key: [r[0][key] for r in results] for key in results[0][0]}
    n_min = min(r[1] for r in results)
    k_of = dict(zip(names, ks))
    return aggregate(cells, names, {key: n_min >= 2 * k_of[key[0]] for key in cells})


def run_conditioning_cost(cfg: ExperimentConfig) -> SweepResult:
    """Mean squared gap between conditional KRR and an oracle that knows the in-span signal.

    Per repetition: fit conditional KRR with the Fourier kernel and the first
    ``k`` harmonic pairs; fit plain KRR with the analytic tail kernel on the
    targets minus the known low-harmonic part (noise kept); compare
    ``f_hat`` against ``f_par + h`` on a fresh test set. With ``k = 0`` both fits
    solve the same problem and the gap is exactly zero.
    """
    axis = cfg.require_axis({"n", "k", "sigma2"})
    if cfg.target_type() not in ("fourier", "zero"):
        raise ConfigError("the conditioning-cost pipeline needs a fourier target")
    kernel = _fourier_kernel(cfg)
    terms = cfg.fourier_terms()
    grid = cfg.grid(axis)

    def cell_params(value):
        n, k, sigma2 = cfg.n, cfg.k, cfg.sigma2
        if axis == "n":
            n = int(value)
        elif axis == "k":
            k = int(value)
        else:
            sigma2 = float(value)
        return n, k, sigma2

    def task(item):
        value, rep = item
        n, k, sigma2 = cell_params(value)
        train, test = _synthetic_pair(cfg, n, sigma2, rep)
        lam = cfg.lam
        if k == 0:
            basis, tail, par_terms = EmptyBasis(), kernel, []
        else:
            basis, tail = FourierPairs(k), FourierTail(kernel.s, kernel.J, k)
            par_terms = [t for t in terms if t[0] <= k]
        f_hat = fit(kernel, basis, train.inputs, train.targets, lam, diagnostics=False)
        par_train = fourier_target_values(par_terms, train.inputs[:, 0])
        h = fit(tail, EmptyBasis(), train.inputs, train.targets - par_train, lam, diagnostics=False)
        z = test.inputs
        pred = predict(f_hat, z)
        gap = pred - fourier_target_values(par_terms, z[:, 0]) - predict(h, z)
        return (
            _mse(predict(f_hat, train.inputs), train.targets),
            _mse(pred, test.targets),
            float(gap @ gap / gap.size),
        )

    tasks = [(v, r) for v in grid for r in range(cfg.reps)]
    results = _pool_map(task, tasks, cfg.threads)
    cells: dict = {}
    checkable: dict = {}
    for (value, _), res in zip(tasks, results):
        cells.setdefault((axis, value), []).append(res)
        n, k, _ = cell_params(value)
        checkable[(axis, value)] = n >= 2 * k
    return aggregate(cells, [axis], checkable)


def build_basis(cfg: ExperimentConfig, train: Dataset, k: int, rep: int = 0):
    """The configured basis with ``k`` functions, as used in repetition ``rep``."""
    return EmptyBasis() if k == 0 else _basis_factory(cfg, train, rep, k)(k)
