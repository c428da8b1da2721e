import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from ckrr.errors import ConfigError
from ckrr.experiments import (
    Dataset,
    ExperimentConfig,
    apply_overrides,
    emit_outputs,
    gen_fourier_dataset,
    gen_sphere_dataset,
    load_config,
    load_csv_dataset,
    run_conditioning_cost,
    run_k_sweep,
    run_lambda_sweep,
    split_fold,
    write_csv_dataset,
)
from ckrr.experiments.data import standardize
from ckrr.experiments.report import format_number
from ckrr.experiments.sweeps import SweepResult

FIXTURES = Path(__file__).parent / "fixtures"


def small_cfg(**kw):
    base = dict(kernel={"variant": "fourier_series", "s": 1.0, "J": 100}, n=30, reps=3, test_size=100)
    base.update(kw)
    return ExperimentConfig.from_dict(base)


# --------------------------------------------------------------------------- data


def test_fourier_noise_variance():
    ds = gen_fourier_dataset(10**6, [], 0.25, seed=11)
    assert 0.2485 <= np.var(ds.targets) <= 0.2515
    assert np.all((ds.inputs >= 0) & (ds.inputs <= 2 * np.pi))


def test_fourier_dataset_is_seeded():
    a = gen_fourier_dataset(50, [(1, 1.0, 0.0)], 0.1, seed=[3, 4])
    b = gen_fourier_dataset(50, [(1, 1.0, 0.0)], 0.1, seed=[3, 4])
    np.testing.assert_array_equal(a.targets, b.targets)
    np.testing.assert_allclose(a.clean, np.cos(a.inputs[:, 0]))


def test_sphere_dataset():
    ds = gen_sphere_dataset(10**6, 3, "zero", 0.0, seed=2)
    np.testing.assert_allclose(np.linalg.norm(ds.inputs, axis=1), 1.0, atol=1e-12)
    assert abs(ds.inputs[:, 2].mean()) < 4 / math.sqrt(10**6)
    from ckrr.experiments.data import sphere_target_values

    assert sphere_target_values("sin_cos", np.array([[1.0, 0.0]]))[0] == pytest.approx(np.sin(1) + 0.5)
    with pytest.raises(ConfigError):
        gen_sphere_dataset(10, 1, "zero", 0.0, seed=0)


def test_dataset_validation():
    with pytest.raises(Exception):
        Dataset(np.array([[np.nan]]), np.array([1.0]))
    with pytest.raises(Exception):
        Dataset(np.zeros((0, 1)), np.zeros(0))


def test_csv_round_trip(tmp_path):
    ds = gen_sphere_dataset(40, 3, "sin_cos", 0.1, seed=5)
    path = tmp_path / "d.csv"
    write_csv_dataset(ds, path)
    back = load_csv_dataset(path)
    np.testing.assert_array_equal(back.inputs, ds.inputs)
    np.testing.assert_array_equal(back.targets, ds.targets)
    np.testing.assert_array_equal(back.clean, ds.clean)


def test_csv_errors_and_label_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n3,oops\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_csv_dataset(path)
    path.write_text("y,x\n1,2\n3,4\n")
    ds = load_csv_dataset(path, label_column="y")
    np.testing.assert_array_equal(ds.targets, [1.0, 3.0])
    np.testing.assert_array_equal(ds.inputs[:, 0], [2.0, 4.0])


def test_folds_partition(tmp_path):
    ds = gen_fourier_dataset(23, [], 1.0, seed=0)
    path = tmp_path / "d.csv"
    write_csv_dataset(ds, path)
    ds = load_csv_dataset(path, folds=4, seed=1)
    counts = np.bincount(ds.folds)
    assert counts.sum() == 23 and counts.max() - counts.min() <= 1
    seen = []
    for f in range(4):
        tr, te = split_fold(ds, f)
        assert len(tr) + len(te) == 23
        seen.extend(te.targets.tolist())
    assert sorted(seen) == sorted(ds.targets.tolist())


def test_standardize_modes():
    tr = np.array([[1.0, 5.0], [3.0, 5.0]])
    te = np.array([[2.0, 7.0]])
    a, b = standardize(tr, te, "per_feature")
    np.testing.assert_allclose(a, [[-1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(b, [[0.0, 0.0]])
    a, b = standardize(tr, te, "global")
    assert a.mean() == pytest.approx(0) and a.std() == pytest.approx(1)
    a, b = standardize(tr, te, "none")
    assert a is tr and b is te


# --------------------------------------------------------------------------- config


def test_overrides_and_loading(tmp_path):
    data = apply_overrides({"kernel": {"s": 1}}, ["kernel.J=50", "reps=4", "k_grid=[0, 1]"])
    assert data == {"kernel": {"s": 1, "J": 50}, "reps": 4, "k_grid": [0, 1]}
    path = tmp_path / "c.yaml"
    path.write_text("reps: 7\nlam: 0.5\n")
    cfg = ExperimentConfig.from_dict(load_config(path, ["lam=0.25"], ExperimentConfig().to_dict()))
    assert cfg.reps == 7 and cfg.lam == 0.25 and cfg.kernel["J"] == 300
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"lam": 0.0})


def test_single_axis_required():
    with pytest.raises(ConfigError):
        run_k_sweep(small_cfg())
    with pytest.raises(ConfigError):
        run_k_sweep(small_cfg(k_grid=[0, 1], lam_grid=[0.1]))


# --------------------------------------------------------------------------- sweeps


def test_cost_is_zero_without_features():
    res = run_conditioning_cost(small_cfg(k_grid=[0, 2]))
    assert res.rows[0].c_con <= 1e-16
    assert res.rows[1].c_con > 0


def test_sweeps_independent_of_threads():
    for runner, extra in [
        (run_k_sweep, {"k_grid": [0, 1, 3]}),
        (run_lambda_sweep, {"lam_grid": [0.1, 0.01], "k_list": [0, 2]}),
        (run_conditioning_cost, {"n_grid": [20, 40]}),
    ]:
        a = runner(small_cfg(threads=1, **extra))
        b = runner(small_cfg(threads=4, **extra))
        assert a.rows == b.rows


def test_lambda_sweep_series():
    res = run_lambda_sweep(small_cfg(lam_grid=[0.1, 0.001, 0.01], k_list=[2, 2]))
    series = res.series()
    assert list(series) == ["lambda[k=2]", "lambda[k=2]#2"]
    a, b = series.values()
    assert [r.value for r in a] == [0.001, 0.01, 0.1]
    assert [r.test_mse for r in a] == [r.test_mse for r in b]


def test_nystrom_rank_shortfall_is_skipped():
    cfg = small_cfg(
        kernel={"variant": "gaussian", "gamma": 1e-6},
        basis={"recipe": "nystrom"},
        target={"type": "sphere", "tag": "sin_cos", "d": 3},
        n=20,
        reps=2,
        k_grid=[1, 15],
    )
    res = run_k_sweep(cfg)
    assert res.rows[0].reps == 2
    assert res.rows[1].reps == 0 and math.isnan(res.rows[1].test_mse)
    assert any("skipped" in w for w in res.warnings)


@pytest.mark.slow
def test_ci_shrinks_like_inverse_root_reps():
    ratios = []
    for k in (0, 2, 5):
        a = run_k_sweep(small_cfg(reps=20, k_grid=[k]))
        b = run_k_sweep(small_cfg(reps=80, k_grid=[k]))
        ratios.append(a.rows[0].test_mse_ci95 / b.rows[0].test_mse_ci95)
    assert 1.6 <= np.median(ratios) <= 2.5


# --------------------------------------------------------------------------- output


def test_format_number():
    assert format_number(2.0) == "2"
    assert format_number(0.1) == "0.1"
    assert format_number(float("nan")) == "nan"
    assert format_number(1 / 3) == "0.333333333333"
    assert format_number(True) == "true"


def test_empty_result_writes_header_only(tmp_path):
    out = emit_outputs(SweepResult("k"), tmp_path / "e.csv", tmp_path / "e.svg")
    assert (tmp_path / "e.csv").read_text().count("\n") == 1
    assert not (tmp_path / "e.svg").exists() and len(out) == 1


def test_svg_is_wellformed_and_reproducible(tmp_path):
    res = run_lambda_sweep(small_cfg(lam_grid=[0.1, 0.01], k_list=[0, 2]))
    emit_outputs(res, tmp_path / "a.csv", tmp_path / "a.svg")
    emit_outputs(res, tmp_path / "b.csv", tmp_path / "b.svg")
    root = ET.parse(tmp_path / "a.svg").getroot()
    assert root.tag.endswith("svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def golden_config():
    return small_cfg(k_grid=[0, 1, 2, 4], reps=2, n=25, test_size=60, seed=3)


def test_golden_k_sweep_csv(tmp_path):
    emit_outputs(run_k_sweep(golden_config()), tmp_path / "k.csv")
    assert (tmp_path / "k.csv").read_bytes() == (FIXTURES / "golden_k_sweep.csv").read_bytes()
