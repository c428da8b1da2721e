"""Command-line entry point: ``ckrr <command> [--config FILE] [--set key=value ...]``.

Exit status is 0 on success, 1 for configuration or input errors and 2 for
numerical failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from ckrr.cpd_solver import fit, load_model, predict, save_model
from ckrr.errors import ConfigError, NumericalError
from ckrr.features import fit_nystrom
from ckrr.kernels import kernel_from_dict
from ckrr.risk_theory import TargetCoeffs, advantage_condition
from ckrr.spectrum import fourier_target_coeffs, spectrum_from_dict
from ckrr.thermo import estimate_ratio, fit_c, shrinkage_profile

from ckrr.experiments.config import ExperimentConfig, RiskConfig, ThermoConfig, load_config
from ckrr.experiments.data import gen_fourier_dataset, gen_sphere_dataset, load_csv_dataset, write_csv_dataset
from ckrr.experiments.report import emit_outputs, save_svg, thermo_figure, write_csv
from ckrr.experiments.sweeps import build_basis, run_conditioning_cost, run_k_sweep, run_lambda_sweep

log = logging.getLogger("ckrr")

THERMO_HEADER = ["mode_index", "lambda_i", "rho_mean", "rho_stderr", "predicted_g", "fitted_c", "kappa"]
RISK_HEADER = ["kappa", "e_noise", "e_noise_resid", "predicted_mse", "lhs4", "rhs4", "holds"]


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors, not numerical ones
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


CONFIG_TYPES = {"thermo": ThermoConfig, "risk": RiskConfig}


def _raw_config(args) -> dict:
    cls = CONFIG_TYPES.get(args.command, ExperimentConfig)
    defaults = {f.name: getattr(cls(), f.name) for f in dataclasses.fields(cls)}
    data = load_config(args.config, args.overrides, defaults)
    if args.threads is not None and args.command in ("sweep-k", "sweep-lambda", "cost", "thermo"):
        data["threads"] = args.threads
    if args.seed is not None and args.command != "risk":
        data["seed"] = args.seed
    return data


def _output(args, cfg, key, default=None):
    value = getattr(args, key, None) or cfg.outputs.get(key) or default
    return Path(value) if value else None


# --------------------------------------------------------------------------- commands


def cmd_gen(args, data):
    cfg = ExperimentConfig.from_dict(data)
    out = _output(args, cfg, "out")
    if out is None:
        raise ConfigError("gen needs --out")
    kind = cfg.target_type()
    if kind in ("fourier", "zero"):
        ds = gen_fourier_dataset(cfg.n, cfg.fourier_terms(), cfg.sigma2, [cfg.seed, cfg.n, 0, 0])
    elif kind == "sphere":
        ds = gen_sphere_dataset(
            cfg.n, int(cfg.target.get("d", 3)), cfg.target.get("tag", "sin_cos"), cfg.sigma2, [cfg.seed, cfg.n, 0, 0]
        )
    else:
        raise ConfigError(f"gen cannot synthesise target type {kind!r}")
    write_csv_dataset(ds, out)
    log.info("wrote %d rows to %s", len(ds), out)


def _load_data(path, cfg: ExperimentConfig):
    if path is None:
        raise ConfigError("--data is required")
    label = cfg.target.get("label_column", "y") if cfg.target_type() == "csv" else "y"
    try:
        return load_csv_dataset(path, label)
    except ConfigError:
        if label == "y":
            return load_csv_dataset(path, -1)
        raise


def cmd_fit(args, data):
    cfg = ExperimentConfig.from_dict(data)
    if cfg.solver != "krr":
        raise ConfigError("fit saves conditional KRR models only; set solver: krr")
    model_path = _output(args, cfg, "model")
    if model_path is None:
        raise ConfigError("fit needs --model")
    ds = _load_data(args.data, cfg)
    basis = build_basis(cfg, ds, cfg.k)
    model = fit(kernel_from_dict(cfg.kernel), basis, ds.inputs, ds.targets, cfg.lam)
    save_model(model, model_path)
    rep = model.fit_report
    print(f"fitted N={len(ds)} features={basis.dimension} objective={rep['objective_value']:.6g} "
          f"min_eig={rep['residual_gram_min_eig']:.3g}")


def cmd_predict(args, data):
    if args.model is None or args.data is None:
        raise ConfigError("predict needs --model and --data")
    model = load_model(args.model)
    cfg = ExperimentConfig.from_dict(data)
    ds = _load_data(args.data, cfg)
    pred = predict(model, ds.inputs)
    out = _output(args, cfg, "out")
    if out is None:
        raise ConfigError("predict needs --out")
    write_csv(out, ["index", "prediction", "target"], [[i, float(p), float(t)] for i, (p, t) in enumerate(zip(pred, ds.targets))])
    print(f"test_mse={float(np.mean((pred - ds.targets) ** 2)):.6g}")


def _sweep(runner):
    def cmd(args, data):
        cfg = ExperimentConfig.from_dict(data)
        out = _output(args, cfg, "csv")
        if out is None:
            raise ConfigError("an output CSV path is required (--out or outputs.csv)")
        result = runner(cfg)
        for w in result.warnings:
            log.warning(w)
        for path in emit_outputs(result, out, _output(args, cfg, "svg")):
            log.info("wrote %s", path)

    return cmd


def cmd_thermo(args, data):
    cfg = ThermoConfig.from_dict(data)
    out = _output(args, cfg, "csv")
    if out is None:
        raise ConfigError("an output CSV path is required (--out or outputs.csv)")
    spectrum = spectrum_from_dict(cfg.spectrum)
    i_max = min(cfg.i_max, len(spectrum))
    est = estimate_ratio(spectrum, cfg.k, cfg.trials, i_max, cfg.seed, cfg.threads)
    lam = spectrum.eigenvalues[:i_max]
    g = shrinkage_profile(lam, est.kappa)
    c = fit_c(est) if i_max > 1 and est.kappa > 0 else 0.0
    rows = [
        [i + 1, float(lam[i]), float(est.rho_mean[i]), float(est.rho_stderr[i]), float(g[i]), c, est.kappa]
        for i in range(i_max)
    ]
    write_csv(out, THERMO_HEADER, rows)
    print(f"kappa={est.kappa:.6g} c={c:.6g} max_trace_error={float(np.max(est.trace_errors)):.3g}")
    svg = _output(args, cfg, "svg")
    if svg is not None:
        save_svg(thermo_figure(lam, est.rho_mean, est.rho_stderr, c * g), svg)


def cmd_risk(args, data):
    cfg = RiskConfig.from_dict(data)
    spectrum = spectrum_from_dict(cfg.spectrum)
    if cfg.target["type"] == "fourier":
        if spectrum.tag != "fourier":
            raise ConfigError("fourier targets need the fourier spectrum")
        terms = ExperimentConfig(target=cfg.target).fourier_terms()
        u = fourier_target_coeffs(terms, len(spectrum))
    else:
        u = np.asarray(cfg.target.get("u", []), dtype=np.float64)
    coeffs = TargetCoeffs(u, float(cfg.sigma2))
    rep = advantage_condition(spectrum, coeffs, cfg.n, float(cfg.lam), cfg.k, cfg.c_user)
    row = [rep.full.kappa, rep.full.e_noise, rep.residual.e_noise, rep.full.predicted_mse, rep.lhs, rep.rhs, rep.holds]
    out = _output(args, cfg, "csv")
    if out is not None:
        write_csv(out, RISK_HEADER, [row])
    verdict = "predicted to help" if rep.holds else "not predicted to help"
    print(
        f"effective ridge kappa       {rep.full.kappa:.6g}\n"
        f"overfitting coefficient     {rep.full.e_noise:.6g} (full), {rep.residual.e_noise:.6g} (residual)\n"
        f"predicted test MSE          {rep.full.predicted_mse:.6g} (full), {rep.residual.predicted_mse:.6g} (residual)\n"
        f"bias removed by features    {rep.lhs:.6g}\n"
        f"extra noise cost            {rep.rhs:.6g} + finite-sample term {rep.correction:.6g}\n"
        f"unpenalizing {cfg.k} modes: {verdict} (slack {rep.slack:.6g})"
    )


def cmd_nystrom(args, data):
    cfg = ExperimentConfig.from_dict(data)
    out = _output(args, cfg, "csv")
    if out is None:
        raise ConfigError("an output CSV path is required (--out or outputs.csv)")
    ds = _load_data(args.data, cfg)
    basis = fit_nystrom(kernel_from_dict(cfg.kernel), ds.inputs, cfg.k)
    write_csv(out, ["index", "eigenvalue"], [[i + 1, float(v)] for i, v in enumerate(basis.eigenvalues)])
    if args.features:
        F = basis.feature_matrix(ds.inputs)
        write_csv(args.features, [f"phi{i + 1}" for i in range(F.shape[0])], F.T.tolist())
    print(f"retained {basis.retained} eigenpairs, kept {basis.dimension}")


COMMANDS = {
    "gen": (cmd_gen, "generate a synthetic dataset"),
    "fit": (cmd_fit, "fit conditional KRR and save the model"),
    "predict": (cmd_predict, "predict with a saved model"),
    "sweep-k": (_sweep(run_k_sweep), "test error versus the number of unpenalized features"),
    "sweep-lambda": (_sweep(run_lambda_sweep), "test error versus the ridge parameter"),
    "cost": (_sweep(run_conditioning_cost), "cost of conditioning versus N, k or noise"),
    "thermo": (cmd_thermo, "Monte-Carlo residual-kernel eigenvalue ratios"),
    "risk": (cmd_risk, "omniscient risk prediction and unpenalization check"),
    "nystrom": (cmd_nystrom, "Nystrom eigen-decomposition of a dataset"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ckrr", description="Conditional kernel ridge regression experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="YAML config file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (dotted keys reach nested mappings)")
        p.add_argument("--threads", type=int, help="worker threads for sweeps and Monte Carlo")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output CSV path")
        if name in ("sweep-k", "sweep-lambda", "cost", "thermo"):
            p.add_argument("--svg", help="output SVG figure path")
        if name in ("fit", "predict", "nystrom"):
            p.add_argument("--data", type=Path, help="input dataset CSV")
        if name in ("fit", "predict"):
            p.add_argument("--model", type=Path, help="model JSON path")
        if name == "nystrom":
            p.add_argument("--features", type=Path, help="write the feature matrix at the data points")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    # --out doubles as the CSV path for commands that name it "csv"
    if getattr(args, "out", None) is not None and args.command not in ("gen", "predict"):
        args.csv = args.out
    handler = COMMANDS[args.command][0]
    try:
        handler(args, _raw_config(args))
    except NumericalError as exc:
        print(f"ckrr: numerical error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, KeyError, OSError, yaml.YAMLError) as exc:
        print(f"ckrr: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
