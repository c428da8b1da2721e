"""CSV and SVG emission for sweep results."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

from ckrr.errors import ConfigError  # noqa: E402

from .sweeps import SweepResult  # noqa: E402

__all__ = ["SWEEP_HEADER", "emit_outputs", "format_number", "write_csv", "save_svg", "sweep_figure", "thermo_figure"]

SWEEP_HEADER = ["axis", "value", "train_mse", "test_mse", "test_mse_ci95", "c_con", "c_con_ci95", "reps"]

# fixed hash salt and no timestamp keep the SVG bytes reproducible
SVG_RC = {"svg.hashsalt": "ckrr", "svg.fonttype": "path"}


def format_number(x) -> str:
    """Fixed-precision text for floats, plain text for everything else."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if x == int(x) and abs(x) < 1e15:
            return str(int(x))
        return f"{x:.12g}"
    return str(x)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_number(v) for v in row])
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from None


def save_svg(fig: Figure, path) -> None:
    path = Path(path)
    with matplotlib.rc_context(SVG_RC):
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc.strerror}") from None


def sweep_figure(result: SweepResult) -> Figure:
    """Mean test MSE (or cost of conditioning, when present) with a 95% band."""
    fig = Figure(figsize=(5.5, 3.8))
    ax = fig.add_subplot()
    series = result.series()
    use_cost = any(not math.isnan(r.c_con) for r in result.rows)
    for name, rows in series.items():
        rows = [r for r in rows if r.reps > 0]
        if not rows:
            continue
        x = [r.value for r in rows]
        if use_cost:
            y = [r.c_con for r in rows]
            ci = [r.c_con_ci95 for r in rows]
        else:
            y = [r.test_mse for r in rows]
            ci = [r.test_mse_ci95 for r in rows]
        # "lambda[k=5]#2" -> "k=5 #2"
        label = name.split("[", 1)[-1].replace("]", " ").strip() if len(series) > 1 else None
        (line,) = ax.plot(x, y, marker="o", ms=3, label=label)
        ax.fill_between(x, [a - b for a, b in zip(y, ci)], [a + b for a, b in zip(y, ci)],
                        color=line.get_color(), alpha=0.2, lw=0)
    axis = result.axis.split("[")[0]
    if axis in ("lambda", "n"):
        ax.set_xscale("log")
    if use_cost and all(r.c_con > 0 for r in result.rows if r.reps):
        ax.set_yscale("log")
    ax.set_xlabel({"lambda": "ridge", "n": "N", "sigma2": "noise variance"}.get(axis, axis))
    ax.set_ylabel("cost of conditioning" if use_cost else "test MSE")
    if len(series) > 1:
        ax.legend(frameon=False, fontsize="small")
    fig.tight_layout()
    return fig


def thermo_figure(lam, rho_mean, rho_stderr, fitted) -> Figure:
    """Estimated eigenvalue ratios per mode against the fitted shrinkage profile."""
    fig = Figure(figsize=(5.5, 3.8))
    ax = fig.add_subplot()
    ax.errorbar(lam, rho_mean, yerr=1.96 * rho_stderr, fmt="o", ms=2, lw=0.6, elinewidth=0.6, label="Monte Carlo")
    ax.plot(lam, fitted, lw=1.2, label="fitted profile")
    ax.set_xscale("log")
    ax.set_xlabel("kernel eigenvalue")
    ax.set_ylabel("residual / original eigenvalue")
    ax.legend(frameon=False, fontsize="small")
    fig.tight_layout()
    return fig


def emit_outputs(result: SweepResult, csv_path, svg_path=None) -> list[Path]:
    """Write the sweep CSV and, for a nonempty result, the SVG figure.

    Returns the paths written.
    """
    rows = [
        [r.axis, r.value, r.train_mse, r.test_mse, r.test_mse_ci95, r.c_con, r.c_con_ci95, r.reps]
        for r in result.rows
    ]
    write_csv(csv_path, SWEEP_HEADER, rows)
    written = [Path(csv_path)]
    if svg_path is not None and result.rows:
        save_svg(sweep_figure(result), svg_path)
        written.append(Path(svg_path))
    return written
