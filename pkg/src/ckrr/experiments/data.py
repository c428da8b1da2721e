"""Synthetic generators and tabular dataset loading."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ckrr.errors import ConfigError

__all__ = [
    "Dataset",
    "gen_fourier_dataset",
    "gen_sphere_dataset",
    "fourier_target_values",
    "sphere_target_values",
    "load_csv_dataset",
    "write_csv_dataset",
    "assign_folds",
    "split_fold",
    "standardize",
]


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    clean: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)
    folds: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.targets, dtype=np.float64).ravel()
        if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
            raise ConfigError(f"dataset needs N >= 1 matching rows, got {X.shape[0]} inputs, {y.shape[0]} targets")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ConfigError("dataset contains non-finite values")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)

    def __len__(self):
        return self.targets.size

    def subset(self, idx) -> "Dataset":
        clean = None if self.clean is None else self.clean[idx]
        return Dataset(self.inputs[idx], self.targets[idx], clean, dict(self.provenance))


def fourier_target_values(terms, x) -> np.ndarray:
    """``sum a_n cos(n x) + b_n sin(n x)`` over ``terms = [(n, a_n, b_n), ...]``."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    out = np.zeros_like(x)
    for n, a_n, b_n in terms:
        if a_n:
            out += a_n * np.cos(n * x)
        if b_n:
            out += b_n * np.sin(n * x)
    return out


def _noise(rng, n, sigma2):
    if sigma2 < 0:
        raise ConfigError(f"sigma2 must be >= 0, got {sigma2}")
    if sigma2 == 0:
        return np.zeros(n)
    return rng.normal(0.0, math.sqrt(sigma2), n)


def gen_fourier_dataset(N: int, target, sigma2: float, seed) -> Dataset:
    """``X ~ U[0, 2pi]``, ``y = sum a_n cos(nX) + b_n sin(nX) + N(0, sigma2)``."""
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 2.0 * math.pi, N)
    clean = fourier_target_values(target, x)
    y = clean + _noise(rng, N, sigma2)
    prov = {"generator": "fourier", "seed": seed, "sigma2": sigma2}
    return Dataset(x[:, None], y, clean, prov)


SPHERE_TARGETS = {
    "sin_cos": lambda X: np.sin(X[:, 0]) + 0.5 * np.cos(X[:, 1]),
    "zero": lambda X: np.zeros(X.shape[0]),
}


def sphere_target_values(tag: str, X) -> np.ndarray:
    if tag not in SPHERE_TARGETS:
        raise ConfigError(f"unknown sphere target {tag!r}; known: {sorted(SPHERE_TARGETS)}")
    return SPHERE_TARGETS[tag](np.asarray(X, dtype=np.float64))


def gen_sphere_dataset(N: int, d: int, target: str, sigma2: float, seed) -> Dataset:
    """Uniform points on the unit sphere in ``R^d``; ``sin_cos`` is ``sin(x1) + cos(x2)/2``."""
    if d < 2:
        raise ConfigError(f"sphere dimension d must be >= 2, got {d}")
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((N, d))
    X = G / np.linalg.norm(G, axis=1, keepdims=True)
    clean = sphere_target_values(target, X)
    y = clean + _noise(rng, N, sigma2)
    prov = {"generator": f"sphere:{target}", "d": d, "seed": seed, "sigma2": sigma2}
    return Dataset(X, y, clean, prov)


# --------------------------------------------------------------------------- CSV


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv_dataset(path, label_column=-1, folds: int = 0, seed: int = 0) -> Dataset:
    """Read a comma-separated table; one column is the label, the rest are features.

    A first row with any non-numeric cell is taken as a header, and
    ``label_column`` may then be a column name. A column headed ``clean``
    (noise-free targets) is set aside before the label index is resolved. ``folds > 0`` attaches a
    seeded fold assignment (see ``assign_folds``). Standardization happens per
    fold in ``split_fold``, never here.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    width = len(rows[0])
    data = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        lineno = i + (2 if header else 1)
        if len(row) != width:
            raise ConfigError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError:
                name = header[j] if header else j
                raise ConfigError(f"{path}:{lineno}: column {name!r}: cannot parse {cell!r}") from None
    clean = None
    if header is not None and "clean" in header and label_column != "clean":
        c = header.index("clean")
        clean = data[:, c]
        data = np.delete(data, c, axis=1)
        header = header[:c] + header[c + 1 :]
        width -= 1
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if header is None or label_column not in header:
            raise ConfigError(f"{path}: no column named {label_column!r}")
        col = header.index(label_column)
    else:
        col = int(label_column)
        if not -width <= col < width:
            raise ConfigError(f"{path}: label column {col} out of range for {width} columns")
        col %= width
    X = np.delete(data, col, axis=1)
    if X.shape[1] == 0:
        raise ConfigError(f"{path}: no feature columns")
    fold_ids = assign_folds(len(rows), folds, seed) if folds else None
    return Dataset(X, data[:, col], clean, {"file": str(path), "seed": seed}, fold_ids)


def write_csv_dataset(ds: Dataset, path) -> None:
    d = ds.inputs.shape[1]
    header = [f"x{j + 1}" for j in range(d)] + ["y"]
    if ds.clean is not None:
        header.append("clean")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(ds)):
            row = [repr(float(v)) for v in ds.inputs[i]] + [repr(float(ds.targets[i]))]
            if ds.clean is not None:
                row.append(repr(float(ds.clean[i])))
            writer.writerow(row)


# --------------------------------------------------------------------------- folds


def assign_folds(n: int, folds: int, seed: int) -> np.ndarray:
    """Balanced fold labels ``0..folds-1`` from a seeded permutation."""
    if not 2 <= folds <= n:
        raise ConfigError(f"need 2 <= folds <= N, got folds={folds}, N={n}")
    perm = np.random.default_rng([seed, 7919]).permutation(n)
    out = np.empty(n, dtype=np.int64)
    out[perm] = np.arange(n) % folds
    return out


def standardize(train: np.ndarray, test: np.ndarray, mode: str = "per_feature"):
    """Scale both arrays with training statistics.

    ``per_feature`` uses column means and standard deviations; a constant
    training column maps to zeros. ``global`` uses one mean and one deviation
    over all training entries.
    """
    if mode in (None, False, "none"):
        return train, test
    if mode in (True, "per_feature"):
        mu = train.mean(axis=0)
        sd = train.std(axis=0)
        const = sd == 0
        sd = np.where(const, 1.0, sd)
        tr = (train - mu) / sd
        te = (test - mu) / sd
        tr[:, const] = 0.0
        te[:, const] = 0.0
        return tr, te
    if mode == "global":
        mu, sd = train.mean(), train.std()
        if sd == 0:
            return np.zeros_like(train), np.zeros_like(test)
        return (train - mu) / sd, (test - mu) / sd
    raise ConfigError(f"unknown standardize mode {mode!r}")


def split_fold(ds: Dataset, fold: int, mode="none"):
    """``(train, test)`` datasets for one fold, standardized on the training part."""
    if ds.folds is None:
        raise ConfigError("dataset has no fold assignment")
    test_idx = np.nonzero(ds.folds == fold)[0]
    train_idx = np.nonzero(ds.folds != fold)[0]
    train, test = ds.subset(train_idx), ds.subset(test_idx)
    Xtr, Xte = standardize(train.inputs, test.inputs, mode)
    return (
        Dataset(Xtr, train.targets, train.clean, train.provenance),
        Dataset(Xte, test.targets, test.clean, test.provenance),
    )
