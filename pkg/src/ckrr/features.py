"""Finite feature bases spanning the unpenalized class.

Every basis exposes ``dimension`` (the number of functions ``k``) and
``feature_matrix(X)`` returning the ``(k, N)`` matrix ``[f_i(X_j)]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy.linalg

from ckrr.errors import ConfigError, NumericalError, NystromRankError
from ckrr.kernels import KernelSpec, as_points, cross_gram, gram, kernel_from_dict
from ckrr.spectrum import Spectrum, spectrum_from_dict

__all__ = [
    "FeatureBasis",
    "EmptyBasis",
    "FourierPairs",
    "NystromBasis",
    "GaussianFieldBasis",
    "RandomFeatureBasis",
    "ReluUnits",
    "feature_matrix",
    "fit_nystrom",
    "sample_gaussian_field_basis",
    "sample_random_feature_basis",
    "load_relu_units",
    "save_relu_units",
    "basis_from_dict",
]

ACTIVATIONS = {
    "cos": np.cos,
    "relu": lambda t: np.maximum(t, 0.0),
    "tanh": np.tanh,
}

# default bias law per activation
BIAS_LAWS = {"cos": "uniform_0_2pi", "relu": "uniform_pm1", "tanh": "uniform_pm1"}


class FeatureBasis:
    variant = ""
    input_dim: int | None = None

    @property
    def dimension(self) -> int:
        raise NotImplementedError

    def _matrix(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def feature_matrix(self, X) -> np.ndarray:
        X = as_points(X, self.input_dim)
        if self.dimension == 0:
            return np.zeros((0, X.shape[0]))
        return self._matrix(X)

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


def feature_matrix(basis: FeatureBasis, X) -> np.ndarray:
    return basis.feature_matrix(X)


@dataclass(frozen=True, eq=False)
class EmptyBasis(FeatureBasis):
    """No unpenalized features; conditional KRR reduces to standard KRR."""

    variant = "empty"

    @property
    def dimension(self):
        return 0

    def feature_matrix(self, X):
        X = np.asarray(X, dtype=np.float64)
        n = 1 if X.ndim == 0 else X.shape[0]
        return np.zeros((0, n))

    def to_dict(self):
        return {"variant": self.variant}


@dataclass(frozen=True, eq=False)
class FourierPairs(FeatureBasis):
    """``1, cos(x), sin(x), ..., cos(k_max x), sin(k_max x)`` on scalar inputs."""

    k_max: int = 0

    variant = "fourier_pairs"
    input_dim = 1

    def __post_init__(self):
        if int(self.k_max) != self.k_max or self.k_max < 0:
            raise ConfigError(f"k_max must be a non-negative integer, got {self.k_max!r}")

    @property
    def dimension(self):
        return 2 * self.k_max + 1

    def _matrix(self, X):
        x = X[:, 0]
        out = np.empty((self.dimension, x.size))
        out[0] = 1.0
        arg = np.multiply.outer(np.arange(1, self.k_max + 1, dtype=np.float64), x)
        out[1::2] = np.cos(arg)
        out[2::2] = np.sin(arg)
        return out

    def to_dict(self):
        return {"variant": self.variant, "k_max": self.k_max}


@dataclass(frozen=True, eq=False)
class NystromBasis(FeatureBasis):
    """Empirical eigenfunctions of ``(1/N) K`` extended to arbitrary inputs.

    ``phi_i(x) = sum_j vectors[j, i] K(x, X_j) / (sqrt(N) * eigenvalues[i])``,
    so ``phi_i(X_l) = sqrt(N) * vectors[l, i]`` on the training inputs.
    """

    kernel: KernelSpec
    train_inputs: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    vectors: np.ndarray = field(repr=False)
    retained: int = 0

    variant = "nystrom"

    @property
    def input_dim(self):
        return self.train_inputs.shape[1]

    @property
    def dimension(self):
        return self.eigenvalues.size

    def head(self, k: int) -> "NystromBasis":
        """The first ``k`` eigenfunctions; ``NystromRankError`` if fewer exist."""
        if k > self.dimension:
            raise NystromRankError(k, self.retained)
        return NystromBasis(
            self.kernel, self.train_inputs, self.eigenvalues[:k], self.vectors[:, :k], self.retained
        )

    def _matrix(self, X):
        n = self.train_inputs.shape[0]
        C = cross_gram(self.kernel, self.train_inputs, X)
        return (self.vectors.T @ C) / (math.sqrt(n) * self.eigenvalues[:, None])

    def to_dict(self):
        return {
            "variant": self.variant,
            "kernel": self.kernel.to_dict(),
            "train_inputs": self.train_inputs.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "vectors": self.vectors.tolist(),
            "retained": self.retained,
        }


def fit_nystrom(spec: KernelSpec, X, k: int, drop_tol: float = 1e-10) -> NystromBasis:
    """Top-``k`` empirical eigenfunctions of ``spec`` on the sample ``X``.

    Eigenvalues at or below ``drop_tol * lambda_1`` are discarded. The result
    holds ``min(k, retained)`` functions; compare ``basis.dimension`` with ``k``
    (or call ``head``) to detect a shortfall.
    """
    X = as_points(X, spec.input_dim)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= N, got k={k}, N={n}")
    try:
        w, V = scipy.linalg.eigh(gram(spec, X) / n)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(-w, kind="stable")
    w = w[order]
    V = V[:, order]
    top = w[0] if w.size else 0.0
    retained = int(np.count_nonzero((w > drop_tol * top) & (w > 0))) if top > 0 else 0
    keep = min(k, retained)
    V = V[:, :keep]
    # fix eigenvector signs so the largest-magnitude entry is positive
    if keep:
        pivot = np.argmax(np.abs(V), axis=0)
        V = V * np.sign(V[pivot, np.arange(keep)])
    return NystromBasis(spec, X, w[:keep].copy(), np.ascontiguousarray(V), retained)


@dataclass(frozen=True, eq=False)
class GaussianFieldBasis(FeatureBasis):
    """``g_i(x) = sum_j sqrt(lambda_j) xi[i, j] phi_j(x)``, truncated Karhunen-Loeve sums."""

    spectrum: Spectrum
    xi: np.ndarray = field(repr=False)
    seed: int | None = None

    variant = "gaussian_field"

    @property
    def dimension(self):
        return self.xi.shape[0]

    def _matrix(self, X):
        J = self.xi.shape[1]
        phi = self.spectrum.eigenfunctions(X)[:J]
        return (self.xi * np.sqrt(self.spectrum.eigenvalues[:J])) @ phi

    def to_dict(self):
        return {
            "variant": self.variant,
            "spectrum": self.spectrum.to_dict(),
            "k": self.dimension,
            "J": self.xi.shape[1],
            "seed": self.seed,
        }


def default_field_truncation(spectrum: Spectrum, cap: int = 2000, ratio: float = 1e-12) -> int:
    lam = spectrum.eigenvalues
    small = np.nonzero(lam / lam[0] < ratio)[0]
    J = int(small[0]) + 1 if small.size else lam.size
    return min(cap, J, lam.size)


def sample_gaussian_field_basis(
    spectrum: Spectrum, k: int, J: int | None = None, seed: int = 0
) -> GaussianFieldBasis:
    if spectrum.eigenfunctions is None:
        raise ConfigError("gaussian_field basis needs a spectrum with analytic eigenfunctions")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if J is None:
        J = default_field_truncation(spectrum)
    if J > len(spectrum):
        raise ConfigError(f"spectrum has {len(spectrum)} terms, shorter than J={J}")
    xi = np.random.default_rng(seed).standard_normal((k, J))
    return GaussianFieldBasis(spectrum, xi, seed)


@dataclass(frozen=True, eq=False)
class RandomFeatureBasis(FeatureBasis):
    """``scale * act(omega_i . x + bias_i)`` for ``i = 1..count``."""

    activation: str
    omega: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)
    scale: float = 1.0

    variant = "random_feature"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}; known: {sorted(ACTIVATIONS)}")

    @property
    def input_dim(self):
        return self.omega.shape[1]

    @property
    def dimension(self):
        return self.omega.shape[0]

    def _matrix(self, X):
        pre = self.omega @ X.T + self.bias[:, None]
        out = ACTIVATIONS[self.activation](pre)
        if self.scale != 1.0:
            out *= self.scale
        return out

    def to_dict(self):
        return {
            "variant": self.variant,
            "activation": self.activation,
            "omega": self.omega.tolist(),
            "bias": self.bias.tolist(),
            "scale": self.scale,
        }


def sample_random_feature_basis(
    activation: str,
    d: int,
    count: int,
    seed: int = 0,
    bias_law: str | None = None,
    omega_scale: float = 1.0,
    penalized: bool = False,
) -> RandomFeatureBasis:
    """Draw ``omega ~ N(0, omega_scale * I_d)`` and biases from ``bias_law``.

    ``bias_law`` defaults per activation: ``U[0, 2pi]`` for ``cos`` and
    ``U[-1, 1]`` otherwise. ``penalized=True`` scales every feature by
    ``1/sqrt(count)``.
    """
    if activation not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {activation!r}; known: {sorted(ACTIVATIONS)}")
    if count < 1 or d < 1:
        raise ConfigError(f"need count >= 1 and d >= 1, got count={count}, d={d}")
    if not omega_scale > 0:
        raise ConfigError(f"omega_scale must be positive, got {omega_scale!r}")
    law = bias_law or BIAS_LAWS[activation]
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((count, d)) * math.sqrt(omega_scale)
    if law == "uniform_0_2pi":
        bias = rng.uniform(0.0, 2.0 * math.pi, count)
    elif law == "uniform_pm1":
        bias = rng.uniform(-1.0, 1.0, count)
    elif law == "zero":
        bias = np.zeros(count)
    else:
        raise ConfigError(f"unknown bias law {law!r}")
    scale = 1.0 / math.sqrt(count) if penalized else 1.0
    return RandomFeatureBasis(activation, omega, bias, scale)


@dataclass(frozen=True, eq=False)
class ReluUnits(FeatureBasis):
    """Imported hidden units ``ReLU(W_i . x + b_i)``."""

    weights: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)

    variant = "relu_units"

    @property
    def input_dim(self):
        return self.weights.shape[1] if self.weights.shape[0] else None

    @property
    def dimension(self):
        return self.weights.shape[0]

    def head(self, k: int) -> "ReluUnits":
        if k > self.dimension:
            raise ConfigError(f"only {self.dimension} units available, asked for {k}")
        return ReluUnits(self.weights[:k], self.bias[:k])

    def _matrix(self, X):
        return np.maximum(self.weights @ X.T + self.bias[:, None], 0.0)

    def to_dict(self):
        return {"variant": self.variant, "weights": self.weights.tolist(), "bias": self.bias.tolist()}


def load_relu_units(path) -> ReluUnits:
    """Read a header-less CSV with one unit per row: ``b, w_1, ..., w_d``."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric entry in {row!r}") from None
            if len(rows[-1]) < 2:
                raise ConfigError(f"{path}:{lineno}: a unit needs a bias and at least one weight")
            if len(rows[-1]) != len(rows[0]):
                raise ConfigError(
                    f"{path}:{lineno}: row has {len(rows[-1])} entries, expected {len(rows[0])}"
                )
    if not rows:
        return ReluUnits(np.zeros((0, 0)), np.zeros(0))
    arr = np.asarray(rows)
    return ReluUnits(np.ascontiguousarray(arr[:, 1:]), arr[:, 0].copy())


def save_relu_units(path, units: ReluUnits) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        for b, w in zip(units.bias, units.weights):
            writer.writerow([repr(float(b))] + [repr(float(v)) for v in w])


def basis_from_dict(data: dict[str, Any]) -> FeatureBasis:
    data = dict(data)
    variant = data.get("variant")
    arr = np.asarray
    if variant == "empty":
        return EmptyBasis()
    if variant == "fourier_pairs":
        return FourierPairs(int(data["k_max"]))
    if variant == "nystrom":
        return NystromBasis(
            kernel_from_dict(data["kernel"]),
            arr(data["train_inputs"], dtype=np.float64),
            arr(data["eigenvalues"], dtype=np.float64),
            arr(data["vectors"], dtype=np.float64).reshape(len(data["train_inputs"]), -1),
            int(data["retained"]),
        )
    if variant == "gaussian_field":
        return sample_gaussian_field_basis(
            spectrum_from_dict(data["spectrum"]), int(data["k"]), int(data["J"]), data["seed"]
        )
    if variant == "random_feature":
        omega = arr(data["omega"], dtype=np.float64)
        return RandomFeatureBasis(
            data["activation"], omega, arr(data["bias"], dtype=np.float64), float(data["scale"])
        )
    if variant == "relu_units":
        w = arr(data["weights"], dtype=np.float64)
        return ReluUnits(w.reshape(len(data["bias"]), -1), arr(data["bias"], dtype=np.float64))
    raise ConfigError(f"unknown basis variant {variant!r}")
