"""Kernel functions, Gram and cross-Gram matrices.

Every kernel is an immutable dataclass. Points are passed as arrays of shape
``(N, d)``; a 1-D array of length ``N`` is read as ``N`` scalar inputs.

The Fourier-series kernel on ``[0, 2*pi]``

    K(x, y) = 1 + sum_{i=1}^J i^(-2s) (cos(ix) cos(iy) + sin(ix) sin(iy))

and its tail ``sum_{i=k+1}^J`` are evaluated through an explicit feature map for
matrices and through ``cos(i (x - y))`` for single pairs, which keeps the
pointwise path exactly symmetric.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np
from scipy.spatial.distance import cdist

from ckrr.errors import ConfigError

__all__ = [
    "KernelSpec",
    "FourierSeries",
    "FourierTail",
    "Gaussian",
    "Laplace",
    "Matern32",
    "NngpErf",
    "EmpiricalFeatures",
    "as_points",
    "eval_kernel",
    "gram",
    "cross_gram",
    "kernel_from_dict",
]


def as_points(X, dim: int | None = None) -> np.ndarray:
    """Coerce ``X`` to a float64 array of shape ``(N, d)``.

    Raises ``ValueError`` on non-finite coordinates or a dimension other than
    ``dim`` (when given).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, 1)
    elif X.ndim != 2:
        raise ValueError(f"points must be a 1-D or 2-D array, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points contain non-finite coordinates")
    return X


def _as_point(x, dim: int | None) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.ndim != 1:
        raise ValueError(f"a single point must be 1-D, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"expected a point of dimension {dim}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite coordinates")
    return x


def _positive(name, value):
    if not value > 0 or not math.isfinite(value):
        raise ConfigError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class KernelSpec:
    """Base class. Subclasses implement ``_cross`` on validated ``(N, d)`` arrays."""

    variant: ClassVar[str] = ""
    input_dim: ClassVar[int | None] = None

    def _cross(self, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _pair(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(self._cross(x[None, :], y[None, :])[0, 0])

    def to_dict(self) -> dict[str, Any]:
        out = {"variant": self.variant}
        for f in dataclasses.fields(self):
            out[f.name] = getattr(self, f.name)
        return out


# --------------------------------------------------------------------------- Fourier


def fourier_weights(s: float, lo: int, hi: int) -> np.ndarray:
    """``i^(-2s)`` for ``i = lo..hi`` inclusive."""
    i = np.arange(lo, hi + 1, dtype=np.float64)
    return i ** (-2.0 * s)


def _fourier_map(x: np.ndarray, s: float, lo: int, hi: int) -> np.ndarray:
    """Rows ``[sqrt(w_i) cos(i x), sqrt(w_i) sin(i x)]`` for ``i = lo..hi``."""
    i = np.arange(lo, hi + 1, dtype=np.float64)
    root_w = np.sqrt(fourier_weights(s, lo, hi))
    arg = np.multiply.outer(x, i)
    return np.hstack([np.cos(arg) * root_w, np.sin(arg) * root_w])


@dataclass(frozen=True)
class FourierSeries(KernelSpec):
    s: float = 1.0
    J: int = 300

    variant: ClassVar[str] = "fourier_series"
    input_dim: ClassVar[int | None] = 1

    def __post_init__(self):
        _positive("s", self.s)
        if int(self.J) != self.J or self.J < 1:
            raise ConfigError(f"J must be a positive integer, got {self.J!r}")

    def _cross(self, X, Z):
        A = _fourier_map(X[:, 0], self.s, 1, self.J)
        B = _fourier_map(Z[:, 0], self.s, 1, self.J)
        return 1.0 + A @ B.T

    def _pair(self, x, y):
        i = np.arange(1, self.J + 1, dtype=np.float64)
        return float(1.0 + np.sum(fourier_weights(self.s, 1, self.J) * np.cos(i * (x[0] - y[0]))))

    def self_value(self) -> float:
        return float(1.0 + np.sum(fourier_weights(self.s, 1, self.J)))


@dataclass(frozen=True)
class FourierTail(KernelSpec):
    """Spectral tail ``sum_{i=k+1}^J`` of the Fourier-series kernel.

    This is the residual kernel of ``FourierSeries`` with respect to
    ``span{1, cos(ix), sin(ix) : i <= k}`` under the uniform measure. ``k = 0``
    drops only the constant term. With ``k >= J`` the kernel is identically zero.
    """

    s: float = 1.0
    J: int = 300
    k: int = 0

    variant: ClassVar[str] = "fourier_tail"
    input_dim: ClassVar[int | None] = 1

    def __post_init__(self):
        _positive("s", self.s)
        if int(self.J) != self.J or self.J < 1:
            raise ConfigError(f"J must be a positive integer, got {self.J!r}")
        if int(self.k) != self.k or self.k < 0:
            raise ConfigError(f"k must be a non-negative integer, got {self.k!r}")

    def _cross(self, X, Z):
        if self.k >= self.J:
            return np.zeros((X.shape[0], Z.shape[0]))
        A = _fourier_map(X[:, 0], self.s, self.k + 1, self.J)
        B = _fourier_map(Z[:, 0], self.s, self.k + 1, self.J)
        return A @ B.T

    def _pair(self, x, y):
        if self.k >= self.J:
            return 0.0
        i = np.arange(self.k + 1, self.J + 1, dtype=np.float64)
        w = fourier_weights(self.s, self.k + 1, self.J)
        return float(np.sum(w * np.cos(i * (x[0] - y[0]))))


# --------------------------------------------------------------------------- stationary


@dataclass(frozen=True)
class Gaussian(KernelSpec):
    """``variance * exp(-gamma * |x - y|^2)``."""

    gamma: float = 1.0
    variance: float = 1.0

    variant: ClassVar[str] = "gaussian"

    def __post_init__(self):
        _positive("gamma", self.gamma)
        _positive("variance", self.variance)

    def _cross(self, X, Z):
        return self.variance * np.exp(-self.gamma * cdist(X, Z, "sqeuclidean"))


@dataclass(frozen=True)
class Laplace(KernelSpec):
    """``variance * exp(-gamma * |x - y|)`` with the Euclidean norm."""

    gamma: float = 1.0
    variance: float = 1.0

    variant: ClassVar[str] = "laplace"

    def __post_init__(self):
        _positive("gamma", self.gamma)
        _positive("variance", self.variance)

    def _cross(self, X, Z):
        return self.variance * np.exp(-self.gamma * cdist(X, Z, "euclidean"))


@dataclass(frozen=True)
class Matern32(KernelSpec):
    lengthscale: float = 1.0
    variance: float = 1.0

    variant: ClassVar[str] = "matern32"

    def __post_init__(self):
        _positive("lengthscale", self.lengthscale)
        _positive("variance", self.variance)

    def _cross(self, X, Z):
        r = math.sqrt(3.0) * cdist(X, Z, "euclidean") / self.lengthscale
        return self.variance * (1.0 + r) * np.exp(-r)


@dataclass(frozen=True)
class NngpErf(KernelSpec):
    """Infinite-width erf network kernel (arcsine form).

    With ``S(x, y) = bias_variance + weight_variance * <x, y> / d``::

        K(x, y) = (2 / pi) * arcsin(2 S(x, y) / sqrt((1 + 2 S(x, x)) (1 + 2 S(y, y))))

    which is ``E[erf(w.x + b) erf(w.y + b)]`` for ``w ~ N(0, weight_variance I / d)``
    and ``b ~ N(0, bias_variance)``.
    """

    weight_variance: float = 1.0
    bias_variance: float = 0.0

    variant: ClassVar[str] = "nngp_erf"

    def __post_init__(self):
        _positive("weight_variance", self.weight_variance)
        if not self.bias_variance >= 0:
            raise ConfigError(f"bias_variance must be >= 0, got {self.bias_variance!r}")

    def _cross(self, X, Z):
        d = X.shape[1]
        sw = self.weight_variance / d
        sxz = self.bias_variance + sw * (X @ Z.T)
        sxx = self.bias_variance + sw * np.einsum("ij,ij->i", X, X)
        szz = self.bias_variance + sw * np.einsum("ij,ij->i", Z, Z)
        denom = np.sqrt(np.multiply.outer(1.0 + 2.0 * sxx, 1.0 + 2.0 * szz))
        return (2.0 / np.pi) * np.arcsin(np.clip(2.0 * sxz / denom, -1.0, 1.0))


# --------------------------------------------------------------------------- features


@dataclass(frozen=True, eq=False)
class EmpiricalFeatures(KernelSpec):
    """``scale * psi(x) . psi(y)`` for a finite feature basis ``psi``.

    Use ``scale=1`` when the basis already carries the ``1/sqrt(m)`` factor and
    ``scale=1/m`` for raw features, so that the kernel estimates
    ``E[f(w, x) f(w, y)]``.
    """

    basis: Any = field(default=None, repr=False)
    scale: float = 1.0

    variant: ClassVar[str] = "empirical_features"

    def __post_init__(self):
        if self.basis is None:
            raise ConfigError("empirical_features kernel needs a feature basis")
        _positive("scale", self.scale)

    def _cross(self, X, Z):
        A = self.basis.feature_matrix(X)
        B = self.basis.feature_matrix(Z)
        return self.scale * (A.T @ B)

    def _pair(self, x, y):
        a = self.basis.feature_matrix(x[None, :])[:, 0]
        b = self.basis.feature_matrix(y[None, :])[:, 0]
        return float(self.scale * np.sum(a * b))

    def to_dict(self):
        return {"variant": self.variant, "scale": self.scale, "basis": self.basis.to_dict()}


_VARIANTS = {
    cls.variant: cls
    for cls in (FourierSeries, FourierTail, Gaussian, Laplace, Matern32, NngpErf, EmpiricalFeatures)
}


def kernel_from_dict(data: dict[str, Any]) -> KernelSpec:
    data = dict(data)
    variant = data.pop("variant", None)
    if variant not in _VARIANTS:
        raise ConfigError(f"unknown kernel variant {variant!r}; known: {sorted(_VARIANTS)}")
    if variant == "empirical_features":
        from ckrr.features import basis_from_dict

        data["basis"] = basis_from_dict(data["basis"])
    try:
        return _VARIANTS[variant](**data)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for kernel {variant!r}: {exc}") from None


# --------------------------------------------------------------------------- evaluation


def eval_kernel(spec: KernelSpec, x, y) -> float:
    x = _as_point(x, spec.input_dim)
    y = _as_point(y, spec.input_dim)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return spec._pair(x, y)


def cross_gram(spec: KernelSpec, X, Z) -> np.ndarray:
    """``C[i, j] = K(X_i, Z_j)``, shape ``(N, M)``."""
    X = as_points(X, spec.input_dim)
    Z = as_points(Z, spec.input_dim) if np.size(Z) else np.empty((0, X.shape[1]))
    if X.shape[1] != Z.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Z.shape[1]}")
    if X.shape[0] == 0 or Z.shape[0] == 0:
        return np.zeros((X.shape[0], Z.shape[0]))
    return spec._cross(X, Z)


def gram(spec: KernelSpec, X) -> np.ndarray:
    """Symmetric Gram matrix; the upper triangle is mirrored so symmetry is exact."""
    X = as_points(X, spec.input_dim)
    if X.shape[0] < 1:
        raise ValueError("gram needs at least one point")
    G = spec._cross(X, X)
    return np.triu(G) + np.triu(G, 1).T
