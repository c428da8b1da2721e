"""Finite Mercer spectra, optionally with analytic eigenfunctions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ckrr.errors import ConfigError

__all__ = [
    "Spectrum",
    "power_spectrum",
    "exponential_spectrum",
    "fourier_spectrum",
    "fourier_target_coeffs",
    "spectrum_from_dict",
]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Nonincreasing positive eigenvalues ``lambda_1 >= ... >= lambda_J > 0``.

    ``eigenfunctions``, when present, maps points ``(N, d)`` to a ``(J, N)``
    matrix of the L2(P)-orthonormal eigenfunctions in the same order.
    """

    eigenvalues: np.ndarray
    tag: str = "values"
    params: dict = field(default_factory=dict)
    eigenfunctions: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=np.float64).ravel()
        if lam.size and (not np.all(np.isfinite(lam)) or np.any(lam <= 0)):
            raise ConfigError("spectrum eigenvalues must be finite and strictly positive")
        if np.any(np.diff(lam) > 0):
            raise ConfigError("spectrum eigenvalues must be nonincreasing")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    def __len__(self):
        return self.eigenvalues.size

    def truncated(self, J: int) -> "Spectrum":
        if J > len(self):
            raise ConfigError(f"spectrum has {len(self)} terms, cannot truncate to {J}")
        fn = self.eigenfunctions
        sub = None if fn is None else (lambda X, _J=J: fn(X)[:_J])
        return Spectrum(self.eigenvalues[:J], self.tag, dict(self.params, J=J), sub)

    def to_dict(self) -> dict[str, Any]:
        if self.tag == "values":
            return {"tag": "values", "eigenvalues": self.eigenvalues.tolist()}
        return {"tag": self.tag, **self.params}


def power_spectrum(a: float, J: int) -> Spectrum:
    """``lambda_i = i^(-a)``, ``i = 1..J``."""
    if not a > 0:
        raise ConfigError(f"power exponent must be positive, got {a!r}")
    i = np.arange(1, J + 1, dtype=np.float64)
    return Spectrum(i ** (-float(a)), "power", {"a": a, "J": J})


def exponential_spectrum(rate: float, J: int) -> Spectrum:
    """``lambda_i = exp(-rate * i)``, ``i = 1..J``."""
    if not rate > 0:
        raise ConfigError(f"rate must be positive, got {rate!r}")
    i = np.arange(1, J + 1, dtype=np.float64)
    return Spectrum(np.exp(-float(rate) * i), "exponential", {"rate": rate, "J": J})


def _fourier_eigenfunctions(X, J):
    x = np.asarray(X, dtype=np.float64).reshape(len(X), -1)[:, 0]
    n_harm = J // 2
    out = np.empty((J, x.size))
    out[0] = 1.0
    arg = np.multiply.outer(np.arange(1, n_harm + 1, dtype=np.float64), x)
    cos = np.sqrt(2.0) * np.cos(arg)
    sin = np.sqrt(2.0) * np.sin(arg)
    out[1::2] = cos[: out[1::2].shape[0]]
    out[2::2] = sin[: out[2::2].shape[0]]
    return out


def fourier_spectrum(s: float, harmonics: int) -> Spectrum:
    """Mercer spectrum of the Fourier-series kernel under ``U[0, 2*pi]``.

    Ordering is ``1, sqrt2 cos(x), sqrt2 sin(x), sqrt2 cos(2x), ...`` so the
    first ``2k+1`` modes span ``{1, cos(ix), sin(ix) : i <= k}``. Normalising
    the eigenfunctions gives eigenvalue ``i^(-2s) / 2`` for each pair.
    """
    if not s > 0:
        raise ConfigError(f"s must be positive, got {s!r}")
    w = np.arange(1, harmonics + 1, dtype=np.float64) ** (-2.0 * s) / 2.0
    lam = np.concatenate([[1.0], np.repeat(w, 2)])
    J = lam.size
    return Spectrum(
        lam, "fourier", {"s": s, "harmonics": harmonics}, lambda X, _J=J: _fourier_eigenfunctions(X, _J)
    )


def fourier_target_coeffs(target, J: int) -> np.ndarray:
    """Coefficients of ``sum a_n cos(nx) + b_n sin(nx)`` on the fourier eigenbasis.

    ``target`` is an iterable of ``(n, a_n, b_n)``. Harmonics beyond the
    truncation are dropped.
    """
    u = np.zeros(J)
    for n, a_n, b_n in target:
        n = int(n)
        if n == 0:
            u[0] += a_n
            continue
        if 2 * n - 1 < J:
            u[2 * n - 1] += a_n / np.sqrt(2.0)
        if 2 * n < J:
            u[2 * n] += b_n / np.sqrt(2.0)
    return u


def spectrum_from_dict(data: dict[str, Any]) -> Spectrum:
    data = dict(data)
    tag = data.pop("tag", "values")
    try:
        if tag == "values":
            return Spectrum(np.asarray(data["eigenvalues"], dtype=np.float64))
        if tag == "power":
            return power_spectrum(data["a"], int(data["J"]))
        if tag == "exponential":
            return exponential_spectrum(data["rate"], int(data["J"]))
        if tag == "fourier":
            spec = fourier_spectrum(data["s"], int(data["harmonics"]))
            return spec.truncated(int(data["J"])) if "J" in data else spec
    except KeyError as exc:
        raise ConfigError(f"spectrum {tag!r} is missing parameter {exc}") from None
    raise ConfigError(f"unknown spectrum tag {tag!r}")
