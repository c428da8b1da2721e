"""Omniscient risk estimates for KRR and residual-kernel KRR.

For a spectrum ``lambda_i`` and sample size ``N`` the effective regularisation
``kappa`` solves ``sum_i lambda_i / (lambda_i + kappa) + lam / kappa = N``. Mode
learnabilities are ``L_i = lambda_i / (lambda_i + kappa)``, the overfitting
coefficient is ``E_noise = N / (N - sum_i L_i^2)`` and the predicted test MSE is
``E_noise * (sum_i (1 - L_i)^2 u_i^2 + sigma2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ckrr.errors import ConfigError, NoRoot, OverfittingDivergence
from ckrr.spectrum import Spectrum

__all__ = [
    "TargetCoeffs",
    "RiskReport",
    "AdvantageReport",
    "solve_kappa_ridge",
    "solve_kappa_features",
    "predicted_mse",
    "advantage_condition",
    "bisect_decreasing",
]

MAX_ITER = 200
REL_TOL = 1e-12


@dataclass(frozen=True)
class TargetCoeffs:
    """Target coefficients on the eigenbasis, plus the noise variance."""

    u: np.ndarray
    sigma2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=np.float64).ravel())
        if not self.sigma2 >= 0:
            raise ConfigError(f"sigma2 must be >= 0, got {self.sigma2!r}")


@dataclass(frozen=True)
class RiskReport:
    kappa: float
    learnabilities: np.ndarray
    e_noise: float
    predicted_mse: float
    tail_from: int = 0


@dataclass(frozen=True)
class AdvantageReport:
    lhs: float
    rhs: float
    correction: float
    holds: bool
    slack: float
    full: RiskReport
    residual: RiskReport


def _eigenvalues(spec) -> np.ndarray:
    if isinstance(spec, Spectrum):
        return spec.eigenvalues
    return np.asarray(spec, dtype=np.float64).ravel()


def bisect_decreasing(fn, target: float, lo: float = 1e-300, hi: float = 1e300) -> float:
    """Root of a strictly decreasing ``fn(x) = target`` on ``(lo, hi)``, bisecting in log space.

    Stops at relative width ``REL_TOL`` squared (effectively float adjacency) or
    after ``MAX_ITER`` halvings; returns the endpoint with the smaller residual.
    """
    f_lo, f_hi = fn(lo) - target, fn(hi) - target
    if not (f_lo > 0 > f_hi):
        raise NoRoot(f"no sign change on [{lo:g}, {hi:g}]: {f_lo:g}, {f_hi:g}")
    for _ in range(MAX_ITER):
        mid = math.sqrt(lo) * math.sqrt(hi)
        if not lo < mid < hi or hi - lo <= REL_TOL * REL_TOL * hi:
            break
        f_mid = fn(mid) - target
        if f_mid == 0:
            return mid
        if f_mid > 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return lo if abs(f_lo) <= abs(f_hi) else hi


def solve_kappa_ridge(spec, N: float, lam: float) -> float:
    """``kappa > 0`` with ``sum lambda_i / (lambda_i + kappa) + lam / kappa = N``."""
    lam_i = _eigenvalues(spec)
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    if lam < 0:
        raise ConfigError(f"ridge must be >= 0, got {lam}")
    if lam_i.size == 0:
        if lam == 0:
            raise NoRoot("empty spectrum with zero ridge")
        return lam / N
    if lam == 0 and N >= lam_i.size:
        raise NoRoot(f"ridgeless equation has no root for N={N} >= J={lam_i.size}")

    def lhs(kappa):
        return float(np.sum(lam_i / (lam_i + kappa))) + lam / kappa

    return bisect_decreasing(lhs, N)


def solve_kappa_features(spec, k: float) -> float:
    """``kappa > 0`` with ``sum lambda_i / (lambda_i + kappa) = k``."""
    lam_i = _eigenvalues(spec)
    if not 0 < k < lam_i.size:
        raise ConfigError(f"need 0 < k < J={lam_i.size}, got k={k}")
    return bisect_decreasing(lambda kappa: float(np.sum(lam_i / (lam_i + kappa))), k)


def predicted_mse(spec, coeffs: TargetCoeffs, N: float, lam: float, tail_from: int = 0) -> RiskReport:
    """Predicted test MSE of KRR on the spectrum tail starting after ``tail_from`` modes.

    ``tail_from = 0`` is plain KRR with the full kernel. For ``tail_from = k``
    the residual kernel keeps modes ``k+1, k+2, ...``; target coefficients on the
    first ``k`` modes are absorbed by the unpenalized features, so with a target
    supported on those modes the prediction is ``E'_noise * sigma2``.
    """
    lam_all = _eigenvalues(spec)
    if not 0 <= tail_from < lam_all.size:
        raise ConfigError(f"tail_from must lie in [0, {lam_all.size}), got {tail_from}")
    lam_i = lam_all[tail_from:]
    u = np.zeros(lam_all.size)
    m = min(coeffs.u.size, lam_all.size)
    u[:m] = coeffs.u[:m]
    u = u[tail_from:]
    kappa = solve_kappa_ridge(lam_i, N, lam)
    L = lam_i / (lam_i + kappa)
    overlap = float(np.sum(L**2))
    if N <= overlap:
        raise OverfittingDivergence(f"N={N} <= sum L_i^2 = {overlap:g}")
    e_noise = N / (N - overlap)
    mse = e_noise * (float(np.sum((1.0 - L) ** 2 * u**2)) + coeffs.sigma2)
    return RiskReport(kappa, L, e_noise, mse, tail_from)


def advantage_condition(
    spec, coeffs: TargetCoeffs, N: float, lam: float, k: int, c_user: float = 1.0
) -> AdvantageReport:
    """Check whether unpenalizing the top ``k`` modes is predicted to lower the risk.

    ``lhs = sum_{i<=k} kappa^2 u_i^2 / (lambda_i + kappa)^2`` and
    ``rhs = sigma2 (E'_noise / E_noise - 1)``. The finite-sample term
    ``c_user * sigma2 (k+1) / (N E_noise)`` has no known constant; ``c_user``
    defaults to 1 as a heuristic. ``holds`` is ``lhs > rhs + correction``.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    full = predicted_mse(spec, coeffs, N, lam, 0)
    resid = predicted_mse(spec, coeffs, N, lam, k)
    lam_i = _eigenvalues(spec)[:k]
    u = np.zeros(k)
    m = min(k, coeffs.u.size)
    u[:m] = coeffs.u[:m]
    kappa = full.kappa
    lhs = float(np.sum(kappa**2 * u**2 / (lam_i + kappa) ** 2))
    rhs = coeffs.sigma2 * (resid.e_noise / full.e_noise - 1.0)
    correction = c_user * coeffs.sigma2 * (k + 1) / (N * full.e_noise)
    slack = lhs - rhs - correction
    return AdvantageReport(lhs, rhs, correction, slack > 0, slack, full, resid)
