"""Expected residual kernel under ``k`` random Gaussian-field features.

A draw ``xi`` (k x J, iid standard normal) defines the feature Gram
``G = xi diag(lambda) xi^T`` and ``M[l, m] = xi[:, l]^T G^-1 xi[:, m]``. The
expected residual kernel is diagonal in the Mercer basis with

    mu_i / lambda_i = 1 - 2 lambda_i E[M_ii] + sum_j lambda_j^2 E[M_ij^2]

which this module estimates by Monte Carlo, alongside the one-parameter fit
``mu_i / lambda_i ~ c kappa^2 / (lambda_i + kappa)^2``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ckrr.errors import ConfigError, NumericalError
from ckrr.risk_theory import solve_kappa_features
from ckrr.spectrum import Spectrum

__all__ = [
    "ThermoEstimate",
    "sample_M",
    "estimate_ratio",
    "fit_c",
    "shrinkage_profile",
    "default_truncation",
    "COND_LIMIT",
]

COND_LIMIT = 1e14
MAX_RESAMPLES = 100


@dataclass(frozen=True, eq=False)
class ThermoEstimate:
    spectrum: Spectrum
    k: int
    trials: int
    rho_mean: np.ndarray
    rho_stderr: np.ndarray
    kappa: float
    seed: int
    resamples: int = 0
    offdiag_mean: float = 0.0
    offdiag_stderr: float = 0.0
    trace_errors: np.ndarray = field(default=None, repr=False)

    @property
    def c(self) -> float:
        return fit_c(self)


def default_truncation(spectrum: Spectrum, cap: int = 4000, ratio: float = 1e-12) -> int:
    lam = spectrum.eigenvalues
    small = np.nonzero(lam / lam[0] < ratio)[0]
    J = int(small[0]) + 1 if small.size else lam.size
    return min(cap, J)


def _draw(lam, k, seed, trial):
    """One accepted draw: ``(xi, R, resample count)`` with ``G = R^T R``.

    ``R`` comes from a QR factorisation of ``(xi sqrt(lambda))^T``, which keeps
    the conditioning at ``sqrt(cond(G))``.
    """
    J = lam.size
    root = np.sqrt(lam)
    for attempt in range(MAX_RESAMPLES):
        rng = np.random.default_rng([seed, trial, attempt])
        xi = rng.standard_normal((k, J))
        R = scipy.linalg.qr((xi * root).T, mode="r")[0][:k]
        d = np.abs(np.diag(R))
        if d.min() == 0 or np.linalg.cond(R) ** 2 > COND_LIMIT:
            continue
        return xi, R, attempt
    raise NumericalError(f"feature Gram stayed singular after {MAX_RESAMPLES} draws")


def _whiten(xi, R):
    """``Y = R^-T xi`` so that ``M = Y^T Y``."""
    return scipy.linalg.solve_triangular(R, xi, trans="T")


def sample_M(spectrum: Spectrum, k: int, seed: int, trial: int = 0) -> np.ndarray:
    """Full ``J x J`` matrix ``M`` for one draw (intended for small ``J``)."""
    lam = spectrum.eigenvalues
    if k < 1 or lam.size < k:
        raise ConfigError(f"need 1 <= k <= J, got k={k}, J={lam.size}")
    xi, R, _ = _draw(lam, k, seed, trial)
    Y = _whiten(xi, R)
    M = Y.T @ Y
    return 0.5 * (M + M.T)


def _trial(lam, k, I_max, seed, trial):
    xi, R, resampled = _draw(lam, k, seed, trial)
    Y = _whiten(xi, R)
    diag = np.einsum("ij,ij->j", Y, Y)  # M_jj for all j
    rows = Y[:, :I_max].T @ Y  # M_ij, i <= I_max
    # 1 - 2 l_i M_ii + sum_j l_j^2 M_ij^2, regrouped to avoid cancellation
    own = lam[:I_max] * diag[:I_max]
    cross = (rows**2) @ (lam**2) - own**2
    rho = (1.0 - own) ** 2 + np.maximum(cross, 0.0)
    trace_err = abs(float(lam @ diag) - k)
    offdiag = float(rows[0, 1]) if I_max > 1 else 0.0
    return rho, trace_err, offdiag, resampled


def estimate_ratio(
    spectrum: Spectrum, k: int, trials: int, I_max: int, seed: int = 0, threads: int = 1
) -> ThermoEstimate:
    """Monte-Carlo estimate of ``mu_i / lambda_i`` for modes ``i <= I_max``.

    Trial ``t`` draws from the stream ``(seed, t, attempt)``; results are
    reduced in trial order, so the output does not depend on ``threads``.
    """
    lam = spectrum.eigenvalues
    if trials < 2:
        raise ConfigError(f"need at least 2 trials, got {trials}")
    if not 1 <= I_max <= lam.size:
        raise ConfigError(f"I_max must lie in [1, J={lam.size}], got {I_max}")
    if not 1 <= k <= lam.size:
        raise ConfigError(f"need 1 <= k <= J={lam.size}, got k={k}")
    if k == lam.size:
        # the features span every retained mode: the residual kernel is zero
        zeros = np.zeros(I_max)
        return ThermoEstimate(spectrum, k, trials, zeros, zeros.copy(), 0.0, seed, trace_errors=np.zeros(trials))

    def work(t):
        return _trial(lam, k, I_max, seed, t)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, range(trials)))
    else:
        results = [work(t) for t in range(trials)]

    rho = np.stack([r[0] for r in results])
    offdiag = np.array([r[2] for r in results])
    return ThermoEstimate(
        spectrum=spectrum,
        k=k,
        trials=trials,
        rho_mean=rho.mean(axis=0),
        rho_stderr=rho.std(axis=0, ddof=1) / np.sqrt(trials),
        kappa=solve_kappa_features(spectrum, k),
        seed=seed,
        resamples=int(sum(r[3] for r in results)),
        offdiag_mean=float(offdiag.mean()),
        offdiag_stderr=float(offdiag.std(ddof=1) / np.sqrt(trials)),
        trace_errors=np.array([r[1] for r in results]),
    )


def shrinkage_profile(lam, kappa) -> np.ndarray:
    """``kappa^2 / (lambda_i + kappa)^2``."""
    lam = np.asarray(lam, dtype=np.float64)
    return kappa**2 / (lam + kappa) ** 2


def fit_c(est: ThermoEstimate) -> float:
    """Least-squares ``c`` in ``rho_i ~ c * kappa^2 / (lambda_i + kappa)^2``."""
    n = est.rho_mean.size
    if n < 2:
        raise ConfigError("need at least two modes to fit c")
    g = shrinkage_profile(est.spectrum.eigenvalues[:n], est.kappa)
    denom = float(g @ g)
    if denom == 0:
        raise NumericalError("shrinkage profile vanishes on every mode")
    return float(est.rho_mean @ g) / denom
