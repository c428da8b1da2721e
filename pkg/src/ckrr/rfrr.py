"""Random-feature ridge regression with unpenalized features.

Solves::

    min_{u, w} (1/N) |A^T u + B^T w - y|^2 + lam |w|^2

where ``A`` (k x N) holds the unpenalized features ``phi`` and ``B`` (m x N) the
penalized features ``psi`` (which carry their own ``1/sqrt(m)`` scale). As
``m`` grows this approaches conditional KRR with kernel ``E[psi psi]``.

Only the N x N kernel-trick system is formed, since ``m`` is usually much
larger than ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ckrr.cpd_solver import _check_ridge, _feature_pinv, projection_matrix
from ckrr.errors import ConfigError, FactorizationError
from ckrr.features import FeatureBasis
from ckrr.kernels import as_points

__all__ = ["RfrrModel", "fit_rfrr", "predict_rfrr", "rfrr_objective"]


@dataclass(frozen=True, eq=False)
class RfrrModel:
    phi: FeatureBasis
    psi: FeatureBasis
    u: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    ridge: float
    train_summary: dict = field(default_factory=dict)


def rfrr_objective(A, B, y, u, w, lam) -> float:
    resid = A.T @ u + B.T @ w - y
    return float(resid @ resid / y.shape[0] + lam * w @ w)


def fit_rfrr(phi: FeatureBasis, psi: FeatureBasis, X, y, lam: float) -> RfrrModel:
    _check_ridge(lam)
    X = as_points(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]
    if y.shape[0] != n:
        raise ConfigError(f"{n} inputs but {y.shape[0]} targets")
    A = phi.feature_matrix(X)
    B = psi.feature_matrix(X)
    Pi, rank = projection_matrix(A)
    Q = np.eye(n) - Pi
    r = Q @ y
    Bt = B @ Q
    H = Bt.T @ Bt
    H = np.triu(H) + np.triu(H, 1).T
    try:
        chol = scipy.linalg.cho_factor(H + lam * n * np.eye(n), lower=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError("kernel-trick system is not positive definite") from exc
    w = Bt @ scipy.linalg.cho_solve(chol, r)
    solve_a, _ = _feature_pinv(A)
    u = solve_a @ (y - B.T @ w)
    summary = {"rank_A": rank, "objective_value": rfrr_objective(A, B, y, u, w, lam)}
    return RfrrModel(phi, psi, u, w, float(lam), summary)


def predict_rfrr(model: RfrrModel, Z) -> np.ndarray:
    """``u . phi(z) + w . psi(z)`` for each row of ``Z``."""
    Z = as_points(Z)
    out = model.psi.feature_matrix(Z).T @ model.w
    if model.u.size:
        out = out + model.phi.feature_matrix(Z).T @ model.u
    return out
