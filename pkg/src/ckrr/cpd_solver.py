"""Conditional kernel ridge regression.

Minimises, over ``f = sum_i alpha_i K(X_i, .) + sum_j beta_j f_j`` with the
representer constraint ``F @ alpha = 0``::

    (1/N) * |f(X) - y|^2 + lam * alpha' G alpha

Ridge convention: the data term is a *mean*, so every linear system below
carries ``lam * N`` on the diagonal. With no features this is standard KRR,
``alpha = (G + lam N I)^-1 y``.

``fit`` uses the two-stage route: project ``y`` and ``G`` off the row space of
the feature matrix, solve KRR with the residual Gram, then regress the remainder
on the features. ``fit_direct_oracle`` solves the bordered saddle-point system
instead and is kept for cross-checking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy.linalg

from ckrr.errors import ConfigError, FactorizationError, NonPositiveRidge, NumericalError, RankDeficientFeatures
from ckrr.features import FeatureBasis, basis_from_dict
from ckrr.kernels import KernelSpec, as_points, cross_gram, gram, kernel_from_dict

__all__ = [
    "ConditionalKrrModel",
    "projection_matrix",
    "residual_gram",
    "fit",
    "fit_direct_oracle",
    "predict",
    "predict_residual_route",
    "residual_cross_gram",
    "objective",
    "save_model",
    "load_model",
    "MODEL_MAGIC",
]

RANK_TOL = 1e-10
MODEL_MAGIC = "CKRR-MODEL"
MODEL_VERSION = 1


@dataclass(frozen=True, eq=False)
class ConditionalKrrModel:
    kernel: KernelSpec
    basis: FeatureBasis
    train_inputs: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    ridge: float
    fit_report: dict[str, Any] = field(default_factory=dict)


def _check_ridge(lam):
    if not np.isfinite(lam) or lam <= 0:
        raise NonPositiveRidge(f"ridge must be strictly positive, got {lam!r}")


def _feature_pinv(F: np.ndarray, rank_tol: float = RANK_TOL):
    """``(F F^T)^-1 F`` through an SVD, with the rank check."""
    k = F.shape[0]
    if k == 0:
        return np.zeros_like(F), 0
    U, sv, Vt = np.linalg.svd(F, full_matrices=False)
    rank = int(np.count_nonzero(sv > rank_tol * sv[0])) if sv[0] > 0 else 0
    if rank < k:
        raise RankDeficientFeatures(rank, k)
    # (F F^T)^-1 F = U S^-1 V^T
    return (U / sv) @ Vt, rank


def projection_matrix(F, rank_tol: float = RANK_TOL):
    """``Pi = F^T (F F^T)^-1 F``, the projector onto the row space of ``F``.

    Returns ``(Pi, rank)``. Raises ``RankDeficientFeatures`` when the numerical
    rank (singular values above ``rank_tol * max``) is below ``k``.
    """
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    k, n = F.shape
    if k > n:
        raise RankDeficientFeatures(n, k)
    if k == 0:
        return np.zeros((n, n)), 0
    _, sv, Vt = np.linalg.svd(F, full_matrices=False)
    rank = int(np.count_nonzero(sv > rank_tol * sv[0])) if sv[0] > 0 else 0
    if rank < k:
        raise RankDeficientFeatures(rank, k)
    Pi = Vt.T @ Vt
    return 0.5 * (Pi + Pi.T), rank


def residual_gram(G, Pi) -> np.ndarray:
    """``(I - Pi) G (I - Pi)``, symmetrised."""
    G = np.asarray(G, dtype=np.float64)
    Pi = np.asarray(Pi, dtype=np.float64)
    if G.shape != Pi.shape or G.shape[0] != G.shape[1]:
        raise ValueError(f"shape mismatch: Gram {G.shape}, projection {Pi.shape}")
    Q = np.eye(G.shape[0]) - Pi
    R = Q @ G @ Q
    return np.triu(R) + np.triu(R, 1).T


def objective(G, F, y, alpha, beta, lam) -> float:
    """``(1/N) |G alpha + F^T beta - y|^2 + lam alpha' G alpha``."""
    n = y.shape[0]
    resid = G @ alpha + F.T @ beta - y
    return float(resid @ resid / n + lam * alpha @ G @ alpha)


def _prepare(spec, basis, X, y, lam):
    _check_ridge(lam)
    X = as_points(X, spec.input_dim)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] < 1:
        raise ConfigError("need at least one training point")
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets contain non-finite values")
    return X, y, gram(spec, X), basis.feature_matrix(X)


def fit(spec: KernelSpec, basis: FeatureBasis, X, y, lam: float, diagnostics: bool = True) -> ConditionalKrrModel:
    """Two-stage conditional KRR fit.

    ``diagnostics=False`` skips the smallest-eigenvalue report, which costs an
    extra eigen-solve.
    """
    X, y, G, F = _prepare(spec, basis, X, y, lam)
    n = X.shape[0]
    Pi, rank = projection_matrix(F)
    Q = np.eye(n) - Pi
    r = Q @ y
    Kt = residual_gram(G, Pi)
    try:
        chol = scipy.linalg.cho_factor(Kt + lam * n * np.eye(n), lower=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(
            "residual Gram plus ridge is not positive definite; the kernel is not "
            "conditionally positive definite with respect to these features"
        ) from exc
    alpha = Q @ scipy.linalg.cho_solve(chol, r)
    solve_f, _ = _feature_pinv(F)
    beta = solve_f @ (y - G @ alpha)
    report = {"feature_rank": rank}
    if diagnostics:
        min_eig = float(scipy.linalg.eigvalsh(Kt, subset_by_index=[0, 0])[0]) if n > 1 else float(Kt[0, 0])
        report["residual_gram_min_eig"] = min_eig
        report["objective_value"] = objective(G, F, y, alpha, beta, lam)
    return ConditionalKrrModel(spec, basis, X, alpha, beta, float(lam), report)


def fit_direct_oracle(spec: KernelSpec, basis: FeatureBasis, X, y, lam: float) -> ConditionalKrrModel:
    """Reference solution from the bordered saddle-point system.

    Stationarity of the constrained least-squares problem is satisfied by
    ``[[G + lam N I, F^T], [F, 0]] [alpha; beta] = [y; 0]`` (the multiplier of
    ``F alpha = 0`` vanishes at that point). Solved with a symmetric-indefinite
    factorisation, falling back to least squares. No projection is formed.
    """
    X, y, G, F = _prepare(spec, basis, X, y, lam)
    n, k = X.shape[0], F.shape[0]
    A = np.zeros((n + k, n + k))
    A[:n, :n] = G + lam * n * np.eye(n)
    A[:n, n:] = F.T
    A[n:, :n] = F
    rhs = np.concatenate([y, np.zeros(k)])
    try:
        sol = scipy.linalg.solve(A, rhs, assume_a="sym")
    except np.linalg.LinAlgError:
        sol, *_ = scipy.linalg.lstsq(A, rhs)
    if not np.all(np.isfinite(sol)):
        raise NumericalError("singular saddle-point system")
    alpha, beta = sol[:n], sol[n:]
    report = {"objective_value": objective(G, F, y, alpha, beta, lam)}
    return ConditionalKrrModel(spec, basis, X, alpha, beta, float(lam), report)


def predict(model: ConditionalKrrModel, Z) -> np.ndarray:
    """``K(Z, X_train) alpha + Phi(Z)^T beta``."""
    Z = as_points(Z, model.train_inputs.shape[1])
    out = cross_gram(model.kernel, model.train_inputs, Z).T @ model.alpha
    if model.beta.size:
        out = out + model.basis.feature_matrix(Z).T @ model.beta
    return out


def residual_cross_gram(spec: KernelSpec, basis: FeatureBasis, X, Z) -> np.ndarray:
    """Empirical residual kernel ``K_{P_N}(X_i, Z_j)`` with ``P_N`` uniform on ``X``.

    With ``A(z) = phi(z)^T (F F^T)^-1 F`` (the empirical projection weights)::

        K_P(x, z) = K(x, z) - A(x).k(z) - k(x).A(z) + A(x) G A(z)^T
    """
    X = as_points(X, spec.input_dim)
    Z = as_points(Z, X.shape[1])
    F = basis.feature_matrix(X)
    solve_f, _ = _feature_pinv(F)
    G = gram(spec, X)
    Kxz = cross_gram(spec, X, Z)
    if F.shape[0] == 0:
        return Kxz
    Ax = F.T @ solve_f
    Az = basis.feature_matrix(Z).T @ solve_f
    return Kxz - Ax @ Kxz - (Az @ G).T + Ax @ G @ Az.T


def predict_residual_route(model: ConditionalKrrModel, Z, y) -> np.ndarray:
    """Predict via residual-kernel KRR plus the least-squares feature fit.

    ``f(z) = sum_i alpha_i K_P(X_i, z) + phi(z)^T (F F^T)^-1 F y`` using the
    empirical residual kernel and the linear-regression coefficients on ``y``.
    """
    X = model.train_inputs
    Z = as_points(Z, X.shape[1])
    y = np.asarray(y, dtype=np.float64).ravel()
    out = residual_cross_gram(model.kernel, model.basis, X, Z).T @ model.alpha
    F = model.basis.feature_matrix(X)
    if F.shape[0]:
        solve_f, _ = _feature_pinv(F)
        out = out + model.basis.feature_matrix(Z).T @ (solve_f @ y)
    return out


# --------------------------------------------------------------------------- serialization


def save_model(model: ConditionalKrrModel, path) -> None:
    """Write a JSON model file whose first key is the ``CKRR-MODEL`` magic tag."""
    doc = {
        "magic": MODEL_MAGIC,
        "version": MODEL_VERSION,
        "type": "conditional_krr",
        "ridge": model.ridge,
        "kernel": model.kernel.to_dict(),
        "basis": model.basis.to_dict(),
        "train_inputs": model.train_inputs.tolist(),
        "alpha": model.alpha.tolist(),
        "beta": model.beta.tolist(),
        "fit_report": model.fit_report,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> ConditionalKrrModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not a model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("magic") != MODEL_MAGIC:
        raise ConfigError(f"{path}: missing {MODEL_MAGIC} header")
    if doc.get("version") != MODEL_VERSION:
        raise ConfigError(f"{path}: unsupported model version {doc.get('version')!r}")
    X = np.asarray(doc["train_inputs"], dtype=np.float64)
    return ConditionalKrrModel(
        kernel_from_dict(doc["kernel"]),
        basis_from_dict(doc["basis"]),
        X.reshape(X.shape[0], -1),
        np.asarray(doc["alpha"], dtype=np.float64),
        np.asarray(doc["beta"], dtype=np.float64),
        float(doc["ridge"]),
        doc.get("fit_report", {}),
    )
