"""RBF-kernel support vector machine trained with sequential minimal optimization.

The dual

    max_a  sum(a) - 1/2 a^T Q a,   Q_ij = y_i y_j K(x_i, x_j),   0 <= a_i <= C,  y^T a = 0

is solved two multipliers at a time, picking the maximal KKT-violating pair
at each step and solving the two-variable subproblem in closed form. Labels
0/1 map to -1/+1 internally (1 = NLoS).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .forest import standardizer

log = logging.getLogger(__name__)

TAU = 1e-12


@dataclass(frozen=True)
class SvmConfig:
    c: float = 1.0
    rbf_gamma: float | None = None  # None -> 1 / n_features
    tolerance: float = 1e-3
    max_passes: int = 100_000

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be > 0")
        if self.rbf_gamma is not None and self.rbf_gamma <= 0:
            raise ValueError("rbf_gamma must be > 0")


def rbf_kernel(u: np.ndarray, v: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||u - v||^2) between the rows of ``u`` and ``v``."""
    u = np.atleast_2d(u)
    v = np.atleast_2d(v)
    sq = (u * u).sum(1)[:, None] + (v * v).sum(1)[None, :] - 2.0 * u @ v.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class SvmModel:
    support_x: np.ndarray
    support_coef: np.ndarray  # alpha_i * y_i
    rho: float
    gamma: float
    mean: np.ndarray
    scale: np.ndarray
    converged: bool = True
    iterations: int = 0
    objective: list[float] = field(default_factory=list)

    def decision_function(self, x) -> np.ndarray:
        z = (np.atleast_2d(np.asarray(x, dtype=float)) - self.mean) / self.scale
        if self.support_x.shape[0] == 0:
            return np.full(len(z), -self.rho)
        return rbf_kernel(z, self.support_x, self.gamma) @ self.support_coef - self.rho

    def predict(self, x) -> np.ndarray:
        return (self.decision_function(x) > 0).astype(int)


def _smo(k: np.ndarray, y: np.ndarray, c: float, tol: float, max_iter: int, track: bool):
    n = len(y)
    q = (y[:, None] * y[None, :]) * k
    qd = np.diag(q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a^T Q a - e^T a
    objective = []
    converged = False
    it = 0
    while it < max_iter:
        yg = -y * grad
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, yg, -np.inf)))
        j = int(np.argmin(np.where(low, yg, np.inf)))
        if yg[i] - yg[j] < tol:
            converged = True
            break
        it += 1
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(qd[i] + qd[j] + 2.0 * q[i, j], TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > c:
                    ni, nj = c, c - diff
            elif nj > c:
                nj, ni = c, c + diff
        else:
            quad = max(qd[i] + qd[j] - 2.0 * q[i, j], TAU)
            delta = (grad[i] - grad[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > c:
                if ni > c:
                    ni, nj = c, total - c
            elif nj < 0:
                nj, ni = 0.0, total
            if total > c:
                if nj > c:
                    nj, ni = c, total - c
            elif ni < 0:
                ni, nj = 0.0, total
        alpha[i], alpha[j] = ni, nj
        grad += q[:, i] * (ni - ai) + q[:, j] * (nj - aj)
        if track:
            objective.append(float(-0.5 * alpha @ (grad - 1.0)))
    # bias from free multipliers, or the midpoint of the feasible interval
    yg = y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        rho = float(np.mean(yg[free]))
    else:
        ub_mask = ((y > 0) & (alpha >= c)) | ((y < 0) & (alpha <= 0))
        lb_mask = ((y > 0) & (alpha <= 0)) | ((y < 0) & (alpha >= c))
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float(0.5 * (ub + lb)) if np.isfinite(ub + lb) else 0.0
    return alpha, rho, converged, it, objective


def fit_svm(x, y, cfg: SvmConfig = SvmConfig(), track_objective: bool = False) -> SvmModel:
    """Fit on standardized features; warns (and flags) if SMO hits ``max_passes``."""
    x = np.asarray(x, dtype=float)
    y01 = np.asarray(y, dtype=int)
    if len(np.unique(y01)) < 2:
        raise ValueError("SVM training needs both classes")
    mean, scale = standardizer(x)
    z = (x - mean) / scale
    gamma = cfg.rbf_gamma if cfg.rbf_gamma is not None else 1.0 / x.shape[1]
    ys = np.where(y01 == 1, 1.0, -1.0)
    k = rbf_kernel(z, z, gamma)
    alpha, rho, converged, it, objective = _smo(k, ys, cfg.c, cfg.tolerance, cfg.max_passes, track_objective)
    if not converged:
        warnings.warn(f"SMO stopped after {it} iterations without meeting tolerance {cfg.tolerance}")
    sv = alpha > 0
    log.debug("SMO: %d iterations, %d support vectors", it, int(sv.sum()))
    return SvmModel(z[sv], alpha[sv] * ys[sv], rho, gamma, mean, scale, converged, it, objective)


def predict_svm(model: SvmModel, x) -> np.ndarray | int:
    x = np.asarray(x, dtype=float)
    out = model.predict(x)
    return int(out[0]) if x.ndim == 1 else out
