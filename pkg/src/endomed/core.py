"""Dense estimation primitives: OLS, exactly identified IVE, influence values, probit.

All fitters work on plain ``numpy`` arrays.  Regressor and instrument columns
are scaled to unit Euclidean norm before factorisation, so the singularity test
(reciprocal condition number below :data:`RCOND_TOL`) does not depend on the
units of the covariates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy import special

from .errors import (
    DegenerateResponse,
    DimensionMismatch,
    NotConverged,
    SeparationDetected,
    SingularDesign,
)

RCOND_TOL = 1e-12
PROBIT_GTOL = 1e-8
PROBIT_MAX_ITER = 100
SEPARATION_NORM = 1e4
# largest per-unit -log fitted probability that still counts as separation
SEPARATION_LOGLIK = 1e-6


@dataclass(frozen=True)
class FitResult:
    """Output of :func:`ols_fit` and :func:`ive_fit`.

    ``cross_moment_inverse`` is ``(N^-1 sum_i P_i Q_i')^-1`` with ``P = Q`` for OLS.
    """

    coefficients: np.ndarray
    residuals: np.ndarray
    cross_moment_inverse: np.ndarray
    rcond: float

    @property
    def n(self) -> int:
        return self.residuals.shape[0]


@dataclass(frozen=True)
class ProbitFit:
    theta: np.ndarray
    converged: bool
    iterations: int
    final_gradient_norm: float
    loglik: float
    cov: np.ndarray
    loglik_path: tuple[float, ...] = field(default=(), repr=False)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))


def normal_cdf(x):
    """Standard normal distribution function.

    Accepts scalars or arrays; scalars come back as ``float``.
    """
    out = special.ndtr(x)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _as_vector(v, n: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != n:
        raise DimensionMismatch(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def _column_scale(a: np.ndarray, name: str) -> np.ndarray:
    scale = np.linalg.norm(a, axis=0)
    if np.any(scale == 0.0):
        idx = np.flatnonzero(scale == 0.0).tolist()
        raise SingularDesign(f"{name} has all-zero columns {idx}", rcond=0.0)
    return scale


def ols_fit(Q, y) -> FitResult:
    """Least squares of ``y`` on the columns of ``Q`` via a QR factorisation."""
    Q = _as_matrix(Q, "Q")
    n, k = Q.shape
    y = _as_vector(y, n, "y")
    if n <= k:
        raise DimensionMismatch(f"need more rows than columns, got {n}x{k}")

    scale = _column_scale(Q, "Q")
    qmat, r = np.linalg.qr(Q / scale)
    sv = np.linalg.svd(r, compute_uv=False)
    # rcond of the Gram matrix is the squared rcond of R
    rcond = float((sv[-1] / sv[0]) ** 2) if sv[0] > 0 else 0.0
    if not rcond >= RCOND_TOL:
        raise SingularDesign(f"Gram matrix is singular (rcond={rcond:.2e})", rcond=rcond)

    coef = sla.solve_triangular(r, qmat.T @ y) / scale
    resid = y - Q @ coef
    r_inv = sla.solve_triangular(r, np.eye(k))
    a_inv = n * (r_inv @ r_inv.T) / np.outer(scale, scale)
    return FitResult(coef, resid, a_inv, rcond)


def ive_fit(Q_reg, P_inst, y) -> FitResult:
    """Exactly identified instrumental-variable estimator ``(P'Q)^-1 P'y``."""
    Q = _as_matrix(Q_reg, "Q_reg")
    P = _as_matrix(P_inst, "P_inst")
    n, k = Q.shape
    if P.shape != Q.shape:
        raise DimensionMismatch(
            f"instrument matrix shape {P.shape} differs from regressor shape {Q.shape}"
        )
    y = _as_vector(y, n, "y")
    if n <= k:
        raise DimensionMismatch(f"need more rows than columns, got {n}x{k}")

    sq = _column_scale(Q, "Q_reg")
    sp = _column_scale(P, "P_inst")
    a_scaled = (P / sp).T @ (Q / sq)
    sv = np.linalg.svd(a_scaled, compute_uv=False)
    rcond = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    if not rcond >= RCOND_TOL:
        raise SingularDesign(
            f"instrument/regressor cross-moment is singular (rcond={rcond:.2e})", rcond=rcond
        )

    lu = sla.lu_factor(a_scaled)
    coef = sla.lu_solve(lu, (P / sp).T @ y) / sq
    resid = y - Q @ coef
    # A = P'Q/N = diag(sp) a_scaled diag(sq) / N
    a_inv = n * sla.lu_solve(lu, np.eye(k)) / np.outer(sq, sp)
    return FitResult(coef, resid, a_inv, rcond)


def influence_values(G, cross_moment_inverse, P_inst, residuals) -> np.ndarray:
    """Per-observation influence values ``G A^-1 P_i u_i`` of the contrast ``G b``."""
    G = np.asarray(G, dtype=float).reshape(-1)
    a_inv = np.asarray(cross_moment_inverse, dtype=float)
    P = np.asarray(P_inst, dtype=float)
    u = np.asarray(residuals, dtype=float).reshape(-1)
    k = G.shape[0]
    if a_inv.shape != (k, k):
        raise DimensionMismatch(f"cross-moment inverse has shape {a_inv.shape}, expected {(k, k)}")
    if P.ndim != 2 or P.shape[1] != k:
        raise DimensionMismatch(f"instrument matrix has shape {P.shape}, expected (N, {k})")
    if u.shape[0] != P.shape[0]:
        raise DimensionMismatch(f"residuals have length {u.shape[0]}, expected {P.shape[0]}")
    return (P @ (G @ a_inv)) * u


def influence_se(lam) -> float:
    """Standard error ``sqrt(N^-1 sum lam_i^2 / N)`` from influence values."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[0]
    return float(np.sqrt(np.mean(lam**2) / n))


def _probit_parts(X: np.ndarray, z: np.ndarray, theta: np.ndarray):
    eta = X @ theta
    log_cdf = special.log_ndtr(eta)
    log_sf = special.log_ndtr(-eta)
    log_pdf = -0.5 * eta**2 - 0.5 * np.log(2.0 * np.pi)
    loglik = float(np.sum(np.where(z == 1, log_cdf, log_sf)))
    # generalized residual: phi/Phi for z=1, -phi/(1-Phi) for z=0
    gres = np.where(z == 1, np.exp(log_pdf - log_cdf), -np.exp(log_pdf - log_sf))
    grad = X.T @ gres
    w = np.exp(2.0 * log_pdf - log_cdf - log_sf)
    info = (X * w[:, None]).T @ X
    return loglik, grad, info


def probit_loglik(X, z, theta) -> float:
    X = _as_matrix(X, "X")
    z = np.asarray(z).reshape(-1)
    return _probit_parts(X, z, np.asarray(theta, dtype=float))[0]


def probit_gradient(X, z, theta) -> np.ndarray:
    X = _as_matrix(X, "X")
    z = np.asarray(z).reshape(-1)
    return _probit_parts(X, z, np.asarray(theta, dtype=float))[1]


def probit_fit(
    X,
    z,
    *,
    tol: float = PROBIT_GTOL,
    max_iter: int = PROBIT_MAX_ITER,
    raise_on_failure: bool = True,
) -> ProbitFit:
    """Probit maximum likelihood by Fisher scoring with step halving.

    Convergence is declared when the infinity norm of the log-likelihood
    gradient is at most ``tol``.  ``X`` must carry its own intercept column.
    """
    X = _as_matrix(X, "X")
    n, k = X.shape
    z = np.asarray(z).reshape(-1)
    if z.shape[0] != n:
        raise DimensionMismatch(f"z has length {z.shape[0]}, expected {n}")
    if not np.all((z == 0) | (z == 1)):
        raise ValueError("z must be binary (0/1)")
    z = z.astype(np.int8)
    if z.min() == z.max():
        raise DegenerateResponse(f"response is constant ({int(z[0])}); probit is undefined")

    theta = np.zeros(k)
    loglik, grad, info = _probit_parts(X, z, theta)
    path = [loglik]
    gnorm = float(np.max(np.abs(grad)))
    it = 0
    while gnorm > tol and it < max_iter:
        it += 1
        try:
            step = sla.solve(info, grad, assume_a="pos")
        except (sla.LinAlgError, ValueError) as exc:
            raise SingularDesign(f"probit information matrix is singular: {exc}") from exc
        t = 1.0
        floor = loglik - 1e-12 * max(1.0, abs(loglik))
        for _ in range(60):
            cand = theta + t * step
            cand_ll, cand_grad, cand_info = _probit_parts(X, z, cand)
            if np.isfinite(cand_ll) and cand_ll >= floor:
                break
            t *= 0.5
        else:
            break
        theta = cand
        loglik, grad, info = cand_ll, cand_grad, cand_info
        path.append(loglik)
        gnorm = float(np.max(np.abs(grad)))
        if np.linalg.norm(theta) > SEPARATION_NORM:
            raise SeparationDetected(
                f"probit coefficients diverge (|theta|={np.linalg.norm(theta):.3g}); "
                "the response is (quasi-)separated by X"
            )

    # under complete separation the gradient dies out before theta gets large:
    # every unit ends up fitted with probability ~1 and the optimum is at infinity
    eta = X @ theta
    worst = float(np.max(-np.where(z == 1, special.log_ndtr(eta), special.log_ndtr(-eta))))
    if worst < SEPARATION_LOGLIK:
        raise SeparationDetected(
            f"every observation is fitted with probability above {1 - SEPARATION_LOGLIK:g}; "
            "the response is separated by X"
        )
    converged = gnorm <= tol
    if not converged and raise_on_failure:
        raise NotConverged(it, gnorm)
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.full((k, k), np.nan)
    return ProbitFit(theta, converged, it, gnorm, loglik, cov, tuple(path))
