"""Ridge estimator with a jointly estimated noise variance, and its GIC."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .basis import as_phi
from .core import (
    DegenerateVarianceError,
    FitError,
    FitResult,
    GicReport,
    GIC_MODES,
    ModelParams,
    SingularSystemError,
)

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500
DEFAULT_LAMBDA_GRID = np.logspace(-8, 2, 25)

# alpha below this fraction of mean(y^2) is treated as an interpolating fit
ALPHA_FLOOR = 1e-30
J_COND_LIMIT = 1e14


@dataclass(frozen=True)
class RidgeConfig:
    lam: float
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def neg2_loglik(X, y, alpha, beta):
    """``-2 * sum_i l_i`` for the Gaussian model."""
    r = y - X @ beta
    n = y.size
    return n * math.log(2.0 * math.pi * alpha) + float(r @ r) / alpha


def _solve_pd(A, b):
    try:
        c = linalg.cho_factor(A, check_finite=False)
    except linalg.LinAlgError:
        raise SingularSystemError("penalised normal equations are singular") from None
    return linalg.cho_solve(c, b, check_finite=False)


def _rel_change(a_old, b_old, a_new, b_new):
    num = max(abs(a_new - a_old), float(np.max(np.abs(b_new - b_old))))
    den = max(abs(a_new), float(np.max(np.abs(b_new))), np.finfo(float).tiny)
    return num / den


def alternate_alpha_beta(X, y, weights, tol, max_iter, alpha0=None, gram=None, objective=None):
    """Alternate ``beta = (G + n alpha W)^-1 X'y`` and ``alpha = RSS/n``.

    ``weights`` is the diagonal of W (a scalar ridge passes a constant vector).
    Without ``alpha0`` the first solve uses ``var(y)`` in place of alpha.
    Returns ``(alpha, beta, iterations, converged, trace)`` where ``trace``
    holds ``objective(alpha, beta)`` after each sweep when a callable is given.
    """
    n, m = X.shape
    G = X.T @ X if gram is None else gram
    b = X.T @ y
    w = np.broadcast_to(np.asarray(weights, dtype=float), (m,))
    if np.all(w == 0) and np.linalg.matrix_rank(X) < m:
        raise SingularSystemError(
            f"unpenalised fit needs full column rank; rank(Phi) < m={m}"
        )
    scale = float(y @ y) / n
    if alpha0 is None:
        alpha0 = float(np.var(y)) or scale or 1.0
    alpha = alpha0
    beta = _solve_pd(G + n * alpha * np.diag(w), b)
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = y - X @ beta
        alpha_new = float(r @ r) / n
        if not alpha_new > ALPHA_FLOOR * max(scale, np.finfo(float).tiny):
            raise DegenerateVarianceError(
                f"noise variance collapsed to {alpha_new:.3g} (fit interpolates the data)"
            )
        beta_new = _solve_pd(G + n * alpha_new * np.diag(w), b)
        change = _rel_change(alpha, beta, alpha_new, beta_new)
        alpha, beta = alpha_new, beta_new
        if objective is not None:
            trace.append(objective(alpha, beta))
        if change < tol:
            converged = True
            break
    # final alpha consistent with the returned beta
    r = y - X @ beta
    alpha = float(r @ r) / n
    if not alpha > ALPHA_FLOOR * max(scale, np.finfo(float).tiny):
        raise DegenerateVarianceError(
            f"noise variance collapsed to {alpha:.3g} (fit interpolates the data)"
        )
    return alpha, beta, it, converged, trace


def ridge_loss(X, y, alpha, beta, lam):
    """Penalised loss ``-2 sum l_i + n lam beta'beta``."""
    return neg2_loglik(X, y, alpha, beta) + y.size * lam * float(beta @ beta)


def ridge_fit(phi, ys, config: RidgeConfig) -> FitResult:
    """Fit ridge with alpha and beta estimated jointly by fixed-point iteration.

    Raises
    ------
    SingularSystemError
        ``lam == 0`` with a rank-deficient design.
    DegenerateVarianceError
        The variance iterate collapses (the fit interpolates the data).
    """
    X, _ = as_phi(phi)
    y = np.asarray(ys, dtype=float).ravel()
    lam = float(config.lam)
    alpha, beta, it, conv, trace = alternate_alpha_beta(
        X, y, lam, config.tol, config.max_iter,
        objective=lambda a, b: ridge_loss(X, y, a, b, lam),
    )
    if not conv:
        log.warning("ridge_fit: no convergence in %d iterations (lambda=%g)", it, lam)
    return FitResult(
        params=ModelParams(alpha, beta),
        lambda_state=lam,
        objective_trace=trace,
        iterations=it,
        converged=conv,
        method="ridge",
    )


def ridge_edf(phi, lam, alpha) -> float:
    """Effective degrees of freedom ``tr[(G + n lam alpha I)^-1 G]``."""
    X, _ = as_phi(phi)
    if lam < 0 or not alpha > 0:
        raise ValueError("need lam >= 0 and alpha > 0")
    n, m = X.shape
    G = X.T @ X
    if lam == 0 and np.linalg.matrix_rank(X) < m:
        raise SingularSystemError("edf at lambda=0 needs full column rank")
    A = G + n * lam * alpha * np.eye(m)
    return float(np.trace(_solve_pd(A, G)))


def information_matrices(X, y, alpha, beta, pen_hess, pen_grad, mode="expected"):
    """J and I of the GIC for a penalised Gaussian M-estimator.

    The estimating function is the negative gradient of
    ``-2 l_i(theta) + P(beta)``; ``pen_hess`` and ``pen_grad`` are the Hessian
    and gradient of the per-observation penalty ``P`` at ``beta``. In expected
    mode Gaussian moments at the estimate replace residual powers, which
    makes both matrices block diagonal.
    """
    if mode not in GIC_MODES:
        raise ValueError(f"mode must be one of {GIC_MODES}")
    n, m = X.shape
    G = X.T @ X
    J = np.zeros((m + 1, m + 1))
    I = np.zeros((m + 1, m + 1))
    J[1:, 1:] = (2.0 / alpha) * G + n * pen_hess
    if mode == "expected":
        J[0, 0] = n / alpha**2
        I[0, 0] = n / alpha**2
        I[1:, 1:] = (2.0 / alpha) * G
        return J, I
    eps = y - X @ beta
    J[0, 0] = float(np.sum(2.0 * eps**2 / alpha**3 - 1.0 / alpha**2))
    cross = (2.0 / alpha**2) * (X.T @ eps)
    J[0, 1:] = cross
    J[1:, 0] = cross
    # per-observation estimating function psi_i and score s_i
    psi = np.empty((n, m + 1))
    psi[:, 0] = eps**2 / alpha**2 - 1.0 / alpha
    psi[:, 1:] = (2.0 / alpha) * eps[:, None] * X - pen_grad[None, :]
    score = np.empty((n, m + 1))
    score[:, 0] = eps**2 / (2 * alpha**2) - 1.0 / (2 * alpha)
    score[:, 1:] = (eps / alpha)[:, None] * X
    I = psi.T @ score
    return J, I


def gic_from_blocks(X, y, alpha, beta, pen_hess, pen_grad, mode="expected") -> GicReport:
    """Assemble ``-2 sum l_i + 2 tr(J^-1 I)`` from penalty derivatives."""
    J, I = information_matrices(X, y, alpha, beta, pen_hess, pen_grad, mode)
    # Jacobi scaling leaves tr(J^-1 I) unchanged and tames huge clamped penalties
    d = np.sqrt(np.abs(np.diag(J)))
    d[d == 0] = 1.0
    Js = J / np.outer(d, d)
    Is = I / np.outer(d, d)
    cond = np.linalg.cond(Js)
    if not np.isfinite(cond) or cond > J_COND_LIMIT:
        raise FitError(f"GIC matrix J is singular (condition estimate {cond:.3g})")
    tr = float(np.trace(np.linalg.solve(Js, Is)))
    # the plug-in penalty can be concave in beta; an indefinite J is reported, not rejected
    min_eig = float(linalg.eigvalsh(0.5 * (Js + Js.T), subset_by_index=[0, 0])[0])
    return GicReport(
        neg2_loglik=neg2_loglik(X, y, alpha, beta),
        bias_term=2.0 * tr,
        mode=mode,
        info={"j_condition": float(cond), "j_min_eig_scaled": min_eig},
    )


def ridge_gic(phi, ys, fit: FitResult, mode="expected") -> GicReport:
    """GIC of a converged ridge fit."""
    X, _ = as_phi(phi)
    y = np.asarray(ys, dtype=float).ravel()
    if not fit.converged:
        raise FitError("ridge_gic requires a converged fit")
    lam = float(fit.lambda_state)
    beta = fit.params.beta
    m = beta.size
    return gic_from_blocks(
        X, y, fit.params.alpha, beta,
        pen_hess=2.0 * lam * np.eye(m),
        pen_grad=2.0 * lam * beta,
        mode=mode,
    )


def ridge_select(phi, ys, lambda_grid=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                 return_scores=False):
    """Pick the lambda on ``lambda_grid`` minimising the expected-mode GIC.

    Ties go to the larger lambda. Returns ``(lambda, FitResult)`` and, with
    ``return_scores``, also a list of ``(lambda, gic_total or nan)``.
    """
    grid = DEFAULT_LAMBDA_GRID if lambda_grid is None else np.asarray(lambda_grid, float).ravel()
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    if np.any(grid < 0):
        raise ValueError("lambda grid must be non-negative")
    best = None
    scores = []
    for lam in grid:
        try:
            fit = ridge_fit(phi, ys, RidgeConfig(float(lam), tol, max_iter))
            fit = fit.with_gic(ridge_gic(phi, ys, fit))
        except FitError as exc:
            log.info("ridge_select: lambda=%g failed: %s", lam, exc)
            scores.append((float(lam), float("nan")))
            continue
        total = fit.gic.total
        scores.append((float(lam), total))
        if best is None or total < best[1] or (total == best[1] and lam > best[0]):
            best = (float(lam), total, fit)
    if best is None:
        raise FitError("every lambda on the grid failed to fit")
    out = (best[0], best[2])
    return (*out, scores) if return_scores else out
