"""Linear AFT baselines.

PAFT maximizes the right-censored log-normal likelihood. SAFT minimizes the
induced-smoothed Gehan objective, whose gradient is the smoothed estimating
function. Rank fits leave the intercept open; it is recovered afterwards with
:func:`deepr_aft.core.intercept_offset`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.stats import norm

from deepr_aft.constants import (
    BANDWIDTHS, PAFT_GRAD_TOL, PAFT_MAX_ITER, SAFT_MAX_ITER, SAFT_ROOT_TOL, SAFT_STEP_TOL,
)
from deepr_aft.core import SurvivalDataset, intercept_offset, log_times, residuals
from deepr_aft.errors import DimensionError, InvalidArgumentError, SingularDesignError
from deepr_aft.gehan import full_gehan_loss

logger = logging.getLogger(__name__)

_BLOCK_ELEMENTS = 1 << 22


@dataclass(frozen=True, eq=False)
class LinearAftFit:
    """Coefficients of a linear AFT fit; ``beta[0]`` is the intercept."""

    beta: np.ndarray
    sigma: Optional[float]
    converged: bool
    iterations: int
    method: str
    loglik: Optional[float] = None

    @property
    def intercept(self) -> float:
        return float(self.beta[0])

    @property
    def slopes(self) -> np.ndarray:
        return self.beta[1:]

    def predict(self, covariates) -> np.ndarray:
        X = np.asarray(covariates, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.beta) - 1:
            raise DimensionError(f"expected {len(self.beta) - 1} covariates")
        return self.beta[0] + X @ self.beta[1:]


def _design(dataset: SurvivalDataset) -> np.ndarray:
    if dataset.n <= dataset.p + 1:
        raise InvalidArgumentError(f"need more than {dataset.p + 1} subjects, got {dataset.n}")
    Z = np.column_stack([np.ones(dataset.n), dataset.covariates])
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise SingularDesignError("design matrix with intercept is rank deficient")
    return Z


def _lognormal_terms(theta: np.ndarray, Z: np.ndarray, log_y: np.ndarray, delta: np.ndarray, want_hessian: bool = True):
    """Log-likelihood, gradient and Hessian in ``(beta, log sigma)``."""
    # trial steps far from the optimum may overflow; the line search rejects them
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        beta, eta = theta[:-1], theta[-1]
        sigma = np.exp(eta)
        z = (log_y - Z @ beta) / sigma
        zd, zc = z[delta], z[~delta]
        Zd, Zc = Z[delta], Z[~delta]

        loglik = float(np.sum(norm.logpdf(zd) - eta - log_y[delta]) + np.sum(norm.logsf(zc)))
        mills = np.exp(norm.logpdf(zc) - norm.logsf(zc))

        grad = np.empty_like(theta)
        grad[:-1] = Zd.T @ (zd / sigma) + Zc.T @ (mills / sigma)
        grad[-1] = np.sum(zd * zd - 1.0) + np.sum(mills * zc)
        if not want_hessian:
            return loglik, grad, None

        slope = mills * (mills - zc)
        hess = np.empty((len(theta), len(theta)))
        hess[:-1, :-1] = -(Zd.T @ Zd) / sigma ** 2 - (Zc.T * slope) @ Zc / sigma ** 2
        cross = -Zd.T @ (2.0 * zd) / sigma - Zc.T @ (slope * zc + mills) / sigma
        hess[:-1, -1] = cross
        hess[-1, :-1] = cross
        hess[-1, -1] = -np.sum(2.0 * zd * zd) - np.sum(zc * (slope * zc + mills))
        return loglik, grad, hess


def _ascent_direction(grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    curvature = -hess
    ridge = 0.0
    scale = max(1.0, float(np.abs(np.diag(curvature)).max()))
    for _ in range(30):
        try:
            chol = np.linalg.cholesky(curvature + ridge * np.eye(len(grad)))
            return np.linalg.solve(chol.T, np.linalg.solve(chol, grad))
        except np.linalg.LinAlgError:
            ridge = scale * 1e-8 if ridge == 0.0 else ridge * 10.0
    return grad / scale


def fit_paft_lognormal(dataset: SurvivalDataset, max_iter: int = PAFT_MAX_ITER, tol: float = PAFT_GRAD_TOL,
                       history: Optional[list] = None) -> LinearAftFit:
    """Log-normal AFT maximum likelihood by damped Newton ascent.

    Censored subjects contribute their log survivor function, failures their
    log density. Iteration stops when the gradient max-norm drops below
    ``tol``; otherwise the last iterate is returned with ``converged=False``.
    If ``history`` is given it receives the log-likelihood of the starting
    point and of every accepted iterate.

    Raises:
        EmptyEventError: If no failures are observed.
        SingularDesignError: If the design with intercept is rank deficient.
    """
    dataset.require_events()
    Z = _design(dataset)
    log_y = log_times(dataset)
    delta = dataset.event

    beta0, *_ = np.linalg.lstsq(Z, log_y, rcond=None)
    spread = float(np.std(log_y - Z @ beta0))
    theta = np.append(beta0, np.log(max(spread, 1e-3)))

    loglik, grad, hess = _lognormal_terms(theta, Z, log_y, delta)
    if history is not None:
        history.append(loglik)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if np.max(np.abs(grad)) < tol:
            converged = True
            iterations -= 1
            break
        direction = _ascent_direction(grad, hess)
        step = 1.0
        accepted = False
        for _ in range(60):
            candidate = theta + step * direction
            cand_loglik, cand_grad, cand_hess = _lognormal_terms(candidate, Z, log_y, delta)
            if np.isfinite(cand_loglik) and cand_loglik >= loglik:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = np.max(np.abs(grad)) < tol
            break
        theta, loglik, grad, hess = candidate, cand_loglik, cand_grad, cand_hess
        if history is not None:
            history.append(loglik)
    else:
        converged = np.max(np.abs(grad)) < tol

    if not converged:
        logger.warning("PAFT did not converge after %d iterations (max |grad| = %.3g)", iterations, np.max(np.abs(grad)))
    return LinearAftFit(theta[:-1].copy(), float(np.exp(theta[-1])), bool(converged), iterations, "paft", loglik)


def _smoothed_pass(beta: np.ndarray, dataset: SurvivalDataset, bandwidth: str, want_hessian: bool):
    """Value, gradient and optionally Hessian of the smoothed Gehan objective."""
    if bandwidth not in BANDWIDTHS:
        raise InvalidArgumentError(f"unknown bandwidth '{bandwidth}'")
    X = dataset.covariates
    n, p = X.shape
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if len(beta) != p:
        raise DimensionError(f"expected {p} slopes, got {len(beta)}")
    e = log_times(dataset) - X @ beta
    anchors = np.flatnonzero(dataset.event)

    value = 0.0
    grad = np.zeros(p)
    hess = np.zeros((p, p)) if want_hessian else None
    block = max(1, _BLOCK_ELEMENTS // max(n * p, 1))
    for start in range(0, len(anchors), block):
        rows = anchors[start:start + block]
        diff_x = X[rows, None, :] - X[None, :, :]
        quad = np.einsum("cnp,cnp->cn", diff_x, diff_x) / n
        r = quad if bandwidth == "quadratic" else np.sqrt(quad)
        gap = e[None, :] - e[rows, None]
        smooth = r > 0
        r_safe = np.where(smooth, r, 1.0)
        u = gap / r_safe
        cdf = np.where(smooth, norm.cdf(u), np.where(gap > 0, 1.0, np.where(gap == 0, 0.5, 0.0)))
        pdf = np.where(smooth, norm.pdf(u), 0.0)
        value += float(np.sum(np.where(smooth, gap * cdf + r * pdf, np.maximum(gap, 0.0))))
        grad += np.einsum("cn,cnp->p", cdf, diff_x)
        if want_hessian:
            weight = (pdf / r_safe).reshape(-1, 1)
            flat = diff_x.reshape(-1, p)
            hess += flat.T @ (flat * weight)
    return value, grad, hess


def smoothed_estimating_function(beta, dataset: SurvivalDataset, bandwidth: str = "quadratic") -> np.ndarray:
    """Induced-smoothed Gehan estimating function.

    ``sum_i sum_j Δ_i (x_i - x_j) Φ((e_j - e_i) / r_ij)`` with
    ``r_ij = |x_i - x_j|^2 / n`` (``bandwidth="quadratic"``) or its square
    root (``"sqrt"``). Pairs with identical covariates fall back to the
    indicator ``I(e_j >= e_i)`` valued 1/2 at ties.
    """
    _, grad, _ = _smoothed_pass(beta, dataset, bandwidth, want_hessian=False)
    return grad


def smoothed_gehan_objective(beta, dataset: SurvivalDataset, bandwidth: str = "quadratic") -> float:
    """Convex surrogate whose gradient is :func:`smoothed_estimating_function`."""
    value, _, _ = _smoothed_pass(beta, dataset, bandwidth, want_hessian=False)
    return value


def gehan_objective(beta, dataset: SurvivalDataset) -> float:
    """Unsmoothed Gehan loss at slope vector ``beta``."""
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if len(beta) != dataset.p:
        raise DimensionError(f"expected {dataset.p} slopes, got {len(beta)}")
    return full_gehan_loss(residuals(dataset, dataset.covariates @ beta), dataset.event)


def fit_saft_gehan(dataset: SurvivalDataset, bandwidth: str = "quadratic", centering: str = "event_mean",
                   max_iter: int = SAFT_MAX_ITER, tol: float = SAFT_STEP_TOL,
                   initial: Optional[np.ndarray] = None) -> LinearAftFit:
    """Rank-based AFT slopes from the induced-smoothed Gehan objective.

    Starts from the PAFT slopes and takes Newton steps with backtracking
    until the update max-norm falls below ``tol``. The fit counts as
    converged only if the scaled estimating function
    ``|U|_inf / (n * n_events)`` is also below the root tolerance.
    """
    dataset.require_events()
    if initial is None:
        initial = fit_paft_lognormal(dataset).slopes
    beta = np.asarray(initial, dtype=float).copy()

    value, grad, hess = _smoothed_pass(beta, dataset, bandwidth, want_hessian=True)
    step_converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(hess + 1e-12 * np.trace(hess) * np.eye(len(beta)), grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        slope = float(grad @ step)
        if slope <= 0:
            step, slope = grad, float(grad @ grad)
        t = 1.0
        for _ in range(60):
            candidate = beta - t * step
            cand_value = smoothed_gehan_objective(candidate, dataset, bandwidth)
            if cand_value <= value - 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            candidate, cand_value = beta, value
        update = np.max(np.abs(candidate - beta))
        beta = candidate
        value, grad, hess = _smoothed_pass(beta, dataset, bandwidth, want_hessian=True)
        logger.debug("SAFT iteration %d: objective %.6f, update %.3g", iterations, value, update)
        if update < tol:
            step_converged = True
            break

    root = float(np.max(np.abs(grad))) / (dataset.n * dataset.n_events)
    converged = bool(step_converged and root < SAFT_ROOT_TOL)
    if not converged:
        logger.warning("SAFT did not converge after %d iterations (scaled root %.3g)", iterations, root)
    offset = intercept_offset(dataset, dataset.covariates @ beta, centering)
    return LinearAftFit(np.append(offset, beta), None, converged, iterations, "saft")


def _event_pairs(dataset: SurvivalDataset) -> Tuple[np.ndarray, np.ndarray]:
    anchors = np.flatnonzero(dataset.event)
    n = dataset.n
    first = np.repeat(anchors, n)
    second = np.tile(np.arange(n), len(anchors))
    keep = first != second
    return first[keep], second[keep]


def fit_gehan_lp(dataset: SurvivalDataset, centering: str = "event_mean") -> LinearAftFit:
    """Exact minimizer of the unsmoothed Gehan loss, solved as a linear program.

    Minimizes ``sum_k u_k`` subject to ``u_k >= d_k(beta)`` and ``u_k >= 0``,
    where ``d_k = e_j - e_i`` for every event-anchored pair. All pairs are
    materialized, so this is meant for small samples.
    """
    dataset.require_events()
    X = dataset.covariates
    log_y = log_times(dataset)
    first, second = _event_pairs(dataset)
    m, p = len(first), dataset.p
    # d_k = (logY_j - logY_i) + (x_i - x_j) beta
    offsets = log_y[second] - log_y[first]
    slopes = X[first] - X[second]
    constraints = sparse.hstack([sparse.csr_matrix(slopes), -sparse.identity(m, format="csr")], format="csr")
    cost = np.concatenate([np.zeros(p), np.ones(m)])
    bounds = [(None, None)] * p + [(0, None)] * m
    result = linprog(cost, A_ub=constraints, b_ub=-offsets, bounds=bounds, method="highs")
    if result.x is None:
        raise InvalidArgumentError(f"Gehan linear program failed: {result.message}")
    beta = result.x[:p]
    offset = intercept_offset(dataset, X @ beta, centering)
    return LinearAftFit(np.append(offset, beta), None, bool(result.status == 0), int(getattr(result, "nit", 0)), "gehan_lp")
