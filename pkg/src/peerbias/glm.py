"""Logistic (IRLS) and linear least-squares fitting with Wald inference.

Written from scratch on numpy/scipy linear algebra so the test harness has no
dependency on a stats package, and so failure modes (separation, rank
deficiency, non-convergence) surface as typed exceptions instead of warnings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import TestOutcome

SEPARATION_BOUND = 30.0     # |coefficient| beyond this means the logit is saturated
PERFECT_FIT_DEVIANCE = 1e-6  # binary data fit this well means a divergent MLE
PIVOT_RTOL = 1e-12          # rank threshold relative to the largest pivot
SCORE_TOL = 1e-8
DEVIANCE_TOL = 1e-10
MAX_ITER = 100


class GlmError(Exception):
    """Base class for fit failures."""


class RankDeficientError(GlmError):
    pass


class SeparationError(GlmError):
    pass


class NonConvergenceError(GlmError):
    pass


@dataclass(frozen=True)
class GlmFit:
    coefficients: np.ndarray
    covariance: np.ndarray
    converged: bool
    iterations: int
    deviance: float


def _check_design(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("design matrix must be 2-dimensional")
    if y.shape != (X.shape[0],):
        raise ValueError("response length does not match design rows")
    if X.shape[0] < X.shape[1]:
        raise RankDeficientError("fewer rows than columns")
    return X, y


def _qr_full_rank(X: np.ndarray) -> bool:
    """Rank-revealing pivoted QR; pivots below PIVOT_RTOL of the largest mean rank loss."""
    _, r, _ = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    return diag.size > 0 and diag[0] > 0.0 and diag.min() >= PIVOT_RTOL * diag[0]


def _assert_full_rank(X: np.ndarray) -> None:
    """Certify column rank before any fit.

    A pivoted Cholesky of the Gram matrix screens cheaply; its tolerance is
    far coarser than PIVOT_RTOL, so a clean screen cannot hide a pivot the QR
    check would reject. Only flagged designs pay for the pivoted QR, which
    makes the final call.
    """
    k = X.shape[1]
    if k == 0:
        raise RankDeficientError("design matrix has no columns")
    _, _, rank, _ = scipy.linalg.lapack.dpstrf(X.T @ X, lower=1)
    if rank == k:
        return
    if not _qr_full_rank(X):
        raise RankDeficientError("design matrix is rank deficient")


def _solve_weighted(X: np.ndarray, sqrt_w: np.ndarray, z: np.ndarray) -> np.ndarray:
    """One weighted least-squares step by normal equations.

    The design's rank is certified once per fit by _assert_full_rank; with the
    weight floor the weighted Gram matrix is then positive definite, so a
    Cholesky failure here means severe ill-conditioning, reported as rank loss.
    """
    A = X * sqrt_w[:, None]
    gram = A.T @ A
    try:
        factor = scipy.linalg.cho_factor(gram)
        return scipy.linalg.cho_solve(factor, A.T @ (z * sqrt_w))
    except scipy.linalg.LinAlgError as exc:
        raise RankDeficientError("weighted system numerically singular") from exc


def _inv_from_gram(X: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
    A = X if w is None else X * np.sqrt(w)[:, None]
    gram = A.T @ A
    try:
        factor = scipy.linalg.cho_factor(gram)
    except scipy.linalg.LinAlgError as exc:
        raise RankDeficientError("weighted system numerically singular") from exc
    return scipy.linalg.cho_solve(factor, np.eye(gram.shape[0]))


def logistic_loglik(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = X @ beta
    # log(1 + e^eta) computed stably
    return float(y @ eta - np.logaddexp(0.0, eta).sum())


def logistic_score(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> np.ndarray:
    p = 1.0 / (1.0 + np.exp(-(X @ beta)))
    return X.T @ (y - p)


def fit_logistic(X: np.ndarray, y: np.ndarray, tol: float = SCORE_TOL,
                 max_iter: int = MAX_ITER) -> GlmFit:
    """Maximum-likelihood logistic fit by iteratively reweighted least squares.

    Convergence means the score-vector sup-norm fell below ``tol``; the
    covariance is the inverse observed Fisher information at the optimum.
    Raises SeparationError when a coefficient runs past the saturation bound
    and NonConvergenceError when neither the score nor the deviance settles.
    """
    X, y = _check_design(X, y)
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("logistic response must be 0/1")
    _assert_full_rank(X)
    beta = np.zeros(X.shape[1])
    deviance = -2.0 * logistic_loglik(X, y, beta)
    for iteration in range(1, max_iter + 1):
        eta = X @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        w = np.maximum(p * (1.0 - p), 1e-12)
        z = eta + (y - p) / w
        beta = _solve_weighted(X, np.sqrt(w), z)
        if np.any(np.abs(beta) > SEPARATION_BOUND):
            raise SeparationError("coefficient exceeded the saturation bound; "
                                  "data are (quasi-)separated")
        score = logistic_score(X, y, beta)
        new_dev = -2.0 * logistic_loglik(X, y, beta)
        score_norm = float(np.max(np.abs(score))) if score.size else 0.0
        dev_change = abs(new_dev - deviance)
        deviance = new_dev
        if score_norm <= tol or dev_change <= DEVIANCE_TOL:
            if deviance <= PERFECT_FIT_DEVIANCE:
                # a perfect fit of 0/1 data means the likelihood has no
                # maximizer; the score can dip under tol while beta diverges
                raise SeparationError("perfect fit of binary data; "
                                      "data are (quasi-)separated")
            if score_norm <= tol:
                p = 1.0 / (1.0 + np.exp(-(X @ beta)))
                cov = _inv_from_gram(X, np.maximum(p * (1.0 - p), 1e-12))
                return GlmFit(beta, cov, True, iteration, deviance)
            break
    raise NonConvergenceError(f"IRLS did not reach score norm {tol} in {max_iter} iterations")


def fit_linear(X: np.ndarray, y: np.ndarray) -> GlmFit:
    """Ordinary least squares with the usual sigma^2 (X'X)^-1 covariance."""
    X, y = _check_design(X, y)
    _assert_full_rank(X)
    beta = _solve_weighted(X, np.ones(X.shape[0]), y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    dof = X.shape[0] - X.shape[1]
    sigma2 = rss / dof if dof > 0 else 0.0
    cov = _inv_from_gram(X) * sigma2
    return GlmFit(beta, cov, True, 1, rss)


def wald_test(fit: GlmFit, index: int, alpha: float) -> TestOutcome:
    """Two-sided z-test of one coefficient against zero.

    Uses the normal reference distribution for linear fits as well; every
    caller in this package has hundreds of residual degrees of freedom.
    """
    if not fit.converged:
        raise ValueError("Wald test requires a converged fit")
    k = fit.coefficients.size
    if not 0 <= index < k:
        raise IndexError(f"coefficient index {index} out of range for {k} coefficients")
    se = math.sqrt(max(float(fit.covariance[index, index]), 0.0))
    if se == 0.0:
        raise ValueError("zero standard error; Wald statistic undefined")
    z = float(fit.coefficients[index]) / se
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return TestOutcome(reject=p <= alpha, statistic=z, p_value=p,
                       effect_size=float(fit.coefficients[index]), method="wald")


def reviewer_effect_columns(reviewer_ids: np.ndarray) -> np.ndarray:
    """One-hot block for per-reviewer intercepts, first observed level dropped."""
    reviewer_ids = np.asarray(reviewer_ids)
    levels = np.unique(reviewer_ids)
    cols = np.zeros((reviewer_ids.size, max(levels.size - 1, 0)))
    for j, level in enumerate(levels[1:]):
        cols[:, j] = reviewer_ids == level
    return cols
