"""
Profiled likelihood engine.

For fixed (beta, theta) the spherical random effects u~ minimize the penalized
residual sum of squares

    g(u) = ||y - X beta - Z Lambda u||^2 + ||u||^2,

solved through the Cholesky factor L of (Z Lambda)^T Z Lambda + I_q. The full
log-likelihood is

    l(beta, theta, sigma2) = -(n/2) log(2 pi sigma2) - (1/2) log|L|^2 - g(u~) / (2 sigma2)

and profiling sigma2 = g(u~)/n out gives

    -2 l~(beta, theta) = log|L|^2 + n [1 + log(2 pi g(u~) / n)].

No explicit inverse of X, Z or the q x q system is ever formed.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.stats import multivariate_normal

from lmm_select.exceptions import (
    DegenerateFitError,
    DimensionError,
    InvalidParameterError,
    NumericalError,
)
from lmm_select.models import CovarianceTemplate, LmmDataset, check_theta, materialize_lambda

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
FACTOR_CACHE_SIZE = 64


@dataclass(frozen=True)
class SphericalSolve:
    """Conditional modes u~, log|L_theta|^2 and g(u~) for one (beta, theta)."""

    u_tilde: np.ndarray
    L_theta_logdet2: float
    g_value: float


@dataclass(frozen=True)
class _Factorization:
    z_lambda: np.ndarray
    factor: Tuple[np.ndarray, bool]
    logdet2: float


@lru_cache(maxsize=FACTOR_CACHE_SIZE)
def _factorize(data: LmmDataset, template: CovarianceTemplate, theta_key: bytes) -> _Factorization:
    # Finite-difference steps in beta share theta, so they share this factor.
    theta = np.frombuffer(theta_key, dtype=float)
    z_lambda = data.Z @ materialize_lambda(template, theta)
    z_lambda.setflags(write=False)
    if template.q == 0:
        return _Factorization(z_lambda, (np.zeros((0, 0)), True), 0.0)
    gram = z_lambda.T @ z_lambda
    gram[np.diag_indices_from(gram)] += 1.0
    try:
        factor = cho_factor(gram, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as e:
        raise NumericalError(f"Cholesky factorization of L_theta failed (non-finite input?): {e}")
    logdet2 = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    return _Factorization(z_lambda, factor, logdet2)


def clear_factor_cache() -> None:
    _factorize.cache_clear()


def _check_inputs(data: LmmDataset, template: CovarianceTemplate, beta, theta):
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != data.p:
        raise DimensionError(f"beta has length {beta.shape[0]}, expected {data.p}", index=beta.shape[0])
    if template.q != data.q:
        raise DimensionError(f"template has q={template.q} but Z has {data.q} columns", index=data.q)
    theta = check_theta(template, theta)
    return beta, theta


def solve_spherical_modes(data: LmmDataset, template: CovarianceTemplate, beta, theta) -> SphericalSolve:
    """
    Solve ((Z Lambda)^T Z Lambda + I) u~ = (Z Lambda)^T (y - X beta).

    Args:
        data: Dataset
        template: Covariance template matching Z
        beta: Fixed effects, length p
        theta: Admissible variance components

    Returns:
        SphericalSolve with u~, log|L_theta|^2 (>= 0) and g(u~) (>= 0)
    """
    beta, theta = _check_inputs(data, template, beta, theta)
    fact = _factorize(data, template, theta.tobytes())
    residual0 = data.y - data.X @ beta
    if template.q == 0:
        return SphericalSolve(np.zeros(0), 0.0, float(residual0 @ residual0))
    u_tilde = cho_solve(fact.factor, fact.z_lambda.T @ residual0)
    residual = residual0 - fact.z_lambda @ u_tilde
    g_value = float(residual @ residual + u_tilde @ u_tilde)
    return SphericalSolve(u_tilde=u_tilde, L_theta_logdet2=fact.logdet2, g_value=g_value)


def penalized_rss(data: LmmDataset, template: CovarianceTemplate, beta, theta, u) -> float:
    """g(u) for an arbitrary u (not necessarily the minimizer)."""
    beta, theta = _check_inputs(data, template, beta, theta)
    u = np.asarray(u, dtype=float).reshape(-1)
    residual = data.y - data.X @ beta - data.Z @ (materialize_lambda(template, theta) @ u)
    return float(residual @ residual + u @ u)


def profile_sigma2(g_value: float, n_obs: int) -> float:
    """Maximizer of the full log-likelihood in sigma2: g(u~)/n."""
    if n_obs < 1:
        raise InvalidParameterError(f"n_obs must be >= 1, got {n_obs}")
    return g_value / n_obs


def full_loglik(data: LmmDataset, template: CovarianceTemplate, beta, theta, sigma2: float) -> float:
    """
    Log-likelihood l(beta, theta, sigma2 | y).

    Raises:
        InvalidParameterError: If sigma2 <= 0
    """
    if not sigma2 > 0:
        raise InvalidParameterError(f"sigma2 must be > 0, got {sigma2}")
    solve = solve_spherical_modes(data, template, beta, theta)
    n = data.n_obs
    return (
        -0.5 * n * (LOG_2PI + math.log(sigma2))
        - 0.5 * solve.L_theta_logdet2
        - solve.g_value / (2.0 * sigma2)
    )


def profiled_loglik(data: LmmDataset, template: CovarianceTemplate, beta, theta) -> float:
    """
    Profiled log-likelihood l~(beta, theta | y) with sigma2 = g(u~)/n.

    Raises:
        DegenerateFitError: If g(u~) = 0 (perfect fit, log undefined)
    """
    solve = solve_spherical_modes(data, template, beta, theta)
    if solve.g_value <= 0.0:
        raise DegenerateFitError("g(u~) = 0: perfect fit, profiled log-likelihood is undefined")
    n = data.n_obs
    minus2 = solve.L_theta_logdet2 + n * (1.0 + LOG_2PI + math.log(profile_sigma2(solve.g_value, n)))
    return -0.5 * minus2


def minus2_profiled_loglik(data: LmmDataset, template: CovarianceTemplate, beta, theta) -> float:
    """-2 l~(beta, theta); +inf on a degenerate fit so optimizers see a barrier."""
    try:
        return -2.0 * profiled_loglik(data, template, beta, theta)
    except DegenerateFitError:
        return math.inf


def marginal_loglik_oracle(data: LmmDataset, template: CovarianceTemplate, beta, theta, sigma2: float) -> float:
    """
    Dense reference: log N(y; X beta, sigma2 (I_n + Z Lambda Lambda^T Z^T)).

    Factors an n_obs x n_obs matrix, so only meant for small datasets (tests).
    """
    if not sigma2 > 0:
        raise InvalidParameterError(f"sigma2 must be > 0, got {sigma2}")
    beta, theta = _check_inputs(data, template, beta, theta)
    z_lambda = data.Z @ materialize_lambda(template, theta)
    cov = sigma2 * (np.eye(data.n_obs) + z_lambda @ z_lambda.T)
    return float(multivariate_normal.logpdf(data.y, mean=data.X @ beta, cov=cov))
