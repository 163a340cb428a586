"""
Iteratively weighted ridge (adaptive ridge) selection of fixed effects.

Each outer iteration minimizes the penalized objective

    -2 l~(beta, theta | y) + lambda * beta^T W beta

over (beta, theta), then refreshes the weights

    w_j = (|beta_j|^tau + delta^tau)^((penalty_power - 2) / tau),

which with penalty_power = 0 and tau = 2 is (beta_j^2 + delta^2)^-1 and makes the
penalty approach a count of nonzero coefficients. The selection indicator
w_j * beta_j^2 then drifts to ~0 (dropped) or ~1 (kept); the loop stops once it
no longer moves.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from lmm_select import settings
from lmm_select.exceptions import DimensionError, InvalidParameterError
from lmm_select.likelihood import minus2_profiled_loglik, profile_sigma2, solve_spherical_modes
from lmm_select.models import (
    CovarianceTemplate,
    LmmDataset,
    check_theta,
    initial_theta,
    theta_lower_bounds,
)
from lmm_select.optimizer import OptimizeOutcome, OptimizerOptions, diagonal_scale, minimize
from lmm_select.retry_handler import InnerRetryPolicy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PenaltyConfig:
    """
    Regularization strength and weight-update family.

    penalty_power is the norm exponent of the general weight formula
    (0 approximates L0, 1 approximates L1, 2 is plain ridge).
    """

    lam: float = 1.0
    delta: float = settings.DELTA
    penalty_power: float = 0.0
    tau: float = 2.0
    outer_tol: float = settings.OUTER_TOL
    max_outer_iters: int = settings.MAX_OUTER_ITERS
    threshold: float = settings.SELECTION_THRESHOLD

    def __post_init__(self):
        if not self.lam >= 0:
            raise InvalidParameterError(f"lambda must be >= 0, got {self.lam}")
        if not self.delta > 0:
            raise InvalidParameterError(f"delta must be > 0, got {self.delta}")
        if not 0 <= self.penalty_power <= 2:
            raise InvalidParameterError(f"penalty_power must lie in [0, 2], got {self.penalty_power}")
        if not self.tau > 0:
            raise InvalidParameterError(f"tau must be > 0, got {self.tau}")
        if not self.outer_tol > 0:
            raise InvalidParameterError(f"outer_tol must be > 0, got {self.outer_tol}")
        if self.max_outer_iters < 1:
            raise InvalidParameterError(f"max_outer_iters must be >= 1, got {self.max_outer_iters}")
        if not 0 < self.threshold < 1:
            raise InvalidParameterError(f"threshold must lie in (0, 1), got {self.threshold}")


@dataclass(frozen=True)
class OuterStep:
    """One outer iteration of iwr_fit."""

    iteration: int
    objective: float
    indicator_change: float
    inner_iterations: int
    inner_converged: bool
    retried: bool


@dataclass(frozen=True)
class IwrResult:
    """Outcome of iwr_fit for one lambda."""

    lam: float
    beta: np.ndarray
    theta: np.ndarray
    sigma2: float
    u_tilde: np.ndarray
    weights: np.ndarray
    selection_indicator: np.ndarray
    relevance: np.ndarray
    active_set: np.ndarray
    outer_iters: int
    converged: bool
    minus2_profiled_loglik: float
    penalized_objective: float
    trace: Tuple[OuterStep, ...] = ()
    diagnostic: str = ''

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.active_set))


def penalized_objective(data: LmmDataset, template: CovarianceTemplate, beta, theta, lam: float, weights) -> float:
    """
    -2 l~(beta, theta) + lam * sum_j w_j beta_j^2.

    A degenerate fit (g(u~) = 0) evaluates to +inf.
    """
    if not lam >= 0:
        raise InvalidParameterError(f"lambda must be >= 0, got {lam}")
    weights = np.asarray(weights, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if weights.shape != beta.shape:
        raise DimensionError(f"weights have length {weights.shape[0]}, expected {beta.shape[0]}")
    if not np.all(weights > 0):
        raise InvalidParameterError("weights must all be > 0")
    return minus2_profiled_loglik(data, template, beta, theta) + lam * float(np.sum(weights * beta * beta))


def update_weights(beta, config: PenaltyConfig) -> np.ndarray:
    """w_j = (|beta_j|^tau + delta^tau)^((penalty_power - 2) / tau)."""
    magnitude = np.power(np.abs(np.asarray(beta, dtype=float)), config.tau)
    return np.power(magnitude + config.delta ** config.tau, (config.penalty_power - 2.0) / config.tau)


def selection_indicator(weights, beta) -> np.ndarray:
    """w_j * beta_j^2; beta_j^2 / (beta_j^2 + delta^2) under the default weights."""
    weights = np.asarray(weights, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if weights.shape != beta.shape:
        raise DimensionError(f"weights have length {weights.shape[0]}, expected {beta.shape[0]}")
    return weights * beta * beta


def relevance(beta, config: PenaltyConfig) -> np.ndarray:
    """
    |beta_j|^tau / (|beta_j|^tau + delta^tau), in [0, 1).

    Equals selection_indicator for penalty_power = 0 and tau = 2; for other
    penalty powers the raw indicator is not bounded by 1, so thresholding uses
    this normalized form.
    """
    magnitude = np.power(np.abs(np.asarray(beta, dtype=float)), config.tau)
    return magnitude / (magnitude + config.delta ** config.tau)


def threshold_selection(indicator, threshold: float = settings.SELECTION_THRESHOLD) -> np.ndarray:
    """Active set: indicator_j >= threshold (ties are selected)."""
    if not 0 < threshold < 1:
        raise InvalidParameterError(f"threshold must lie in (0, 1), got {threshold}")
    return np.asarray(indicator, dtype=float) >= threshold


def _inner_solve(objective, x0, lower, upper, opts, template, p) -> Tuple[OptimizeOutcome, bool]:
    first = minimize(objective, x0, lower, upper, opts, scale=diagonal_scale(objective, x0, lower, upper))
    if not InnerRetryPolicy.should_retry(first, 0):
        return first, False
    start = InnerRetryPolicy.cold_start(template, p)
    logger.warning(f"[IWR] inner solve did not converge ({first.message}); retrying from cold start")
    retry = minimize(objective, start, lower, upper, opts, scale=diagonal_scale(objective, start, lower, upper))
    chosen, _ = InnerRetryPolicy.pick(first, retry)
    return chosen, True


def iwr_fit(
    data: LmmDataset,
    template: CovarianceTemplate,
    config: Optional[PenaltyConfig] = None,
    beta_init=None,
    theta_init=None,
    opts: Optional[OptimizerOptions] = None,
) -> IwrResult:
    """
    Run the iteratively weighted ridge loop for one lambda.

    Args:
        data: Dataset
        template: Covariance template
        config: Penalty settings (lambda, delta, weight family, tolerances)
        beta_init: Start for beta; defaults to (1, ..., 1)
        theta_init: Start for theta; defaults to theta_0 (variances 1, others 0)
        opts: Inner optimizer options

    Returns:
        IwrResult. converged is False (with a diagnostic) when the outer loop
        hits max_outer_iters or an inner solve fails even after its retry.
    """
    config = config or PenaltyConfig()
    p = data.p
    beta = np.ones(p) if beta_init is None else np.asarray(beta_init, dtype=float).reshape(-1)
    if beta.shape[0] != p:
        raise DimensionError(f"beta_init has length {beta.shape[0]}, expected {p}", index=beta.shape[0])
    theta = initial_theta(template) if theta_init is None else check_theta(template, theta_init)

    lower = np.concatenate([np.full(p, -np.inf), theta_lower_bounds(template)])
    upper = np.full(lower.shape, np.inf)
    x = np.concatenate([beta, theta])
    weights = np.ones(p)
    indicator = np.ones(p)
    trace = []
    converged = False
    diagnostic = ''
    objective_value = math.nan

    logger.debug(f"[IWR] lambda={config.lam:.6g} start (p={p}, penalty_power={config.penalty_power})")
    for iteration in range(1, config.max_outer_iters + 1):
        current_weights = weights

        def objective(z: np.ndarray) -> float:
            return penalized_objective(data, template, z[:p], z[p:], config.lam, current_weights)

        outcome, retried = _inner_solve(objective, x, lower, upper, opts, template, p)
        x = outcome.x_star
        objective_value = outcome.f_star
        if not outcome.converged:
            trace.append(OuterStep(iteration, objective_value, math.nan, outcome.iterations, False, retried))
            diagnostic = f"inner optimizer did not converge at outer iteration {iteration}: {outcome.message}"
            logger.warning(f"[IWR] lambda={config.lam:.6g}: {diagnostic}")
            break

        weights = update_weights(x[:p], config)
        previous = indicator
        indicator = selection_indicator(weights, x[:p])
        movement = np.abs(indicator - previous)
        change = float(movement.max()) if p else 0.0
        trace.append(OuterStep(iteration, objective_value, change, outcome.iterations, True, retried))
        logger.debug(f"[IWR] lambda={config.lam:.6g} iteration {iteration}: objective={objective_value:.10g} change={change:.3g}")
        if change < config.outer_tol:
            converged = True
            break
    else:
        diagnostic = (
            f"selection indicator still moving after {config.max_outer_iters} outer iterations: "
            f"last change {change:.3g} at coordinate {int(np.argmax(movement))} (tolerance {config.outer_tol:.3g})"
        )
        logger.warning(f"[IWR] lambda={config.lam:.6g}: {diagnostic}")

    beta, theta = x[:p].copy(), x[p:].copy()
    solve = solve_spherical_modes(data, template, beta, theta)
    weights = update_weights(beta, config)
    result = IwrResult(
        lam=config.lam,
        beta=beta,
        theta=theta,
        sigma2=profile_sigma2(solve.g_value, data.n_obs),
        u_tilde=solve.u_tilde,
        weights=weights,
        selection_indicator=selection_indicator(weights, beta),
        relevance=relevance(beta, config),
        active_set=threshold_selection(relevance(beta, config), config.threshold),
        outer_iters=len(trace),
        converged=converged,
        minus2_profiled_loglik=minus2_profiled_loglik(data, template, beta, theta),
        penalized_objective=objective_value,
        trace=tuple(trace),
        diagnostic=diagnostic,
    )
    logger.debug(
        f"[IWR] lambda={config.lam:.6g} done: {result.n_active} active, "
        f"{result.outer_iters} outer iterations, converged={converged}"
    )
    return result
