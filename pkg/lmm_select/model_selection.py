"""
Regularization path over a lambda grid and BIC-based choice of lambda.

The grid is traversed from the largest lambda to the smallest, each adaptive
ridge fit warm-started from the last converged one. Every distinct active set
is refitted by unpenalized profiled maximum likelihood on its columns and
scored with

    BIC = -2 l(beta_sel, theta_sel, sigma2_sel | y) + log(n) * (|S| + dim(theta) + 1).
"""
import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from lmm_select import settings
from lmm_select.adaptive_ridge import IwrResult, PenaltyConfig, iwr_fit
from lmm_select.exceptions import ConvergenceError, DegenerateFitError, DimensionError, InvalidParameterError
from lmm_select.likelihood import full_loglik, minus2_profiled_loglik, profile_sigma2, solve_spherical_modes
from lmm_select.models import (
    CovarianceTemplate,
    LmmDataset,
    ModelParams,
    initial_theta,
    restrict_columns,
    theta_lower_bounds,
)
from lmm_select.optimizer import OptimizerOptions, diagonal_scale, minimize
from lmm_select.retry_handler import InnerRetryPolicy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RefitResult:
    """Unpenalized ML fit restricted to an active set."""

    active_set: np.ndarray
    params: ModelParams
    loglik: float
    n_active: int
    converged: bool
    bic: float


@dataclass(frozen=True)
class PathResult:
    """
    Adaptive ridge fits along a descending lambda grid.

    refits[i] is None for lambdas whose fit did not converge; their BIC is nan
    and they are never chosen.
    """

    lambdas: np.ndarray
    fits: Tuple[IwrResult, ...]
    active_sets: np.ndarray
    bics: np.ndarray
    refits: Tuple[Optional[RefitResult], ...]
    chosen_index: int
    chosen_fit: RefitResult

    @property
    def converged(self) -> np.ndarray:
        return np.array([fit.converged for fit in self.fits], dtype=bool)

    @property
    def n_active(self) -> np.ndarray:
        return self.active_sets.sum(axis=1)


@dataclass(frozen=True)
class ChosenModel:
    """The BIC-minimizing point of a path."""

    index: int
    lam: float
    active_set: np.ndarray
    params: ModelParams
    loglik: float
    bic: float
    fit: IwrResult


def lambda_grid(lo: float = settings.LAMBDA_MIN, hi: float = settings.LAMBDA_MAX, count: int = settings.LAMBDA_COUNT) -> np.ndarray:
    """
    count log-equispaced values from hi down to lo.

    Raises:
        InvalidParameterError: Unless 0 < lo < hi and count >= 2
    """
    if not (0 < lo < hi) or not math.isfinite(hi):
        raise InvalidParameterError(f"lambda grid needs 0 < lo < hi, got lo={lo}, hi={hi}")
    if count < 2:
        raise InvalidParameterError(f"lambda grid needs count >= 2, got {count}")
    grid = np.logspace(math.log10(hi), math.log10(lo), count)
    grid[0], grid[-1] = hi, lo
    return grid


def bic(loglik: float, n_obs: int, n_active: int, theta_dim: int) -> float:
    """-2 loglik + log(n_obs) * (n_active + theta_dim + 1)."""
    if n_obs < 1:
        raise InvalidParameterError(f"n_obs must be >= 1, got {n_obs}")
    return -2.0 * loglik + math.log(n_obs) * (n_active + theta_dim + 1)


def best_index(bics: Sequence[float]) -> Optional[int]:
    """
    Index of the smallest BIC, nan entries skipped.

    On a descending grid the first minimizer is the largest lambda, so ties go
    to the sparser end of the path. None when every entry is nan.
    """
    bics = np.asarray(bics, dtype=float)
    candidates = np.flatnonzero(~np.isnan(bics))
    if candidates.size == 0:
        return None
    return int(candidates[np.argmin(bics[candidates])])


def refit_selected(
    data: LmmDataset,
    template: CovarianceTemplate,
    active_set,
    opts: Optional[OptimizerOptions] = None,
) -> RefitResult:
    """
    Profiled maximum-likelihood fit with X restricted to the active columns.

    beta starts at the least-squares estimate on those columns and theta at
    theta_0. An empty active set fits the variance components alone.

    Args:
        data: Dataset
        template: Covariance template
        active_set: Boolean vector of length p
        opts: Optimizer options

    Returns:
        RefitResult with beta reported on all p columns (exactly 0 outside the
        active set) and the full log-likelihood at sigma2 = g(u~)/n.

    Raises:
        DegenerateFitError: If the refit interpolates y (g(u~) = 0)
    """
    active_set = np.asarray(active_set, dtype=bool).reshape(-1)
    if active_set.shape[0] != data.p:
        raise DimensionError(f"active set has length {active_set.shape[0]}, expected {data.p}", index=active_set.shape[0])
    restricted = restrict_columns(data, active_set)
    p_sel = restricted.p

    if p_sel:
        beta_start = np.linalg.lstsq(restricted.X, restricted.y, rcond=None)[0]
    else:
        beta_start = np.zeros(0)
    x0 = np.concatenate([beta_start, initial_theta(template)])
    lower = np.concatenate([np.full(p_sel, -np.inf), theta_lower_bounds(template)])
    upper = np.full(lower.shape, np.inf)

    def objective(z: np.ndarray) -> float:
        return minus2_profiled_loglik(restricted, template, z[:p_sel], z[p_sel:])

    outcome = minimize(objective, x0, lower, upper, opts, scale=diagonal_scale(objective, x0, lower, upper))
    if InnerRetryPolicy.should_retry(outcome, 0):
        start = InnerRetryPolicy.cold_start(template, p_sel)
        logger.warning(f"[REFIT] |S|={p_sel} did not converge ({outcome.message}); retrying from cold start")
        retry = minimize(objective, start, lower, upper, opts, scale=diagonal_scale(objective, start, lower, upper))
        outcome, _ = InnerRetryPolicy.pick(outcome, retry)

    beta_sel, theta = outcome.x_star[:p_sel], outcome.x_star[p_sel:].copy()
    g_value = solve_spherical_modes(restricted, template, beta_sel, theta).g_value
    if g_value <= 0.0:
        raise DegenerateFitError(f"refit on {p_sel} columns interpolates y")
    sigma2 = profile_sigma2(g_value, data.n_obs)
    loglik = full_loglik(restricted, template, beta_sel, theta, sigma2)

    beta = np.zeros(data.p)
    beta[active_set] = beta_sel
    score = bic(loglik, data.n_obs, p_sel, template.theta_dim)
    logger.debug(f"[REFIT] |S|={p_sel} loglik={loglik:.10g} bic={score:.10g} converged={outcome.converged}")
    return RefitResult(
        active_set=active_set.copy(),
        params=ModelParams(beta=beta, theta=theta, sigma2=sigma2),
        loglik=loglik,
        n_active=p_sel,
        converged=outcome.converged,
        bic=score,
    )


def _prepare_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise InvalidParameterError("lambda grid is empty")
    if np.any(~np.isfinite(grid)) or np.any(grid < 0):
        raise InvalidParameterError("lambda grid values must be finite and >= 0")
    return np.unique(grid)[::-1].copy()


def _run_warm(data, template, grid, config, opts) -> Tuple[IwrResult, ...]:
    fits = []
    beta_init, theta_init = None, None
    for lam in grid:
        fit = iwr_fit(data, template, dataclasses.replace(config, lam=float(lam)), beta_init, theta_init, opts)
        if fit.converged:
            beta_init, theta_init = fit.beta, fit.theta
        fits.append(fit)
    return tuple(fits)


def _run_cold(data, template, grid, config, opts, n_jobs) -> Tuple[IwrResult, ...]:
    jobs = (
        delayed(iwr_fit)(data, template, dataclasses.replace(config, lam=float(lam)), None, None, opts)
        for lam in grid
    )
    return tuple(Parallel(n_jobs=n_jobs)(jobs))


def regularization_path(
    data: LmmDataset,
    template: CovarianceTemplate,
    grid,
    config: Optional[PenaltyConfig] = None,
    opts: Optional[OptimizerOptions] = None,
    warm_start: bool = True,
    n_jobs: int = 1,
) -> PathResult:
    """
    Fit every lambda of the grid, refit each distinct active set and choose by BIC.

    Args:
        data: Dataset
        template: Covariance template
        grid: Lambda values; traversed in descending order
        config: Penalty settings; its lam is replaced by each grid value
        opts: Inner optimizer options
        warm_start: Start each fit from the previous converged one. When False,
            every lambda starts cold and the fits run on n_jobs workers.
        n_jobs: Workers for cold-start fits and for refits

    Returns:
        PathResult

    Raises:
        InvalidParameterError: Empty or invalid grid
        ConvergenceError: If no lambda produced a converged fit
    """
    config = config or PenaltyConfig()
    grid = _prepare_grid(grid)
    logger.info(
        f"[PATH] {grid.size} lambdas from {grid[0]:.4g} to {grid[-1]:.4g} "
        f"(penalty_power={config.penalty_power}, warm_start={warm_start})"
    )
    if warm_start:
        fits = _run_warm(data, template, grid, config, opts)
    else:
        fits = _run_cold(data, template, grid, config, opts, n_jobs)

    active_sets = np.array([fit.active_set for fit in fits], dtype=bool).reshape(grid.size, data.p)
    distinct: Dict[bytes, np.ndarray] = {}
    for fit, active in zip(fits, active_sets):
        if fit.converged:
            distinct.setdefault(active.tobytes(), active)
        else:
            logger.warning(f"[PATH] lambda={fit.lam:.6g} did not converge: {fit.diagnostic}")
    if not distinct:
        raise ConvergenceError(f"none of the {grid.size} lambdas produced a converged fit")

    keys = list(distinct)
    refitted = Parallel(n_jobs=n_jobs)(delayed(refit_selected)(data, template, distinct[key], opts) for key in keys)
    cache = dict(zip(keys, refitted))
    logger.info(f"[PATH] refitted {len(cache)} distinct active sets")

    refits = tuple(cache[active.tobytes()] if fit.converged else None for fit, active in zip(fits, active_sets))
    bics = np.array([math.nan if refit is None else refit.bic for refit in refits])
    chosen_index = best_index(bics)
    for lam, active, score in zip(grid, active_sets, bics):
        logger.debug(f"[PATH] lambda={lam:.6g} |S|={int(active.sum())} bic={score:.10g}")
    logger.info(
        f"[PATH] BIC minimum at lambda={grid[chosen_index]:.6g} "
        f"with |S|={int(active_sets[chosen_index].sum())}, bic={bics[chosen_index]:.10g}"
    )
    return PathResult(
        lambdas=grid,
        fits=fits,
        active_sets=active_sets,
        bics=bics,
        refits=refits,
        chosen_index=chosen_index,
        chosen_fit=refits[chosen_index],
    )


def select_model(path: PathResult) -> ChosenModel:
    """
    The BIC-minimizing lambda of a path (ties toward the larger lambda).

    Raises:
        ConvergenceError: If the path holds no converged fit
    """
    index = best_index(path.bics)
    if index is None or path.refits[index] is None:
        raise ConvergenceError("path holds no converged fit to choose from")
    refit = path.refits[index]
    return ChosenModel(
        index=index,
        lam=float(path.lambdas[index]),
        active_set=np.asarray(path.active_sets[index], dtype=bool),
        params=refit.params,
        loglik=refit.loglik,
        bic=refit.bic,
        fit=path.fits[index],
    )
