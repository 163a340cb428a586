"""
Box-constrained smooth minimization with finite-difference gradients.

The search engine is scipy's L-BFGS-B (limited-memory secant updates with
gradient projection for the active bounds). Gradients are central finite
differences, one-sided next to a bound.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.optimize import Bounds
from scipy.optimize import minimize as scipy_minimize

from lmm_select import settings
from lmm_select.exceptions import BoundsError, DegenerateFitError, InvalidParameterError, OptimizationError

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class OptimizerOptions:
    """Stopping rules and finite-difference step of minimize."""

    max_iters: int = settings.MAX_ITERS
    grad_tol: float = settings.GRAD_TOL
    step_tol: float = settings.STEP_TOL
    fd_step: float = settings.FD_STEP

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        for name in ('grad_tol', 'step_tol', 'fd_step'):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be > 0, got {getattr(self, name)}")


class OptimizeOutcome(NamedTuple):
    x_star: np.ndarray
    f_star: float
    converged: bool
    iterations: int
    message: str


def _finite_or_inf(objective: Objective, x: np.ndarray) -> float:
    try:
        value = float(objective(x))
    except DegenerateFitError:
        return math.inf
    return value if math.isfinite(value) else math.inf


def numerical_gradient(
    objective: Objective,
    x,
    lower=None,
    upper=None,
    fd_step: float = settings.FD_STEP,
) -> np.ndarray:
    """
    Finite-difference gradient with step fd_step * (1 + |x_i|).

    Central differences where both shifted points stay inside [lower, upper];
    forward or backward differences otherwise.
    """
    x = np.asarray(x, dtype=float)
    lower = np.full(x.shape, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(x.shape, np.inf) if upper is None else np.asarray(upper, dtype=float)
    f0 = None
    grad = np.empty_like(x)
    for i in range(x.shape[0]):
        h = fd_step * (1.0 + abs(x[i]))
        up_ok = x[i] + h <= upper[i]
        down_ok = x[i] - h >= lower[i]
        shifted = x.copy()
        if up_ok and down_ok:
            shifted[i] = x[i] + h
            f_plus = objective(shifted)
            shifted[i] = x[i] - h
            f_minus = objective(shifted)
            grad[i] = (f_plus - f_minus) / (2.0 * h)
            continue
        if f0 is None:
            f0 = objective(x)
        if up_ok:
            shifted[i] = x[i] + h
            grad[i] = (objective(shifted) - f0) / h
        else:
            shifted[i] = x[i] - h
            grad[i] = (f0 - objective(shifted)) / h
    return grad


def projected_gradient_norm(grad, x, lower, upper) -> float:
    """Sup-norm of the gradient with components blocked by an active bound removed."""
    grad = np.asarray(grad, dtype=float)
    blocked = ((x <= lower) & (grad > 0)) | ((x >= upper) & (grad < 0))
    free = np.where(blocked, 0.0, grad)
    return float(np.max(np.abs(free))) if free.size else 0.0


def minimize(
    objective: Objective,
    x0,
    lower=None,
    upper=None,
    opts: Optional[OptimizerOptions] = None,
    scale=None,
) -> OptimizeOutcome:
    """
    Minimize objective over the box [lower, upper].

    Args:
        objective: Real-valued function of a vector; non-finite values and
            DegenerateFitError count as +inf (the step is rejected)
        x0: Start point inside the box
        lower: Lower bounds (None or -inf entries for unbounded)
        upper: Upper bounds (None or +inf entries for unbounded)
        opts: Stopping rules; defaults from settings
        scale: Optional positive vector; the search runs in z = scale * x

    Returns:
        OptimizeOutcome(x_star, f_star, converged, iterations, message);
        f_star <= objective(x0) and x_star lies in the box.

    Raises:
        BoundsError: lower > upper, or x0 outside the box
        OptimizationError: objective not finite at x0
    """
    opts = opts or OptimizerOptions()
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    n = x0.shape[0]
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float).reshape(-1)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float).reshape(-1)
    if lower.shape != (n,) or upper.shape != (n,):
        raise BoundsError(f"bounds must have length {n}")
    inconsistent = np.flatnonzero(lower > upper)
    if inconsistent.size:
        i = int(inconsistent[0])
        raise BoundsError(f"lower[{i}] = {lower[i]} > upper[{i}] = {upper[i]}", index=i)
    outside = np.flatnonzero((x0 < lower) | (x0 > upper))
    if outside.size:
        i = int(outside[0])
        raise BoundsError(f"x0[{i}] = {x0[i]} lies outside [{lower[i]}, {upper[i]}]", index=i)

    f0 = _finite_or_inf(objective, x0)
    if not math.isfinite(f0):
        raise OptimizationError("objective is not finite at the start point")
    if n == 0:
        return OptimizeOutcome(x0, f0, True, 0, "nothing to optimize")

    scale = np.ones(n) if scale is None else np.asarray(scale, dtype=float).reshape(-1)
    if scale.shape != (n,) or np.any(~(scale > 0)) or np.any(~np.isfinite(scale)):
        raise InvalidParameterError("scale must be a finite positive vector matching x0")
    z_lower, z_upper = lower * scale, upper * scale

    def scaled(z: np.ndarray) -> float:
        return _finite_or_inf(objective, np.clip(z / scale, lower, upper))

    def scaled_grad(z: np.ndarray) -> np.ndarray:
        return numerical_gradient(scaled, z, z_lower, z_upper, opts.fd_step)

    result = scipy_minimize(
        scaled,
        x0 * scale,
        jac=scaled_grad,
        method='L-BFGS-B',
        bounds=Bounds(z_lower, z_upper),
        options={
            'maxiter': opts.max_iters,
            'gtol': opts.grad_tol,
            'ftol': opts.step_tol,
        },
    )
    x_star = np.clip(result.x / scale, lower, upper)
    f_star = _finite_or_inf(objective, x_star)
    message = str(result.message)
    # Line search found no decrease: treated as step size below step_tol.
    converged = bool(result.status == 0 or (result.status == 2 and "ABNORMAL" in message.upper()))
    if not f_star <= f0:
        # Line search gave up on a worse point; keep the start.
        x_star, f_star, converged = x0.copy(), f0, False
        message = f"no improvement over start ({message})"
    if not converged:
        grad = numerical_gradient(lambda x: _finite_or_inf(objective, x), x_star, lower, upper, opts.fd_step)
        logger.debug(
            f"[OPTIMIZER] stopped without convergence after {result.nit} iterations: {message} "
            f"(projected gradient {projected_gradient_norm(grad, x_star, lower, upper):.3g})"
        )
    return OptimizeOutcome(x_star, f_star, converged, int(result.nit), message)


def diagonal_scale(objective: Objective, x, lower=None, upper=None, step: float = 1e-4) -> np.ndarray:
    """
    Square roots of finite-difference diagonal curvatures, for minimize(scale=...).

    Coordinates with non-positive or non-finite curvature get scale 1.
    """
    x = np.asarray(x, dtype=float)
    lower = np.full(x.shape, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(x.shape, np.inf) if upper is None else np.asarray(upper, dtype=float)
    f0 = _finite_or_inf(objective, x)
    scale = np.ones_like(x)
    if not math.isfinite(f0):
        return scale
    for i in range(x.shape[0]):
        h = step * (1.0 + abs(x[i]))
        shifted = x.copy()
        if x[i] - h >= lower[i] and x[i] + h <= upper[i]:
            shifted[i] = x[i] + h
            f_plus = _finite_or_inf(objective, shifted)
            shifted[i] = x[i] - h
            f_minus = _finite_or_inf(objective, shifted)
            curvature = (f_plus - 2.0 * f0 + f_minus) / (h * h)
        else:
            direction = 1.0 if x[i] + 2.0 * h <= upper[i] else -1.0
            shifted[i] = x[i] + direction * h
            f_1 = _finite_or_inf(objective, shifted)
            shifted[i] = x[i] + 2.0 * direction * h
            f_2 = _finite_or_inf(objective, shifted)
            curvature = (f_2 - 2.0 * f_1 + f0) / (h * h)
        if math.isfinite(curvature) and curvature > 0:
            scale[i] = math.sqrt(curvature)
    return scale
