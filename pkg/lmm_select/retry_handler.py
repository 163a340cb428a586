"""
Retry policy for inner optimizations of the adaptive ridge loop.
"""
from typing import Optional, Tuple

import numpy as np

from lmm_select.models import CovarianceTemplate, initial_theta
from lmm_select.optimizer import OptimizeOutcome


class InnerRetryPolicy:
    """Decides whether a non-converged inner solve is retried, and from where."""

    # One retry, from the cold start
    MAX_RETRIES = 1

    @classmethod
    def should_retry(cls, outcome: OptimizeOutcome, retry_count: int) -> bool:
        """
        Check if an inner solve should be retried.

        Args:
            outcome: Result of the attempt just made
            retry_count: Retries already spent on this outer iteration

        Returns:
            bool: True if the solve did not converge and retries remain
        """
        if outcome.converged:
            return False
        return retry_count < cls.MAX_RETRIES

    @classmethod
    def cold_start(cls, template: CovarianceTemplate, p: int) -> np.ndarray:
        """
        Restart point: beta = (1, ..., 1), theta = theta_0.

        Returns:
            Concatenated (beta, theta) vector
        """
        return np.concatenate([np.ones(p), initial_theta(template)])

    @classmethod
    def pick(cls, first: OptimizeOutcome, retry: Optional[OptimizeOutcome]) -> Tuple[OptimizeOutcome, bool]:
        """
        Choose between an attempt and its retry.

        A converged outcome beats a non-converged one; otherwise the lower
        objective wins.

        Returns:
            (chosen outcome, whether the retry was chosen)
        """
        if retry is None:
            return first, False
        if retry.converged != first.converged:
            return (retry, True) if retry.converged else (first, False)
        return (retry, True) if retry.f_star < first.f_star else (first, False)
