"""
Selection performance over Monte-Carlo replications.

Criteria per replication: squared error of beta_hat, size of the selected set,
exact recovery (TP), containment of the true set (TPC) and the proportion of
true zeros estimated as zero (ZP).
"""
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from lmm_select.exceptions import DimensionError, InvalidParameterError

# ZP values are binned on this many decimals for the histogram
ZP_DECIMALS = 2


@dataclass(frozen=True)
class ReplicationOutcome:
    beta_hat: np.ndarray
    active_set: np.ndarray
    true_active: np.ndarray
    beta_star_star: np.ndarray

    def __post_init__(self):
        p = len(self.beta_star_star)
        for name in ('beta_hat', 'active_set', 'true_active'):
            if len(getattr(self, name)) != p:
                raise DimensionError(f"{name} has length {len(getattr(self, name))}, expected {p}")
        stray = np.flatnonzero(~np.asarray(self.active_set, dtype=bool) & (np.asarray(self.beta_hat) != 0))
        if stray.size:
            raise InvalidParameterError(
                f"beta_hat[{stray[0]}] is nonzero outside the active set", index=int(stray[0])
            )


@dataclass(frozen=True)
class BenchmarkSummary:
    method: str
    n_replications: int
    mse_mean: float
    mse_sd: float
    active_size_mean: float
    active_size_sd: float
    active_size_median: float
    tp_rate: float
    tpc_rate: float
    zp_mean: float
    zp_sd: float
    zp_histogram: Dict[float, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'method': self.method,
            'n_replications': self.n_replications,
            'mse_mean': self.mse_mean,
            'mse_sd': self.mse_sd,
            'active_size_mean': self.active_size_mean,
            'active_size_sd': self.active_size_sd,
            'active_size_median': self.active_size_median,
            'tp_rate': self.tp_rate,
            'tpc_rate': self.tpc_rate,
            'zp_mean': self.zp_mean,
            'zp_sd': self.zp_sd,
            'zp_histogram': {f'{key:.{ZP_DECIMALS}f}': count for key, count in sorted(self.zp_histogram.items())},
        }


def mse(beta_hat, beta_star_star) -> float:
    """Squared Euclidean distance ||beta_hat - beta**||^2."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_star_star = np.asarray(beta_star_star, dtype=float)
    if beta_hat.shape != beta_star_star.shape:
        raise DimensionError(f"beta_hat has shape {beta_hat.shape}, expected {beta_star_star.shape}")
    diff = beta_hat - beta_star_star
    return float(diff @ diff)


def classify(outcome: ReplicationOutcome) -> Tuple[bool, bool, float]:
    """
    (is_tp, is_tpc, zp) for one replication.

    zp is 1.0 when the truth has no zero coefficients.
    """
    active = np.asarray(outcome.active_set, dtype=bool)
    truth = np.asarray(outcome.true_active, dtype=bool)
    is_tp = bool(np.array_equal(active, truth))
    is_tpc = bool(np.all(active[truth]))
    true_zeros = ~truth
    n_zeros = int(true_zeros.sum())
    zp = float(np.sum(np.asarray(outcome.beta_hat)[true_zeros] == 0) / n_zeros) if n_zeros else 1.0
    return is_tp, is_tpc, zp


def _sd(values: np.ndarray) -> float:
    # Sample standard deviation; 0 for a single replication
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


def summarize(outcomes: Sequence[ReplicationOutcome], method: str = '') -> BenchmarkSummary:
    """
    Table-1 style means and standard deviations plus the ZP histogram.

    Raises:
        InvalidParameterError: If outcomes is empty
    """
    if not outcomes:
        raise InvalidParameterError("cannot summarize an empty list of replications")
    errors = np.array([mse(o.beta_hat, o.beta_star_star) for o in outcomes])
    sizes = np.array([int(np.count_nonzero(o.active_set)) for o in outcomes], dtype=float)
    classes = [classify(o) for o in outcomes]
    tp = np.array([c[0] for c in classes], dtype=float)
    tpc = np.array([c[1] for c in classes], dtype=float)
    zp = np.array([c[2] for c in classes])
    histogram = Counter(round(float(value), ZP_DECIMALS) for value in zp)
    return BenchmarkSummary(
        method=method,
        n_replications=len(outcomes),
        mse_mean=float(errors.mean()),
        mse_sd=_sd(errors),
        active_size_mean=float(sizes.mean()),
        active_size_sd=_sd(sizes),
        active_size_median=float(np.median(sizes)),
        tp_rate=float(tp.mean()),
        tpc_rate=float(tpc.mean()),
        zp_mean=float(zp.mean()),
        zp_sd=_sd(zp),
        zp_histogram=dict(sorted(histogram.items())),
    )


def summary_rows(summaries: Sequence[BenchmarkSummary]) -> List[List[str]]:
    """
    Rows criterion x method, the first row being the header.

    Cells read "mean (sd)"; rates are percentages.
    """
    rows = [['criterion'] + [s.method for s in summaries]]
    rows.append(['R'] + [str(s.n_replications) for s in summaries])
    rows.append(['MSE'] + [f'{s.mse_mean:.3f} ({s.mse_sd:.3f})' for s in summaries])
    rows.append(['|S| mean'] + [f'{s.active_size_mean:.3f} ({s.active_size_sd:.3f})' for s in summaries])
    rows.append(['|S| median'] + [f'{s.active_size_median:g}' for s in summaries])
    rows.append(['TP'] + [f'{100 * s.tp_rate:.0f}%' for s in summaries])
    rows.append(['TPC'] + [f'{100 * s.tpc_rate:.0f}%' for s in summaries])
    rows.append(['ZP'] + [f'{100 * s.zp_mean:.0f}% ({s.zp_sd:.3f})' for s in summaries])
    return rows
