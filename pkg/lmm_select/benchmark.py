"""
Monte-Carlo comparison of selection methods on simulated datasets.

Each replication draws one dataset from the scenario with its own child seed,
then for every method computes the regularization path, picks lambda by BIC
and scores the penalized estimate at that lambda against the truth.
"""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from lmm_select.adaptive_ridge import PenaltyConfig
from lmm_select.exceptions import InvalidParameterError, LmmSelectError
from lmm_select.metrics import BenchmarkSummary, ReplicationOutcome, classify, mse, summarize
from lmm_select.model_selection import regularization_path, select_model
from lmm_select.models import random_intercept_template
from lmm_select.optimizer import OptimizerOptions
from lmm_select.simulate import Scenario, simulate_dataset, spawn_seeds

logger = logging.getLogger(__name__)

STATUS_OK = 'ok'
STATUS_FAILED = 'failed'


@dataclass(frozen=True)
class MethodSpec:
    name: str
    penalty: PenaltyConfig


# Adaptive ridge (L0-like) and the same engine with the L1 weight family
METHODS = {
    'iwr': MethodSpec('iwr', PenaltyConfig(penalty_power=0.0)),
    'l1': MethodSpec('l1', PenaltyConfig(penalty_power=1.0)),
}


def resolve_methods(names: Sequence[str]) -> List[MethodSpec]:
    unknown = [name for name in names if name not in METHODS]
    if unknown:
        raise InvalidParameterError(f"unknown method {unknown[0]!r}; choose from {', '.join(METHODS)}")
    if not names:
        raise InvalidParameterError("at least one method is required")
    return [METHODS[name] for name in names]


@dataclass(frozen=True)
class BenchmarkReport:
    methods: Tuple[str, ...]
    seeds: Tuple[int, ...]
    summaries: Dict[str, Optional[BenchmarkSummary]]
    records: Tuple[dict, ...]

    def effective_replications(self, method: str) -> int:
        return sum(1 for r in self.records if r['method'] == method and r['status'] == STATUS_OK)


def run_replication(
    scenario: Scenario,
    replication: int,
    seed: int,
    methods: Sequence[MethodSpec],
    grid,
    opts: Optional[OptimizerOptions] = None,
) -> List[Tuple[dict, Optional[ReplicationOutcome]]]:
    """
    One simulated dataset, fitted by every method.

    Returns:
        One (record, outcome) pair per method. A method that fails leaves
        outcome None and status "failed" with the error message in its record.
    """
    simulated = simulate_dataset(dataclasses.replace(scenario, seed=seed))
    data = simulated.dataset
    template = random_intercept_template(data.n_groups)
    results = []
    for method in methods:
        record = {'replication': replication, 'seed': seed, 'method': method.name}
        try:
            path = regularization_path(data, template, grid, method.penalty, opts)
            chosen = select_model(path)
        except LmmSelectError as e:
            logger.warning(f"[BENCHMARK] replication {replication} ({method.name}) failed: {e}")
            record.update(status=STATUS_FAILED, message=str(e))
            results.append((record, None))
            continue

        outcome = ReplicationOutcome(
            beta_hat=chosen.params.beta,
            active_set=chosen.active_set,
            true_active=simulated.true_active,
            beta_star_star=simulated.beta_star_star,
        )
        is_tp, is_tpc, zp = classify(outcome)
        record.update(
            status=STATUS_OK,
            message='',
            **{'lambda': chosen.lam},
            n_active=int(chosen.active_set.sum()),
            bic=chosen.bic,
            mse=mse(outcome.beta_hat, outcome.beta_star_star),
            tp=is_tp,
            tpc=is_tpc,
            zp=zp,
        )
        results.append((record, outcome))
    return results


def run_benchmark(
    scenario: Scenario,
    reps: int,
    master_seed: int,
    methods: Sequence[MethodSpec],
    grid,
    n_jobs: int = 1,
    opts: Optional[OptimizerOptions] = None,
) -> BenchmarkReport:
    """
    Run reps replications on n_jobs workers and summarize each method.

    Replication i uses child seed i of spawn_seeds(master_seed, reps); results
    are gathered in replication order, so the report does not depend on n_jobs.

    Raises:
        InvalidParameterError: If reps < 1
    """
    if reps < 1:
        raise InvalidParameterError(f"reps must be >= 1, got {reps}")
    methods = list(methods)
    seeds = spawn_seeds(master_seed, reps)
    grid = np.asarray(grid, dtype=float)
    logger.info(
        f"[BENCHMARK] {reps} replications x {len(methods)} methods, "
        f"{grid.size} lambdas, {n_jobs} workers (master seed {master_seed})"
    )
    per_replication = Parallel(n_jobs=n_jobs)(
        delayed(run_replication)(scenario, i, seed, methods, grid, opts) for i, seed in enumerate(seeds)
    )

    records = []
    outcomes: Dict[str, List[ReplicationOutcome]] = {m.name: [] for m in methods}
    for results in per_replication:
        for record, outcome in results:
            records.append(record)
            if outcome is not None:
                outcomes[record['method']].append(outcome)

    summaries = {}
    for method in methods:
        collected = outcomes[method.name]
        if collected:
            summaries[method.name] = summarize(collected, method=method.name)
        else:
            summaries[method.name] = None
            logger.warning(f"[BENCHMARK] {method.name}: every replication failed")
        logger.info(f"[BENCHMARK] {method.name}: {len(collected)}/{reps} replications succeeded")
    return BenchmarkReport(
        methods=tuple(m.name for m in methods),
        seeds=tuple(seeds),
        summaries=summaries,
        records=tuple(records),
    )
