"""
Synthetic longitudinal datasets from a random-intercept model with known truth.

    y_i = X_1i beta* + gamma_i 1_{n_i} + eps_i,  gamma_i ~ N(0, Gamma),  eps_i ~ N(0, sigma^2 I)

Only the first p_true covariates carry signal; the remaining columns are noise
that enters X but not y. All draws come from numpy's PCG64 generator
(numpy.random.default_rng) seeded with the scenario seed, in a fixed order:
covariates column by column, then gamma, then eps.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from lmm_select.exceptions import InvalidParameterError
from lmm_select.models import LmmDataset, build_dataset, group_indicator_matrix

logger = logging.getLogger(__name__)

DEFAULT_SEED = 3
DEFAULT_N_GROUPS = 90
DEFAULT_N_OBS = 300
DEFAULT_P_TOTAL = 54
DEFAULT_BETA_TRUE = (1.0, -1.0, -1.0, 1.0)
DEFAULT_SIGMA = 1.0
DEFAULT_GAMMA_VAR = 1.0

COVARIATE_KINDS = ('binary', 'uniform', 'normal')


@dataclass(frozen=True)
class CovariateSpec:
    """
    Distribution of one covariate column.

    binary: balanced 0/1 over observations; uniform: U[low, high];
    normal: N(0, 1) (low/high unused).
    """

    name: str
    kind: str
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if self.kind not in COVARIATE_KINDS:
            raise InvalidParameterError(f"covariate {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == 'uniform' and not self.low < self.high:
            raise InvalidParameterError(f"covariate {self.name!r}: need low < high, got [{self.low}, {self.high}]")

    def draw(self, rng: np.random.Generator, n_obs: int) -> np.ndarray:
        if self.kind == 'binary':
            return rng.permutation(np.arange(n_obs) % 2).astype(float)
        if self.kind == 'uniform':
            return rng.uniform(self.low, self.high, n_obs)
        return rng.standard_normal(n_obs)

    def to_dict(self) -> dict:
        return {'name': self.name, 'kind': self.kind, 'low': self.low, 'high': self.high}


# Named signal covariates of the default design; further signal columns are N(0, 1).
SIGNAL_COVARIATES = (
    CovariateSpec('sex', 'binary'),
    CovariateSpec('age', 'uniform', 18.0, 37.0),
    CovariateSpec('nscore', 'uniform', 20.0, 50.0),
    CovariateSpec('x4', 'normal'),
)


@dataclass(frozen=True)
class Scenario:
    n_groups: int
    obs_per_group: Tuple[int, ...]
    p_true: int
    p_total: int
    beta_true: Tuple[float, ...]
    sigma: float
    gamma_var: float
    covariate_specs: Tuple[CovariateSpec, ...]
    seed: int

    def __post_init__(self):
        if self.n_groups < 1:
            raise InvalidParameterError(f"n_groups must be >= 1, got {self.n_groups}")
        if len(self.obs_per_group) != self.n_groups:
            raise InvalidParameterError(
                f"obs_per_group has {len(self.obs_per_group)} entries, expected {self.n_groups}"
            )
        if min(self.obs_per_group) < 1:
            raise InvalidParameterError("every group needs at least one observation")
        if not 0 <= self.p_true <= self.p_total:
            raise InvalidParameterError(f"need 0 <= p_true <= p_total, got {self.p_true} and {self.p_total}")
        if len(self.beta_true) != self.p_true:
            raise InvalidParameterError(f"beta_true has {len(self.beta_true)} entries, expected {self.p_true}")
        if len(self.covariate_specs) != self.p_total:
            raise InvalidParameterError(
                f"{len(self.covariate_specs)} covariate specs for p_total={self.p_total}"
            )
        if not self.sigma >= 0 or not self.gamma_var >= 0:
            raise InvalidParameterError("sigma and gamma_var must be >= 0")

    @property
    def n_obs(self) -> int:
        return sum(self.obs_per_group)

    @property
    def covariate_names(self) -> List[str]:
        return [spec.name for spec in self.covariate_specs]

    def to_dict(self) -> dict:
        return {
            'n_groups': self.n_groups,
            'n_obs': self.n_obs,
            'obs_per_group': list(self.obs_per_group),
            'p_true': self.p_true,
            'p_total': self.p_total,
            'beta_true': list(self.beta_true),
            'sigma': self.sigma,
            'gamma_var': self.gamma_var,
            'covariates': [spec.to_dict() for spec in self.covariate_specs],
            'seed': self.seed,
            'generator': 'numpy PCG64 (default_rng)',
        }


@dataclass(frozen=True)
class SimulatedDataset:
    dataset: LmmDataset
    beta_star_star: np.ndarray
    gamma: np.ndarray
    true_active: np.ndarray
    covariate_names: Tuple[str, ...]

    def to_dict(self) -> dict:
        """Ground truth in JSON-ready form."""
        return {
            'covariates': list(self.covariate_names),
            'beta_star_star': self.beta_star_star.tolist(),
            'true_active': [bool(flag) for flag in self.true_active],
            'gamma': self.gamma.tolist(),
        }


def group_sizes(n_obs: int, n_groups: int) -> Tuple[int, ...]:
    """
    Group sizes as equal as possible, larger groups first.

    300 observations over 90 groups gives 30 groups of 4 then 60 groups of 3.
    """
    if n_groups < 1:
        raise InvalidParameterError(f"n_groups must be >= 1, got {n_groups}")
    if n_obs < n_groups:
        raise InvalidParameterError(f"{n_obs} observations cannot fill {n_groups} groups")
    base, extra = divmod(n_obs, n_groups)
    return tuple([base + 1] * extra + [base] * (n_groups - extra))


def spawn_seeds(master_seed: int, count: int) -> List[int]:
    """
    Independent child seeds for replications.

    Child i is the first 32-bit word of SeedSequence(master_seed).spawn(count)[i].
    """
    if count < 0:
        raise InvalidParameterError(f"count must be >= 0, got {count}")
    children = np.random.SeedSequence(master_seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def _covariate_specs(p_true: int, p_total: int) -> Tuple[CovariateSpec, ...]:
    signal = list(SIGNAL_COVARIATES[:p_true])
    signal += [CovariateSpec(f'x{j}', 'normal') for j in range(len(signal) + 1, p_true + 1)]
    n_noise = p_total - p_true
    width = max(2, len(str(n_noise)))
    noise = [CovariateSpec(f'noise{j:0{width}d}', 'normal') for j in range(1, n_noise + 1)]
    return tuple(signal + noise)


def scenario_with(
    seed: int = DEFAULT_SEED,
    n_groups: int = DEFAULT_N_GROUPS,
    n_obs: Optional[int] = None,
    obs_per_group: Union[int, Sequence[int], None] = None,
    p_total: int = DEFAULT_P_TOTAL,
    beta_true: Sequence[float] = DEFAULT_BETA_TRUE,
    sigma: float = DEFAULT_SIGMA,
    gamma_var: float = DEFAULT_GAMMA_VAR,
) -> Scenario:
    """
    Scenario with the default design, overridden where given.

    Args:
        seed: Generator seed
        n_groups: Number of subjects
        n_obs: Total observations, spread by group_sizes (default 300 when
            obs_per_group is also omitted)
        obs_per_group: Constant group size, or one size per group
        p_total: Number of covariate columns
        beta_true: Nonzero coefficients of the leading covariates
        sigma: Residual standard deviation
        gamma_var: Random-intercept variance

    Returns:
        Scenario
    """
    if obs_per_group is None:
        sizes = group_sizes(DEFAULT_N_OBS if n_obs is None else n_obs, n_groups)
    elif isinstance(obs_per_group, (int, np.integer)):
        sizes = (int(obs_per_group),) * n_groups
    else:
        sizes = tuple(int(size) for size in obs_per_group)
    if n_obs is not None and sum(sizes) != n_obs:
        raise InvalidParameterError(f"group sizes sum to {sum(sizes)}, expected n_obs={n_obs}")
    beta_true = tuple(float(b) for b in beta_true)
    return Scenario(
        n_groups=n_groups,
        obs_per_group=sizes,
        p_true=len(beta_true),
        p_total=p_total,
        beta_true=beta_true,
        sigma=float(sigma),
        gamma_var=float(gamma_var),
        covariate_specs=_covariate_specs(len(beta_true), p_total),
        seed=int(seed),
    )


def default_scenario(seed: int = DEFAULT_SEED) -> Scenario:
    """90 subjects, 300 observations, 4 signal and 50 noise covariates, sigma = Gamma = 1."""
    return scenario_with(seed=seed)


def simulate_dataset(scenario: Scenario) -> SimulatedDataset:
    rng = np.random.default_rng(scenario.seed)
    n_obs = scenario.n_obs
    groups = np.repeat(np.arange(1, scenario.n_groups + 1), scenario.obs_per_group)

    X = np.empty((n_obs, scenario.p_total))
    for j, spec in enumerate(scenario.covariate_specs):
        X[:, j] = spec.draw(rng, n_obs)
    gamma = rng.normal(0.0, np.sqrt(scenario.gamma_var), scenario.n_groups)
    eps = rng.normal(0.0, scenario.sigma, n_obs)

    beta_star_star = np.zeros(scenario.p_total)
    beta_star_star[:scenario.p_true] = scenario.beta_true
    y = X[:, :scenario.p_true] @ beta_star_star[:scenario.p_true] + gamma[groups - 1] + eps

    Z = group_indicator_matrix(groups, scenario.n_groups)
    dataset = build_dataset(y, X, Z, groups, n_groups=scenario.n_groups)
    logger.debug(
        f"[SIMULATE] seed={scenario.seed}: {n_obs} observations, {scenario.n_groups} groups, "
        f"{scenario.p_total} covariates ({scenario.p_true} active)"
    )
    return SimulatedDataset(
        dataset=dataset,
        beta_star_star=beta_star_star,
        gamma=gamma,
        true_active=beta_star_star != 0,
        covariate_names=tuple(scenario.covariate_names),
    )
