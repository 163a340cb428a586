"""
Pytest fixtures for lmm_select tests.
"""
import logging

import numpy as np
import pytest

from lmm_select.likelihood import clear_factor_cache
from lmm_select.models import (
    build_dataset,
    correlated_block_template,
    group_indicator_matrix,
    random_intercept_template,
)
from lmm_select.simulate import scenario_with, simulate_dataset


@pytest.fixture(autouse=True)
def configure_logging():
    """Route library logging through pytest's capture at DEBUG level."""
    logging.getLogger('lmm_select').setLevel(logging.DEBUG)
    yield
    clear_factor_cache()


def make_random_instance(rng, n_obs=None, with_slopes=None):
    """
    Small random dataset, template and parameters.

    Random intercepts, or (with_slopes) a correlated intercept/slope block per
    group; n_obs <= 20 and q <= 6.
    """
    if with_slopes is None:
        with_slopes = bool(rng.integers(0, 2))
    n_groups = int(rng.integers(2, 4 if with_slopes else 7))
    n_obs = n_obs or int(rng.integers(max(n_groups + 2, 6), 21))
    groups = np.concatenate([np.arange(1, n_groups + 1), rng.integers(1, n_groups + 1, n_obs - n_groups)])
    p = int(rng.integers(1, 4))
    X = rng.standard_normal((n_obs, p))
    y = rng.standard_normal(n_obs)
    indicator = group_indicator_matrix(groups, n_groups)
    if with_slopes:
        slope = rng.standard_normal(n_obs)
        Z = np.zeros((n_obs, 2 * n_groups))
        Z[:, 0::2] = indicator
        Z[:, 1::2] = indicator * slope[:, None]
        template = correlated_block_template(n_groups, 2)
        theta = np.array([rng.uniform(0.2, 2.0), rng.normal(0.0, 0.5), rng.uniform(0.2, 2.0)])
    else:
        Z = indicator
        template = random_intercept_template(n_groups)
        theta = np.array([rng.uniform(0.1, 2.0)])
    data = build_dataset(y, X, Z, groups, n_groups=n_groups)
    beta = rng.standard_normal(p)
    sigma2 = float(rng.uniform(0.2, 3.0))
    return data, template, beta, theta, sigma2


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(20240611)


@pytest.fixture
def random_instances():
    """Fifty random small instances (seeded)."""
    generator = np.random.default_rng(7)
    return [make_random_instance(generator) for _ in range(50)]


@pytest.fixture
def small_dataset():
    """
    40 observations in 10 groups, 6 covariates of which the first two matter.
    """
    generator = np.random.default_rng(11)
    n_groups, n_obs, p = 10, 40, 6
    groups = np.repeat(np.arange(1, n_groups + 1), n_obs // n_groups)
    X = generator.standard_normal((n_obs, p))
    gamma = generator.normal(0.0, 1.0, n_groups)
    y = X[:, 0] * 2.0 - X[:, 1] * 1.5 + gamma[groups - 1] + generator.normal(0.0, 0.5, n_obs)
    data = build_dataset(y, X, group_indicator_matrix(groups, n_groups), groups, n_groups=n_groups)
    return data, random_intercept_template(n_groups)


@pytest.fixture
def sixty_obs_dataset():
    """p=6, n_obs=60, 15 groups of 4; coefficients (1, -1, 0.5, 0, 0, 0)."""
    generator = np.random.default_rng(5)
    n_groups, n_obs = 15, 60
    groups = np.repeat(np.arange(1, n_groups + 1), 4)
    X = generator.standard_normal((n_obs, 6))
    gamma = generator.normal(0.0, 1.0, n_groups)
    y = X @ np.array([1.0, -1.0, 0.5, 0.0, 0.0, 0.0]) + gamma[groups - 1] + generator.standard_normal(n_obs)
    data = build_dataset(y, X, group_indicator_matrix(groups, n_groups), groups, n_groups=n_groups)
    return data, random_intercept_template(n_groups)


@pytest.fixture
def smoke_scenario():
    """Reduced benchmark design: 30 groups of 4, 10 covariates, 4 active."""
    return scenario_with(seed=3, n_groups=30, obs_per_group=4, p_total=10)


@pytest.fixture
def smoke_simulated(smoke_scenario):
    """Dataset drawn from smoke_scenario."""
    return simulate_dataset(smoke_scenario)
