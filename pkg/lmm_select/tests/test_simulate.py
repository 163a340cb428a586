"""
Tests for the dataset simulator.
"""
import numpy as np
import pytest

from lmm_select.exceptions import InvalidParameterError
from lmm_select.simulate import (
    CovariateSpec,
    default_scenario,
    group_sizes,
    scenario_with,
    simulate_dataset,
    spawn_seeds,
)


class TestScenario:
    """Tests for scenario construction."""

    def test_default_design(self):
        """Test 90 groups, 300 observations, 4 signal and 50 noise covariates."""
        scenario = default_scenario(3)
        assert (scenario.n_groups, scenario.n_obs, scenario.p_true, scenario.p_total) == (90, 300, 4, 54)
        assert scenario.beta_true == (1.0, -1.0, -1.0, 1.0)
        assert (scenario.sigma, scenario.gamma_var) == (1.0, 1.0)
        assert scenario.covariate_names[:4] == ['sex', 'age', 'nscore', 'x4']
        assert scenario.covariate_names[4] == 'noise01'
        assert scenario.covariate_names[-1] == 'noise50'

    def test_group_sizes(self):
        """Test 300 over 90 gives 30 groups of 4 followed by 60 groups of 3."""
        sizes = group_sizes(300, 90)
        assert sizes == (4,) * 30 + (3,) * 60

    def test_group_sizes_require_enough_observations(self):
        """Test fewer observations than groups is rejected."""
        with pytest.raises(InvalidParameterError):
            group_sizes(5, 10)

    def test_custom_constant_size(self):
        """Test a constant group size is replicated over groups."""
        scenario = scenario_with(n_groups=10, obs_per_group=3, p_total=8)
        assert scenario.n_obs == 30
        assert scenario.covariate_names == ['sex', 'age', 'nscore', 'x4', 'noise01', 'noise02', 'noise03', 'noise04']

    def test_more_signal_columns(self):
        """Test signal columns beyond the named four are standard normal x5, x6, ..."""
        scenario = scenario_with(p_total=7, beta_true=[1, 1, 1, 1, 1, 1])
        assert scenario.covariate_names == ['sex', 'age', 'nscore', 'x4', 'x5', 'x6', 'noise01']

    def test_invalid_scenario(self):
        """Test p_true > p_total and negative variances are rejected."""
        with pytest.raises(InvalidParameterError):
            scenario_with(p_total=3)
        with pytest.raises(InvalidParameterError):
            scenario_with(sigma=-1.0)

    def test_covariate_spec_validation(self):
        """Test unknown kinds and empty uniform ranges are rejected."""
        with pytest.raises(InvalidParameterError):
            CovariateSpec('z', 'poisson')
        with pytest.raises(InvalidParameterError):
            CovariateSpec('z', 'uniform', 5.0, 5.0)

    def test_to_dict(self):
        """Test the serialized scenario names its generator and seed."""
        record = default_scenario(11).to_dict()
        assert record['seed'] == 11
        assert record['n_obs'] == 300
        assert len(record['covariates']) == 54
        assert 'PCG64' in record['generator']


class TestSimulateDataset:
    """Tests for simulate_dataset."""

    def test_dimensions(self):
        """Test the default scenario yields a 300 x 54 design over 90 groups."""
        simulated = simulate_dataset(default_scenario(3))
        data = simulated.dataset
        assert data.X.shape == (300, 54)
        assert data.Z.shape == (300, 90)
        assert data.n_groups == 90
        np.testing.assert_array_equal(data.Z.sum(axis=1), np.ones(300))

    def test_truth(self):
        """Test beta** pads beta* with zeros and marks the first four as active."""
        simulated = simulate_dataset(default_scenario(3))
        assert simulated.beta_star_star[:4].tolist() == [1.0, -1.0, -1.0, 1.0]
        assert not simulated.beta_star_star[4:].any()
        assert simulated.true_active.sum() == 4
        assert simulated.true_active[:4].all()

    def test_covariate_distributions(self):
        """Test sex is balanced 0/1 and age, nscore lie in their ranges."""
        X = simulate_dataset(default_scenario(3)).dataset.X
        assert set(np.unique(X[:, 0])) == {0.0, 1.0}
        assert X[:, 0].sum() == 150
        assert X[:, 1].min() >= 18.0 and X[:, 1].max() <= 37.0
        assert X[:, 2].min() >= 20.0 and X[:, 2].max() <= 50.0

    def test_noiseless_limit(self):
        """Test sigma = Gamma = 0 gives y = X_1 beta* exactly."""
        simulated = simulate_dataset(scenario_with(seed=5, sigma=0.0, gamma_var=0.0))
        data = simulated.dataset
        np.testing.assert_allclose(data.y, data.X[:, :4] @ np.array([1.0, -1.0, -1.0, 1.0]), rtol=1e-14, atol=1e-12)

    def test_realized_variances(self):
        """Test realized gamma and residual variances fall in chi-square ranges (averaged over seeds)."""
        gamma_vars, residual_vars = [], []
        for seed in range(1, 6):
            simulated = simulate_dataset(default_scenario(seed))
            data = simulated.dataset
            residual = data.y - data.X @ simulated.beta_star_star - simulated.gamma[data.groups - 1]
            gamma_vars.append(np.var(simulated.gamma, ddof=1))
            residual_vars.append(np.var(residual, ddof=1))
        assert 0.6 <= np.mean(gamma_vars) <= 1.5
        assert 0.85 <= np.mean(residual_vars) <= 1.18

    def test_deterministic(self):
        """Test the same seed gives bit-identical datasets and a new seed does not."""
        first = simulate_dataset(default_scenario(8)).dataset
        second = simulate_dataset(default_scenario(8)).dataset
        other = simulate_dataset(default_scenario(9)).dataset
        np.testing.assert_array_equal(first.y, second.y)
        np.testing.assert_array_equal(first.X, second.X)
        assert not np.array_equal(first.y, other.y)


class TestSpawnSeeds:
    """Tests for spawn_seeds."""

    def test_reproducible_and_distinct(self):
        """Test child seeds repeat for a master seed and differ from each other."""
        seeds = spawn_seeds(42, 20)
        assert seeds == spawn_seeds(42, 20)
        assert len(set(seeds)) == 20
        assert seeds[:5] == spawn_seeds(42, 5)

    def test_negative_count(self):
        """Test a negative count is rejected."""
        with pytest.raises(InvalidParameterError):
            spawn_seeds(1, -1)
