"""
Tests for the Monte-Carlo benchmark.
"""
from types import SimpleNamespace

import numpy as np
import pytest

from lmm_select import benchmark
from lmm_select.benchmark import METHODS, resolve_methods, run_benchmark, run_replication
from lmm_select.exceptions import ConvergenceError, InvalidParameterError
from lmm_select.metrics import mse
from lmm_select.model_selection import lambda_grid
from lmm_select.simulate import default_scenario

SMALL_GRID = lambda_grid(0.1, 50.0, 4)


class TestMethods:
    """Tests for method resolution."""

    def test_penalty_families(self):
        """Test iwr uses the L0-like weights and l1 the L1-like weights."""
        assert METHODS['iwr'].penalty.penalty_power == 0.0
        assert METHODS['l1'].penalty.penalty_power == 1.0

    def test_unknown_method(self):
        """Test an unknown method name is rejected."""
        with pytest.raises(InvalidParameterError):
            resolve_methods(['iwr', 'scad'])

    def test_no_methods(self):
        """Test an empty method list is rejected."""
        with pytest.raises(InvalidParameterError):
            resolve_methods([])


class TestRunReplication:
    """Tests for run_replication."""

    def test_records_and_outcomes(self, smoke_scenario):
        """Test one record per method with beta_hat zero outside the active set."""
        results = run_replication(smoke_scenario, 0, 123, resolve_methods(['iwr', 'l1']), SMALL_GRID)
        assert [record['method'] for record, _ in results] == ['iwr', 'l1']
        for record, outcome in results:
            assert record['status'] == 'ok'
            assert record['seed'] == 123
            assert record['n_active'] == int(outcome.active_set.sum())
            assert np.all(outcome.beta_hat[~outcome.active_set] == 0.0)
            assert 0.0 <= record['zp'] <= 1.0

    def test_failure_recorded(self, smoke_scenario, mocker):
        """Test a failing method is recorded instead of aborting the replication."""
        mocker.patch('lmm_select.benchmark.regularization_path', side_effect=ConvergenceError("no converged fit"))
        results = run_replication(smoke_scenario, 4, 9, resolve_methods(['iwr']), SMALL_GRID)
        record, outcome = results[0]
        assert outcome is None
        assert record['status'] == 'failed'
        assert 'no converged fit' in record['message']

    def test_scores_refit_estimate(self, smoke_scenario, mocker):
        """Test MSE is computed on the refit on the chosen set, not on the shrunken penalized fit."""
        active = np.zeros(10, dtype=bool)
        active[:4] = True
        refit_beta = np.zeros(10)
        refit_beta[:4] = [1.2, -1.0, -1.0, 1.0]
        penalized_beta = np.zeros(10)
        penalized_beta[:4] = [0.0131, -0.991, -0.991, 0.752]
        chosen = SimpleNamespace(
            index=3, lam=31.6, active_set=active, bic=400.0,
            params=SimpleNamespace(beta=refit_beta), fit=SimpleNamespace(beta=penalized_beta),
        )
        mocker.patch('lmm_select.benchmark.regularization_path')
        mocker.patch('lmm_select.benchmark.select_model', return_value=chosen)

        record, outcome = run_replication(smoke_scenario, 0, 4, resolve_methods(['iwr']), SMALL_GRID)[0]
        np.testing.assert_array_equal(outcome.beta_hat, refit_beta)
        assert record['mse'] == pytest.approx(0.04)
        assert (record['tp'], record['tpc'], record['zp']) == (True, True, 1.0)

    def test_beta_hat_matches_chosen_refit(self, smoke_scenario, mocker):
        """Test the scored estimate is the refit returned with the BIC choice."""
        spy = mocker.spy(benchmark, 'select_model')
        record, outcome = run_replication(smoke_scenario, 0, 123, resolve_methods(['iwr']), SMALL_GRID)[0]
        np.testing.assert_array_equal(outcome.beta_hat, spy.spy_return.params.beta)
        assert record['mse'] == pytest.approx(mse(spy.spy_return.params.beta, outcome.beta_star_star))


class TestRunBenchmark:
    """Tests for run_benchmark."""

    def test_deterministic(self, smoke_scenario):
        """Test the same master seed reproduces every record."""
        methods = resolve_methods(['iwr'])
        first = run_benchmark(smoke_scenario, 2, 77, methods, SMALL_GRID)
        second = run_benchmark(smoke_scenario, 2, 77, methods, SMALL_GRID)
        assert first.records == second.records
        assert first.seeds == second.seeds

    def test_workers_do_not_change_results(self, smoke_scenario):
        """Test results are gathered in replication order whatever the worker count."""
        methods = resolve_methods(['iwr', 'l1'])
        serial = run_benchmark(smoke_scenario, 2, 5, methods, SMALL_GRID, n_jobs=1)
        parallel = run_benchmark(smoke_scenario, 2, 5, methods, SMALL_GRID, n_jobs=2)
        assert serial.records == parallel.records
        assert serial.summaries['iwr'].n_replications == 2
        assert serial.effective_replications('l1') == 2

    def test_all_failed(self, smoke_scenario, mocker):
        """Test a method that always fails has no summary and zero effective replications."""
        mocker.patch('lmm_select.benchmark.regularization_path', side_effect=ConvergenceError("stalled"))
        report = run_benchmark(smoke_scenario, 1, 1, resolve_methods(['iwr']), SMALL_GRID)
        assert report.summaries['iwr'] is None
        assert report.effective_replications('iwr') == 0

    def test_requires_replications(self, smoke_scenario):
        """Test reps < 1 is rejected."""
        with pytest.raises(InvalidParameterError):
            run_benchmark(smoke_scenario, 0, 1, resolve_methods(['iwr']), SMALL_GRID)


@pytest.mark.slow
class TestDeskScaleReplication:
    """Twenty replications of the default design on a 25-point grid."""

    @pytest.fixture(scope='class')
    def report(self):
        return run_benchmark(
            default_scenario(3), 20, 2016, resolve_methods(['iwr', 'l1']), lambda_grid(1e-2, 1e2, 25), n_jobs=-1
        )

    def test_iwr_quality(self, report):
        """Test containment, zero recovery and error of adaptive ridge."""
        iwr = report.summaries['iwr']
        assert iwr.n_replications == 20
        assert iwr.tpc_rate >= 0.70
        assert iwr.zp_mean >= 0.95
        assert iwr.mse_mean <= 0.60

    def test_l1_baseline_worse(self, report):
        """Test the L1 baseline has a larger mean squared error."""
        assert report.summaries['l1'].mse_mean > report.summaries['iwr'].mse_mean

    def test_four_selected_often(self, report):
        """Test the BIC choice has exactly four covariates in at least half of the replications."""
        sizes = [r['n_active'] for r in report.records if r['method'] == 'iwr' and r['status'] == 'ok']
        assert sum(1 for size in sizes if size == 4) >= 10
