"""
Tests for report files.
"""
import json
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from lmm_select.exceptions import InputError, SchemaError
from lmm_select.metrics import summarize
from lmm_select.reports import (
    check_output_dir,
    format_table,
    path_frame,
    plot_path_svg,
    read_config_line,
    read_dataset_csv,
    write_benchmark_outputs,
    write_dataset_csv,
    write_json,
)
from lmm_select.tests.test_metrics import make_outcome


@pytest.fixture
def fake_path():
    """Three-lambda path over two covariates."""
    return SimpleNamespace(
        lambdas=np.array([10.0, 1.0, 0.1]),
        fits=[SimpleNamespace(beta=np.array(b)) for b in ([0.0, 0.0], [1.5, 0.0], [1.6, -0.2])],
        active_sets=np.array([[False, False], [True, False], [True, True]]),
        n_active=np.array([0, 1, 2]),
        bics=np.array([120.0, 95.5, 99.25]),
        converged=np.array([True, True, True]),
        chosen_index=1,
    )


class TestDatasetCsv:
    """Tests for write_dataset_csv and read_dataset_csv."""

    def test_round_trip(self, tmp_path, smoke_simulated):
        """Test a written dataset reads back bit-identically with its names and config."""
        data = smoke_simulated.dataset
        path = write_dataset_csv(tmp_path / 'data.csv', data, smoke_simulated.covariate_names, {'seed': 3})

        loaded, names = read_dataset_csv(path)
        assert names == list(smoke_simulated.covariate_names)
        np.testing.assert_array_equal(loaded.y, data.y)
        np.testing.assert_array_equal(loaded.X, data.X)
        np.testing.assert_array_equal(loaded.groups, data.groups)
        assert read_config_line(path) == {'seed': 3}

    def test_header(self, tmp_path, smoke_simulated):
        """Test columns are group, y, then covariates."""
        path = write_dataset_csv(tmp_path / 'data.csv', smoke_simulated.dataset, smoke_simulated.covariate_names)
        header = path.read_text().splitlines()[0].split(',')
        assert header[:3] == ['group', 'y', 'sex']
        assert len(header) == 2 + smoke_simulated.dataset.p

    def test_arbitrary_group_labels(self, tmp_path):
        """Test labels are relabeled in sorted order and Z is the indicator matrix."""
        path = tmp_path / 'data.csv'
        path.write_text("group,y,a\n7,1.0,0.5\n3,2.0,0.1\n7,0.5,0.2\n")
        data, names = read_dataset_csv(path)
        assert names == ['a']
        assert data.groups.tolist() == [2, 1, 2]
        np.testing.assert_array_equal(data.Z, [[0, 1], [1, 0], [0, 1]])

    def test_missing_column(self, tmp_path):
        """Test a missing response column is named."""
        path = tmp_path / 'data.csv'
        path.write_text("group,a\n1,0.5\n")
        with pytest.raises(SchemaError) as exc_info:
            read_dataset_csv(path)
        assert "'y'" in str(exc_info.value)
        assert exc_info.value.exit_code == 2

    def test_non_numeric_value_names_line(self, tmp_path):
        """Test a bad cell reports its 1-based line number."""
        path = tmp_path / 'data.csv'
        path.write_text("# config: {}\ngroup,y,a\n1,1.0,0.5\n1,2.0,abc\n2,0.5,0.2\n")
        with pytest.raises(SchemaError) as exc_info:
            read_dataset_csv(path)
        assert exc_info.value.index == 4
        assert 'line 4' in str(exc_info.value)

    def test_empty_cell(self, tmp_path):
        """Test an empty cell is reported like a non-numeric one."""
        path = tmp_path / 'data.csv'
        path.write_text("group,y,a\n1,1.0,0.5\n2,,0.2\n")
        with pytest.raises(SchemaError) as exc_info:
            read_dataset_csv(path)
        assert exc_info.value.index == 3

    def test_extra_field(self, tmp_path):
        """Test a row with too many fields is a schema error."""
        path = tmp_path / 'data.csv'
        path.write_text("group,y,a\n1,1.0,0.5\n2,0.5,0.2,9\n")
        with pytest.raises(SchemaError):
            read_dataset_csv(path)

    def test_fractional_group(self, tmp_path):
        """Test a fractional group label is rejected with its line."""
        path = tmp_path / 'data.csv'
        path.write_text("group,y,a\n1,1.0,0.5\n1.5,0.5,0.2\n")
        with pytest.raises(SchemaError) as exc_info:
            read_dataset_csv(path)
        assert exc_info.value.index == 3

    def test_invalid_utf8_names_line(self, tmp_path):
        """Test bytes that are not UTF-8 are a schema error with their line number."""
        path = tmp_path / 'data.csv'
        path.write_bytes(b"# config: {}\ngroup,y,a\n1,1.0,0.5\n2,\xff\xfe,0.2\n")
        with pytest.raises(SchemaError) as exc_info:
            read_dataset_csv(path)
        assert exc_info.value.index == 4
        assert 'UTF-8' in str(exc_info.value)
        assert exc_info.value.exit_code == 2

    def test_invalid_utf8_in_comment(self, tmp_path):
        """Test a bad byte in a leading comment line is reported on that line."""
        path = tmp_path / 'data.csv'
        path.write_bytes(b"# caf\xe9\ngroup,y,a\n1,1.0,0.5\n")
        with pytest.raises(SchemaError) as exc_info:
            read_dataset_csv(path)
        assert exc_info.value.index == 1

    def test_missing_file(self, tmp_path):
        """Test a missing file is a schema error naming the path."""
        with pytest.raises(SchemaError) as exc_info:
            read_dataset_csv(tmp_path / 'absent.csv')
        assert 'absent.csv' in str(exc_info.value)


class TestOtherOutputs:
    """Tests for JSON, path and benchmark outputs."""

    def test_write_json_embeds_config(self, tmp_path):
        """Test numpy values are serialized and the config is embedded."""
        path = write_json(tmp_path / 'fit.json', {'beta': np.array([1.0, 0.0]), 'n': np.int64(3)}, {'lam': 1.0})
        document = json.loads(path.read_text())
        assert document == {'config': {'lam': 1.0}, 'beta': [1.0, 0.0], 'n': 3}

    def test_path_frame(self, fake_path):
        """Test one row per lambda with named coefficients and back-transform."""
        frame = path_frame(fake_path, ['a', 'b'], beta_scale=np.array([2.0, 1.0]))
        assert list(frame.columns) == ['lambda', 'beta_a', 'beta_b', 'n_active', 'bic', 'converged']
        assert frame['beta_a'].tolist() == [0.0, 0.75, 0.8]
        assert frame['n_active'].tolist() == [0, 1, 2]

    def test_svg_deterministic(self, tmp_path, fake_path):
        """Test two renderings are byte-identical and carry a dashed marker."""
        first = plot_path_svg(tmp_path / 'one.svg', fake_path, ['a', 'b'], true_active=[True, False])
        second = plot_path_svg(tmp_path / 'two.svg', fake_path, ['a', 'b'], true_active=[True, False])
        content = first.read_bytes()
        assert content == second.read_bytes()
        assert content.lstrip().startswith(b'<?xml')
        assert b'stroke-dasharray' in content

    def test_format_table(self):
        """Test columns are aligned under a dashed rule."""
        text = format_table([['criterion', 'iwr'], ['MSE', '0.254']])
        assert text.splitlines() == ['criterion  iwr', '---------  -----', 'MSE        0.254']

    def test_benchmark_outputs(self, tmp_path):
        """Test summary, histogram and per-replication files are written."""
        report = SimpleNamespace(
            methods=('iwr',),
            summaries={'iwr': summarize([make_outcome(range(4))], method='iwr')},
            records=({'replication': 0, 'seed': 1, 'method': 'iwr', 'status': 'ok', 'lambda': 1.0,
                      'n_active': 4, 'bic': 10.0, 'mse': 0.0, 'tp': True, 'tpc': True, 'zp': 1.0, 'message': ''},),
        )
        write_benchmark_outputs(tmp_path, report, {'reps': 1})
        for name in ('benchmark_summary.csv', 'benchmark_summary.txt', 'zp_histogram.csv', 'replications.csv'):
            assert (tmp_path / name).exists()
        histogram = pd.read_csv(tmp_path / 'zp_histogram.csv', comment='#')
        assert histogram.to_dict('records') == [{'method': 'iwr', 'zp': 1.0, 'count': 1}]
        assert read_config_line(tmp_path / 'replications.csv') == {'reps': 1}

    def test_check_output_dir(self, tmp_path):
        """Test a missing directory is an input error naming the path."""
        assert check_output_dir(tmp_path) == tmp_path
        with pytest.raises(InputError) as exc_info:
            check_output_dir(tmp_path / 'missing')
        assert 'missing' in str(exc_info.value)
