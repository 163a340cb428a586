"""
Files read and written by the command line tool.

Every output embeds the resolved run configuration: JSON files under a
"config" key, CSV files as a leading "# config: {...}" line. Floats in CSV are
written with 17 significant digits, and JSON floats use Python's shortest
round-trip repr, so re-reading reproduces the numbers exactly.
"""
import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from lmm_select.exceptions import InputError, SchemaError  # noqa: E402
from lmm_select.metrics import summary_rows  # noqa: E402
from lmm_select.models import LmmDataset, build_dataset, group_indicator_matrix  # noqa: E402

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
CONFIG_PREFIX = '# config: '
GROUP_COLUMN = 'group'
RESPONSE_COLUMN = 'y'
SVG_HASH_SALT = 'lmm-select'


def check_output_dir(path) -> Path:
    """The directory as a Path; InputError when it does not exist."""
    path = Path(path)
    if not path.is_dir():
        raise InputError(f"output directory does not exist: {path}")
    return path


def to_jsonable(value):
    """numpy scalars and arrays to plain Python values, recursively."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def config_line(config: dict) -> str:
    return CONFIG_PREFIX + json.dumps(to_jsonable(config), sort_keys=True) + '\n'


def write_json(path, payload: dict, config: dict) -> Path:
    path = Path(path)
    document = {'config': to_jsonable(config)}
    document.update(to_jsonable(payload))
    with open(path, 'w') as f:
        json.dump(document, f, indent=2)
        f.write('\n')
    logger.debug(f"wrote {path}")
    return path


def write_csv(path, frame: pd.DataFrame, config: Optional[dict] = None) -> Path:
    path = Path(path)
    with open(path, 'w', newline='') as f:
        if config is not None:
            f.write(config_line(config))
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.debug(f"wrote {path}")
    return path


def read_config_line(path) -> Optional[dict]:
    """The embedded configuration of a CSV written by write_csv, if any."""
    with open(path) as f:
        first = f.readline()
    if first.startswith(CONFIG_PREFIX):
        return json.loads(first[len(CONFIG_PREFIX):])
    return None


def write_dataset_csv(path, data: LmmDataset, covariate_names: Sequence[str], config: Optional[dict] = None) -> Path:
    """Columns group, y, then one column per covariate."""
    if len(covariate_names) != data.p:
        raise InputError(f"{len(covariate_names)} covariate names for {data.p} columns")
    frame = pd.DataFrame({GROUP_COLUMN: data.groups, RESPONSE_COLUMN: data.y})
    covariates = pd.DataFrame(np.asarray(data.X), columns=list(covariate_names))
    return write_csv(path, pd.concat([frame, covariates], axis=1), config)


def _leading_comment_lines(path: Path) -> int:
    """Count leading "#" lines; SchemaError names the first line that is not UTF-8."""
    count = 0
    comments_done = False
    with open(path, 'rb') as f:
        for number, raw in enumerate(f, start=1):
            try:
                line = raw.decode('utf-8')
            except UnicodeDecodeError as e:
                raise SchemaError(f"{path}: line {number}: not valid UTF-8 ({e.reason})", index=number) from e
            if not comments_done and line.startswith('#'):
                count += 1
            else:
                comments_done = True
    return count


def read_dataset_csv(path) -> Tuple[LmmDataset, List[str]]:
    """
    Load a dataset CSV with a random intercept per group.

    Group labels may be any integers; they are relabeled 1..n_groups in sorted
    order. Leading "#" lines are skipped.

    Returns:
        (LmmDataset, covariate names)

    Raises:
        SchemaError: Missing file or column, malformed row, bytes that are not
            UTF-8, or a non-numeric value; index is the 1-based line number
            in the file
    """
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"data file not found: {path}")
    skipped = _leading_comment_lines(path)
    try:
        frame = pd.read_csv(path, skiprows=skipped, dtype=str, keep_default_na=False, encoding='utf-8')
    except UnicodeDecodeError as e:
        raise SchemaError(f"{path}: not valid UTF-8 ({e.reason})") from e
    except pd.errors.ParserError as e:
        raise SchemaError(f"{path}: malformed CSV ({e})") from e
    except pd.errors.EmptyDataError as e:
        raise SchemaError(f"{path}: no header row") from e

    for column in (GROUP_COLUMN, RESPONSE_COLUMN):
        if column not in frame.columns:
            raise SchemaError(f"{path}: required column '{column}' is missing")
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")
    names = [c for c in frame.columns if c not in (GROUP_COLUMN, RESPONSE_COLUMN)]

    # Header is line skipped + 1; data row i is on line skipped + 2 + i
    numeric = frame.apply(pd.to_numeric, errors='coerce')
    bad = numeric.isna().to_numpy() | ~np.isfinite(numeric.to_numpy(dtype=float))
    if bad.any():
        row, col = map(int, np.argwhere(bad)[0])
        line = skipped + 2 + row
        raise SchemaError(
            f"{path}: line {line}: column '{frame.columns[col]}' has non-numeric value {frame.iat[row, col]!r}",
            index=line,
        )

    raw_groups = numeric[GROUP_COLUMN].to_numpy(dtype=float)
    fractional = np.flatnonzero(raw_groups != np.round(raw_groups))
    if fractional.size:
        line = skipped + 2 + int(fractional[0])
        raise SchemaError(f"{path}: line {line}: group label is not an integer", index=line)
    _, inverse = np.unique(raw_groups.astype(np.int64), return_inverse=True)
    groups = inverse.astype(np.int64) + 1
    n_groups = int(groups.max())

    data = build_dataset(
        numeric[RESPONSE_COLUMN].to_numpy(dtype=float),
        numeric[names].to_numpy(dtype=float).reshape(len(frame), len(names)),
        group_indicator_matrix(groups, n_groups),
        groups,
        n_groups=n_groups,
    )
    logger.info(f"Loaded {data.n_obs} observations, {data.p} covariates, {n_groups} groups from {path}")
    return data, names


def path_frame(path_result, covariate_names: Sequence[str], beta_scale=None) -> pd.DataFrame:
    """
    One row per lambda: lambda, beta_<name> per covariate, n_active, bic, converged.

    beta_scale divides the coefficients (back-transform from standardized
    covariates).
    """
    betas = np.array([fit.beta for fit in path_result.fits]).reshape(len(path_result.fits), len(covariate_names))
    if beta_scale is not None:
        betas = betas / np.asarray(beta_scale, dtype=float)
    frame = pd.DataFrame({'lambda': path_result.lambdas})
    coefficients = pd.DataFrame(betas, columns=[f'beta_{name}' for name in covariate_names])
    tail = pd.DataFrame({
        'n_active': path_result.n_active.astype(int),
        'bic': path_result.bics,
        'converged': path_result.converged,
    })
    return pd.concat([frame, coefficients, tail], axis=1)


def plot_path_svg(path, path_result, covariate_names: Sequence[str], beta_scale=None, true_active=None) -> Path:
    """
    Coefficient trajectories against log10(lambda) with the BIC minimizer marked.

    Output is byte-stable: fixed SVG hash salt and no date metadata.
    """
    path = Path(path)
    frame = path_frame(path_result, covariate_names, beta_scale)
    log_lambda = np.log10(np.maximum(path_result.lambdas, np.finfo(float).tiny))
    plt.rcParams['svg.hashsalt'] = SVG_HASH_SALT

    fig, ax = plt.subplots(figsize=(8, 5))
    for j, name in enumerate(covariate_names):
        highlighted = true_active is not None and bool(true_active[j])
        ax.plot(
            log_lambda,
            frame[f'beta_{name}'],
            color='black' if highlighted else 'grey',
            linewidth=1.6 if highlighted else 0.7,
            label=name if highlighted else None,
        )
    chosen = path_result.chosen_index
    ax.axvline(log_lambda[chosen], color='red', linestyle='--', linewidth=1.2, label='BIC minimum')
    ax.set_xlabel('log10(lambda)')
    ax.set_ylabel('coefficient')
    ax.set_title(f'Regularization path (|S| = {int(path_result.active_sets[chosen].sum())} at BIC minimum)')
    ax.legend(loc='best', fontsize='small')
    fig.tight_layout()
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    logger.debug(f"wrote {path}")
    return path


def format_table(rows: Sequence[Sequence[str]]) -> str:
    """Left-aligned text table, a dashed rule under the header."""
    widths = [max(len(str(row[i])) for row in rows) for i in range(len(rows[0]))]
    lines = ['  '.join(str(cell).ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, '  '.join('-' * width for width in widths))
    return '\n'.join(lines) + '\n'


def write_benchmark_outputs(out_dir, report, config: dict) -> List[Path]:
    """
    benchmark_summary.csv/.txt (criterion x method), zp_histogram.csv and
    replications.csv.
    """
    out_dir = Path(out_dir)
    summaries = [s for s in (report.summaries[m] for m in report.methods) if s is not None]
    written = []
    if summaries:
        rows = summary_rows(summaries)
        written.append(write_csv(out_dir / 'benchmark_summary.csv', pd.DataFrame(rows[1:], columns=rows[0]), config))
        with open(out_dir / 'benchmark_summary.txt', 'w') as f:
            f.write(config_line(config))
            f.write(format_table(rows))
        written.append(out_dir / 'benchmark_summary.txt')

    histogram_rows = [
        {'method': s.method, 'zp': zp, 'count': count}
        for s in summaries
        for zp, count in sorted(s.zp_histogram.items())
    ]
    histogram = pd.DataFrame(histogram_rows, columns=['method', 'zp', 'count'])
    written.append(write_csv(out_dir / 'zp_histogram.csv', histogram, config))

    columns = ['replication', 'seed', 'method', 'status', 'lambda', 'n_active', 'bic', 'mse', 'tp', 'tpc', 'zp', 'message']
    records = pd.DataFrame(list(report.records), columns=columns)
    written.append(write_csv(out_dir / 'replications.csv', records, config))
    return written
