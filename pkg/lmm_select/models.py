"""
Data types for the linear mixed-effects model y = X beta + Z gamma + eps.

The random effects covariance is parameterized as Gamma = sigma^2 Lambda Lambda^T,
with the relative covariance factor Lambda built from theta by a
CovarianceTemplate.
"""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from lmm_select.exceptions import (
    ConstraintError,
    DimensionError,
    EmptyGroupError,
    InputError,
    InvalidParameterError,
    NonFiniteError,
)

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LmmDataset:
    """
    Response, designs and grouping of one longitudinal dataset.

    Instances are immutable (arrays are read-only) and hash by identity, so
    they can key the factorization cache of the likelihood engine.
    """

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    groups: np.ndarray
    n_groups: int

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True)
class CovarianceTemplate:
    """
    Maps theta to a block-diagonal lower-triangular Lambda.

    Lambda = I_{n_blocks} (kron) T, where T is a block_size x block_size lower
    triangular factor filled column by column from theta. Diagonal entries of T
    are variance-like and constrained to be nonnegative.
    """

    n_blocks: int
    block_size: int

    @property
    def q(self) -> int:
        return self.n_blocks * self.block_size

    @property
    def theta_dim(self) -> int:
        k = self.block_size
        return k * (k + 1) // 2

    @property
    def variance_mask(self) -> Tuple[bool, ...]:
        rows, cols = self._lower_indices()
        return tuple(bool(r == c) for r, c in zip(rows, cols))

    @property
    def structure(self) -> str:
        k = self.block_size
        return f"I_{self.n_blocks} kron lower-triangular {k}x{k}"

    def _lower_indices(self) -> Tuple[np.ndarray, np.ndarray]:
        # Column-major lower triangle: (0,0), (1,0), ..., (k-1,0), (1,1), ...
        cols, rows = np.triu_indices(self.block_size)
        return rows, cols


@dataclass(frozen=True)
class ModelParams:
    """Fixed effects beta, variance components theta and residual variance sigma2."""

    beta: np.ndarray
    theta: np.ndarray
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise InvalidParameterError(f"sigma2 must be > 0, got {self.sigma2}")


def build_dataset(
    y,
    X,
    Z,
    groups,
    n_groups: Optional[int] = None,
) -> LmmDataset:
    """
    Validate raw arrays and assemble an LmmDataset.

    Args:
        y: Response vector of length n_obs
        X: Fixed-effects design, n_obs x p (p may be 0)
        Z: Random-effects design, n_obs x q
        groups: Integer group label per observation
        n_groups: When given, labels must lie in 1..n_groups and every label
            must appear. When omitted, labels are relabeled to 1..n_groups in
            sorted order.

    Returns:
        LmmDataset with read-only float arrays and labels in 1..n_groups

    Raises:
        DimensionError: Row counts disagree or an array has the wrong rank
        NonFiniteError: NaN/inf entry (index = offending row)
        EmptyGroupError: A label in 1..n_groups never appears (index = label)
    """
    y = np.array(y, dtype=float)
    if y.ndim == 2 and y.shape[1] == 1:
        y = y[:, 0]
    if y.ndim != 1 or y.shape[0] < 1:
        raise DimensionError(f"y must be a non-empty vector, got shape {y.shape}")
    n_obs = y.shape[0]

    X = np.array(X, dtype=float)
    Z = np.array(Z, dtype=float)
    for name, matrix in (('X', X), ('Z', Z)):
        if matrix.ndim != 2:
            raise DimensionError(f"{name} must be a matrix, got shape {matrix.shape}")
        if matrix.shape[0] != n_obs:
            raise DimensionError(
                f"{name} has {matrix.shape[0]} rows, expected {n_obs} (length of y)",
                index=matrix.shape[0],
            )

    for name, array in (('y', y), ('X', X), ('Z', Z)):
        bad = np.argwhere(~np.isfinite(array))
        if bad.size:
            row = int(bad[0][0])
            raise NonFiniteError(f"{name} has a non-finite entry in row {row}", index=row)

    raw_groups = np.asarray(groups)
    if raw_groups.ndim != 1 or raw_groups.shape[0] != n_obs:
        raise DimensionError(
            f"groups has {raw_groups.shape[0] if raw_groups.ndim else 0} entries, expected {n_obs}",
            index=raw_groups.shape[0] if raw_groups.ndim else 0,
        )
    if not np.issubdtype(raw_groups.dtype, np.integer):
        as_float = raw_groups.astype(float)
        bad = np.argwhere(~np.isfinite(as_float) | (as_float != np.round(as_float)))
        if bad.size:
            row = int(bad[0][0])
            raise InputError(f"group label in row {row} is not an integer", index=row)
        raw_groups = as_float.astype(np.int64)

    if n_groups is None:
        _, inverse = np.unique(raw_groups, return_inverse=True)
        labels = inverse.astype(np.int64) + 1
        n_groups = int(labels.max())
    else:
        if n_groups < 1:
            raise InvalidParameterError(f"n_groups must be >= 1, got {n_groups}")
        labels = raw_groups.astype(np.int64)
        outside = np.flatnonzero((labels < 1) | (labels > n_groups))
        if outside.size:
            row = int(outside[0])
            raise InputError(
                f"group label {labels[row]} in row {row} is outside 1..{n_groups}", index=row
            )
        counts = np.bincount(labels, minlength=n_groups + 1)[1:]
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            label = int(empty[0]) + 1
            raise EmptyGroupError(f"group {label} has no observations", index=label)

    return LmmDataset(
        y=_frozen(y),
        X=_frozen(X),
        Z=_frozen(Z),
        groups=_frozen(labels),
        n_groups=int(n_groups),
    )


def group_indicator_matrix(groups, n_groups: int) -> np.ndarray:
    """Random-intercept design: row i has a single 1 in column groups[i] - 1."""
    groups = np.asarray(groups, dtype=np.int64)
    Z = np.zeros((groups.shape[0], n_groups))
    Z[np.arange(groups.shape[0]), groups - 1] = 1.0
    return Z


def restrict_columns(data: LmmDataset, mask) -> LmmDataset:
    """Dataset with X restricted to the columns flagged in mask."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (data.p,):
        raise DimensionError(f"column mask has length {mask.shape[0]}, expected {data.p}")
    return dataclasses.replace(data, X=_frozen(np.ascontiguousarray(data.X[:, mask])))


def correlated_block_template(n_groups: int, block_size: int) -> CovarianceTemplate:
    """Template with one lower-triangular block_size x block_size factor repeated per group."""
    if n_groups < 1:
        raise InvalidParameterError(f"n_groups must be >= 1, got {n_groups}")
    if block_size < 1:
        raise InvalidParameterError(f"block_size must be >= 1, got {block_size}")
    return CovarianceTemplate(n_blocks=n_groups, block_size=block_size)


def random_intercept_template(n_groups: int) -> CovarianceTemplate:
    """Random intercept per subject: Lambda = theta_1 * I_q with q = n_groups."""
    return correlated_block_template(n_groups, 1)


def initial_theta(template: CovarianceTemplate) -> np.ndarray:
    """Cold start: variance components at 1, other components at 0."""
    return np.where(template.variance_mask, 1.0, 0.0)


def theta_lower_bounds(template: CovarianceTemplate) -> np.ndarray:
    return np.where(template.variance_mask, 0.0, -np.inf)


def check_theta(template: CovarianceTemplate, theta) -> np.ndarray:
    """Return theta as a float vector, raising if it is not admissible."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != template.theta_dim:
        raise DimensionError(
            f"theta has length {theta.shape[0]}, expected {template.theta_dim}",
            index=theta.shape[0],
        )
    for i, (value, is_variance) in enumerate(zip(theta, template.variance_mask)):
        if not np.isfinite(value):
            raise NonFiniteError(f"theta[{i}] is not finite", index=i)
        if is_variance and value < 0:
            raise ConstraintError(f"theta[{i}] = {value} must be >= 0 (variance component)", index=i)
    return theta


def materialize_lambda(template: CovarianceTemplate, theta) -> np.ndarray:
    """
    Build the q x q relative covariance factor Lambda for theta.

    Singular factors (e.g. theta = 0) are allowed.
    """
    theta = check_theta(template, theta)
    k = template.block_size
    block = np.zeros((k, k))
    rows, cols = template._lower_indices()
    block[rows, cols] = theta
    if template.n_blocks == 1:
        return block
    return np.kron(np.eye(template.n_blocks), block)
