"""Rolling-epoch Pearson correlation matrices and the noise-suppression power map.

An epoch is a window of ``window`` consecutive return days advanced by
``shift`` days at a time.  Epoch tau (1-based) covers return columns
``(tau-1)*shift .. (tau-1)*shift + window - 1``, so a panel of L return days
yields ``floor((L - window)/shift) + 1`` epochs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .ingest import ReturnPanel


@dataclass(frozen=True)
class EpochSpec:
    window: int = 20
    shift: int = 1

    def __post_init__(self) -> None:
        if self.window < 2:
            raise ValueError(f"window must be >= 2, got {self.window}")
        if self.shift < 1:
            raise ValueError(f"shift must be >= 1, got {self.shift}")


def epoch_count(n_returns: int, spec: EpochSpec) -> int:
    if n_returns < spec.window:
        raise NumericError(
            f"window needs {spec.window} return days but only {n_returns} are available"
        )
    return (n_returns - spec.window) // spec.shift + 1


def epoch_bounds(epoch_index: int, spec: EpochSpec) -> tuple[int, int]:
    """Half-open return-column range covered by a 1-based epoch index."""
    if epoch_index < 1:
        raise ValueError(f"epoch indices are 1-based, got {epoch_index}")
    start = (epoch_index - 1) * spec.shift
    return start, start + spec.window


@dataclass
class CorrelationMatrix:
    """One epoch's correlation matrix.

    ``epsilon_applied`` records the power-map exponent already applied to
    ``values`` (0.0 means plain Pearson).
    """

    values: np.ndarray
    epoch_index: int
    start_date: str
    end_date: str
    epsilon_applied: float = 0.0


@dataclass
class EpochCorrelationSeries:
    """Ordered correlation matrices for every epoch of a panel."""

    spec: EpochSpec
    labels: list[str]
    matrices: list[CorrelationMatrix]
    epsilon: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_epochs(self) -> int:
        return len(self.matrices)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def values_stack(self) -> np.ndarray:
        return np.stack([m.values for m in self.matrices])


def pearson_correlation(X: np.ndarray) -> np.ndarray:
    """Population-normalized Pearson correlation of an N x T sample block.

    C_ij = (<x_i x_j> - <x_i><x_j>) / (sigma_i sigma_j) with all moments
    taken as plain means over the T columns.  A row with zero variance gets
    correlation 0 with every other row and 1 with itself, plus a warning, so
    an isolated degenerate window cannot poison downstream dissimilarities.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise NumericError(f"need an N x T block with T >= 2, got shape {X.shape}")
    centered = X - X.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / X.shape[1]
    var = np.diag(cov).copy()
    # relative floor catches constant rows whose centering left rounding dust
    scale = (X * X).mean(axis=1)
    flat = var <= 1e-24 * np.maximum(scale, 1e-300)
    if flat.any():
        warnings.warn(
            f"zero variance in rows {np.flatnonzero(flat).tolist()}; "
            "their correlations are set to 0",
            RuntimeWarning,
            stacklevel=2,
        )
        var[flat] = 1.0
    sd = np.sqrt(var)
    corr = cov / np.outer(sd, sd)
    corr[flat, :] = 0.0
    corr[:, flat] = 0.0
    corr = (corr + corr.T) / 2.0
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    return corr


def epoch_correlations(panel: ReturnPanel, spec: EpochSpec = EpochSpec()) -> EpochCorrelationSeries:
    """Correlation matrix of every epoch of a return panel."""
    n = epoch_count(panel.n_returns, spec)
    matrices = []
    for index in range(1, n + 1):
        lo, hi = epoch_bounds(index, spec)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            values = pearson_correlation(panel.returns[:, lo:hi])
        for w in caught:
            warnings.warn(f"epoch {index}: {w.message}", RuntimeWarning, stacklevel=2)
        matrices.append(
            CorrelationMatrix(
                values=values,
                epoch_index=index,
                start_date=panel.dates[lo],
                end_date=panel.dates[hi - 1],
            )
        )
    return EpochCorrelationSeries(spec=spec, labels=list(panel.tickers), matrices=matrices)


def _power(values: np.ndarray, epsilon: float) -> np.ndarray:
    # epsilon 0 must be a bit-for-bit no-op, so short-circuit before pow
    if epsilon == 0.0:
        return values.copy()
    return np.sign(values) * np.abs(values) ** (1.0 + epsilon)


def power_map(obj, epsilon: float):
    """Element-wise x -> sign(x) |x|^(1+epsilon), diagonal included.

    Shrinks small (mostly noise) correlations toward zero faster than strong
    ones, which also breaks the rank degeneracy of short-window correlation
    matrices.  Accepts a bare array, a CorrelationMatrix, or a whole series
    and returns the same kind of object.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if isinstance(obj, np.ndarray):
        return _power(obj, epsilon)
    if isinstance(obj, CorrelationMatrix):
        return CorrelationMatrix(
            values=_power(obj.values, epsilon),
            epoch_index=obj.epoch_index,
            start_date=obj.start_date,
            end_date=obj.end_date,
            epsilon_applied=epsilon,
        )
    if isinstance(obj, EpochCorrelationSeries):
        return EpochCorrelationSeries(
            spec=obj.spec,
            labels=list(obj.labels),
            matrices=[power_map(m, epsilon) for m in obj.matrices],
            epsilon=epsilon,
            meta=dict(obj.meta),
        )
    raise TypeError(f"cannot power-map a {type(obj).__name__}")
