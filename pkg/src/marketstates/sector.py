"""Sector-level market states from block-averaged correlation matrices.

Each stock-level correlation matrix collapses to an N_S x N_S matrix whose
(a, b) entry is the mean correlation between the stocks of sector a and those
of sector b; on the diagonal blocks the self-pairs i == j are excluded by
default, so the diagonal is an intra-sector coupling, not identically 1.
These small matrices run through the same dissimilarity / MDS / k-means
machinery as the stock-level pipeline, and the two state sequences are
compared epoch by epoch as a displacement histogram.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .corrmat import (
    CorrelationMatrix,
    EpochCorrelationSeries,
    EpochSpec,
    epoch_correlations,
    power_map,
)
from .errors import DataError
from .geometry import classical_mds, similarity_matrix
from .ingest import ReturnPanel
from .states import StateModel, best_kmeans, build_state_model

#: Published operating points for the sector-level fit, by market.  The
#: Nikkei 225 has two: the grid optimum and the point preferred for the final
#: classification because of its cleaner transition structure.
SECTOR_PRESETS: dict[str, tuple[int, float]] = {
    "sp500": (5, 0.2),
    "nikkei225-optimum": (5, 0.3),
    "nikkei225-preferred": (8, 0.7),
}


@dataclass
class SectorMatrix:
    """One epoch's sector-averaged correlation matrix (symmetric, N_S x N_S)."""

    values: np.ndarray
    epoch_index: int
    sectors: list[str]
    start_date: str = ""
    end_date: str = ""
    self_pairs_included: bool = False


@dataclass
class SectorSeries:
    """Ordered sector matrices for every epoch of a panel."""

    spec: EpochSpec
    sectors: list[str]
    matrices: list[SectorMatrix]
    epsilon: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def labels(self) -> list[str]:
        return list(self.sectors)

    @property
    def n_epochs(self) -> int:
        return len(self.matrices)

    @property
    def n_sectors(self) -> int:
        return len(self.sectors)

    def values_stack(self) -> np.ndarray:
        return np.stack([m.values for m in self.matrices])


@dataclass
class DisplacementReport:
    """Per-epoch differences between two state sequences.

    ``histogram`` maps each displacement d (sector state minus stock state)
    to an epoch count over the contiguous symmetric range -m..+m, m being the
    largest |d| observed, so zero-count bins inside the range stay visible.
    """

    histogram: dict[int, int]
    max_abs_displacement: int

    @property
    def n_epochs(self) -> int:
        return sum(self.histogram.values())


def _sector_layout(tickers, sector_of) -> tuple[list[str], np.ndarray]:
    """Sorted sector names and the N x N_S one-hot membership matrix."""
    unmapped = [t for t in tickers if t not in sector_of]
    if unmapped:
        shown = ", ".join(unmapped[:5])
        raise DataError(f"{len(unmapped)} stock(s) with no sector assignment: {shown}")
    sectors = sorted({sector_of[t] for t in tickers})
    column_of = {name: j for j, name in enumerate(sectors)}
    membership = np.zeros((len(tickers), len(sectors)))
    for row, ticker in enumerate(tickers):
        membership[row, column_of[sector_of[ticker]]] = 1.0
    return sectors, membership


def _block_average(values: np.ndarray, membership: np.ndarray,
                   include_self_pairs: bool) -> tuple[np.ndarray, list[int]]:
    """Average ``values`` over sector blocks; returns (matrix, singleton columns)."""
    sizes = membership.sum(axis=0)
    sums = membership.T @ values @ membership
    pairs = np.outer(sizes, sizes)
    singletons: list[int] = []
    if not include_self_pairs:
        np.fill_diagonal(sums, np.diag(sums) - membership.T @ np.diag(values))
        np.fill_diagonal(pairs, sizes * (sizes - 1.0))
        singletons = np.flatnonzero(sizes == 1).tolist()
    averaged = sums / np.where(pairs == 0.0, 1.0, pairs)
    for j in singletons:
        averaged[j, j] = 1.0
    return (averaged + averaged.T) / 2.0, singletons


def sector_average(matrix, tickers, sector_of,
                   include_self_pairs: bool = False) -> SectorMatrix:
    """Collapse one N x N correlation matrix to its N_S x N_S sector means.

    Entry (a, b) is the mean of C_ij over i in sector a and j in sector b; on
    the diagonal a == b the pairs i == j are excluded unless
    ``include_self_pairs`` is set (the convention travels with the result).
    A singleton sector leaves its intra-sector mean undefined, which falls
    back to 1.0 with a warning.
    """
    if isinstance(matrix, CorrelationMatrix):
        values = matrix.values
        epoch_index, start_date, end_date = matrix.epoch_index, matrix.start_date, matrix.end_date
    else:
        values = np.asarray(matrix, dtype=float)
        epoch_index, start_date, end_date = 0, "", ""
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {values.shape}")
    if values.shape[0] != len(tickers):
        raise ValueError(f"{values.shape[0]} rows for {len(tickers)} tickers")
    sectors, membership = _sector_layout(tickers, sector_of)
    averaged, singleton_cols = _block_average(values, membership, include_self_pairs)
    if singleton_cols:
        names = ", ".join(sectors[j] for j in singleton_cols)
        warnings.warn(
            f"singleton sector(s) {names}: intra-sector mean undefined, set to 1.0",
            RuntimeWarning,
            stacklevel=2,
        )
    return SectorMatrix(
        values=averaged,
        epoch_index=epoch_index,
        sectors=sectors,
        start_date=start_date,
        end_date=end_date,
        self_pairs_included=include_self_pairs,
    )


def sector_series(series: EpochCorrelationSeries, sector_of,
                  include_self_pairs: bool = False) -> SectorSeries:
    """Sector-average every epoch of a stock-level correlation series."""
    sectors, membership = _sector_layout(series.labels, sector_of)
    sizes = membership.sum(axis=0)
    if not include_self_pairs and (sizes == 1).any():
        names = ", ".join(sectors[j] for j in np.flatnonzero(sizes == 1))
        warnings.warn(
            f"singleton sector(s) {names}: intra-sector mean undefined, set to 1.0",
            RuntimeWarning,
            stacklevel=2,
        )
    matrices = []
    for m in series.matrices:
        averaged, _ = _block_average(m.values, membership, include_self_pairs)
        matrices.append(
            SectorMatrix(
                values=averaged,
                epoch_index=m.epoch_index,
                sectors=sectors,
                start_date=m.start_date,
                end_date=m.end_date,
                self_pairs_included=include_self_pairs,
            )
        )
    return SectorSeries(
        spec=series.spec,
        sectors=sectors,
        matrices=matrices,
        epsilon=series.epsilon,
        meta={"self_pairs_included": include_self_pairs, **series.meta},
    )


def sector_state_pipeline(panel: ReturnPanel, spec: EpochSpec, k: int,
                          epsilon: float, n_inits: int, seed: int,
                          dim: int = 3, sector_of=None,
                          include_self_pairs: bool = False):
    """Fit sector-level market states on a return panel.

    Same shape as the stock-level fit: correlations per epoch, block-averaged
    to sector matrices, power map, dissimilarity, 3-D map, best-of-ensemble
    k-means; the model's average matrices come from the raw sector matrices.
    Returns (model, best run, embedding).
    """
    mapping = sector_of if sector_of is not None else panel.sector_of
    if not mapping:
        raise DataError("no sector map: pass sector_of or attach one to the panel")
    raw = sector_series(epoch_correlations(panel, spec), mapping,
                        include_self_pairs=include_self_pairs)
    sim = similarity_matrix(power_map(raw.values_stack(), epsilon))
    embedding = classical_mds(sim, D=dim, warn=False)
    run = best_kmeans(embedding.coordinates, k, n_inits, seed, epsilon)
    return build_state_model(raw, run), run, embedding


def displacement(stock_states, sector_states) -> DisplacementReport:
    """Histogram of per-epoch state differences (sector minus stock).

    Both sequences must use the ascending-mean-correlation numbering so a
    positive displacement means the sector view sits in a higher-correlation
    state than the stock view for that epoch.
    """
    stock = np.asarray(stock_states, dtype=int)
    sector = np.asarray(sector_states, dtype=int)
    if stock.ndim != 1 or sector.ndim != 1:
        raise ValueError("state sequences must be 1-D")
    if stock.shape != sector.shape:
        raise ValueError(
            f"length mismatch: {stock.size} stock states vs {sector.size} sector states"
        )
    if stock.size == 0:
        raise ValueError("empty state sequences")
    deltas = sector - stock
    reach = int(np.abs(deltas).max())
    histogram = {d: int((deltas == d).sum()) for d in range(-reach, reach + 1)}
    return DisplacementReport(histogram=histogram, max_abs_displacement=reach)


def averaged_series_correlations(panel: ReturnPanel, spec: EpochSpec = EpochSpec(),
                                 sector_of=None) -> EpochCorrelationSeries:
    """Diagnostic-only alternative: average the return series inside each
    sector first, then correlate the N_S averaged series per epoch.

    Kept for comparison plots; the main pipeline averages correlation
    matrices instead, which preserves intra-sector structure.
    """
    mapping = sector_of if sector_of is not None else panel.sector_of
    if not mapping:
        raise DataError("no sector map: pass sector_of or attach one to the panel")
    sectors, membership = _sector_layout(panel.tickers, mapping)
    weights = membership / membership.sum(axis=0)
    reduced = ReturnPanel(
        tickers=sectors,
        dates=list(panel.dates),
        returns=weights.T @ panel.returns,
    )
    series = epoch_correlations(reduced, spec)
    series.meta["method"] = "averaged-return-series (diagnostic only)"
    return series
