"""Market-state detection from rolling correlation matrices of return panels.

The pipeline: price CSV -> filtered gap-free panel -> log-returns -> epoch
correlation matrices -> noise-suppressing power map -> pairwise matrix
dissimilarities -> low-dimensional map -> k-means market states, with sector
aggregation, event-window trajectory classification, and Wishart/analytic
spectral validation alongside.
"""

from .corrmat import (
    CorrelationMatrix,
    EpochCorrelationSeries,
    EpochSpec,
    epoch_bounds,
    epoch_correlations,
    epoch_count,
    pearson_correlation,
    power_map,
)
from .errors import DataError, NumericError
from .geometry import (
    Embedding,
    SimilarityMatrix,
    classical_mds,
    dimension_fidelity,
    similarity_matrix,
    step_lengths,
)
from .ingest import (
    ContinuityPolicy,
    PricePanel,
    ReturnPanel,
    load_panel,
    load_prices,
    load_sector_map,
    log_returns,
    save_panel,
)
from .pipeline import PipelineConfig, emit_plot_data, run_pipeline
from .rmt import (
    SpectralDensity,
    WishartSpec,
    empirical_spectrum,
    l1_to_analytic,
    mp_density,
    mp_support,
    mp_zero_weight,
    outside_support_fraction,
    pooled_eigenvalues,
    powermapped_spectrum,
    sample_woe,
    spectrum_from_eigenvalues,
    spectral_variance,
    wishart_spectrum,
)
from .sector import (
    SECTOR_PRESETS,
    DisplacementReport,
    SectorMatrix,
    SectorSeries,
    averaged_series_correlations,
    displacement,
    sector_average,
    sector_series,
    sector_state_pipeline,
)
from .states import (
    ClusteringRun,
    OptimizationSurface,
    StateModel,
    best_kmeans,
    build_state_model,
    fit_states,
    kmeans,
    kmeans_ensemble,
    optimize_over_grid,
    optimize_states,
    select_optimum,
    topdown_cluster,
)
from .trajectory import (
    CRITICAL,
    NORMAL,
    EventWindow,
    TrajectoryReport,
    analyze_trajectory,
    classify_catalog,
    cut_window,
    load_event_catalog,
    window_from_dates,
)

__version__ = "0.1.0"

__all__ = [
    "CRITICAL",
    "NORMAL",
    "SECTOR_PRESETS",
    "ClusteringRun",
    "ContinuityPolicy",
    "CorrelationMatrix",
    "DataError",
    "DisplacementReport",
    "Embedding",
    "EpochCorrelationSeries",
    "EpochSpec",
    "EventWindow",
    "NumericError",
    "OptimizationSurface",
    "PipelineConfig",
    "PricePanel",
    "ReturnPanel",
    "SectorMatrix",
    "SectorSeries",
    "SimilarityMatrix",
    "SpectralDensity",
    "StateModel",
    "TrajectoryReport",
    "WishartSpec",
    "analyze_trajectory",
    "averaged_series_correlations",
    "best_kmeans",
    "build_state_model",
    "classical_mds",
    "classify_catalog",
    "cut_window",
    "dimension_fidelity",
    "displacement",
    "emit_plot_data",
    "empirical_spectrum",
    "epoch_bounds",
    "epoch_correlations",
    "epoch_count",
    "fit_states",
    "kmeans",
    "kmeans_ensemble",
    "l1_to_analytic",
    "load_event_catalog",
    "load_panel",
    "load_prices",
    "load_sector_map",
    "log_returns",
    "mp_density",
    "mp_support",
    "mp_zero_weight",
    "optimize_over_grid",
    "optimize_states",
    "outside_support_fraction",
    "pearson_correlation",
    "pooled_eigenvalues",
    "power_map",
    "powermapped_spectrum",
    "run_pipeline",
    "sample_woe",
    "spectrum_from_eigenvalues",
    "save_panel",
    "sector_average",
    "sector_series",
    "sector_state_pipeline",
    "select_optimum",
    "similarity_matrix",
    "spectral_variance",
    "step_lengths",
    "topdown_cluster",
    "wishart_spectrum",
    "window_from_dates",
]
