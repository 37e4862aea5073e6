"""Market states: ensemble k-means on the MDS map and the (k, epsilon) search.

A market state is a cluster of epochs whose correlation matrices look alike.
The operating point (cluster count k, noise suppression epsilon) is chosen
where the intra-cluster radius is most stable across random k-means
initializations, i.e. minimum sigma_d_intra subject to k >= k_min.  States
are renamed S1..Sk by ascending mean correlation so Sk is the crisis state.
"""

from __future__ import annotations

import warnings
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .corrmat import EpochCorrelationSeries, EpochSpec, epoch_correlations, power_map
from .geometry import SimilarityMatrix, classical_mds, similarity_matrix
from .ingest import ReturnPanel

MAX_LLOYD_ITERATIONS = 300


@dataclass
class ClusteringRun:
    """One converged k-means run (1-based labels)."""

    k: int
    epsilon: float
    seed: int
    labels: np.ndarray
    centroids: np.ndarray
    d_intra: float
    objective_trace: list[float]
    n_iterations: int
    converged: bool
    n_repairs: int = 0

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


@dataclass(frozen=True)
class GridPoint:
    k: int
    epsilon: float
    sigma_d_intra: float
    mean_d_intra: float
    n_inits: int


@dataclass
class OptimizationSurface:
    grid: list[GridPoint]

    def entries(self, k_min: int = 0) -> list[GridPoint]:
        return [g for g in self.grid if g.k >= k_min]


@dataclass
class StateModel:
    """States S1..Sk with their average matrices and transition counts.

    ``state_of`` holds per-epoch labels 1..k after renaming by ascending
    mean correlation; ``avg_corr_matrix[s-1]`` is built from the raw
    (epsilon 0) matrices of state s even when clustering used epsilon > 0.
    """

    k: int
    epsilon: float
    state_of: np.ndarray
    state_mean_corr: list[float]
    avg_corr_matrix: list[np.ndarray]
    transition_counts: np.ndarray
    labels: list[str] = field(default_factory=list)
    epoch_dates: list[str] = field(default_factory=list)

    def occupancy(self) -> np.ndarray:
        return np.bincount(self.state_of, minlength=self.k + 1)[1:]


def _assignment_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return (diff * diff).sum(axis=2)


def kmeans(points: np.ndarray, k: int, seed: int, epsilon: float = 0.0) -> ClusteringRun:
    """Lloyd's algorithm seeded with k distinct data points chosen uniformly.

    Runs to an assignment fixed point or 300 iterations.  An empty cluster is
    repaired by re-seeding its centroid at the point currently farthest from
    its own centroid (among clusters that can spare a point), which keeps the
    objective non-increasing.  The objective (sum of squared point-centroid
    distances) is recorded once per iteration after the centroid update.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError(f"points must be 2-D, got shape {points.shape}")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    rng = np.random.default_rng(seed)
    centroids = points[rng.choice(n, size=k, replace=False)].copy()
    labels = np.full(n, -1)
    trace: list[float] = []
    converged = False
    iteration = 0
    n_repairs = 0
    for iteration in range(1, MAX_LLOYD_ITERATIONS + 1):
        d2 = _assignment_distances(points, centroids)
        new_labels = d2.argmin(axis=1)
        # repair empty clusters before the update step
        counts = np.bincount(new_labels, minlength=k)
        while (counts == 0).any():
            empty = int(np.flatnonzero(counts == 0)[0])
            own = d2[np.arange(n), new_labels]
            movable = counts[new_labels] > 1
            if not movable.any():
                break
            candidate = int(np.flatnonzero(movable)[own[movable].argmax()])
            counts[new_labels[candidate]] -= 1
            new_labels[candidate] = empty
            counts[empty] += 1
            centroids[empty] = points[candidate]
            d2[:, empty] = ((points - points[candidate]) ** 2).sum(axis=1)
            n_repairs += 1
        if (new_labels == labels).all():
            converged = True
            break
        labels = new_labels
        for c in range(k):
            members = labels == c
            if members.any():
                centroids[c] = points[members].mean(axis=0)
        final_d2 = ((points - centroids[labels]) ** 2).sum(axis=1)
        trace.append(float(final_d2.sum()))
    d_intra = float(np.sqrt(((points - centroids[labels]) ** 2).sum(axis=1)).mean())
    return ClusteringRun(
        k=k,
        epsilon=epsilon,
        seed=seed,
        labels=labels + 1,
        centroids=centroids,
        d_intra=d_intra,
        objective_trace=trace,
        n_iterations=iteration,
        converged=converged,
        n_repairs=n_repairs,
    )


def init_seeds(seed: int, count: int) -> np.ndarray:
    """Deterministic per-init seeds derived from one master seed."""
    return np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)


def kmeans_ensemble(points: np.ndarray, k: int, n_inits: int, seed: int,
                    epsilon: float = 0.0) -> list[ClusteringRun]:
    return [kmeans(points, k, int(s), epsilon) for s in init_seeds(seed, n_inits)]


def best_kmeans(points: np.ndarray, k: int, n_inits: int, seed: int,
                epsilon: float = 0.0) -> ClusteringRun:
    """Lowest-objective run over an ensemble of seeded initializations."""
    runs = kmeans_ensemble(points, k, n_inits, seed, epsilon)
    return min(runs, key=lambda r: r.objective)


def _powermap_stack(stack: np.ndarray, epsilon: float) -> np.ndarray:
    if epsilon == 0.0:
        return stack
    return np.sign(stack) * np.abs(stack) ** (1.0 + epsilon)


def _grid_epsilon_task(args) -> list[GridPoint]:
    stack, eps, k_list, dim, seed_block = args
    sim = similarity_matrix(_powermap_stack(stack, eps))
    coords = classical_mds(sim, D=dim, warn=False).coordinates
    rows = []
    for ki, k in enumerate(k_list):
        radii = np.array([kmeans(coords, k, int(s), eps).d_intra for s in seed_block[ki]])
        rows.append(
            GridPoint(
                k=k,
                epsilon=eps,
                sigma_d_intra=float(radii.std()),
                mean_d_intra=float(radii.mean()),
                n_inits=len(radii),
            )
        )
    return rows


def optimize_over_grid(stack: np.ndarray, k_range, epsilon_grid, n_inits: int,
                       seed: int, dim: int = 3, workers: int = 1) -> OptimizationSurface:
    """sigma_d_intra over a (k, epsilon) grid for a raw matrix stack.

    For each epsilon the whole geometry is rebuilt: power map, dissimilarity,
    MDS; then each k runs n_inits independent k-means.  Init seeds come from
    one SeedSequence spanning the flat (epsilon, k, init) grid, so results do
    not depend on evaluation order or worker count.
    """
    k_list = list(k_range)
    eps_list = list(epsilon_grid)
    if not k_list or not eps_list:
        raise ValueError("k_range and epsilon_grid must be non-empty")
    if n_inits < 2:
        raise ValueError(f"need n_inits >= 2 to measure a spread, got {n_inits}")
    seeds = init_seeds(seed, len(eps_list) * len(k_list) * n_inits)
    seeds = seeds.reshape(len(eps_list), len(k_list), n_inits)
    tasks = [(stack, eps, k_list, dim, seeds[ei]) for ei, eps in enumerate(eps_list)]
    if workers <= 1 or len(tasks) == 1:
        blocks = [_grid_epsilon_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_grid_epsilon_task, tasks))
    return OptimizationSurface(grid=[row for block in blocks for row in block])


def optimize_states(panel: ReturnPanel, spec: EpochSpec, k_range, epsilon_grid,
                    n_inits: int, seed: int, dim: int = 3,
                    workers: int = 1) -> OptimizationSurface:
    """Grid search for the market-state operating point on a return panel."""
    raw = epoch_correlations(panel, spec)
    return optimize_over_grid(raw.values_stack(), k_range, epsilon_grid,
                              n_inits, seed, dim=dim, workers=workers)


def select_optimum(surface: OptimizationSurface, k_min: int = 4,
                   score_override=None) -> tuple[int, float]:
    """Minimum sigma_d_intra among entries with k >= k_min.

    Ties prefer larger k, then smaller epsilon.  ``score_override`` may map
    (k, epsilon) to a quality score ranked before sigma (used to prefer
    transition matrices without long jumps); None leaves it off.
    """
    candidates = surface.entries(k_min)
    if not candidates:
        raise ValueError(f"no grid entry has k >= {k_min}")

    def key(g: GridPoint):
        head = (score_override(g.k, g.epsilon),) if score_override else ()
        return head + (g.sigma_d_intra, -g.k, g.epsilon)

    best = min(candidates, key=key)
    return best.k, best.epsilon


def build_state_model(series: EpochCorrelationSeries, run: ClusteringRun) -> StateModel:
    """Average matrix per cluster, rename by ascending mean correlation, count transitions."""
    if getattr(series, "epsilon", 0.0) != 0.0:
        raise ValueError("state averages must come from raw (epsilon 0) matrices")
    stack = series.values_stack()
    n_epochs = stack.shape[0]
    if len(run.labels) != n_epochs:
        raise ValueError(f"{len(run.labels)} labels for {n_epochs} epochs")
    k = run.k
    averages = []
    means = np.empty(k)
    for c in range(1, k + 1):
        members = run.labels == c
        if not members.any():
            raise ValueError(f"cluster {c} is empty")
        avg = stack[members].mean(axis=0)
        averages.append(avg)
        means[c - 1] = avg.mean()
    order = np.argsort(means, kind="stable")  # old label order by mean corr
    rename = np.empty(k, dtype=int)
    rename[order] = np.arange(1, k + 1)
    state_of = rename[run.labels - 1]
    transition_counts = np.zeros((k, k), dtype=int)
    np.add.at(transition_counts, (state_of[:-1] - 1, state_of[1:] - 1), 1)
    return StateModel(
        k=k,
        epsilon=run.epsilon,
        state_of=state_of,
        state_mean_corr=[float(means[c]) for c in order],
        avg_corr_matrix=[averages[c] for c in order],
        transition_counts=transition_counts,
        labels=list(getattr(series, "labels", [])),
        epoch_dates=[m.start_date for m in series.matrices],
    )


def fit_states(panel: ReturnPanel, spec: EpochSpec, k: int, epsilon: float,
               n_inits: int, seed: int, dim: int = 3):
    """Full fit at a chosen operating point.

    Returns (model, best run, embedding): clustering happens on the MDS map
    of power-mapped matrices, the model averages the raw ones.
    """
    raw = epoch_correlations(panel, spec)
    sim = similarity_matrix(power_map(raw, epsilon))
    embedding = classical_mds(sim, D=dim, warn=False)
    run = best_kmeans(embedding.coordinates, k, n_inits, seed, epsilon)
    return build_state_model(raw, run), run, embedding


def topdown_cluster(dissim: SimilarityMatrix, radius_threshold: float,
                    seed: int = 0) -> np.ndarray:
    """Recursive bisection until every cluster is tighter than the threshold.

    All epochs start as one cluster; any cluster whose mean point-to-centroid
    distance on its own 3-D sub-map exceeds the threshold is split by k=2
    k-means.  Surviving clusters are numbered 1, 2, ... in the order they are
    accepted.  A tiny threshold legally produces singletons (with a warning).
    """
    if radius_threshold <= 0:
        raise ValueError(f"radius threshold must be > 0, got {radius_threshold}")
    n = dissim.size
    labels = np.zeros(n, dtype=int)
    queue = deque([np.arange(n)])
    next_label = 0
    split_index = 0
    singletons = 0
    while queue:
        members = queue.popleft()
        m = members.size
        if m == 1:
            next_label += 1
            labels[members] = next_label
            singletons += 1
            continue
        sub = SimilarityMatrix(values=dissim.values[np.ix_(members, members)])
        coords = classical_mds(sub, D=min(3, m - 1), warn=False).coordinates
        radius = float(np.linalg.norm(coords - coords.mean(axis=0), axis=1).mean())
        if radius <= radius_threshold:
            next_label += 1
            labels[members] = next_label
            continue
        sub_seed = int(np.random.SeedSequence([seed, split_index]).generate_state(1)[0])
        split_index += 1
        run = kmeans(coords, 2, sub_seed)
        queue.append(members[run.labels == 1])
        queue.append(members[run.labels == 2])
    if singletons:
        warnings.warn(
            f"radius threshold {radius_threshold} produced {singletons} singleton cluster(s)",
            RuntimeWarning,
            stacklevel=2,
        )
    return labels
