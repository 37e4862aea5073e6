import numpy as np
import pytest

from marketstates.corrmat import EpochCorrelationSeries, EpochSpec
from marketstates.geometry import SimilarityMatrix
from marketstates.ingest import ReturnPanel
from marketstates.states import (
    ClusteringRun,
    GridPoint,
    OptimizationSurface,
    best_kmeans,
    build_state_model,
    fit_states,
    kmeans,
    optimize_over_grid,
    optimize_states,
    select_optimum,
    topdown_cluster,
)


def planted_blobs(seed, centers, per_blob=30, sigma=1.0):
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    points = np.concatenate(
        [c + sigma * rng.normal(size=(per_blob, centers.shape[1])) for c in centers]
    )
    truth = np.repeat(np.arange(len(centers)), per_blob)
    return points, truth


def partitions_equal(labels_a, labels_b):
    pairs = {(a, b) for a, b in zip(labels_a, labels_b)}
    return len({a for a, _ in pairs}) == len(pairs) == len({b for _, b in pairs})


def test_kmeans_k1_centroid_is_mean():
    rng = np.random.default_rng(0)
    points = rng.normal(size=(40, 3))
    run = kmeans(points, 1, seed=5)
    np.testing.assert_allclose(run.centroids[0], points.mean(axis=0), atol=1e-12)
    expected = np.linalg.norm(points - points.mean(axis=0), axis=1).mean()
    assert run.d_intra == pytest.approx(expected, abs=1e-12)
    assert set(run.labels) == {1}


def test_kmeans_k_equals_n_is_exact_zero():
    rng = np.random.default_rng(1)
    points = rng.normal(size=(25, 3))
    run = kmeans(points, 25, seed=9)
    assert run.d_intra == 0.0
    assert sorted(run.labels) == list(range(1, 26))
    assert run.objective == 0.0


def test_kmeans_recovers_planted_blobs():
    centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]]
    for seed in range(20):
        points, truth = planted_blobs(seed, centers, per_blob=25, sigma=1.0)
        run = best_kmeans(points, 3, n_inits=100, seed=seed)
        assert partitions_equal(run.labels, truth), f"seed {seed}"


def test_kmeans_objective_trace_monotone_fuzz():
    rng = np.random.default_rng(2)
    for _ in range(300):
        n = int(rng.integers(5, 60))
        d = int(rng.integers(1, 5))
        k = int(rng.integers(1, min(9, n) + 1))
        points = rng.normal(size=(n, d))
        run = kmeans(points, k, seed=int(rng.integers(0, 2**32)))
        trace = np.array(run.objective_trace)
        assert np.all(np.diff(trace) <= 0.0)
        assert run.converged
        assert run.labels.min() >= 1 and run.labels.max() <= k
        assert np.bincount(run.labels - 1, minlength=k).min() >= 1


def test_kmeans_empty_cluster_repair_with_duplicates():
    points = np.array([[0.0], [0.0], [0.0], [0.0], [10.0]])
    repaired_any = False
    for seed in range(20):
        run = kmeans(points, 3, seed=seed)
        assert np.bincount(run.labels - 1, minlength=3).min() >= 1
        assert np.all(np.diff(run.objective_trace) <= 0)
        repaired_any = repaired_any or run.n_repairs > 0
    assert repaired_any


def test_kmeans_validation():
    points = np.zeros((4, 2))
    with pytest.raises(ValueError):
        kmeans(points, 5, seed=0)
    with pytest.raises(ValueError):
        kmeans(points, 0, seed=0)
    with pytest.raises(ValueError):
        kmeans(np.zeros(4), 2, seed=0)


def test_kmeans_deterministic_given_seed():
    rng = np.random.default_rng(3)
    points = rng.normal(size=(50, 3))
    a = kmeans(points, 4, seed=77)
    b = kmeans(points, 4, seed=77)
    assert np.array_equal(a.labels, b.labels)
    assert a.centroids.tobytes() == b.centroids.tobytes()
    assert a.objective_trace == b.objective_trace


def test_best_of_inits_radius_never_grows_with_k():
    rng = np.random.default_rng(4)
    points = rng.normal(size=(60, 3))
    radii = []
    for k in range(1, 8):
        runs = [kmeans(points, k, seed=s) for s in range(50)]
        radii.append(min(r.d_intra for r in runs))
    assert all(radii[i + 1] <= radii[i] + 1e-9 for i in range(len(radii) - 1))


def regime_stack(noise=0.01, per_regime=12, n=8, levels=(0.1, 0.35, 0.6, 0.85), seed=0):
    """Synthetic correlation-matrix stack with 4 planted regimes."""
    rng = np.random.default_rng(seed)
    mats = []
    for level in levels:
        for _ in range(per_regime):
            jitter = rng.normal(scale=noise, size=(n, n))
            m = np.full((n, n), level) + (jitter + jitter.T) / 2
            np.fill_diagonal(m, 1.0)
            mats.append(m)
    return np.stack(mats)


def test_optimize_over_grid_surface_is_well_formed():
    stack = regime_stack()
    surface = optimize_over_grid(
        stack, k_range=range(2, 7), epsilon_grid=[0.0, 0.5], n_inits=20, seed=11
    )
    assert len(surface.grid) == 5 * 2
    assert all(g.n_inits == 20 for g in surface.grid)
    assert all(g.sigma_d_intra >= 0 and g.mean_d_intra > 0 for g in surface.grid)
    # epsilon-major, k-minor ordering
    assert [(g.k, g.epsilon) for g in surface.grid[:5]] == [(k, 0.0) for k in range(2, 7)]
    assert len(surface.entries(k_min=4)) == 3 * 2


def test_planted_regime_count_shows_up_as_radius_elbow():
    # four planted correlation regimes: the best-of-inits cluster radius
    # collapses at k=4 and the best k=4 run recovers the planted partition,
    # under both raw and power-mapped geometry
    from marketstates.geometry import classical_mds, similarity_matrix
    from marketstates.states import _powermap_stack

    stack = regime_stack()
    truth = np.repeat(np.arange(4), 12)
    for eps in (0.0, 0.5):
        sim = similarity_matrix(_powermap_stack(stack, eps))
        coords = classical_mds(sim, D=3, warn=False).coordinates
        best = {k: best_kmeans(coords, k, 40, seed=11) for k in range(2, 7)}
        drop34 = best[3].d_intra - best[4].d_intra
        drop45 = best[4].d_intra - best[5].d_intra
        assert drop34 > 20 * max(drop45, 1e-12), f"eps={eps}"
        assert partitions_equal(best[4].labels, truth), f"eps={eps}"


def test_optimize_over_grid_worker_invariance():
    stack = regime_stack(per_regime=6)
    a = optimize_over_grid(stack, range(2, 5), [0.0, 0.3], n_inits=8, seed=3, workers=1)
    b = optimize_over_grid(stack, range(2, 5), [0.0, 0.3], n_inits=8, seed=3, workers=3)
    assert a.grid == b.grid


def test_optimize_states_wraps_panel_pipeline():
    rng = np.random.default_rng(5)
    panel = ReturnPanel(
        tickers=[f"S{i}" for i in range(6)],
        dates=[f"d{t}" for t in range(80)],
        returns=rng.normal(size=(6, 80)),
    )
    surface = optimize_states(
        panel, EpochSpec(window=20, shift=10), k_range=[2, 3],
        epsilon_grid=[0.0], n_inits=5, seed=1,
    )
    assert [(g.k, g.epsilon) for g in surface.grid] == [(2, 0.0), (3, 0.0)]
    with pytest.raises(ValueError):
        optimize_states(panel, EpochSpec(20, 10), [2], [0.0], n_inits=1, seed=1)


def test_select_optimum_rules():
    surface = OptimizationSurface(
        grid=[
            GridPoint(4, 0.5, 0.02, 0.5, 10),
            GridPoint(5, 0.9, 0.01, 0.5, 10),
            GridPoint(2, 0.0, 0.001, 0.5, 10),  # below k_min, must be ignored
        ]
    )
    assert select_optimum(surface, k_min=4) == (5, 0.9)

    tied = OptimizationSurface(
        grid=[
            GridPoint(5, 0.3, 0.01, 0.5, 10),
            GridPoint(6, 0.8, 0.01, 0.5, 10),
            GridPoint(6, 0.4, 0.01, 0.5, 10),
        ]
    )
    # ties: larger k first, then smaller epsilon
    assert select_optimum(tied, k_min=4) == (6, 0.4)

    with pytest.raises(ValueError):
        select_optimum(surface, k_min=7)

    # override hook outranks sigma (prefer fewer bad transitions)
    scores = {(4, 0.5): 0.0, (5, 0.9): 3.0}
    assert select_optimum(surface, k_min=4,
                          score_override=lambda k, e: scores[(k, e)]) == (4, 0.5)


def fake_series(stack, dates=None):
    from marketstates.corrmat import CorrelationMatrix

    mats = [
        CorrelationMatrix(values=m, epoch_index=i + 1,
                          start_date=(dates[i] if dates else f"d{i}"), end_date="")
        for i, m in enumerate(stack)
    ]
    return EpochCorrelationSeries(spec=EpochSpec(20, 1), labels=["a", "b"], matrices=mats)


def fake_run(labels, k, epsilon=0.0):
    labels = np.asarray(labels)
    return ClusteringRun(
        k=k, epsilon=epsilon, seed=0, labels=labels,
        centroids=np.zeros((k, 3)), d_intra=0.0, objective_trace=[0.0],
        n_iterations=1, converged=True,
    )


def low_high_stack(labels, low=0.1, high=0.8):
    mats = []
    for lab in labels:
        c = low if lab == 1 else high
        m = np.full((2, 2), c)
        np.fill_diagonal(m, 1.0)
        mats.append(m)
    return np.stack(mats)


def test_state_model_constant_labels():
    stack = low_high_stack([1, 1, 1, 1, 1])
    model = build_state_model(fake_series(stack), fake_run([1, 1, 1, 1, 1], k=1))
    assert model.transition_counts.tolist() == [[4]]
    assert model.k == 1
    assert model.occupancy().tolist() == [5]


def test_state_model_hand_counted_transitions():
    labels = [1, 1, 2, 1]
    stack = low_high_stack(labels)
    model = build_state_model(fake_series(stack), fake_run(labels, k=2))
    # cluster 1 has the lower mean correlation, so S1 = cluster 1
    T = model.transition_counts
    assert T[0, 0] == 1 and T[0, 1] == 1 and T[1, 0] == 1 and T[1, 1] == 0
    assert T.sum() == len(labels) - 1


def test_state_model_renames_by_mean_correlation():
    # raw cluster 1 is the HIGH-correlation one; renaming must swap S-numbers
    labels = [1, 2, 2, 1]
    stack = low_high_stack(labels, low=0.7, high=0.05)  # label 1 -> 0.7
    model = build_state_model(fake_series(stack), fake_run(labels, k=2))
    assert model.state_mean_corr[0] < model.state_mean_corr[1]
    np.testing.assert_array_equal(model.state_of, [2, 1, 1, 2])
    assert partitions_equal(model.state_of, labels)
    # average matrices follow the S-order
    assert model.avg_corr_matrix[0][0, 1] == pytest.approx(0.05)
    assert model.avg_corr_matrix[1][0, 1] == pytest.approx(0.7)


def test_state_model_transition_identities_fuzz():
    rng = np.random.default_rng(6)
    for _ in range(200):
        k = int(rng.integers(1, 6))
        length = int(rng.integers(k + 1, 40))
        # guarantee every label occurs
        labels = np.concatenate([np.arange(1, k + 1), rng.integers(1, k + 1, length - k)])
        rng.shuffle(labels)
        stack = np.stack([np.full((2, 2), 0.1 * lab) for lab in labels])
        model = build_state_model(fake_series(stack), fake_run(labels, k=k))
        T = model.transition_counts
        assert T.sum() == length - 1
        occupancy = model.occupancy()
        for s in range(1, k + 1):
            expected = occupancy[s - 1] - (1 if model.state_of[-1] == s else 0)
            assert T[s - 1].sum() == expected


def test_state_model_rejects_mapped_series_and_bad_labels():
    stack = low_high_stack([1, 2])
    series = fake_series(stack)
    series.epsilon = 0.6
    with pytest.raises(ValueError, match="raw"):
        build_state_model(series, fake_run([1, 2], k=2))
    with pytest.raises(ValueError):
        build_state_model(fake_series(stack), fake_run([1], k=1))


def test_fit_states_end_to_end_on_regime_panel():
    # two regimes in the underlying returns: calm then strongly coupled
    rng = np.random.default_rng(7)
    n, L = 10, 120
    common = rng.normal(size=L)
    noise = rng.normal(size=(n, L))
    returns = 0.2 * common + noise
    returns[:, 60:] = 0.9 * common[60:] + 0.25 * noise[:, 60:]
    panel = ReturnPanel(
        tickers=[f"S{i}" for i in range(n)],
        dates=[f"d{t}" for t in range(L)],
        returns=returns,
    )
    model, run, embedding = fit_states(
        panel, EpochSpec(window=20, shift=5), k=2, epsilon=0.0, n_inits=30, seed=2
    )
    assert model.k == 2
    assert embedding.coordinates.shape == (21, 3)
    assert model.state_mean_corr[0] < model.state_mean_corr[1]
    assert len(model.epoch_dates) == 21
    # high-correlation epochs live in the later half
    late = model.state_of[-6:]
    assert np.all(late == 2)


def test_topdown_single_cluster_when_threshold_loose():
    rng = np.random.default_rng(8)
    points = rng.normal(size=(30, 2))
    dist = np.linalg.norm(points[:, None] - points[None, :], axis=2)
    sim = SimilarityMatrix(values=dist)
    global_radius = kmeans(points, 1, seed=0).d_intra
    labels = topdown_cluster(sim, radius_threshold=global_radius * 2.0)
    assert set(labels) == {1}


def test_topdown_splits_two_blobs():
    points, truth = planted_blobs(9, [[0.0, 0.0], [30.0, 0.0]], per_blob=20, sigma=1.0)
    dist = np.linalg.norm(points[:, None] - points[None, :], axis=2)
    labels = topdown_cluster(SimilarityMatrix(values=dist), radius_threshold=4.0)
    assert set(labels) == {1, 2}
    assert partitions_equal(labels, truth)


def test_topdown_tiny_threshold_warns_on_singletons():
    rng = np.random.default_rng(10)
    points = rng.normal(size=(6, 2))
    dist = np.linalg.norm(points[:, None] - points[None, :], axis=2)
    with pytest.warns(RuntimeWarning, match="singleton"):
        labels = topdown_cluster(SimilarityMatrix(values=dist), radius_threshold=1e-9)
    assert sorted(labels) == list(range(1, 7))
    with pytest.raises(ValueError):
        topdown_cluster(SimilarityMatrix(values=dist), radius_threshold=0.0)
