"""Epoch-pair dissimilarity and its low-dimensional map.

Two epochs are compared by the mean absolute difference of their correlation
matrices, element by element.  Classical (Torgerson) multidimensional scaling
turns the resulting dissimilarity matrix into coordinates, so that each epoch
becomes one point and market history becomes a trajectory through that map.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError


@dataclass
class SimilarityMatrix:
    """Pairwise epoch dissimilarities (symmetric, zero diagonal, >= 0)."""

    values: np.ndarray
    epoch_dates: list[str] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass
class Embedding:
    """Classical MDS coordinates plus eigenvalue diagnostics.

    ``eigenvalues`` are the D retained (non-negative, descending) values;
    padded axes carry eigenvalue 0.  ``full_eigenvalues`` is the entire
    double-centering spectrum; ``clipped_mass`` is the |negative| share of
    total |eigenvalue| mass, a measure of how non-Euclidean the input was.
    """

    coordinates: np.ndarray
    eigenvalues: np.ndarray
    D: int
    full_eigenvalues: np.ndarray
    n_clipped: int
    clipped_mass: float


def similarity_matrix(series) -> SimilarityMatrix:
    """Mean absolute element-wise difference between every pair of epochs.

    The mean runs over all N^2 ordered entries, diagonal included (diagonal
    differences are zero for raw correlation matrices, so they only dilute
    by a constant factor).  Accepts any series object exposing ``matrices``
    with per-epoch ``values`` and ``start_date``, or a bare (Fr, N, N) stack.
    """
    if isinstance(series, np.ndarray):
        if series.ndim != 3:
            raise NumericError(f"stack must be 3-D (epochs, N, N), got shape {series.shape}")
        mats = list(series.astype(float, copy=False))
        dates = [""] * len(mats)
    else:
        mats = [np.asarray(m.values, dtype=float) for m in series.matrices]
        dates = [getattr(m, "start_date", "") for m in series.matrices]
    if len(mats) < 2:
        raise NumericError(f"need at least 2 epochs, got {len(mats)}")
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise NumericError("epochs have mismatched matrix sizes")
    X = np.stack([m.ravel() for m in mats])
    n, width = X.shape
    out = np.zeros((n, n))
    # keep the broadcast temporaries around 256 MB
    block = max(1, (1 << 25) // max(width, 1))
    for i in range(n):
        for j0 in range(i + 1, n, block):
            j1 = min(j0 + block, n)
            out[i, j0:j1] = np.abs(X[j0:j1] - X[i]).mean(axis=1)
    out = out + out.T
    return SimilarityMatrix(values=out, epoch_dates=dates)


def max_triangle_violation(sim: SimilarityMatrix, n_triples: int = 1000, seed: int = 0) -> float:
    """Largest zeta(a,c) - zeta(a,b) - zeta(b,c) over random triples.

    Non-positive results mean the triangle inequality held on every sampled
    triple.
    """
    Z = sim.values
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, Z.shape[0], size=(n_triples, 3))
    a, b, c = idx[:, 0], idx[:, 1], idx[:, 2]
    return float((Z[a, c] - Z[a, b] - Z[b, c]).max())


def _double_center(squared: np.ndarray) -> np.ndarray:
    row = squared.mean(axis=1, keepdims=True)
    col = squared.mean(axis=0, keepdims=True)
    return -0.5 * (squared - row - col + squared.mean())


def _fix_signs(coords: np.ndarray) -> np.ndarray:
    # reflection ambiguity: largest-magnitude entry of each axis made >= 0
    for m in range(coords.shape[1]):
        column = coords[:, m]
        if column.any() and column[np.argmax(np.abs(column))] < 0:
            coords[:, m] = -column
    return coords


def _mds_coordinates(values: np.ndarray, D: int, warn: bool = True):
    n = values.shape[0]
    B = _double_center(values * values)
    eigval, eigvec = np.linalg.eigh(B)
    order = np.argsort(eigval)[::-1]
    eigval = eigval[order]
    eigvec = eigvec[:, order]

    non_negative = eigval >= 0.0
    n_keep = min(D, int(non_negative[:D].sum()))
    # non-negative eigenvalues always come first in descending order
    coords = np.zeros((n, D))
    kept = eigval[:n_keep]
    coords[:, :n_keep] = eigvec[:, :n_keep] * np.sqrt(kept)
    if n_keep < D and warn:
        warnings.warn(
            f"only {n_keep} non-negative eigenvalues for {D} requested axes; "
            "remaining coordinates zero-padded",
            RuntimeWarning,
            stacklevel=3,
        )
    retained = np.concatenate([kept, np.zeros(D - n_keep)])
    negatives = eigval[eigval < 0.0]
    total_mass = float(np.abs(eigval).sum())
    clipped_mass = float(np.abs(negatives).sum() / total_mass) if total_mass > 0 else 0.0
    return _fix_signs(coords), retained, eigval, negatives.size, clipped_mass


def classical_mds(dissim: SimilarityMatrix, D: int, warn: bool = True) -> Embedding:
    """Torgerson MDS: double-center the squared dissimilarities, eigendecompose.

    B = -1/2 J (Z*Z) J with J = I - (1/n) 1 1'; coordinates are eigenvectors
    scaled by the square root of the top D non-negative eigenvalues.
    Negative eigenvalues (non-Euclidean input) are dropped; if fewer than D
    non-negative remain, the missing axes are zero with a warning.
    """
    n = dissim.size
    if not 1 <= D <= n - 1:
        raise ValueError(f"D must be in 1..{n - 1}, got {D}")
    coords, retained, full, n_clipped, clipped_mass = _mds_coordinates(dissim.values, D, warn)
    return Embedding(
        coordinates=coords,
        eigenvalues=retained,
        D=D,
        full_eigenvalues=full,
        n_clipped=n_clipped,
        clipped_mass=clipped_mass,
    )


def step_lengths(coordinates: np.ndarray) -> np.ndarray:
    """Euclidean distances between consecutive rows of a coordinate matrix."""
    return np.linalg.norm(np.diff(coordinates, axis=0), axis=1)


def dimension_fidelity(dissim: SimilarityMatrix, dims: list[int]) -> list[tuple[int, float]]:
    """How well each low dimension reproduces the full map's local motion.

    For every requested D the length-(Fr-1) sequence of consecutive-epoch
    embedded distances is correlated (Pearson) against the same sequence at
    the reference dimension D_max = Fr-1.  Truncation is nested: dimension D
    uses the first D axes of the full embedding.
    """
    n = dissim.size
    if n < 3:
        raise NumericError(f"need at least 3 epochs, got {n}")
    if not dims:
        raise ValueError("dims must not be empty")
    d_max = n - 1
    for D in dims:
        if not 1 <= D <= d_max:
            raise ValueError(f"dimension {D} outside 1..{d_max}")
    coords, _, _, _, _ = _mds_coordinates(dissim.values, d_max, warn=False)
    diffs = np.diff(coords, axis=0)
    # nested truncation: cumulative squared steps along axes
    cumulative = np.cumsum(diffs * diffs, axis=1)

    def constant(seq: np.ndarray) -> bool:
        # rounding dust on a flat sequence still counts as constant
        return seq.std() <= 1e-12 * max(float(np.abs(seq).max()), 1e-300)

    reference = np.sqrt(cumulative[:, d_max - 1])
    if constant(reference):
        raise NumericError("reference step sequence is constant; correlation undefined")
    results = []
    for D in dims:
        seq = np.sqrt(cumulative[:, D - 1])
        if constant(seq):
            raise NumericError(f"step sequence at D={D} is constant; correlation undefined")
        results.append((D, float(np.corrcoef(seq, reference)[0, 1])))
    return results
