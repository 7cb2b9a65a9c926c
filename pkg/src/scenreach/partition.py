"""Scenario reduction: k-means partitioning of prediction-set points,
Voronoi assignment, importance counts, constraint buffers, and the
WSS-vs-cell-count curve with its knee rule.

Buffers make seed feasibility transfer to every cell member: row ell of
cell j is tightened by the worst member offset max_{phi in cell} F_ell
(phi - seed_j), so F_ell(base + seed_j) <= h_ell - eps implies
F_ell(base + phi) <= h_ell for all members.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linops import as_matrix

__all__ = ["PartitionModel", "WssCurve", "assign", "compute_buffers",
           "kmeans", "knee", "wss", "wss_curve"]


@dataclass(frozen=True)
class PartitionModel:
    """Seeds with their Voronoi assignment over the clustered points.

    alpha[j] counts the members of cell j (all >= 1, summing to the number
    of points). buffers is filled in by compute_buffers when a constraint
    matrix is available.
    """

    seeds: np.ndarray
    assignment: np.ndarray
    alpha: np.ndarray
    wss: float
    buffers: np.ndarray | None = None

    def __post_init__(self):
        seeds = as_matrix(self.seeds)
        assignment = np.asarray(self.assignment, dtype=np.int64)
        alpha = np.asarray(self.alpha, dtype=np.int64)
        if alpha.shape[0] != seeds.shape[0]:
            raise ValueError("alpha length must match seed count")
        if np.any(alpha < 1):
            raise ValueError("every cell must keep at least one member")
        if alpha.sum() != assignment.shape[0]:
            raise ValueError("alpha must sum to the number of points")
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "alpha", alpha)

    @property
    def n_cells(self) -> int:
        return self.seeds.shape[0]


@dataclass(frozen=True)
class WssCurve:
    khat_values: np.ndarray
    wss_values: np.ndarray
    seconds: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.khat_values, dtype=np.int64)
        w = np.asarray(self.wss_values, dtype=float)
        s = np.asarray(self.seconds, dtype=float)
        if not (k.shape == w.shape == s.shape):
            raise ValueError("curve columns must share a length")
        if np.any(np.diff(k) <= 0):
            raise ValueError("cell counts must be strictly increasing")
        object.__setattr__(self, "khat_values", k)
        object.__setattr__(self, "wss_values", w)
        object.__setattr__(self, "seconds", s)


def _sq_distances(points: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """All-pairs squared Euclidean distances, (n_points x n_seeds)."""
    # Expanded form with a clip; fast via BLAS and accurate enough for
    # nearest-seed decisions on O(1)-scale data.
    p2 = np.einsum("ij,ij->i", points, points)
    s2 = np.einsum("ij,ij->i", seeds, seeds)
    d2 = p2[:, None] - 2.0 * (points @ seeds.T) + s2[None, :]
    return np.clip(d2, 0.0, None)


def assign(points: np.ndarray, seeds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-seed assignment (ties to the lowest seed index) and counts."""
    points = as_matrix(points)
    seeds = as_matrix(seeds, cols=points.shape[1])
    if seeds.shape[0] < 1:
        raise ValueError("need at least one seed")
    d2 = _sq_distances(points, seeds)
    assignment = np.argmin(d2, axis=1)
    alpha = np.bincount(assignment, minlength=seeds.shape[0])
    return assignment, alpha


def wss(points: np.ndarray, model: PartitionModel) -> float:
    """Within-cluster sum of squares of the model on its points."""
    points = as_matrix(points, cols=model.seeds.shape[1])
    diff = points - model.seeds[model.assignment]
    return float(np.einsum("ij,ij->", diff, diff))


def _kmeans_pp_init(points: np.ndarray, khat: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: squared-distance-weighted sequential choice."""
    n = points.shape[0]
    chosen = np.empty(khat, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = _sq_distances(points, points[chosen[:1]])[:, 0]
    for j in range(1, khat):
        total = float(d2.sum())
        if total <= 0.0:
            chosen[j] = rng.integers(n)  # all remaining points duplicate a seed
        else:
            r = rng.random() * total
            chosen[j] = min(int(np.searchsorted(np.cumsum(d2), r, side="right")), n - 1)
        d2 = np.minimum(d2, _sq_distances(points, points[chosen[j:j + 1]])[:, 0])
    return points[chosen].copy()


def _repair_empty(points: np.ndarray, seeds: np.ndarray, assignment: np.ndarray,
                  alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reseed each empty cell with the point farthest from its own seed.

    Only points in cells with two or more members are eligible so stealing
    one never empties another cell. Ties go to the lowest point index.
    """
    diff = points - seeds[assignment]
    d2 = np.einsum("ij,ij->i", diff, diff)
    for j in range(seeds.shape[0]):
        if alpha[j] > 0:
            continue
        eligible = alpha[assignment] >= 2
        scores = np.where(eligible, d2, -1.0)
        i = int(np.argmax(scores))
        alpha[assignment[i]] -= 1
        seeds[j] = points[i]
        assignment[i] = j
        alpha[j] = 1
        d2[i] = 0.0
    return assignment, alpha


def _lloyd(points: np.ndarray, init_seeds: np.ndarray, max_iter: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    seeds = init_seeds.copy()
    khat = seeds.shape[0]
    assignment = np.full(points.shape[0], -1, dtype=np.int64)
    for _ in range(max_iter):
        new_assignment, alpha = assign(points, seeds)
        if np.any(alpha == 0):
            new_assignment, alpha = _repair_empty(points, seeds, new_assignment, alpha)
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for j in range(khat):
            members = assignment == j
            seeds[j] = points[members].mean(axis=0)
    else:
        assignment, alpha = assign(points, seeds)
        if np.any(alpha == 0):
            assignment, alpha = _repair_empty(points, seeds, assignment, alpha)
        return seeds, assignment, alpha
    return seeds, assignment, alpha


def kmeans(points: np.ndarray, khat: int, restarts: int = 10,
           max_iter: int = 100, seed: int = 0) -> PartitionModel:
    """Best-of-restarts Lloyd clustering with k-means++ initialization."""
    points = as_matrix(points)
    n = points.shape[0]
    if not (1 <= khat <= n):
        raise ValueError(f"cell count must lie in [1, {n}], got {khat}")
    if restarts < 1:
        raise ValueError("need at least one restart")

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        init = _kmeans_pp_init(points, khat, rng)
        seeds, assignment, alpha = _lloyd(points, init, max_iter)
        diff = points - seeds[assignment]
        score = float(np.einsum("ij,ij->", diff, diff))
        if best is None or score < best[0]:
            best = (score, seeds, assignment, alpha)
    score, seeds, assignment, alpha = best
    return PartitionModel(seeds=seeds, assignment=assignment, alpha=alpha, wss=score)


def compute_buffers(points: np.ndarray, model: PartitionModel, f: np.ndarray) -> np.ndarray:
    """Per-cell worst member offsets: buffers[j, ell] = max over cell j of
    F_ell (point - seed_j)."""
    points = as_matrix(points, cols=model.seeds.shape[1])
    f = as_matrix(f, cols=points.shape[1])
    khat = model.n_cells
    buffers = np.empty((khat, f.shape[0]))
    for j in range(khat):
        members = model.assignment == j
        if not np.any(members):
            raise ValueError(f"cell {j} is empty")
        offsets = (points[members] - model.seeds[j]) @ f.T
        buffers[j] = offsets.max(axis=0)
    return buffers


def wss_curve(points: np.ndarray, khat_grid: Sequence[int], restarts: int = 10,
              seed: int = 0, max_iter: int = 100, timings: bool = False) -> WssCurve:
    """One best-of-restarts k-means score per grid value.

    Wall-clock seconds are recorded only when timings is set; the default
    zero column keeps output files reproducible byte for byte.
    """
    import time

    grid = np.asarray(list(khat_grid), dtype=np.int64)
    if grid.size == 0:
        raise ValueError("empty grid")
    values = np.empty(grid.size)
    seconds = np.zeros(grid.size)
    for idx, khat in enumerate(grid):
        sub_seed = int(np.random.SeedSequence(seed, spawn_key=(int(khat),)).generate_state(1)[0])
        t0 = time.perf_counter()
        model = kmeans(points, int(khat), restarts=restarts, max_iter=max_iter, seed=sub_seed)
        if timings:
            seconds[idx] = time.perf_counter() - t0
        values[idx] = model.wss
    return WssCurve(khat_values=grid, wss_values=values, seconds=seconds)


def knee(curve: WssCurve) -> int:
    """Grid value of the point farthest below the first-to-last chord.

    The cross product scales uniformly under per-axis rescaling, so the
    argmax needs no normalization. Interior points only; a perfectly
    straight curve degenerates to the first interior point.
    """
    k = curve.khat_values.astype(float)
    w = curve.wss_values
    if k.size < 3:
        raise ValueError("knee needs at least three curve points")
    dk, dw = k[-1] - k[0], w[-1] - w[0]
    below = -(dk * (w[1:-1] - w[0]) - dw * (k[1:-1] - k[0]))
    return int(curve.khat_values[1 + int(np.argmax(below))])
