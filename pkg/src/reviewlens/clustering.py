"""K-means over feature vectors, plus the cluster gallery export.

Normative defaults: distance-weighted (k-means++) initialization,
10 restarts, 300 Lloyd iterations maximum, convergence when the
largest centroid shift drops below 1e-4.

Determinism and permutation invariance: restart r uses seed
config.seed + r, and all seeded sampling happens over a canonical
point order (sorted by SHA-256 of the point id when ids are given,
else of the float64 row bytes), so permuting the input rows permutes
the assignments and nothing else. Assignment and inertia use squared
Euclidean distance internally; distances surfaced to callers and in
galleries are true Euclidean.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateInputError,
    DimensionError,
    InconsistencyError,
)
from .manifest import ImageManifest


@dataclass(frozen=True)
class ClusterConfig:
    k: int
    restarts: int = 10
    max_iterations: int = 300
    tolerance: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.tolerance < 0:
            raise ConfigError("tolerance must be >= 0")


@dataclass
class ClusterModel:
    centroids: np.ndarray  # (k, dim)
    inertia: float
    assignments: np.ndarray  # (n,) cluster index per input point
    iterations_run: int
    distances: np.ndarray  # (n,) Euclidean distance to assigned centroid
    point_ids: tuple[str, ...] | None = None
    restart_inertias: tuple[float, ...] = ()
    inertia_history: tuple[float, ...] = ()  # winning run, one entry per Lloyd pass


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances, clipped at 0 against rounding."""
    sq = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * points @ centroids.T
        + np.sum(centroids**2, axis=1)[None, :]
    )
    return np.maximum(sq, 0.0)


def _distinct_count(points: np.ndarray) -> int:
    return np.unique(points, axis=0).shape[0]


def kmeanspp_init(points: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Distance-weighted seeding: first centroid uniform, each next drawn
    with probability proportional to squared distance to the nearest
    chosen one. Returns k distinct centroids, deterministic per seed."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise DimensionError(f"points must be a nonempty 2-D array, got shape {points.shape}")
    if _distinct_count(points) < k:
        raise DegenerateInputError(
            f"need at least {k} distinct points, found {_distinct_count(points)}"
        )
    rng = np.random.default_rng(seed)
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    best_sq = _squared_distances(points, points[chosen[-1]][None, :])[:, 0]
    for _ in range(1, k):
        total = best_sq.sum()
        # total > 0 is guaranteed by the distinct-point precondition.
        probs = best_sq / total
        next_idx = int(rng.choice(n, p=probs))
        chosen.append(next_idx)
        new_sq = _squared_distances(points, points[next_idx][None, :])[:, 0]
        best_sq = np.minimum(best_sq, new_sq)
    return points[chosen].copy()


def _canonical_order(points: np.ndarray, point_ids: Sequence[str] | None) -> list[int]:
    if point_ids is not None:
        keys = [hashlib.sha256(pid.encode("utf-8")).digest() for pid in point_ids]
    else:
        keys = [hashlib.sha256(np.ascontiguousarray(row).tobytes()).digest() for row in points]
    # Stable sort: identical content keeps input order, which cannot affect
    # results because equal keys mean interchangeable points (or equal ids).
    return sorted(range(len(keys)), key=lambda i: keys[i])


def _assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sq = _squared_distances(points, centroids)
    labels = np.argmin(sq, axis=1)  # argmin takes the lowest index on ties
    return labels, sq[np.arange(points.shape[0]), labels]


def _update(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    k = centroids.shape[0]
    new = centroids.copy()
    counts = np.bincount(labels, minlength=k)
    for j in range(k):
        if counts[j] > 0:
            new[j] = points[labels == j].mean(axis=0)
    empty = [j for j in range(k) if counts[j] == 0]
    if empty:
        # Repair: the point farthest from its assigned centroid becomes the
        # empty cluster's centroid; next-farthest for further empties.
        _, d2 = _assign(points, centroids)
        order = np.argsort(-d2, kind="stable")
        for slot, j in enumerate(empty):
            new[j] = points[order[slot]]
    return new


def _lloyd(
    points: np.ndarray, init_centroids: np.ndarray, config: ClusterConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, list[float]]:
    centroids = init_centroids
    labels, d2 = _assign(points, centroids)
    history = [float(d2.sum())]
    iterations = 0
    for _ in range(config.max_iterations):
        new_centroids = _update(points, labels, centroids)
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        labels, d2 = _assign(points, centroids)
        history.append(float(d2.sum()))
        iterations += 1
        if shift < config.tolerance:
            break
    return centroids, labels, d2, iterations, history


def kmeans_fit(
    points: np.ndarray,
    config: ClusterConfig,
    point_ids: Sequence[str] | None = None,
) -> ClusterModel:
    """Best of config.restarts independent seeded runs (minimum inertia,
    ties to the lowest restart index)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise DimensionError(f"points must be a nonempty 2-D array, got shape {points.shape}")
    if point_ids is not None and len(point_ids) != points.shape[0]:
        raise DimensionError(f"{len(point_ids)} ids for {points.shape[0]} points")
    if _distinct_count(points) < config.k:
        raise DegenerateInputError(
            f"k={config.k} exceeds the {_distinct_count(points)} distinct points"
        )

    order = _canonical_order(points, point_ids)
    canon = points[order]

    best: tuple[np.ndarray, np.ndarray, np.ndarray, int, list[float]] | None = None
    restart_inertias: list[float] = []
    for r in range(config.restarts):
        init = kmeanspp_init(canon, config.k, config.seed + r)
        run = _lloyd(canon, init, config)
        restart_inertias.append(run[4][-1])
        if best is None or run[4][-1] < best[4][-1]:
            best = run
    assert best is not None
    centroids, canon_labels, canon_d2, iterations, history = best

    assignments = np.empty(points.shape[0], dtype=np.int64)
    distances = np.empty(points.shape[0], dtype=np.float64)
    for canon_pos, original_idx in enumerate(order):
        assignments[original_idx] = canon_labels[canon_pos]
        distances[original_idx] = np.sqrt(canon_d2[canon_pos])

    return ClusterModel(
        centroids=centroids,
        inertia=float(canon_d2.sum()),
        assignments=assignments,
        iterations_run=iterations,
        distances=distances,
        point_ids=tuple(point_ids) if point_ids is not None else None,
        restart_inertias=tuple(restart_inertias),
        inertia_history=tuple(history),
    )


def assign_points(
    model: ClusterModel, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels (ties to the lowest cluster index) and true
    Euclidean distances for out-of-sample points."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1 and points.size == 0:
        points = points.reshape(0, model.centroids.shape[1])
    if points.ndim != 2:
        raise DimensionError(f"points must be 2-D, got shape {points.shape}")
    if points.shape[0] == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    if points.shape[1] != model.centroids.shape[1]:
        raise DimensionError(
            f"points have dim {points.shape[1]}, centroids have dim {model.centroids.shape[1]}"
        )
    labels, d2 = _assign(points, model.centroids)
    return labels.astype(np.int64), np.sqrt(d2)


def export_cluster_gallery(model: ClusterModel, manifest: ImageManifest) -> dict:
    """Gallery document grouping manifest image ids by cluster.

    Members are ordered by ascending distance to their centroid (ties keep
    manifest order); each cluster reports its size and share of total
    inertia. The model's point ids must cover the manifest exactly.
    """
    if model.point_ids is None:
        raise InconsistencyError("model has no point ids; fit with point_ids to export")
    manifest_ids = manifest.ids()
    if set(model.point_ids) != set(manifest_ids):
        missing = set(manifest_ids) - set(model.point_ids)
        extra = set(model.point_ids) - set(manifest_ids)
        raise InconsistencyError(
            f"assignments do not cover the manifest exactly "
            f"(missing: {sorted(missing)[:5]}, extra: {sorted(extra)[:5]})"
        )
    by_id = {pid: i for i, pid in enumerate(model.point_ids)}
    k = model.centroids.shape[0]
    members: list[list[tuple[str, float]]] = [[] for _ in range(k)]
    sq_share = np.zeros(k)
    for image_id in manifest_ids:  # manifest order makes distance ties stable
        idx = by_id[image_id]
        cluster = int(model.assignments[idx])
        dist = float(model.distances[idx])
        members[cluster].append((image_id, dist))
        sq_share[cluster] += dist * dist
    total = float(model.inertia)
    clusters = []
    for j in range(k):
        ordered = sorted(members[j], key=lambda item: item[1])
        clusters.append(
            {
                "index": j,
                "size": len(ordered),
                "inertia_share": (sq_share[j] / total) if total > 0 else 0.0,
                "members": [
                    {"image_id": image_id, "distance": dist} for image_id, dist in ordered
                ],
            }
        )
    return {"k": k, "inertia": total, "clusters": clusters}
