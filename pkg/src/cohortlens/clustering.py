"""Clustering pipeline: z-score normalization, k estimation via medoid
pre-clustering with silhouette selection on a sample, K-Means, and
within/between sum-of-squares quality statistics.

Everything is deterministic given the request seed and input row order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .metrics import MetricId, MetricMatrix


class ClusteringError(Exception):
    pass


class TooFewRows(ClusteringError):
    pass


class BadK(ClusteringError):
    pass


class SingleCluster(ClusteringError):
    pass


@dataclass(frozen=True)
class NormalizedMatrix:
    points: np.ndarray           # n x m, z-scored
    column_means: np.ndarray     # m
    column_stds: np.ndarray      # m (sample std, 1.0 substituted for constants)
    metric_ids: tuple[MetricId, ...]
    constant_columns: tuple[bool, ...]

    def denormalize(self, points: np.ndarray) -> np.ndarray:
        return points * self.column_stds + self.column_means


@dataclass(frozen=True)
class KMeansResult:
    k: int
    assignments: np.ndarray  # n labels in [0, k)
    centers: np.ndarray      # k x m, normalized space
    tot_withinss: float
    iterations: int
    seed: int


@dataclass(frozen=True)
class ClusterQuality:
    withinss: tuple[float, ...]
    tot_withinss: float
    betweenss: float
    totss: float
    sizes: tuple[int, ...]


@dataclass(frozen=True)
class ClusteringRequest:
    course_id: str
    metric_ids: tuple[MetricId, ...]
    k: Optional[int] = None
    seed: int = 0
    sample_size: int = 2000
    k_range: tuple[int, int] = (2, 10)


@dataclass(frozen=True)
class ClusteringResult:
    course_id: str
    metric_ids: tuple[MetricId, ...]
    user_ids: tuple[str, ...]
    values: np.ndarray             # n x m, original metric units
    assignments: np.ndarray        # n labels, canonicalized
    centers_normalized: np.ndarray
    centers: np.ndarray            # denormalized, metric units
    k: int
    seed: int
    iterations: int
    k_estimated: bool
    quality: ClusterQuality
    request: ClusteringRequest


def normalize(matrix: MetricMatrix) -> NormalizedMatrix:
    """Per-column z-score with the sample (n-1) standard deviation.

    Constant columns are centered to all-zero and flagged; they are kept so
    center denormalization stays column-aligned.
    """
    n = matrix.n
    if n < 2:
        raise TooFewRows(f"need at least 2 rows, got {n}")
    values = np.array([row.values for row in matrix.rows], dtype=float)
    means = values.mean(axis=0)
    stds = values.std(axis=0, ddof=1)
    constant = stds == 0.0
    safe_stds = np.where(constant, 1.0, stds)
    points = (values - means) / safe_stds
    return NormalizedMatrix(
        points=points,
        column_means=means,
        column_stds=safe_stds,
        metric_ids=matrix.metric_ids,
        constant_columns=tuple(bool(c) for c in constant),
    )


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", points, points)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2, out=d2)


def _pam_build(dist: np.ndarray, k: int) -> list[int]:
    n = dist.shape[0]
    first = int(dist.sum(axis=0).argmin())
    medoids = [first]
    d_nearest = dist[:, first].copy()
    for _ in range(1, k):
        # gain of adding candidate c: sum over points of max(d_nearest - d(., c), 0)
        gains = np.maximum(d_nearest[:, None] - dist, 0.0).sum(axis=0)
        gains[medoids] = -np.inf
        best = int(gains.argmax())
        medoids.append(best)
        np.minimum(d_nearest, dist[:, best], out=d_nearest)
    return medoids


def _pam_swap(dist: np.ndarray, medoids: list[int], max_passes: int = 100) -> list[int]:
    n = dist.shape[0]
    medoids = list(medoids)
    k = len(medoids)
    if k >= n:
        return medoids
    eps = 1e-12
    for _ in range(max_passes):
        med = np.array(medoids)
        d_to_med = dist[:, med]                     # n x k
        order = np.argsort(d_to_med, axis=1, kind="stable")
        nearest = order[:, 0]                       # index into medoid list
        d1 = d_to_med[np.arange(n), nearest]
        d2 = d_to_med[np.arange(n), order[:, 1]]
        # delta(i, h) = S[h] + T[i, h]: cost change of swapping medoid i for point h
        shared = np.minimum(dist - d1[:, None], 0.0)        # n x n
        s = shared.sum(axis=0)                              # per candidate h
        local = np.minimum(dist, d2[:, None]) - d1[:, None] - shared
        t = np.zeros((k, n))
        for i in range(k):
            t[i] = local[nearest == i].sum(axis=0)
        delta = s[None, :] + t                              # k x n
        delta[:, med] = np.inf
        i, h = np.unravel_index(int(delta.argmin()), delta.shape)
        if delta[i, h] >= -eps:
            break
        medoids[i] = int(h)
    return medoids


def pam(points: np.ndarray, k: int, seed: int = 0) -> tuple[list[int], np.ndarray]:
    """Partitioning around medoids (BUILD + SWAP) under Euclidean distance.

    Returns (medoid indices, assignments).  Deterministic given the input
    order; the seed is accepted for interface symmetry but the procedure is
    greedy and does not draw random numbers.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if not 2 <= k <= n:
        raise BadK(f"k={k} outside [2, {n}]")
    dist = _pairwise_distances(points)
    medoids = _pam_build(dist, k)
    medoids = _pam_swap(dist, medoids)
    assignments = np.argmin(dist[:, medoids], axis=1)
    return medoids, assignments


def silhouette(points: np.ndarray, assignments: np.ndarray) -> float:
    """Average silhouette width; singletons contribute 0, as do zero-spread points."""
    points = np.asarray(points, dtype=float)
    assignments = np.asarray(assignments)
    labels = np.unique(assignments)
    if labels.size < 2:
        raise SingleCluster("silhouette needs at least 2 clusters")
    dist = _pairwise_distances(points)
    n = points.shape[0]
    sizes = {int(c): int((assignments == c).sum()) for c in labels}
    # mean distance from every point to every cluster
    mean_to = np.empty((n, labels.size))
    for j, c in enumerate(labels):
        mean_to[:, j] = dist[:, assignments == c].sum(axis=1)
    widths = np.zeros(n)
    label_pos = {int(c): j for j, c in enumerate(labels)}
    for idx in range(n):
        c = int(assignments[idx])
        if sizes[c] == 1:
            continue
        j = label_pos[c]
        a = mean_to[idx, j] / (sizes[c] - 1)
        b = np.inf
        for jj, cc in enumerate(labels):
            if jj == j:
                continue
            b = min(b, mean_to[idx, jj] / sizes[int(cc)])
        denom = max(a, b)
        widths[idx] = (b - a) / denom if denom > 0 else 0.0
    return float(widths.mean())


def estimate_k(
    points: np.ndarray,
    k_range: tuple[int, int] = (2, 10),
    sample_size: int = 2000,
    seed: int = 0,
) -> int:
    """Pre-cluster a seeded subsample with PAM for each candidate k and pick
    the k with the highest average silhouette width (ties go to smaller k)."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if n < 3:
        raise TooFewRows(f"k estimation needs at least 3 rows, got {n}")
    rng = np.random.default_rng(seed)
    take = min(n, sample_size)
    idx = np.sort(rng.choice(n, size=take, replace=False))
    sample = points[idx]
    dist = _pairwise_distances(sample)
    lo, hi = k_range
    candidates = [k for k in range(lo, hi + 1) if 2 <= k <= take]
    if not candidates:
        raise BadK(f"k_range {k_range} has no feasible k for n={take}")
    best_k, best_width = candidates[0], -np.inf
    for k in candidates:
        medoids = _pam_swap(dist, _pam_build(dist, k))
        assignments = np.argmin(dist[:, medoids], axis=1)
        if np.unique(assignments).size < 2:
            continue  # duplicate-heavy sample collapsed; silhouette undefined
        width = silhouette(sample, assignments)
        if width > best_width:
            best_k, best_width = k, width
    return best_k


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = points[rng.integers(n)]
        else:
            centers[j] = points[rng.choice(n, p=d2 / total)]
        np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1), out=d2)
    return centers


def _assign(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # squared distances via the expansion trick; argmin breaks ties to lowest label
    d2 = (
        np.einsum("ij,ij->i", points, points)[:, None]
        - 2.0 * (points @ centers.T)
        + np.einsum("ij,ij->i", centers, centers)[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    labels = np.argmin(d2, axis=1)
    return labels, d2


def _lloyd(
    points: np.ndarray, k: int, rng: np.random.Generator, max_iter: int
) -> tuple[np.ndarray, np.ndarray, float, int, list[float]]:
    n = points.shape[0]
    centers = _kmeans_pp_init(points, k, rng)
    labels = np.full(n, -1)
    iterations = 0
    history: list[float] = []
    pinned: dict[int, int] = {}  # cluster -> point held after an empty-cluster repair
    for iterations in range(1, max_iter + 1):
        new_labels, d2 = _assign(points, centers)
        # a pin is only needed while nearest-center assignment leaves its cluster empty
        pinned = {c: p for c, p in pinned.items() if not (new_labels == c).any()}
        for cluster, point in pinned.items():
            new_labels[point] = cluster
        history.append(float(d2[np.arange(n), new_labels].sum()))
        for j in range(k):
            mask = new_labels == j
            if mask.any():
                centers[j] = points[mask].mean(axis=0)
            else:
                # repair: reseed the empty cluster at the point farthest from its
                # current (stale) center; pin it so ties cannot re-empty the cluster
                order = np.argsort(-((points - centers[j]) ** 2).sum(axis=1))
                taken = set(pinned.values())
                counts = np.bincount(new_labels, minlength=k)
                for cand in order:
                    cand = int(cand)
                    if cand not in taken and counts[new_labels[cand]] > 1:
                        break
                centers[j] = points[cand]
                counts[new_labels[cand]] -= 1
                new_labels[cand] = j
                pinned[j] = cand
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    labels, d2 = _assign(points, centers)
    for cluster, point in pinned.items():
        if not (labels == cluster).any():
            labels[point] = cluster
    tot_withinss = float(d2[np.arange(n), labels].sum())
    history.append(tot_withinss)
    return labels, centers, tot_withinss, iterations, history


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    restarts: int = 10,
) -> KMeansResult:
    """Lloyd iteration with k-means++ seeding and best-of-restarts selection.

    Labels are canonicalized by first occurrence in row order, so the result
    is reproducible across runs and platforms.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if not 2 <= k <= n:
        raise BadK(f"k={k} outside [2, {n}]")
    streams = np.random.SeedSequence(seed).spawn(restarts)
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(streams[r])
        labels, centers, tot, iters, _ = _lloyd(points, k, rng, max_iter)
        if best is None or tot < best[2] - 1e-12:
            best = (labels, centers, tot, iters)
    labels, centers, tot, iters = best
    labels, centers = _canonicalize(labels, centers, k)
    return KMeansResult(
        k=k,
        assignments=labels,
        centers=centers,
        tot_withinss=tot,
        iterations=iters,
        seed=seed,
    )


def _canonicalize(labels: np.ndarray, centers: np.ndarray, k: int):
    remap = {}
    for lab in labels:
        lab = int(lab)
        if lab not in remap:
            remap[lab] = len(remap)
    for lab in range(k):  # clusters never reached in row order keep relative order
        if lab not in remap:
            remap[lab] = len(remap)
    new_labels = np.array([remap[int(l)] for l in labels])
    new_centers = np.empty_like(centers)
    for old, new in remap.items():
        new_centers[new] = centers[old]
    return new_labels, new_centers


def quality(points: np.ndarray, result: KMeansResult) -> ClusterQuality:
    """withinss per cluster, totss about the global mean, betweenss both as the
    difference and as the size-weighted center spread (cross-checked)."""
    points = np.asarray(points, dtype=float)
    labels = result.assignments
    k = result.k
    withinss = []
    sizes = []
    grand = points.mean(axis=0)
    between_direct = 0.0
    for j in range(k):
        mask = labels == j
        nj = int(mask.sum())
        sizes.append(nj)
        withinss.append(float(((points[mask] - result.centers[j]) ** 2).sum()))
        between_direct += nj * float(((result.centers[j] - grand) ** 2).sum())
    tot_within = float(sum(withinss))
    totss = float(((points - grand) ** 2).sum())
    betweenss = totss - tot_within
    scale = max(totss, 1.0)
    if abs(betweenss - between_direct) > 1e-6 * scale:
        raise ClusteringError(
            f"sum-of-squares decomposition mismatch: {betweenss} vs {between_direct}"
        )
    return ClusterQuality(
        withinss=tuple(withinss),
        tot_withinss=tot_within,
        betweenss=betweenss,
        totss=totss,
        sizes=tuple(sizes),
    )


def run_clustering(request: ClusteringRequest, matrix: MetricMatrix) -> ClusteringResult:
    """Full pipeline: normalize, estimate k when absent, K-Means, quality."""
    normalized = normalize(matrix)
    points = normalized.points
    k_estimated = request.k is None
    if k_estimated:
        k = estimate_k(
            points,
            k_range=request.k_range,
            sample_size=request.sample_size,
            seed=request.seed,
        )
    else:
        k = request.k
        if not 2 <= k <= matrix.n:
            raise BadK(f"k={k} outside [2, {matrix.n}]")
    km = kmeans(points, k, seed=request.seed)
    qual = quality(points, km)
    return ClusteringResult(
        course_id=request.course_id,
        metric_ids=matrix.metric_ids,
        user_ids=matrix.user_ids,
        values=np.array([row.values for row in matrix.rows], dtype=float),
        assignments=km.assignments,
        centers_normalized=km.centers,
        centers=normalized.denormalize(km.centers),
        k=k,
        seed=request.seed,
        iterations=km.iterations,
        k_estimated=k_estimated,
        quality=qual,
        request=request,
    )
