"""
K-Means over an arbitrary metric space.

Lloyd iteration alternates nearest-centroid assignment (by the space's
distance) with a centroid update (by the space's centroid). The
semi-supervised variant pins every labeled point to its class's cluster in
every iteration.

Work is split into fixed-size, index-ordered chunks, so results are
bit-identical for any worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from clustering.dataset import LabeledDataset
from clustering.spaces import MetricSpace
from utils.config import ConfigManager
from utils.error_handling import ValidationError, EmptyClusterError

logger = logging.getLogger(__name__)

INIT_METHODS = ('kmeanspp', 'labeled-means-plus-kmeanspp', 'explicit')
DEFAULT_MAX_ITERS = 300
DEFAULT_TOL_SHIFT = 1e-6
DEFAULT_RESTARTS = 10
DEFAULT_SEMI_SUPERVISED_RESTARTS = 1
ASSIGN_CHUNK = 512


@dataclass
class KMeansConfig:
    """
    K-Means settings.

    Attributes:
        k (int): Number of clusters
        max_iters (int): Iteration cap per restart
        seed (int): Seed for initialization
        init (str): ``kmeanspp``, ``labeled-means-plus-kmeanspp`` or ``explicit``
        tol_shift (float): Stop when every centroid moves less than this
        restarts (Optional[int]): Independent initializations; the lowest final
            objective wins. Omitted means 10 for K-Means and 1 for
            semi-supervised K-Means, whose labeled init is deterministic
        reseed (bool): Move empty centroids to the farthest point
        initial_centroids (Optional[np.ndarray]): Used when ``init == 'explicit'``
        num_threads (Optional[int]): Worker threads; HYPGCD_NUM_THREADS when omitted
    """

    k: int
    max_iters: int = DEFAULT_MAX_ITERS
    seed: int = 0
    init: str = 'kmeanspp'
    tol_shift: float = DEFAULT_TOL_SHIFT
    restarts: Optional[int] = None
    reseed: bool = True
    initial_centroids: Optional[np.ndarray] = None
    num_threads: Optional[int] = None

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValidationError(f"k must be a positive integer, got {self.k}")
        if int(self.max_iters) < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.restarts is not None and int(self.restarts) < 1:
            raise ValidationError(f"restarts must be >= 1, got {self.restarts}")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not self.tol_shift >= 0.0:
            raise ValidationError(f"tol_shift must be non-negative, got {self.tol_shift}")
        if self.init not in INIT_METHODS:
            raise ValidationError(f"Unknown init {self.init!r}; expected one of {INIT_METHODS}")
        if self.init == 'explicit':
            if self.initial_centroids is None:
                raise ValidationError("init='explicit' requires initial_centroids")
            self.initial_centroids = np.asarray(self.initial_centroids, dtype=np.float64)
            if self.initial_centroids.shape[0] != self.k:
                raise ValidationError(
                    f"Expected {self.k} initial centroids, got {self.initial_centroids.shape[0]}"
                )
        if self.num_threads is not None and int(self.num_threads) < 1:
            raise ValidationError(f"num_threads must be >= 1, got {self.num_threads}")

    def resolved_restarts(self, semi_supervised: bool = False) -> int:
        if self.restarts is not None:
            return int(self.restarts)
        return DEFAULT_SEMI_SUPERVISED_RESTARTS if semi_supervised else DEFAULT_RESTARTS

    def resolved_threads(self) -> int:
        return int(self.num_threads) if self.num_threads is not None else ConfigManager.get_num_threads()


@dataclass
class ClusteringResult:
    """
    Outcome of a K-Means run.

    Attributes:
        assignments (np.ndarray): Cluster id per point
        centroids (np.ndarray): One centroid per cluster
        objective_trace (List[float]): Objective after each iteration
        iterations (int): Iterations run by the winning restart
        converged (bool): Stopped by a convergence test rather than max_iters
        restart (int): Index of the winning restart
        class_to_cluster (dict): Seen class id -> cluster id (semi-supervised runs)
    """

    assignments: np.ndarray
    centroids: np.ndarray
    objective_trace: List[float]
    iterations: int
    converged: bool
    restart: int = 0
    class_to_cluster: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    @property
    def largest_cluster_fraction(self) -> float:
        """Share of points in the most populated cluster (1.0 means collapse)."""
        return float(np.max(self.cluster_sizes)) / float(len(self.assignments))


@contextmanager
def _worker_pool(num_threads: int):
    if num_threads <= 1:
        yield None
        return
    with ThreadPoolExecutor(max_workers=num_threads) as pool:
        yield pool


def _map(pool: Optional[ThreadPoolExecutor], fn, items: Sequence) -> list:
    if pool is None:
        return [fn(item) for item in items]
    return list(pool.map(fn, items))


def _prepare(points, space: MetricSpace, k: int) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValidationError(f"Expected a non-empty (n, d) point array, got shape {points.shape}")
    valid = space.validate(points)
    if not np.all(valid):
        first = int(np.flatnonzero(~valid)[0])
        raise ValidationError(
            f"{int(np.count_nonzero(~valid))} point(s) invalid for the {space.name} space "
            f"(first at index {first})"
        )
    if k > points.shape[0]:
        raise ValidationError(f"k={k} exceeds the number of points ({points.shape[0]})")
    space.spot_check(points)
    return points


def kmeanspp_init(data, k: int, seed, space: MetricSpace,
                  initial: Optional[np.ndarray] = None) -> np.ndarray:
    """
    D² seeding under the space's distance.

    Each new centroid is a data point drawn with probability proportional to
    its squared distance to the nearest centroid chosen so far. ``initial``
    centroids count as already chosen; without them the first centroid is
    drawn uniformly.

    Args:
        data: Candidate points, shape ``(n, d)``
        k (int): Number of centroids to add
        seed: Seed, ``SeedSequence`` or ``Generator``
        space (MetricSpace): Distance to seed with
        initial (Optional[np.ndarray]): Centroids already fixed

    Returns:
        np.ndarray: ``initial`` followed by the ``k`` new centroids

    Raises:
        EmptyClusterError: If there are fewer distinct candidates than needed
    """
    rng = np.random.default_rng(seed)
    data = np.asarray(data, dtype=np.float64)
    chosen = [] if initial is None else [np.asarray(c, dtype=np.float64) for c in initial]
    if k == 0:
        return np.array(chosen)
    n = data.shape[0]
    if n == 0:
        raise EmptyClusterError(f"No candidate points to seed {k} centroid(s)")

    if chosen:
        min_d2 = np.min(space.pairwise_distance(data, np.array(chosen)), axis=1) ** 2
    else:
        first = int(rng.integers(n))
        chosen.append(data[first])
        min_d2 = space.pairwise_distance(data, data[first:first + 1])[:, 0] ** 2
        k -= 1

    for _ in range(k):
        cumulative = np.cumsum(min_d2)
        total = cumulative[-1]
        if not total > 0.0:
            raise EmptyClusterError("Fewer distinct points than requested centroids")
        idx = int(np.searchsorted(cumulative, rng.random() * total, side='right'))
        idx = min(idx, n - 1)
        while min_d2[idx] <= 0.0:
            idx -= 1
        chosen.append(data[idx])
        new_d2 = space.pairwise_distance(data, data[idx:idx + 1])[:, 0] ** 2
        min_d2 = np.minimum(min_d2, new_d2)
    return np.array(chosen)


def _pairwise_chunked(points: np.ndarray, centroids: np.ndarray, space: MetricSpace,
                      pool: Optional[ThreadPoolExecutor]) -> np.ndarray:
    bounds = [(s, min(s + ASSIGN_CHUNK, points.shape[0]))
              for s in range(0, points.shape[0], ASSIGN_CHUNK)]
    blocks = _map(pool, lambda b: space.pairwise_distance(points[b[0]:b[1]], centroids), bounds)
    return np.vstack(blocks)


def _reseed_empty(points: np.ndarray, assign: np.ndarray, centroids: np.ndarray,
                  space: MetricSpace, movable: np.ndarray) -> None:
    k = centroids.shape[0]
    for j in range(k):
        sizes = np.bincount(assign, minlength=k)
        if sizes[j] > 0:
            continue
        candidates = movable & (sizes[assign] > 1)
        if not np.any(candidates):
            logger.warning(f"Cluster {j} is empty and no point can be moved into it")
            continue
        own = space.distance(points, centroids[assign])
        own = np.where(candidates, own, -np.inf)
        far = int(np.argmax(own))
        logger.warning(f"Cluster {j} is empty; reseeding at point {far} (distance {own[far]:.4g})")
        centroids[j] = points[far]
        assign[far] = j


def _lloyd(points: np.ndarray, centroids: np.ndarray, cfg: KMeansConfig, space: MetricSpace,
           fixed: np.ndarray, pool: Optional[ThreadPoolExecutor]) -> ClusteringResult:
    centroids = np.array(centroids, dtype=np.float64)
    k = centroids.shape[0]
    free = fixed < 0
    trace: List[float] = []
    previous: Optional[np.ndarray] = None
    converged = False
    track_cycles = logger.isEnabledFor(logging.DEBUG)
    seen = set()
    iteration = 0

    for iteration in range(1, cfg.max_iters + 1):
        distances = _pairwise_chunked(points, centroids, space, pool)
        assign = np.where(free, np.argmin(distances, axis=1), fixed)
        if cfg.reseed:
            _reseed_empty(points, assign, centroids, space, free)

        def update(j: int) -> np.ndarray:
            members = points[assign == j]
            return space.centroid(members) if members.shape[0] else centroids[j]

        updated = np.array(_map(pool, update, range(k)))
        shift = float(np.max(space.distance(centroids, updated)))
        centroids = updated
        trace.append(float(np.sum(space.cost(points, centroids[assign]))))
        logger.debug(f"iter {iteration}: objective={trace[-1]:.10g} shift={shift:.3g}")

        if track_cycles:
            key = assign.tobytes()
            if key in seen and not (previous is not None and np.array_equal(assign, previous)):
                logger.debug(f"Assignment vector repeated at iteration {iteration}")
            seen.add(key)
        if previous is not None and np.array_equal(assign, previous):
            converged = True
            break
        if shift < cfg.tol_shift:
            converged = True
            break
        previous = assign

    return ClusteringResult(assign, centroids, trace, iteration, converged)


def _best_of(runs: List[ClusteringResult]) -> ClusteringResult:
    best = 0
    for i, run in enumerate(runs):
        if run.objective < runs[best].objective:
            best = i
    result = runs[best]
    result.restart = best
    return result


def kmeans(data, cfg: KMeansConfig, space: MetricSpace) -> ClusteringResult:
    """
    Lloyd K-Means in ``space`` with best-of-restarts selection.

    Args:
        data: Points, shape ``(n, d)`` in the space's coordinates
        cfg (KMeansConfig): Settings
        space (MetricSpace): Distance and centroid

    Returns:
        ClusteringResult: The restart with the lowest final objective

    Raises:
        ValidationError: If the config or points are invalid
        EmptyClusterError: If initialization runs out of distinct points
    """
    if cfg.init == 'labeled-means-plus-kmeanspp':
        raise ValidationError("labeled-means-plus-kmeanspp needs labels; use semi_supervised_kmeans")
    points = _prepare(data, space, cfg.k)
    fixed = np.full(points.shape[0], -1, dtype=np.int64)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.resolved_restarts())

    runs = []
    with _worker_pool(cfg.resolved_threads()) as pool:
        for r, child in enumerate(seeds):
            if cfg.init == 'explicit':
                init = cfg.initial_centroids
            else:
                init = kmeanspp_init(points, cfg.k, child, space)
            run = _lloyd(points, init, cfg, space, fixed, pool)
            logger.info(f"{space.name} k-means restart {r}: objective={run.objective:.6g} "
                        f"iterations={run.iterations} converged={run.converged}")
            runs.append(run)
            if cfg.init == 'explicit':
                break
    return _best_of(runs)


def semi_supervised_kmeans(data: LabeledDataset, cfg: KMeansConfig, space: MetricSpace) -> ClusteringResult:
    """
    K-Means with labeled points pinned to their class's cluster.

    Seen classes take cluster ids ``0..m-1`` in sorted class order; their
    centroids start at the space centroid of the class's labeled points. The
    remaining ``k - m`` centroids are D²-seeded from the unlabeled points.
    All centroids are updated every iteration.

    Args:
        data (LabeledDataset): Points with labels and split
        cfg (KMeansConfig): Settings (``init='explicit'`` overrides seeding)
        space (MetricSpace): Distance and centroid

    Returns:
        ClusteringResult: Result with ``class_to_cluster`` filled in

    Raises:
        ValidationError: If k is smaller than the number of seen classes or a
            seen class has no labeled points
    """
    points = _prepare(data.points, space, cfg.k)
    seen = data.seen_classes
    m = len(seen)
    if cfg.k < m:
        raise ValidationError(f"k={cfg.k} is smaller than the number of seen classes ({m})")
    class_to_cluster = {int(c): j for j, c in enumerate(seen)}
    fixed = np.full(points.shape[0], -1, dtype=np.int64)
    for c, j in class_to_cluster.items():
        members = data.is_labeled & (data.labels == c)
        if not np.any(members):
            raise ValidationError(f"Seen class {c} has no labeled points")
        fixed[members] = j

    labeled_means = np.array([space.centroid(points[fixed == j]) for j in range(m)])
    unlabeled = points[fixed < 0]
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.resolved_restarts(semi_supervised=True))

    runs = []
    with _worker_pool(cfg.resolved_threads()) as pool:
        for r, child in enumerate(seeds):
            if cfg.init == 'explicit':
                init = cfg.initial_centroids
            else:
                init = kmeanspp_init(unlabeled, cfg.k - m, child, space,
                                     initial=labeled_means if m else None)
            run = _lloyd(points, init, cfg, space, fixed, pool)
            logger.info(f"{space.name} semi-supervised restart {r}: objective={run.objective:.6g} "
                        f"iterations={run.iterations} converged={run.converged}")
            runs.append(run)
            if cfg.init == 'explicit':
                break
    result = _best_of(runs)
    result.class_to_cluster = class_to_cluster
    return result
