"""Distance-weighted k-nearest-neighbour regression.

Two exact search backends share one distance routine so that they agree
bit for bit: a brute-force scan and a ball tree that splits each node on
its widest dimension at the median.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KnnConfig:
    n_neighbors: int = 4
    weights: str = "distance"
    algorithm: str = "brute"
    leaf_size: int = 32

    def __post_init__(self) -> None:
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")
        if self.leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")
        if self.weights not in ("distance", "uniform"):
            raise ValueError(f"unsupported weights {self.weights!r}")
        if self.algorithm not in ("brute", "ball_tree"):
            raise ValueError(f"unsupported algorithm {self.algorithm!r}")


def _distances(P: np.ndarray, x: np.ndarray) -> np.ndarray:
    diff = P - x
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _select(dist: np.ndarray, ids: np.ndarray, k: int) -> list[tuple[int, float]]:
    """k smallest by (distance, index)."""
    if dist.shape[0] > k:
        kth = np.partition(dist, k - 1)[k - 1]
        keep = dist <= kth
        dist, ids = dist[keep], ids[keep]
    order = np.lexsort((ids, dist))[:k]
    return [(int(ids[i]), float(dist[i])) for i in order]


class BruteIndex:
    def __init__(self, X) -> None:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("index needs a non-empty 2-D matrix")
        self.data = X
        self._ids = np.arange(X.shape[0])

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def query(self, x, k: int) -> list[tuple[int, float]]:
        x = np.asarray(x, dtype=np.float64)
        if not 1 <= k <= self.n:
            raise ValueError(f"k={k} outside [1, {self.n}]")
        return _select(_distances(self.data, x), self._ids, k)


@dataclass(frozen=True)
class BallNode:
    start: int
    end: int
    centroid: np.ndarray
    radius: float
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.left < 0


class BallTree:
    """Nested bounding balls over the rows of ``data``.

    ``perm[node.start:node.end]`` are the training indices inside ``node``;
    leaves hold at most ``leaf_size`` points.
    """

    def __init__(self, X, leaf_size: int = 32) -> None:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("ball tree needs a non-empty 2-D matrix")
        if leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")
        self.data = X
        self.leaf_size = leaf_size
        self.perm = np.arange(X.shape[0])
        self.nodes: list[BallNode] = []
        self._build(0, X.shape[0])

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def _build(self, start: int, end: int) -> int:
        idx = self.perm[start:end]
        pts = self.data[idx]
        centroid = pts.mean(axis=0)
        radius = float(_distances(pts, centroid).max())
        k = len(self.nodes)
        self.nodes.append(BallNode(start, end, centroid, radius))
        if end - start <= self.leaf_size:
            return k
        spread = pts.max(axis=0) - pts.min(axis=0)
        dim = int(np.argmax(spread))
        if spread[dim] == 0.0:
            # all points coincide; an oversized leaf is the only option
            return k
        order = np.argsort(pts[:, dim], kind="stable")
        self.perm[start:end] = idx[order]
        mid = start + (end - start) // 2
        left = self._build(start, mid)
        right = self._build(mid, end)
        self.nodes[k] = BallNode(start, end, centroid, radius, left, right)
        return k

    def leaves(self) -> list[BallNode]:
        return [nd for nd in self.nodes if nd.is_leaf]

    def query(self, x, k: int) -> list[tuple[int, float]]:
        x = np.asarray(x, dtype=np.float64)
        if not 1 <= k <= self.n:
            raise ValueError(f"k={k} outside [1, {self.n}]")
        # max-heap of the current best k as (-dist, -index)
        best: list[tuple[float, int]] = []
        # best-first traversal ordered by the lower bound on distance
        frontier = [(0.0, 0)]
        while frontier:
            bound, k_node = heapq.heappop(frontier)
            if len(best) == k and bound > -best[0][0] * (1 + 1e-12) + 1e-12:
                break
            node = self.nodes[k_node]
            if node.is_leaf:
                ids = self.perm[node.start : node.end]
                dist = _distances(self.data[ids], x)
                for i, dv in zip(ids.tolist(), dist.tolist()):
                    item = (-dv, -i)
                    if len(best) < k:
                        heapq.heappush(best, item)
                    elif item > best[0]:
                        heapq.heapreplace(best, item)
                continue
            for child in (node.left, node.right):
                c = self.nodes[child]
                lb = max(0.0, math.sqrt(float((x - c.centroid) @ (x - c.centroid))) - c.radius)
                heapq.heappush(frontier, (lb, child))
        return sorted(((-i, -d) for d, i in best), key=lambda t: (t[1], t[0]))


def build_balltree(X, leaf_size: int = 32) -> BallTree:
    return BallTree(X, leaf_size)


def knn_query(index: BruteIndex | BallTree, x, k: int) -> list[tuple[int, float]]:
    """Exact ``k`` nearest training rows as ``(index, distance)``, nearest first.

    Equal distances are ordered by training index.
    """
    return index.query(x, k)


def weighted_average(neighbors: list[tuple[int, float]], y: np.ndarray, weights: str = "distance") -> float:
    ids = np.array([i for i, _ in neighbors])
    dist = np.array([d for _, d in neighbors])
    if weights == "uniform":
        return float(y[ids].mean())
    exact = dist == 0.0
    if exact.any():
        return float(y[ids[exact]].mean())
    w = 1.0 / dist
    return float((w * y[ids]).sum() / w.sum())


@dataclass
class KnnModel:
    """Training data plus a search index; prediction is lazy."""

    X: np.ndarray
    y: np.ndarray
    config: KnnConfig

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y have different lengths")
        if self.config.n_neighbors > self.X.shape[0]:
            raise ValueError(f"n_neighbors={self.config.n_neighbors} exceeds {self.X.shape[0]} training rows")
        if self.config.algorithm == "ball_tree":
            self.index: BruteIndex | BallTree = BallTree(self.X, self.config.leaf_size)
        else:
            self.index = BruteIndex(self.X)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.X.shape[1]:
            raise ValueError("feature count does not match the training data")
        if self.config.algorithm == "brute":
            return self._predict_brute_batched(X)
        k = self.config.n_neighbors
        return np.array([weighted_average(self.index.query(x, k), self.y, self.config.weights) for x in X])

    def _predict_brute_batched(self, X: np.ndarray) -> np.ndarray:
        k = self.config.n_neighbors
        ids = np.arange(self.X.shape[0])
        out = np.empty(X.shape[0])
        for r, x in enumerate(X):
            out[r] = weighted_average(_select(_distances(self.X, x), ids, k), self.y, self.config.weights)
        return out

    def to_dict(self) -> dict:
        return {
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "config": {
                "n_neighbors": self.config.n_neighbors,
                "weights": self.config.weights,
                "algorithm": self.config.algorithm,
                "leaf_size": self.config.leaf_size,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KnnModel":
        return cls(np.asarray(d["X"]), np.asarray(d["y"]), KnnConfig(**d["config"]))


def fit_knn(X, y, cfg: KnnConfig = KnnConfig()) -> KnnModel:
    return KnnModel(X, y, cfg)


def predict_knn(X_train, y_train, cfg: KnnConfig, x) -> float:
    """Inverse-distance weighted mean of the ``k`` nearest targets for a single query.

    A query that coincides with training rows returns the mean target of the
    zero-distance neighbours.
    """
    model = KnnModel(X_train, y_train, cfg)
    return float(model.predict(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])
