"""CART regression trees and a Newton-boosted tree ensemble.

Both operate on raw feature values: a split only depends on the order of a
column's values, so any strictly increasing transform of a feature leaves
the fitted partition unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LEAF = -1
_TIE_RTOL = 1e-10


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int | None = None
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    max_features: str | int | None = None  # None/"all", "sqrt" or an explicit count
    seed: int = 0

    def __post_init__(self) -> None:
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if self.max_features not in (None, "all", "sqrt") and not (
            isinstance(self.max_features, int) and self.max_features >= 1
        ):
            raise ValueError(f"invalid max_features {self.max_features!r}")

    def n_candidates(self, d: int) -> int:
        if self.max_features in (None, "all"):
            return d
        if self.max_features == "sqrt":
            return max(1, math.ceil(math.sqrt(d)))
        return min(d, int(self.max_features))


@dataclass(frozen=True)
class RegressionTree:
    """Array-encoded binary tree.

    Node ``k`` is internal when ``feature[k] >= 0``; rows with
    ``x[feature] <= threshold`` go to ``left[k]``, others to ``right[k]``.
    Leaves carry ``value[k]``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    depth: int
    n_features: int

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def is_leaf(self, k: int) -> bool:
        return bool(self.feature[k] == LEAF)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"tree expects {self.n_features} features, got {X.shape[1]}")
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while active.any():
            r = rows[active]
            k = node[r]
            go_left = X[r, self.feature[k]] <= self.threshold[k]
            node[r] = np.where(go_left, self.left[k], self.right[k])
            active = self.feature[node] != LEAF
        return node

    def predict(self, X) -> np.ndarray:
        return predict_tree(self, X)

    def to_dict(self) -> dict:
        """Nested representation: internal nodes hold ``feature``/``threshold``/``left``/``right``."""

        def node(k: int) -> dict:
            if self.feature[k] == LEAF:
                return {"value": float(self.value[k]), "n_samples": int(self.n_samples[k])}
            return {
                "feature": int(self.feature[k]),
                "threshold": float(self.threshold[k]),
                "n_samples": int(self.n_samples[k]),
                "left": node(int(self.left[k])),
                "right": node(int(self.right[k])),
            }

        return {"n_features": self.n_features, "depth": self.depth, "root": node(0)}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        b = _NodeBuffer()

        def visit(nd: dict) -> int:
            k = b.add(nd["n_samples"])
            if "value" in nd:
                b.value[k] = nd["value"]
                return k
            b.feature[k] = nd["feature"]
            b.threshold[k] = nd["threshold"]
            b.left[k] = visit(nd["left"])
            b.right[k] = visit(nd["right"])
            return k

        visit(d["root"])
        return b.freeze(int(d["depth"]), int(d["n_features"]))

    def to_dot(self, feature_names: list[str] | tuple[str, ...] | None = None, precision: int = 4) -> str:
        """Graphviz ``digraph`` of the tree."""
        names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(self.n_features)]
        lines = ["digraph tree {", '  node [shape=box, fontname="helvetica"];']
        for k in range(self.n_nodes):
            n = int(self.n_samples[k])
            if self.feature[k] == LEAF:
                lines.append(f'  n{k} [label="value = {self.value[k]:.{precision}g}\\nsamples = {n}"];')
            else:
                f = names[int(self.feature[k])]
                lines.append(f'  n{k} [label="{f} <= {self.threshold[k]:.{precision}g}\\nsamples = {n}"];')
                lines.append(f'  n{k} -> n{int(self.left[k])} [label="yes"];')
                lines.append(f'  n{k} -> n{int(self.right[k])} [label="no"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


class _NodeBuffer:
    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.n_samples: list[int] = []

    def add(self, n: int) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(0.0)
        self.n_samples.append(n)
        return len(self.feature) - 1

    def freeze(self, depth: int, n_features: int) -> RegressionTree:
        def arr(v, dt):
            a = np.asarray(v, dtype=dt)
            a.setflags(write=False)
            return a

        return RegressionTree(
            arr(self.feature, np.int64),
            arr(self.threshold, np.float64),
            arr(self.left, np.int64),
            arr(self.right, np.int64),
            arr(self.value, np.float64),
            arr(self.n_samples, np.int64),
            depth,
            n_features,
        )


def _presort(X: np.ndarray) -> np.ndarray:
    """Row indices sorted by each column, shape ``(n_features, n)``."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def _best_split(
    X: np.ndarray,
    g: np.ndarray,
    order: np.ndarray,
    feats: np.ndarray,
    min_leaf: int,
    lam: float,
    shift: float = 0.0,
) -> tuple[float, int, float, int] | None:
    """Best (gain, feature, threshold, n_left) among ``feats`` or ``None``.

    ``order[f]`` lists the node's rows sorted by feature ``f``. Gain is the
    squared-error reduction ``S_L^2/(n_L+lam) + S_R^2/(n_R+lam) - S^2/(n+lam)``
    where ``S`` are sums of ``g - shift``. Ties go to the lowest feature index, then
    the lowest threshold; gains within ``_TIE_RTOL`` of the node's sum of
    squares count as tied.
    """
    n = order.shape[1]
    if n < 2 * min_leaf:
        return None
    feats = np.sort(feats)
    idx = order[feats]  # (k, n)
    xs = X[idx, feats[:, None]]
    gs = g[idx] - shift if shift else g[idx]
    csum = np.cumsum(gs, axis=1)[:, :-1]  # left sums for n_left = 1..n-1
    total = csum[0, -1] + gs[0, -1]
    n_left = np.arange(1, n, dtype=np.float64)
    gain = csum**2 / (n_left + lam) + (total - csum) ** 2 / (n - n_left + lam) - total**2 / (n + lam)
    valid = xs[:, 1:] > xs[:, :-1]
    if min_leaf > 1:
        valid[:, : min_leaf - 1] = False
        valid[:, n - min_leaf :] = False
    gain = np.where(valid, gain, -np.inf)
    best = float(gain.max())
    if not best > 0.0:
        return None
    # gains equal up to rounding count as ties, so that shifted targets
    # (boosting residuals) pick the same split as the raw targets would
    slack = _TIE_RTOL * float(gs[0] @ gs[0])
    flat = int(np.argmax(gain >= best - slack))
    row, pos = divmod(flat, n - 1)
    best = float(gain[row, pos])
    f = int(feats[row])
    threshold = 0.5 * (xs[row, pos] + xs[row, pos + 1])
    if not threshold < xs[row, pos + 1]:
        # adjacent floats: the midpoint rounds up onto the right value
        threshold = float(xs[row, pos])
    return best, f, float(threshold), pos + 1


def _grow(
    X: np.ndarray,
    g: np.ndarray,
    cfg: TreeConfig,
    lam: float,
    order: np.ndarray | None = None,
) -> RegressionTree:
    n, d = X.shape
    if order is None:
        order = _presort(X)
    k_feats = cfg.n_candidates(d)
    center = lam == 0.0

    buf = _NodeBuffer()
    max_depth_seen = 0
    stack = [(buf.add(n), order, 0)]
    while stack:
        k, node_order, depth = stack.pop()
        rows = node_order[0]
        gk = g[rows]
        buf.value[k] = float(gk.sum() / (rows.shape[0] + lam))
        max_depth_seen = max(max_depth_seen, depth)
        m = rows.shape[0]
        if (
            m < cfg.min_samples_split
            or m < 2 * cfg.min_samples_leaf
            or (cfg.max_depth is not None and depth >= cfg.max_depth)
            or gk.max() == gk.min()
        ):
            continue
        # variance reduction is shift invariant; centering keeps the sums small
        shift = float(gk.mean()) if center else 0.0
        if k_feats < d:
            # keyed by the node's row set (lowest row, size), not by visiting
            # order, so mirrored splits draw the same candidate features
            perm = np.random.default_rng([cfg.seed, int(rows.min()), m]).permutation(d)
            split = _best_split(X, g, node_order, perm[:k_feats], cfg.min_samples_leaf, lam, shift)
            if split is None:
                split = _best_split(X, g, node_order, perm[k_feats:], cfg.min_samples_leaf, lam, shift)
        else:
            split = _best_split(X, g, node_order, np.arange(d), cfg.min_samples_leaf, lam, shift)
        if split is None:
            continue
        _, f, threshold, n_left = split
        goes_left = np.zeros(n, dtype=bool)
        goes_left[rows[X[rows, f] <= threshold]] = True
        mask = goes_left[node_order]
        left_order = node_order[mask].reshape(d, n_left)
        right_order = node_order[~mask].reshape(d, m - n_left)
        buf.feature[k] = f
        buf.threshold[k] = threshold
        lk = buf.add(n_left)
        rk = buf.add(m - n_left)
        buf.left[k] = lk
        buf.right[k] = rk
        stack.append((rk, right_order, depth + 1))
        stack.append((lk, left_order, depth + 1))
    return buf.freeze(max_depth_seen, d)


def fit_cart(X, y, cfg: TreeConfig = TreeConfig()) -> RegressionTree:
    """Greedy variance-reduction regression tree; leaves hold target means."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("fit_cart needs a non-empty 2-D feature matrix")
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y have different lengths")
    return _grow(X, y, cfg, lam=0.0)


def predict_tree(t: RegressionTree, X) -> np.ndarray:
    return t.value[t.apply(X)]


# ---------------------------------------------------------------------------
# boosting


@dataclass(frozen=True)
class GbtConfig:
    n_estimators: int = 300
    learning_rate: float = 0.1
    max_depth: int | None = 8
    reg_lambda: float = 1.0
    min_samples_leaf: int = 1
    base_score: float | None = None  # None -> mean of training targets

    def __post_init__(self) -> None:
        if self.n_estimators < 0:
            raise ValueError("n_estimators must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if not self.reg_lambda >= 0:
            raise ValueError("reg_lambda must be >= 0")


@dataclass(frozen=True)
class GbtModel:
    trees: tuple[RegressionTree, ...]
    learning_rate: float
    base_score: float
    train_mse: tuple[float, ...] = field(default=())

    def predict(self, X) -> np.ndarray:
        return predict_gbt(self, X)

    def staged_predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            out = out + self.learning_rate * predict_tree(t, X)
            yield out

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbtModel":
        return cls(
            tuple(RegressionTree.from_dict(t) for t in d["trees"]),
            float(d["learning_rate"]),
            float(d["base_score"]),
        )


def fit_gbt(X, y, cfg: GbtConfig = GbtConfig()) -> GbtModel:
    """Squared-error Newton boosting.

    With unit hessians each round fits the current residuals ``r`` with a
    tree whose leaf weights are ``sum(r) / (count + reg_lambda)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("fit_gbt needs a non-empty 2-D feature matrix")
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y have different lengths")
    base = float(y.mean()) if cfg.base_score is None else float(cfg.base_score)
    tree_cfg = TreeConfig(max_depth=cfg.max_depth, min_samples_leaf=cfg.min_samples_leaf)
    order = _presort(X)
    pred = np.full(y.shape[0], base)
    trees = []
    history = []
    for _ in range(cfg.n_estimators):
        resid = y - pred
        tree = _grow(X, resid, tree_cfg, cfg.reg_lambda, order)
        pred = pred + cfg.learning_rate * predict_tree(tree, X)
        trees.append(tree)
        history.append(float(np.mean((y - pred) ** 2)))
    return GbtModel(tuple(trees), cfg.learning_rate, base, tuple(history))


def predict_gbt(m: GbtModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    out = np.full(X.shape[0], m.base_score)
    for t in m.trees:
        out += m.learning_rate * predict_tree(t, X)
    return out
