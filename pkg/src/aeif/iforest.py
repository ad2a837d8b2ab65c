"""Isolation Forest written from scratch.

Trees are stored as flat preorder arrays (``feature == -1`` marks an external
node) so scoring can walk every query point through a tree in lock-step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

EULER_GAMMA = 0.5772156649


def harmonic(m: int) -> float:
    """Harmonic-number approximation ``ln(m) + gamma``, applied even at m = 1."""
    if m < 1:
        raise ValueError(f"harmonic number needs m >= 1, got {m}")
    return math.log(m) + EULER_GAMMA


def c(n: int) -> float:
    """Average unsuccessful-search path length in a BST of ``n`` points; 0 for n <= 1."""
    if n <= 1:
        return 0.0
    return 2.0 * harmonic(n - 1) - 2.0 * (n - 1) / n


def _c_array(sizes: np.ndarray) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.float64)
    out = np.zeros_like(sizes)
    big = sizes > 1
    m = sizes[big]
    out[big] = 2.0 * (np.log(m - 1) + EULER_GAMMA) - 2.0 * (m - 1) / m
    return out


@dataclass(frozen=True)
class IsolationTree:
    """Preorder node arrays; ``left``/``right`` are -1 on external nodes."""

    feature: np.ndarray
    threshold: np.ndarray
    size: np.ndarray
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray
    height_limit: int
    n_features: int

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "size": self.size.tolist(),
            "height_limit": self.height_limit,
            "n_features": self.n_features,
        }

    @classmethod
    def from_preorder(cls, feature, threshold, size, height_limit: int, n_features: int) -> IsolationTree:
        feature = np.asarray(feature, dtype=np.int64)
        n = feature.size
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        depth = np.zeros(n, dtype=np.int64)
        # Rebuild child links: an internal node's left child follows it directly,
        # its right child follows the end of the left subtree.
        stack: list[int] = []
        for i in range(n):
            if stack:
                parent = stack[-1]
                depth[i] = depth[parent] + 1
                if left[parent] == -1:
                    left[parent] = i
                else:
                    right[parent] = i
                    stack.pop()
            if feature[i] >= 0:
                stack.append(i)
        if stack:
            raise ValueError("malformed preorder tree")
        return cls(
            feature=feature,
            threshold=np.asarray(threshold, dtype=np.float64),
            size=np.asarray(size, dtype=np.int64),
            left=left,
            right=right,
            depth=depth,
            height_limit=int(height_limit),
            n_features=int(n_features),
        )

    @classmethod
    def from_dict(cls, d: dict) -> IsolationTree:
        return cls.from_preorder(d["feature"], d["threshold"], d["size"], d["height_limit"], d["n_features"])


def _draw_split(lo: float, hi: float, rng: np.random.Generator) -> float:
    # Open interval (lo, hi): uniform() is half-open and may round onto hi.
    while True:
        v = rng.uniform(lo, hi)
        if lo < v < hi:
            return float(v)


def build_tree(points: np.ndarray, height_limit: int, rng: np.random.Generator) -> IsolationTree:
    """Grow one isolation tree on ``points`` of shape ``(n, d)``."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise ValueError("cannot build a tree on zero points")
    feature: list[int] = []
    threshold: list[float] = []
    size: list[int] = []

    def grow(idx: np.ndarray, depth: int) -> None:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        size.append(int(idx.size))
        if depth >= height_limit or idx.size <= 1:
            return
        sub = x[idx]
        lo = sub.min(axis=0)
        hi = sub.max(axis=0)
        usable = np.flatnonzero(hi > lo)
        if usable.size == 0:
            return
        q = int(usable[rng.integers(usable.size)])
        p = _draw_split(lo[q], hi[q], rng)
        goes_left = sub[:, q] < p
        feature[node] = q
        threshold[node] = p
        grow(idx[goes_left], depth + 1)
        grow(idx[~goes_left], depth + 1)

    grow(np.arange(x.shape[0]), 0)
    return IsolationTree.from_preorder(feature, threshold, size, height_limit, x.shape[1])


def path_length(tree: IsolationTree, x: np.ndarray) -> np.ndarray | float:
    """Depth of the external node reached by each point plus ``c(size)`` there."""
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != tree.n_features:
        raise ValueError(f"expected {tree.n_features} features, got {pts.shape[1]}")
    # External nodes loop back to themselves, so a fixed number of steps settles every point.
    idx = np.arange(tree.n_nodes)
    leaf = tree.feature < 0
    feat = np.where(leaf, 0, tree.feature)
    left = np.where(leaf, idx, tree.left)
    right = np.where(leaf, idx, tree.right)
    rows = np.arange(pts.shape[0])
    node = np.zeros(pts.shape[0], dtype=np.int64)
    for _ in range(int(tree.depth.max())):
        node = np.where(pts[rows, feat[node]] < tree.threshold[node], left[node], right[node])
    h = tree.depth[node] + _c_array(tree.size[node])
    return float(h[0]) if single else h


@dataclass(frozen=True)
class IsolationForestModel:
    trees: list[IsolationTree] = field(repr=False)
    psi: int
    tau: float
    score_threshold: float
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "psi": self.psi,
            "tau": self.tau,
            "score_threshold": self.score_threshold,
            "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> IsolationForestModel:
        return cls(
            trees=[IsolationTree.from_dict(t) for t in d["trees"]],
            psi=int(d["psi"]),
            tau=float(d["tau"]),
            score_threshold=float(d["score_threshold"]),
            seed=int(d["seed"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, s: str) -> IsolationForestModel:
        return cls.from_dict(json.loads(s))


def mean_path_length(model: IsolationForestModel, x: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if model.n_trees == 0:
        raise ValueError("forest has no trees")
    total = np.zeros(pts.shape[0])
    for tree in model.trees:
        total += path_length(tree, pts)
    return total / model.n_trees


def score_from_path(mean_h, psi: int):
    """``2 ** (-E[h] / c(psi))``."""
    return np.exp2(-np.asarray(mean_h, dtype=np.float64) / c(psi))


def score(model: IsolationForestModel | None, x: np.ndarray) -> np.ndarray | float:
    """Anomaly score in (0, 1) for each row of a 2-D array, or for a single point."""
    if model is None or not model.trees:
        raise ValueError("isolation forest is not fitted")
    pts = np.asarray(x, dtype=np.float64)
    if pts.ndim <= 1:
        return float(score_from_path(mean_path_length(model, pts.reshape(1, -1)), model.psi)[0])
    return score_from_path(mean_path_length(model, pts), model.psi)


def calibrate_threshold(train_scores: np.ndarray, tau: float) -> float:
    """Smallest training score with at most ``floor(tau * N)`` scores strictly above it."""
    s = np.sort(np.asarray(train_scores, dtype=np.float64))
    n = s.size
    m = int(math.floor(tau * n + 1e-9))
    return float(s[n - 1 - m])


def fit(
    points: np.ndarray,
    n_trees: int = 100,
    psi: int = 256,
    tau: float = 0.1,
    seed: int = 0,
) -> IsolationForestModel:
    """Grow ``n_trees`` trees on subsamples of size ``psi`` and calibrate the threshold.

    Tree ``i`` draws from its own stream seeded by ``(seed, i)``.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    if not 0 < tau <= 0.5:
        raise ValueError(f"tau must lie in (0, 0.5], got {tau}")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    psi = min(int(psi), n)
    if psi < 2:
        raise ValueError("psi must be >= 2")
    height_limit = math.ceil(math.log2(psi))
    trees = []
    for i in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        sample = rng.choice(n, size=psi, replace=False)
        trees.append(build_tree(x[sample], height_limit, rng))
    model = IsolationForestModel(trees=trees, psi=psi, tau=tau, score_threshold=0.5, seed=seed)
    threshold = calibrate_threshold(score(model, x), tau)
    return IsolationForestModel(trees=trees, psi=psi, tau=tau, score_threshold=threshold, seed=seed)


def decision_function(model: IsolationForestModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`decide`: ``(scores, f_values, is_anomaly)``."""
    s = score(model, np.atleast_2d(x))
    f = model.score_threshold - s
    return s, f, f < 0


def decide(model: IsolationForestModel, x) -> tuple[float, float, bool]:
    """``(score, f_value, is_anomaly)`` for one point; ties (f == 0) are normal."""
    s = score(model, np.asarray(x, dtype=np.float64).ravel())
    f = model.score_threshold - s
    return s, f, bool(f < 0)
