"""Random-forest classifier with fully deterministic training.

Implemented from scratch rather than wrapped because reproducibility is a
contract here: per-tree randomness comes from seeds derived off the master
seed by the package-wide splitmix64 scheme, so retraining with the same data,
hyperparameters and seed is bit-identical, regardless of how many threads
fit the trees. Trees use axis-aligned splits chosen by Gini impurity over
midpoint thresholds; leaves keep raw class counts and predict the fraction
of class-1 (feasible) samples.

The growth and prediction loops are numba-compiled; prediction walks all
trees stored as flat concatenated node arrays so batch queries stay cheap
inside optimizer inner loops.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .util import derive_seed, dump_json, load_json

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


@njit(cache=True, nogil=True)
def _fit_tree(x, y, bootstrap, max_depth, min_split, m_features, seed):
    """Grow one tree depth-first; returns trimmed flat node arrays.

    Node conventions: feature -1 marks a leaf; children are indices into the
    same arrays; counts hold the class-0/class-1 sample totals at the node.
    All randomness (bootstrap draws, per-node feature subsets) comes from a
    splitmix64 stream advanced in preorder, so growth is reproducible.
    """
    n = x.shape[0]
    p = x.shape[1]
    state = _U64(seed)

    idx = np.empty(n, np.int64)
    if bootstrap:
        for i in range(n):
            state += _GOLDEN
            idx[i] = int64_mod(_mix64(state), n)
    else:
        for i in range(n):
            idx[i] = i

    max_nodes = 2 * n + 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    count0 = np.zeros(max_nodes, np.int64)
    count1 = np.zeros(max_nodes, np.int64)

    perm = np.empty(p, np.int64)
    scratch = np.empty(n, np.int64)

    stack_lo = np.empty(max_nodes, np.int64)
    stack_hi = np.empty(max_nodes, np.int64)
    stack_depth = np.empty(max_nodes, np.int64)
    stack_parent = np.empty(max_nodes, np.int64)
    stack_side = np.empty(max_nodes, np.int64)   # 0 = left child, 1 = right
    top = 0
    stack_lo[0], stack_hi[0], stack_depth[0] = 0, n, 0
    stack_parent[0], stack_side[0] = -1, 0
    top = 1
    n_nodes = 0

    while top > 0:
        top -= 1
        lo, hi = stack_lo[top], stack_hi[top]
        depth = stack_depth[top]
        parent, side = stack_parent[top], stack_side[top]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if side == 0:
                left[parent] = node
            else:
                right[parent] = node

        n_seg = hi - lo
        ones = 0
        for i in range(lo, hi):
            ones += y[idx[i]]
        count0[node] = n_seg - ones
        count1[node] = ones

        if n_seg < min_split or ones == 0 or ones == n_seg or \
                (max_depth >= 0 and depth >= max_depth):
            continue

        # sample the feature subset (partial Fisher-Yates)
        for j in range(p):
            perm[j] = j
        for j in range(m_features):
            state += _GOLDEN
            r = j + int64_mod(_mix64(state), p - j)
            perm[j], perm[r] = perm[r], perm[j]

        best_score = np.inf
        best_feature = -1
        best_thr = 0.0
        for j in range(m_features):
            f = perm[j]
            vals = np.empty(n_seg)
            for i in range(n_seg):
                vals[i] = x[idx[lo + i], f]
            order = np.argsort(vals, kind="mergesort")
            cum1 = 0
            for k in range(1, n_seg):
                cum1 += y[idx[lo + order[k - 1]]]
                v_lo = vals[order[k - 1]]
                v_hi = vals[order[k]]
                if v_lo >= v_hi:
                    continue
                n_l, n_r = k, n_seg - k
                p1l = cum1 / n_l
                p1r = (ones - cum1) / n_r
                gini_l = 1.0 - p1l * p1l - (1.0 - p1l) * (1.0 - p1l)
                gini_r = 1.0 - p1r * p1r - (1.0 - p1r) * (1.0 - p1r)
                score = (n_l * gini_l + n_r * gini_r) / n_seg
                if score < best_score - 1e-12:
                    best_score = score
                    best_feature = f
                    thr = 0.5 * (v_lo + v_hi)
                    if thr >= v_hi:   # adjacent floats: keep v_lo on the left
                        thr = v_lo
                    best_thr = thr

        if best_feature < 0:
            continue

        feature[node] = best_feature
        threshold[node] = best_thr
        # stable partition of the segment around the threshold
        n_l = 0
        for i in range(lo, hi):
            if x[idx[i], best_feature] <= best_thr:
                scratch[n_l] = idx[i]
                n_l += 1
        n_r = n_l
        for i in range(lo, hi):
            if x[idx[i], best_feature] > best_thr:
                scratch[n_r] = idx[i]
                n_r += 1
        for i in range(n_seg):
            idx[lo + i] = scratch[i]

        # right pushed first so the left child is processed (and numbered) next
        stack_lo[top], stack_hi[top] = lo + n_l, hi
        stack_depth[top], stack_parent[top], stack_side[top] = depth + 1, node, 1
        top += 1
        stack_lo[top], stack_hi[top] = lo, lo + n_l
        stack_depth[top], stack_parent[top], stack_side[top] = depth + 1, node, 0
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(),
            count0[:n_nodes].copy(), count1[:n_nodes].copy())


@njit(cache=True, nogil=True, inline="always")
def int64_mod(value, n):
    return np.int64(value % _U64(n))


@njit(cache=True, nogil=True)
def _leaf_values(xq, feature, threshold, left, right, value, roots, out):
    for t in range(roots.size):
        root = roots[t]
        for i in range(xq.shape[0]):
            node = root
            while feature[node] >= 0:
                if xq[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[t, i] = value[node]


@dataclass(frozen=True)
class ForestHyperparams:
    n_trees: int = 100
    max_depth: int | None = None          # None: grow to purity
    min_samples_split: int = 2
    features_per_split: int | None = None  # None: ceil(sqrt(n_features))
    bootstrap: bool = True

    def resolve_features(self, n_features: int) -> int:
        m = self.features_per_split
        if m is None:
            m = math.ceil(math.sqrt(n_features))
        return max(1, min(m, n_features))


@dataclass
class ForestModel:
    """Flat node storage for all trees; `tree_offsets[t]` is tree t's root."""
    n_features: int
    hyperparams: ForestHyperparams
    training_seed: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    count0: np.ndarray
    count1: np.ndarray
    tree_offsets: np.ndarray
    leaf_value: np.ndarray = field(init=False)

    def __post_init__(self):
        total = self.count0 + self.count1
        value = np.zeros(len(self.feature))
        mask = total > 0
        value[mask] = self.count1[mask] / total[mask]
        self.leaf_value = value

    @property
    def n_trees(self) -> int:
        return len(self.tree_offsets) - 1


def fit_forest(x, y, hp: ForestHyperparams = ForestHyperparams(),
               seed: int = 0, n_threads: int = 1) -> ForestModel:
    """Train a forest on points `x` (n, p) with 0/1 labels `y`."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.uint8)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("x must be (n_samples, n_features) matched with y")
    if len(x) < 2:
        raise ValueError("need at least two samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain NaN or infinity")
    classes = np.unique(y)
    if not np.all(np.isin(classes, [0, 1])):
        raise ValueError("labels must be 0 or 1")
    if len(classes) < 2:
        raise ValueError(
            "training data contains a single class; balance the samples first")
    if hp.n_trees < 1:
        raise ValueError("need at least one tree")

    m = hp.resolve_features(x.shape[1])
    depth = -1 if hp.max_depth is None else hp.max_depth

    def grow(t: int):
        return _fit_tree(x, y, hp.bootstrap, depth, hp.min_samples_split,
                         m, _U64(derive_seed(seed, t)))

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            trees = list(pool.map(grow, range(hp.n_trees)))
    else:
        trees = [grow(t) for t in range(hp.n_trees)]

    offsets = np.zeros(hp.n_trees + 1, np.int64)
    for t, tree in enumerate(trees):
        offsets[t + 1] = offsets[t] + len(tree[0])
    total = offsets[-1]
    feature = np.empty(total, np.int64)
    threshold = np.empty(total)
    left = np.empty(total, np.int64)
    right = np.empty(total, np.int64)
    count0 = np.empty(total, np.int64)
    count1 = np.empty(total, np.int64)
    for t, (f, thr, le, ri, c0, c1) in enumerate(trees):
        sl = slice(offsets[t], offsets[t + 1])
        feature[sl] = f
        threshold[sl] = thr
        inner = f >= 0
        le, ri = le.copy(), ri.copy()
        le[inner] += offsets[t]
        ri[inner] += offsets[t]
        left[sl] = le
        right[sl] = ri
        count0[sl] = c0
        count1[sl] = c1
    return ForestModel(x.shape[1], hp, seed, feature, threshold,
                       left, right, count0, count1, offsets)


def predict_proba(model: ForestModel, x) -> np.ndarray:
    """Mean over trees of the leaf feasible-fraction, one value per row."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x.reshape(1, -1)
    if x.shape[1] != model.n_features:
        raise ValueError(
            f"model expects {model.n_features} features, got {x.shape[1]}")
    per_tree = np.empty((model.n_trees, len(x)))
    _leaf_values(x, model.feature, model.threshold, model.left, model.right,
                 model.leaf_value, model.tree_offsets[:-1], per_tree)
    proba = per_tree.sum(axis=0) / model.n_trees
    return proba[0] if single else proba


def forest_to_json(model: ForestModel, path) -> None:
    trees = []
    for t in range(model.n_trees):
        lo, hi = model.tree_offsets[t], model.tree_offsets[t + 1]
        nodes = []
        for i in range(lo, hi):
            inner = model.feature[i] >= 0
            nodes.append({
                "feature": int(model.feature[i]),
                "threshold": float(model.threshold[i]),
                "left": int(model.left[i] - lo) if inner else -1,
                "right": int(model.right[i] - lo) if inner else -1,
                "n0": int(model.count0[i]),
                "n1": int(model.count1[i]),
            })
        trees.append(nodes)
    hp = model.hyperparams
    dump_json({
        "n_features": model.n_features,
        "training_seed": model.training_seed,
        "hyperparams": {
            "n_trees": hp.n_trees,
            "max_depth": hp.max_depth,
            "min_samples_split": hp.min_samples_split,
            "features_per_split": hp.features_per_split,
            "bootstrap": hp.bootstrap,
        },
        "trees": trees,
    }, path)


def forest_from_json(path) -> ForestModel:
    doc = load_json(path)
    try:
        hp_doc = doc["hyperparams"]
        hp = ForestHyperparams(
            n_trees=int(hp_doc["n_trees"]),
            max_depth=hp_doc["max_depth"],
            min_samples_split=int(hp_doc["min_samples_split"]),
            features_per_split=hp_doc["features_per_split"],
            bootstrap=bool(hp_doc["bootstrap"]),
        )
        trees = doc["trees"]
        offsets = np.zeros(len(trees) + 1, np.int64)
        for t, nodes in enumerate(trees):
            offsets[t + 1] = offsets[t] + len(nodes)
        total = offsets[-1]
        feature = np.empty(total, np.int64)
        threshold = np.empty(total)
        left = np.full(total, -1, np.int64)
        right = np.full(total, -1, np.int64)
        count0 = np.empty(total, np.int64)
        count1 = np.empty(total, np.int64)
        for t, nodes in enumerate(trees):
            base = offsets[t]
            for i, node in enumerate(nodes):
                feature[base + i] = node["feature"]
                threshold[base + i] = node["threshold"]
                if node["feature"] >= 0:
                    left[base + i] = node["left"] + base
                    right[base + i] = node["right"] + base
                count0[base + i] = node["n0"]
                count1[base + i] = node["n1"]
        model = ForestModel(int(doc["n_features"]), hp, int(doc["training_seed"]),
                            feature, threshold, left, right, count0, count1, offsets)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad forest document: {exc}") from exc
    if hp.n_trees != len(trees):
        raise ValueError("tree count does not match hyperparameters")
    return model
