"""CART trees stored as flat node arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

CRITERIA = ("gini", "variance")
LEAF = -1


@dataclass
class Tree:
    """Flat binary tree.

    ``feature[i] == -1`` marks a leaf. Internal nodes send
    ``x[feature] <= threshold`` to ``left`` and the rest to ``right``.
    ``value`` holds class counts ``[n0, n1]`` for classification trees and
    ``[mean]`` for regression trees.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    criterion: str
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        """Leaf class-1 fraction (classification) or leaf mean (regression)."""
        leaves = self.apply(X)
        if self.criterion == "gini":
            counts = self.value[leaves]
            return counts[:, 1] / counts.sum(axis=1)
        return self.value[leaves, 0]

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            i, d = stack.pop()
            best = max(best, d)
            if self.feature[i] != LEAF:
                stack.append((self.left[i], d + 1))
                stack.append((self.right[i], d + 1))
        return best

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "n_features": int(self.n_features),
            "feature": [int(v) for v in self.feature],
            "threshold": [float(v) for v in self.threshold],
            "left": [int(v) for v in self.left],
            "right": [int(v) for v in self.right],
            "value": [[float(x) for x in row] for row in self.value],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Tree":
        tree = cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=float),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            value=np.asarray(data["value"], dtype=float).reshape(len(data["feature"]), -1),
            criterion=data["criterion"],
            n_features=int(data["n_features"]),
        )
        tree.validate()
        return tree

    def validate(self) -> None:
        n = self.n_nodes
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if not (len(self.threshold) == len(self.left) == len(self.right) == len(self.value) == n) or n == 0:
            raise ValueError("tree arrays have inconsistent lengths")
        internal = self.feature != LEAF
        if np.any(self.feature[internal] >= self.n_features) or np.any(self.feature < LEAF):
            raise ValueError("feature index out of range")
        kids = np.concatenate([self.left[internal], self.right[internal]])
        if np.any(kids <= 0) or np.any(kids >= n):
            raise ValueError("internal node with missing or invalid child")
        if np.any(self.left[~internal] != LEAF) or np.any(self.right[~internal] != LEAF):
            raise ValueError("leaf node with children")


def gini(y) -> float:
    y = np.asarray(y)
    if y.size == 0:
        return 0.0
    p = np.mean(y)
    return float(1.0 - p * p - (1.0 - p) * (1.0 - p))


def _node_impurity(y: np.ndarray, criterion: str) -> float:
    if criterion == "gini":
        return gini(y)
    return float(np.mean((y - y.mean()) ** 2))


def _scan_feature(x, y, criterion, min_leaf):
    """Best (impurity, threshold) for one feature, or None."""
    n = len(y)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    if criterion == "gini":
        c1 = np.cumsum(ys)[:-1]
        r1 = ys.sum() - c1
        left = n_left - (c1 * c1 + (n_left - c1) ** 2) / n_left
        right = n_right - (r1 * r1 + (n_right - r1) ** 2) / n_right
    else:
        centred = ys - ys.mean()
        s = np.cumsum(centred)[:-1]
        s2 = np.cumsum(centred * centred)[:-1]
        tot, tot2 = centred.sum(), (centred * centred).sum()
        left = s2 - s * s / n_left
        right = (tot2 - s2) - (tot - s) ** 2 / n_right
    weighted = (left + right) / n
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        valid &= (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    weighted = np.where(valid, weighted, np.inf)
    i = int(np.argmin(weighted))
    thr = 0.5 * (xs[i] + xs[i + 1])
    if thr >= xs[i + 1]:
        # midpoint rounded up onto the right value
        thr = xs[i]
    return float(weighted[i]), float(thr)


def _best_split_reference(X, y, features, criterion, min_leaf, parent=None):
    """Pure-numpy split search; kept as the oracle for :func:`_scan_node`.

    With ``parent`` given, only cuts that beat it are considered.
    """
    best = None
    tol = 0.0 if parent is None else 1e-12 * max(1.0, parent)
    for f in sorted(features):
        found = _scan_feature(X[:, f], y, criterion, min_leaf)
        if found is None:
            continue
        imp, thr = found
        if parent is not None and not imp < parent - tol:
            continue
        if best is None or imp < best[0]:
            best = (imp, int(f), thr)
    return best


@njit(cache=True)
def _scan_node(X, y, order, start, end, features, is_gini, min_leaf, mean):
    """Lowest weighted child impurity over ``features`` (ascending order).

    ``order[f, start:end]`` lists the node's rows sorted by feature ``f``.
    Returns ``(impurity, feature, threshold)``; feature is -1 when no
    feature has a valid cut.
    """
    n = end - start
    best_imp = np.inf
    best_f = -1
    best_thr = 0.0
    for f in features:
        tot = 0.0
        tot2 = 0.0
        for i in range(start, end):
            v = y[order[f, i]] - mean
            tot += v
            tot2 += v * v
        s = 0.0
        s2 = 0.0
        for i in range(start, end - 1):
            v = y[order[f, i]] - mean
            s += v
            s2 += v * v
            nl = i - start + 1.0
            nr = n - nl
            xa = X[order[f, i], f]
            xb = X[order[f, i + 1], f]
            if not xb > xa or nl < min_leaf or nr < min_leaf:
                continue
            if is_gini:
                r1 = tot - s
                left = nl - (s * s + (nl - s) * (nl - s)) / nl
                right = nr - (r1 * r1 + (nr - r1) * (nr - r1)) / nr
            else:
                left = s2 - s * s / nl
                right = (tot2 - s2) - (tot - s) * (tot - s) / nr
            w = (left + right) / n
            if w < best_imp:
                best_imp = w
                best_f = f
                thr = 0.5 * (xa + xb)
                if thr >= xb:
                    thr = xa
                best_thr = thr
    return best_imp, best_f, best_thr


@njit(cache=True)
def _build(X, y, is_gini, max_depth, min_leaf, m, keys, order):
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros((cap, 2 if is_gini else 1))
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int64)
    stack = np.empty((cap, 4), dtype=np.int64)  # node, start, end, depth
    all_features = np.arange(d)

    n_nodes = 1
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        cnt = end - start
        total = 0.0
        lo = np.inf
        hi = -np.inf
        for i in range(start, end):
            v = y[order[0, i]]
            total += v
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        mean = total / cnt
        if is_gini:
            value[node, 0] = cnt - total
            value[node, 1] = total
        else:
            value[node, 0] = mean
        if cnt < 2 * min_leaf or lo == hi:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue
        if is_gini:
            parent = 1.0 - mean * mean - (1.0 - mean) * (1.0 - mean)
            centre = 0.0
        else:
            acc = 0.0
            for i in range(start, end):
                diff = y[order[0, i]] - mean
                acc += diff * diff
            parent = acc / cnt
            centre = mean
        tol = 1e-12 * max(1.0, parent)
        if m < d:
            perm = np.argsort(keys[node], kind="mergesort")
            imp, f, thr = _scan_node(X, y, order, start, end, np.sort(perm[:m]), is_gini, min_leaf, centre)
            if f < 0 or not imp < parent - tol:
                imp2, f2, thr2 = _scan_node(X, y, order, start, end, np.sort(perm[m:]), is_gini, min_leaf, centre)
                if f2 >= 0 and (f < 0 or imp2 < parent - tol):
                    imp, f, thr = imp2, f2, thr2
        else:
            imp, f, thr = _scan_node(X, y, order, start, end, all_features, is_gini, min_leaf, centre)
        # a zero-gain cut is still taken when nothing better exists (XOR-like nodes);
        # child impurity can never exceed the parent's for these criteria
        if f < 0:
            continue
        nl = 0
        for i in range(start, end):
            r = order[0, i]
            goes_left[r] = X[r, f] <= thr
            if goes_left[r]:
                nl += 1
        # stable partition of every feature's sorted segment
        for g in range(d):
            a = 0
            b = nl
            for i in range(start, end):
                r = order[g, i]
                if goes_left[r]:
                    buf[a] = r
                    a += 1
                else:
                    buf[b] = r
                    b += 1
            for i in range(cnt):
                order[g, start + i] = buf[i]
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        feature[node] = f
        threshold[node] = thr
        left[node] = lnode
        right[node] = rnode
        # right pushed first so the left subtree is expanded first
        stack[top, 0] = rnode
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        stack[top + 1, 0] = lnode
        stack[top + 1, 1] = start
        stack[top + 1, 2] = start + nl
        stack[top + 1, 3] = depth + 1
        top += 2
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


def fit_tree(
    X,
    y,
    criterion: str = "gini",
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    feature_subset_size: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Greedy CART fit.

    At each node ``feature_subset_size`` features are drawn without
    replacement and scanned in index order; should none of them give an
    impurity decrease, the remaining features are scanned too. When no
    feature decreases impurity the best zero-gain cut is taken, so
    XOR-like nodes still split. Candidate thresholds are midpoints between
    consecutive distinct values; ties go to the lower feature index, then
    the lower threshold. A node stops splitting when pure, at
    ``max_depth``, or when no cut leaves ``min_samples_leaf`` rows per side.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("fit_tree needs a non-empty 2-D feature matrix")
    if len(y) != len(X):
        raise ValueError("X and y lengths differ")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in training data")
    if min_samples_leaf < 1:
        raise ValueError("min_samples_leaf must be >= 1")
    if criterion == "gini" and not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("gini trees need 0/1 labels")
    n, n_features = X.shape
    m = n_features if feature_subset_size is None else int(feature_subset_size)
    if not 1 <= m <= n_features:
        raise ValueError(f"feature_subset_size must be in 1..{n_features}")
    if m < n_features:
        if rng is None:
            raise ValueError("feature subsampling needs an rng")
        # one row of sort keys per potential node gives its feature permutation
        keys = rng.random((2 * n + 1, n_features))
    else:
        keys = np.empty((0, n_features))
    depth = -1 if max_depth is None else int(max_depth)
    order = np.argsort(np.ascontiguousarray(X.T), axis=1, kind="stable")
    feature, threshold, left, right, value = _build(
        X, y, criterion == "gini", depth, int(min_samples_leaf), m, keys, order
    )
    return Tree(feature, threshold, left, right, value, criterion, n_features)
