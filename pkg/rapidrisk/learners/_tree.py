"""
CART induction: Gini splits for classification, variance reduction for
regression, exhaustive or mean-ordered subset splits on categorical features.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_LEVELS = 10
"""Categorical features with more levels than this use the ordered heuristic."""

_TOL = 1e-12
_LEAF = -1


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 30
    min_split: int = 10
    min_leaf: int = 3
    cp: float = 0.0
    mtry: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "max_depth": self.max_depth,
            "min_split": self.min_split,
            "min_leaf": self.min_leaf,
            "cp": self.cp,
            "mtry": self.mtry,
        }


@dataclass
class _Split:
    gain: float
    feature: int
    threshold: float
    left_codes: Optional[np.ndarray]
    go_left: np.ndarray


def _cost(stats: np.ndarray, counts: np.ndarray, classify: bool) -> np.ndarray:
    """
    Node cost: n times Gini impurity, or the sum of squared errors.
    stats has the class counts (classification) or [sum y, sum y^2] in its last
    axis.
    """
    safe = np.where(counts > 0, counts, 1.0)
    if classify:
        return counts - np.sum(stats ** 2, axis=-1) / safe
    return np.maximum(stats[..., 1] - stats[..., 0] ** 2 / safe, 0.0)


class DecisionTree:
    """
    A binary decision tree stored as flat node arrays.
    """

    def __init__(self, params: TreeParams = TreeParams()) -> None:
        self.params = params
        self.n_classes: Optional[int] = None
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.default_left: List[bool] = []
        self.n_node: List[int] = []
        self.value: List[np.ndarray] = []
        self.left_codes: Dict[int, np.ndarray] = {}
        self.seen_codes: Dict[int, np.ndarray] = {}
        self._offset = 0.0

    @property
    def classify(self) -> bool:
        return self.n_classes is not None

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return sum(1 for f in self.feature if f == _LEAF)

    def fit(
        self,
        X: np.ndarray,
        is_cat: np.ndarray,
        y: np.ndarray,
        n_classes: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> DecisionTree:
        """
        Args:
            X (np.ndarray): n x p matrix; categorical features hold
                non-negative integer codes.
            is_cat (np.ndarray): Boolean flag per feature.
            y (np.ndarray): Class codes in [0, n_classes) or reals.
            n_classes (int, optional): Number of classes; None means
                regression. Defaults to None.
            rng (np.random.Generator, optional): Needed only when
                params.mtry < p. Defaults to None.

        Returns:
            DecisionTree: This tree, fitted.

        """
        self.n_classes = n_classes
        n = len(y)
        if n_classes is not None:
            stats = np.zeros((n, n_classes))
            stats[np.arange(n), y.astype(np.int64)] = 1.0
        else:
            y = y.astype(np.float64)
            self._offset = float(np.mean(y)) if n else 0.0
            yc = y - self._offset
            stats = np.column_stack([yc, yc ** 2])
        root_cost = float(_cost(stats.sum(axis=0), np.float64(n), self.classify))
        min_gain = self.params.cp * root_cost - _TOL
        stack: List[Tuple[int, np.ndarray, int]] = [(self._new_node(stats, n), np.arange(n), 0)]
        while stack:
            node, idx, depth = stack.pop()
            split = self._find_split(X[idx], is_cat, stats[idx], depth, min_gain, rng)
            if split is None:
                continue
            li, ri = idx[split.go_left], idx[~split.go_left]
            left = self._new_node(stats[li], len(li))
            right = self._new_node(stats[ri], len(ri))
            self.feature[node] = split.feature
            self.threshold[node] = split.threshold
            self.left[node], self.right[node] = left, right
            self.default_left[node] = len(li) >= len(ri)
            if split.left_codes is not None:
                self.left_codes[node] = split.left_codes
                seen = np.zeros_like(split.left_codes)
                seen[np.unique(X[idx, split.feature]).astype(np.int64)] = True
                self.seen_codes[node] = seen
            stack.append((right, ri, depth + 1))
            stack.append((left, li, depth + 1))
        logger.debug("Grew a tree with %d nodes from %d rows.", self.n_nodes, n)
        return self

    def _new_node(self, stats: np.ndarray, n: int) -> int:
        total = stats.sum(axis=0)
        if self.classify:
            value = (total + 1.0) / (n + total.shape[0])
        else:
            value = np.array([(total[0] / n if n else 0.0) + self._offset])
        self.feature.append(_LEAF)
        self.threshold.append(np.nan)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.default_left.append(True)
        self.n_node.append(n)
        self.value.append(value)
        return len(self.feature) - 1

    def _find_split(
        self,
        X: np.ndarray,
        is_cat: np.ndarray,
        stats: np.ndarray,
        depth: int,
        min_gain: float,
        rng: Optional[np.random.Generator],
    ) -> Optional[_Split]:
        p = self.params
        n = len(stats)
        if depth >= p.max_depth or n < p.min_split or n < 2 * p.min_leaf:
            return None
        node_cost = float(_cost(stats.sum(axis=0), np.float64(n), self.classify))
        if node_cost <= _TOL:
            return None
        features = np.arange(X.shape[1])
        if p.mtry is not None and p.mtry < len(features):
            assert rng is not None
            features = np.sort(rng.choice(len(features), size=p.mtry, replace=False))
        best: Optional[_Split] = None
        for j in features:
            if is_cat[j]:
                found = self._categorical_split(X[:, j], stats, node_cost)
            else:
                found = self._continuous_split(X[:, j], stats, node_cost)
            if found is None:
                continue
            gain, threshold, left_codes, go_left = found
            if best is None or gain > best.gain + _TOL:
                best = _Split(gain, int(j), threshold, left_codes, go_left)
        if best is None or best.gain < min_gain:
            return None
        return best

    def _scan(
        self, sorted_stats: np.ndarray, valid: np.ndarray, node_cost: float
    ) -> Optional[Tuple[int, float]]:
        n = len(sorted_stats)
        cum = np.cumsum(sorted_stats, axis=0)[:-1]
        n_left = np.arange(1, n, dtype=np.float64)
        left_cost = _cost(cum, n_left, self.classify)
        right_cost = _cost(cum[-1] + sorted_stats[-1] - cum, n - n_left, self.classify)
        gains = node_cost - left_cost - right_cost
        gains = np.where(valid, gains, -np.inf)
        if not np.isfinite(gains).any():
            return None
        i = int(np.argmax(gains))
        return i, float(gains[i])

    def _continuous_split(
        self, x: np.ndarray, stats: np.ndarray, node_cost: float
    ) -> Optional[Tuple[float, float, None, np.ndarray]]:
        n = len(x)
        order = np.argsort(x, kind="stable")
        xs = x[order]
        positions = np.arange(1, n)
        valid = (
            (xs[:-1] < xs[1:])
            & (positions >= self.params.min_leaf)
            & (n - positions >= self.params.min_leaf)
        )
        found = self._scan(stats[order], valid, node_cost)
        if found is None:
            return None
        i, gain = found
        threshold = (xs[i] + xs[i + 1]) / 2.0
        if not xs[i] <= threshold < xs[i + 1]:
            threshold = xs[i]
        return gain, float(threshold), None, x <= threshold

    def _categorical_split(
        self, x: np.ndarray, stats: np.ndarray, node_cost: float
    ) -> Optional[Tuple[float, float, np.ndarray, np.ndarray]]:
        codes = x.astype(np.int64)
        present, inverse = np.unique(codes, return_inverse=True)
        m = len(present)
        if m < 2:
            return None
        level_stats = np.zeros((m, stats.shape[1]))
        np.add.at(level_stats, inverse, stats)
        level_n = np.bincount(inverse, minlength=m).astype(np.float64)
        min_leaf = self.params.min_leaf
        if m <= MAX_EXHAUSTIVE_LEVELS:
            masks = ((np.arange(1, 2 ** (m - 1))[:, None] >> np.arange(m)) & 1).astype(bool)
            left_stats = masks.astype(np.float64) @ level_stats
            left_n = masks.astype(np.float64) @ level_n
            total = level_stats.sum(axis=0)
            n = level_n.sum()
            gains = (
                node_cost
                - _cost(left_stats, left_n, self.classify)
                - _cost(total - left_stats, n - left_n, self.classify)
            )
            gains = np.where((left_n >= min_leaf) & (n - left_n >= min_leaf), gains, -np.inf)
            if not np.isfinite(gains).any():
                return None
            best = int(np.argmax(gains))
            chosen = present[masks[best]]
            gain = float(gains[best])
        else:
            if self.classify:
                majority = int(np.argmax(level_stats.sum(axis=0)))
                score = level_stats[:, majority] / level_n
            else:
                score = level_stats[:, 0] / level_n
            order = np.argsort(score, kind="stable")
            cum_n = np.cumsum(level_n[order])[:-1]
            valid = (cum_n >= min_leaf) & (level_n.sum() - cum_n >= min_leaf)
            found = self._scan(level_stats[order], valid, node_cost)
            if found is None:
                return None
            i, gain = found
            chosen = present[order[: i + 1]]
        width = int(max(codes.max(), 0)) + 1
        left_codes = np.zeros(width, dtype=bool)
        left_codes[chosen] = True
        return gain, float("nan"), left_codes, np.isin(codes, chosen)

    def _goes_left(self, node: int, x: np.ndarray) -> np.ndarray:
        if node not in self.left_codes:
            return x <= self.threshold[node]
        codes = x.astype(np.int64)
        left_codes, seen = self.left_codes[node], self.seen_codes[node]
        known = (codes >= 0) & (codes < len(seen))
        safe = np.where(known, codes, 0)
        known &= seen[safe]
        return np.where(known, left_codes[safe], self.default_left[node])

    def apply(self, X: np.ndarray) -> np.ndarray:
        """
        Returns:
            np.ndarray: The leaf id each row of X lands in.

        """
        out = np.empty(len(X), dtype=np.int64)
        stack: List[Tuple[int, np.ndarray]] = [(0, np.arange(len(X)))]
        while stack:
            node, idx = stack.pop()
            if self.feature[node] == _LEAF:
                out[idx] = node
                continue
            go_left = self._goes_left(node, X[idx, self.feature[node]])
            stack.append((self.left[node], idx[go_left]))
            stack.append((self.right[node], idx[~go_left]))
        return out

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        values = np.vstack(self.value)
        return values[self.apply(X)]

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        values = np.array([v[0] for v in self.value])
        return values[self.apply(X)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "n_classes": self.n_classes,
            "feature": self.feature,
            "threshold": [None if np.isnan(t) else t for t in self.threshold],
            "left": self.left,
            "right": self.right,
            "default_left": self.default_left,
            "n_node": self.n_node,
            "value": [v.tolist() for v in self.value],
            "left_codes": {str(k): v.tolist() for k, v in self.left_codes.items()},
            "seen_codes": {str(k): v.tolist() for k, v in self.seen_codes.items()},
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> DecisionTree:
        tree = cls(TreeParams(**raw["params"]))
        tree.n_classes = raw["n_classes"]
        tree.feature = list(raw["feature"])
        tree.threshold = [np.nan if t is None else float(t) for t in raw["threshold"]]
        tree.left = list(raw["left"])
        tree.right = list(raw["right"])
        tree.default_left = list(raw["default_left"])
        tree.n_node = list(raw["n_node"])
        tree.value = [np.asarray(v, dtype=np.float64) for v in raw["value"]]
        tree.left_codes = {int(k): np.asarray(v, dtype=bool) for k, v in raw["left_codes"].items()}
        tree.seen_codes = {int(k): np.asarray(v, dtype=bool) for k, v in raw["seen_codes"].items()}
        return tree
