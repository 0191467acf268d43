from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from .._core import make_rng, parallel_map
from ._tree import DecisionTree, TreeParams


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 500
    mtry: Optional[int] = None
    min_leaf: int = 5
    max_depth: int = 30
    bootstrap: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_trees": self.n_trees,
            "mtry": self.mtry,
            "min_leaf": self.min_leaf,
            "max_depth": self.max_depth,
            "bootstrap": self.bootstrap,
        }


class RandomForest:
    """
    Bagged CART trees with per-split feature sampling. Tree t draws all of its
    randomness from make_rng(seed, t), so the forest does not depend on how
    many threads built it.
    """

    def __init__(self, params: ForestParams = ForestParams(), seed: int = 0) -> None:
        self.params = params
        self.seed = seed
        self.trees: List[DecisionTree] = []

    def tree_params(self, p: int) -> TreeParams:
        mtry = self.params.mtry or max(1, math.ceil(math.sqrt(p)))
        return TreeParams(
            max_depth=self.params.max_depth,
            min_split=2 * self.params.min_leaf,
            min_leaf=self.params.min_leaf,
            cp=0.0,
            mtry=min(mtry, p),
        )

    def fit(
        self,
        X: np.ndarray,
        is_cat: np.ndarray,
        y: np.ndarray,
        n_classes: Optional[int] = None,
        threads: Optional[int] = None,
    ) -> RandomForest:
        n, p = X.shape
        tree_params = self.tree_params(p)

        def grow(t: int) -> DecisionTree:
            rng = make_rng(self.seed, t)
            idx = rng.integers(0, n, size=n) if self.params.bootstrap else np.arange(n)
            return DecisionTree(tree_params).fit(X[idx], is_cat, y[idx], n_classes, rng)

        self.trees = parallel_map(grow, range(self.params.n_trees), threads)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        total = self.trees[0].predict_proba(X)
        for tree in self.trees[1:]:
            total = total + tree.predict_proba(X)
        return total / len(self.trees)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return np.mean([tree.predict_value(X) for tree in self.trees], axis=0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> RandomForest:
        forest = cls(ForestParams(**raw["params"]), raw["seed"])
        forest.trees = [DecisionTree.from_dict(t) for t in raw["trees"]]
        return forest

