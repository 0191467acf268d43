from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .._core import ConfigurationError, DataError
from ..dataset import Dataset, SchemaMismatch
from ..dtypes import Categorical
from ..interfaces import _Interface
from ._features import FeatureSpace
from ._forest import ForestParams, RandomForest
from ._logistic import L1Logistic, LogisticParams
from ._tree import DecisionTree, TreeParams

logger = logging.getLogger(__name__)

CART = "cart"
RANDOM_FOREST = "random_forest"
LOGISTIC_L1 = "logistic_l1"
FAMILIES = (CART, RANDOM_FOREST, LOGISTIC_L1)
"""The attacker families that can be trained."""

FAMILY_ALIASES = {
    "cart": CART,
    "tree": CART,
    "rf": RANDOM_FOREST,
    "forest": RANDOM_FOREST,
    "random_forest": RANDOM_FOREST,
    "logistic": LOGISTIC_L1,
    "l1": LOGISTIC_L1,
    "logistic_l1": LOGISTIC_L1,
}
"""Dictionary mapping the family names accepted on the command line to families."""

MODEL_FORMAT_VERSION = 1

Model = Union[DecisionTree, RandomForest, L1Logistic]


class UnknownFamily(ConfigurationError):
    def __init__(self, family: str) -> None:
        super().__init__(
            f"Unknown attacker family {family!r}; expected one of {sorted(FAMILY_ALIASES)}."
        )


class UnsupportedTarget(ConfigurationError):
    """
    Error raised when a family cannot model the sensitive column's kind.
    """


class DegenerateTarget(DataError):
    """
    Error raised when a categorical target has a single observed class and the
    family needs at least two.
    """


class EmptyTraining(DataError):
    """
    Error raised when fewer than two usable training rows are available.
    """


class AttackerSpec(_Interface[Any]):
    """
    A family plus its hyperparameters and seed. Unset size limits take the
    family's default (cart: min_leaf 3; forest: min_leaf 5).
    """

    def __init__(
        self,
        family: str = RANDOM_FOREST,
        n_trees: int = 500,
        mtry: Optional[int] = None,
        min_leaf: Optional[int] = None,
        max_depth: int = 30,
        min_split: int = 10,
        cp: float = 0.0,
        bootstrap: bool = True,
        lam: float = 0.01,
        max_iter: int = 1000,
        tol: float = 1e-6,
        seed: int = 0,
    ) -> None:
        """
        Args:
            family (str, optional): cart, random_forest or logistic_l1 (or an
                alias such as rf), defaults to random_forest.
            n_trees (int, optional): Forest size, defaults to 500.
            mtry (int, optional): Features tried per forest split. Defaults to
                None, meaning ceil(sqrt(p)).
            min_leaf (int, optional): Minimum rows per leaf. Defaults to None.
            max_depth (int, optional): Tree depth limit, defaults to 30.
            min_split (int, optional): Minimum rows to split a cart node,
                defaults to 10.
            cp (float, optional): Cart complexity penalty, defaults to 0.0.
            bootstrap (bool, optional): Resample rows per forest tree,
                defaults to True.
            lam (float, optional): L1 penalty per training record: the
                objective is the mean negative log-likelihood plus lam times
                the L1 norm, which matches a penalty of n * lam on the summed
                likelihood. Defaults to 0.01.
            max_iter (int, optional): Logistic iteration cap, defaults to 1000.
            tol (float, optional): Logistic relative objective tolerance,
                defaults to 1e-6.
            seed (int, optional): Seed, defaults to 0.

        Raises:
            UnknownFamily: If family is not recognized.
            ConfigurationError: If a hyperparameter is out of range.

        """
        if family not in FAMILY_ALIASES:
            raise UnknownFamily(family)
        self.family = FAMILY_ALIASES[family]
        if min_leaf is None:
            min_leaf = 5 if self.family == RANDOM_FOREST else 3
        for name, value in (
            ("n_trees", n_trees),
            ("min_leaf", min_leaf),
            ("max_depth", max_depth),
            ("min_split", min_split),
            ("max_iter", max_iter),
        ):
            if int(value) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {value}.")
        if mtry is not None and mtry < 1:
            raise ConfigurationError(f"mtry must be >= 1, got {mtry}.")
        if lam < 0:
            raise ConfigurationError(f"lam must be >= 0, got {lam}.")
        if cp < 0:
            raise ConfigurationError(f"cp must be >= 0, got {cp}.")
        self.n_trees = int(n_trees)
        self.mtry = mtry
        self.min_leaf = int(min_leaf)
        self.max_depth = int(max_depth)
        self.min_split = int(min_split)
        self.cp = float(cp)
        self.bootstrap = bool(bootstrap)
        self.lam = float(lam)
        self.max_iter = int(max_iter)
        self.tol = float(tol)
        self.seed = int(seed)

    def to_dict(self) -> Dict[str, Any]:
        if self.family == CART:
            hyper: Dict[str, Any] = self.tree_params().to_dict()
        elif self.family == RANDOM_FOREST:
            hyper = self.forest_params().to_dict()
        else:
            hyper = self.logistic_params().to_dict()
        return {"family": self.family, **hyper, "seed": self.seed}

    def tree_params(self) -> TreeParams:
        return TreeParams(
            max_depth=self.max_depth,
            min_split=self.min_split,
            min_leaf=self.min_leaf,
            cp=self.cp,
        )

    def forest_params(self) -> ForestParams:
        return ForestParams(
            n_trees=self.n_trees,
            mtry=self.mtry,
            min_leaf=self.min_leaf,
            max_depth=self.max_depth,
            bootstrap=self.bootstrap,
        )

    def logistic_params(self) -> LogisticParams:
        return LogisticParams(lam=self.lam, max_iter=self.max_iter, tol=self.tol)

    def with_seed(self, seed: int) -> AttackerSpec:
        raw = {k: v for k, v in vars(self).items()}
        raw["seed"] = seed
        return AttackerSpec(**raw)


class TrainedAttacker:
    """
    An immutable fitted attacker: the model, the feature encoding of the
    quasi-identifiers it was trained on, and its class space (categorical
    targets) or nothing (continuous targets).
    """

    def __init__(
        self,
        spec: AttackerSpec,
        features: FeatureSpace,
        target: str,
        classes: Optional[Tuple[str, ...]],
        model: Model,
    ) -> None:
        self.spec = spec
        self.features = features
        self.target = target
        self.classes = classes
        self.model = model

    @property
    def family(self) -> str:
        return self.spec.family

    @property
    def is_categorical(self) -> bool:
        return self.classes is not None

    @property
    def qi(self) -> List[str]:
        return self.features.qi

    def __repr__(self) -> str:
        kind = "categorical" if self.is_categorical else "continuous"
        return f"TrainedAttacker({self.family}, target={self.target!r}, {kind})"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "features": self.features.to_dict(),
            "target": self.target,
            "classes": None if self.classes is None else list(self.classes),
            "model": self.model.to_dict(),
        }


def _spec_from_dict(raw: Dict[str, Any]) -> AttackerSpec:
    return AttackerSpec(**raw)


def train(
    spec: AttackerSpec,
    train_data: Dataset,
    qi_columns: Sequence[str],
    target: str,
    threads: Optional[int] = None,
) -> TrainedAttacker:
    """
    Fits an attacker that predicts target from the quasi-identifiers.

    Args:
        spec (AttackerSpec): Family, hyperparameters and seed.
        train_data (Dataset): The data the attacker learns from (usually the
            released data).
        qi_columns (Sequence[str]): Quasi-identifier column names.
        target (str): The sensitive column.
        threads (int, optional): Worker threads for forest training. Defaults
            to None.

    Returns:
        TrainedAttacker: The fitted attacker.

    Raises:
        EmptyTraining: If fewer than two rows have a target value.
        DegenerateTarget: If logistic_l1 sees a single class.
        UnsupportedTarget: If logistic_l1 is asked for a continuous target.

    """
    data, dropped = train_data.drop_missing(target)
    if dropped:
        logger.info("Dropped %d training rows with a missing %r value.", dropped, target)
    if data.n < 2:
        raise EmptyTraining(f"Need at least 2 training rows with {target!r}, got {data.n}.")
    kind = data.kind(target)
    features = FeatureSpace.fit(data, qi_columns)
    classes: Optional[Tuple[str, ...]] = None
    n_classes: Optional[int] = None
    if isinstance(kind, Categorical):
        codes = data.column(target)
        observed, y = np.unique(codes, return_inverse=True)
        classes = tuple(kind.levels[c] for c in observed)
        n_classes = len(classes)
        y = y.astype(np.int64)
    else:
        y = np.asarray(data.column(target), dtype=np.float64)

    model: Model
    if spec.family == LOGISTIC_L1:
        if n_classes is None:
            raise UnsupportedTarget(
                f"logistic_l1 needs a categorical target; {target!r} is continuous."
            )
        if n_classes < 2:
            raise DegenerateTarget(
                f"{target!r} has a single observed class {classes[0]!r}; "  # type: ignore
                "logistic_l1 needs at least two."
            )
        model = L1Logistic(spec.logistic_params()).fit(features.design(data), y, n_classes)
    elif spec.family == CART:
        model = DecisionTree(spec.tree_params()).fit(
            features.raw(data), features.is_categorical, y, n_classes
        )
    else:
        model = RandomForest(spec.forest_params(), spec.seed).fit(
            features.raw(data), features.is_categorical, y, n_classes, threads
        )
    return TrainedAttacker(spec, features, target, classes, model)


def predict_proba(model: TrainedAttacker, rows: Dataset) -> np.ndarray:
    """
    Args:
        model (TrainedAttacker): A categorical-target attacker.
        rows (Dataset): Rows holding every quasi-identifier column.

    Returns:
        np.ndarray: n_rows x n_classes probabilities, columns ordered as
        model.classes.

    Raises:
        SchemaMismatch: If the model's target is continuous or a column is
            missing.

    """
    if not model.is_categorical:
        raise SchemaMismatch(f"{model!r} predicts values, not class probabilities.")
    if isinstance(model.model, L1Logistic):
        return model.model.predict_proba(model.features.design(rows))
    return model.model.predict_proba(model.features.raw(rows))


def predict_value(model: TrainedAttacker, rows: Dataset) -> np.ndarray:
    """
    Raises:
        SchemaMismatch: If the model's target is categorical.
    """
    if model.is_categorical or isinstance(model.model, L1Logistic):
        raise SchemaMismatch(f"{model!r} predicts classes, not values.")
    return model.model.predict_value(model.features.raw(rows))


def predict_class(model: TrainedAttacker, rows: Dataset) -> List[str]:
    """
    Returns:
        List[str]: The most probable class label per row (first class on ties).

    """
    probs = predict_proba(model, rows)
    assert model.classes is not None
    return [model.classes[i] for i in np.argmax(probs, axis=1)]


def save_model(model: TrainedAttacker, path: Union[str, Path]) -> None:
    """
    Writes a versioned JSON document describing the fitted attacker.
    """
    with open(path, "w", encoding="utf-8") as file:
        json.dump(model.to_dict(), file)


def load_model(path: Union[str, Path]) -> TrainedAttacker:
    """
    Raises:
        DataError: If the document's format_version is not supported.
    """
    with open(path, "r", encoding="utf-8") as file:
        raw = json.load(file)
    version = raw.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise DataError(f"Unsupported model format_version {version!r}.")
    spec = _spec_from_dict(raw["spec"])
    model: Model
    if spec.family == LOGISTIC_L1:
        model = L1Logistic.from_dict(raw["model"])
    elif spec.family == CART:
        model = DecisionTree.from_dict(raw["model"])
    else:
        model = RandomForest.from_dict(raw["model"])
    classes = raw["classes"]
    return TrainedAttacker(
        spec,
        FeatureSpace.from_dict(raw["features"]),
        raw["target"],
        None if classes is None else tuple(classes),
        model,
    )
