"""
A sequential conditional CART synthesizer, a bridge to external synthesizer
commands, and k-fold cross-validation of a synthesizer's disclosure risk.
"""

from __future__ import annotations

import csv
import io
import logging
import os
import shlex
import subprocess
import warnings
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from . import _terms as terms
from ._core import ConfigurationError, DataError, RapidError, derive_seed, make_rng, parallel_map
from .dataset import Dataset, Schema, dumps_csv, loads_csv, split_folds
from .dtypes import Categorical
from .interfaces import DEFAULT_EPSILON, DEFAULT_LEVEL, DEFAULT_TAU, _Interface, check_threshold
from .learners import AttackerSpec
from .learners._features import FeatureSpace
from .learners._tree import DecisionTree, TreeParams
from .risk import ErrorMetric, Holdout, RapidResult, baseline_marginals, rapid_assess
from .typing import Synthesizer

logger = logging.getLogger(__name__)

MIN_ROWS = 10
"""Smallest original dataset synthesize_cart accepts."""

SEED_ENV = "RAPID_SEED"
"""Environment variable carrying the seed to external synthesizer commands."""


class TooFewRows(DataError):
    def __init__(self, n: int) -> None:
        super().__init__(f"CART synthesis needs at least {MIN_ROWS} rows, got {n}.")


class SmallTrainingSet(UserWarning):
    """
    Warning issued when a cross-validation training set is too small for CART
    synthesis and a bootstrap resample is released in its place.
    """


class SynthesizerFailure(RapidError):
    """
    Error raised when a synthesizer fails to produce a dataset.
    """


class FoldFailures(RapidError):
    """
    Error raised after cross-validation when the synthesizer failed on one or
    more folds. The CLI exits with code 4 on these.
    """

    def __init__(self, failures: Sequence[Tuple[int, str]]) -> None:
        detail = "; ".join(f"fold {f}: {msg}" for f, msg in failures)
        super().__init__(f"The synthesizer failed on {len(failures)} fold(s): {detail}")
        self.failures = list(failures)


class SynthesisPlan(_Interface[Any]):
    """
    Settings for synthesize_cart.
    """

    def __init__(
        self,
        visit_order: Optional[Sequence[str]] = None,
        m: int = 5,
        max_depth: int = 30,
        min_split: int = 10,
        min_leaf: int = 5,
        cp: float = 0.0,
        seed: int = 0,
    ) -> None:
        """
        Args:
            visit_order (Sequence[str], optional): Order in which columns are
                synthesized. Defaults to None, the dataset's column order.
            m (int, optional): Number of replicates, defaults to 5.
            max_depth (int, optional): Tree depth limit, defaults to 30.
            min_split (int, optional): Minimum rows to split, defaults to 10.
            min_leaf (int, optional): Minimum donors per leaf, defaults to 5.
            cp (float, optional): Complexity penalty, defaults to 0.0.
            seed (int, optional): Seed, defaults to 0.

        """
        if m < 1:
            raise ConfigurationError(f"m must be >= 1, got {m}.")
        for name, value in (("max_depth", max_depth), ("min_split", min_split), ("min_leaf", min_leaf)):
            if value < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {value}.")
        self.visit_order = None if visit_order is None else list(visit_order)
        self.m = int(m)
        self.max_depth = int(max_depth)
        self.min_split = int(min_split)
        self.min_leaf = int(min_leaf)
        self.cp = float(cp)
        self.seed = int(seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "visit_order": self.visit_order,
            "m": self.m,
            "max_depth": self.max_depth,
            "min_split": self.min_split,
            "min_leaf": self.min_leaf,
            "cp": self.cp,
            "seed": self.seed,
        }

    def updated(self, **overrides: Any) -> SynthesisPlan:
        values = self.to_dict()
        values.update(overrides)
        return SynthesisPlan(**values)

    def tree_params(self) -> TreeParams:
        return TreeParams(
            max_depth=self.max_depth, min_split=self.min_split, min_leaf=self.min_leaf, cp=self.cp
        )

    def order_for(self, data: Dataset) -> List[str]:
        if self.visit_order is None:
            return data.names
        if sorted(self.visit_order) != sorted(data.names):
            raise ConfigurationError(
                f"visit_order {self.visit_order} is not a permutation of {data.names}."
            )
        return list(self.visit_order)


@dataclass
class _ColumnModel:
    name: str
    predictors: List[str]
    features: FeatureSpace
    tree: DecisionTree
    donors: Dict[int, np.ndarray]


def _fit_column(original: Dataset, name: str, predictors: List[str], params: TreeParams) -> _ColumnModel:
    kind = original.kind(name)
    vec = original.column(name)
    features = FeatureSpace.fit(original, predictors)
    X = features.raw(original)
    if isinstance(kind, Categorical):
        y = np.where(vec < 0, len(kind), vec)
        tree = DecisionTree(params).fit(X, features.is_categorical, y, len(kind) + 1)
    else:
        present = vec[~np.isnan(vec)]
        fill = float(np.median(present)) if len(present) else 0.0
        tree = DecisionTree(params).fit(X, features.is_categorical, np.where(np.isnan(vec), fill, vec))
    leaves = tree.apply(X)
    donors = {int(leaf): np.flatnonzero(leaves == leaf) for leaf in np.unique(leaves)}
    return _ColumnModel(name, predictors, features, tree, donors)


def synthesize_cart(
    original: Dataset, plan: Optional[SynthesisPlan] = None, threads: Optional[int] = None
) -> List[Dataset]:
    """
    Synthesizes columns one at a time: the first is a bootstrap resample of its
    original values, every later one is drawn from the original donors in the
    leaf its synthetic predecessors fall into.

    Args:
        original (Dataset): The data to imitate.
        plan (SynthesisPlan, optional): Defaults to None, SynthesisPlan().
        threads (int, optional): Worker threads across replicates. Defaults to
            None.

    Returns:
        List[Dataset]: plan.m synthetic datasets with the original schema and
        record count.

    Raises:
        TooFewRows: If the original has fewer than 10 rows.

    """
    plan = plan or SynthesisPlan()
    n = original.n
    if n < MIN_ROWS:
        raise TooFewRows(n)
    order = plan.order_for(original)
    params = plan.tree_params()
    models = [_fit_column(original, name, order[:j], params) for j, name in enumerate(order) if j > 0]
    logger.debug("Fitted %d column trees for CART synthesis.", len(models))

    def replicate(rep: int) -> Dataset:
        first = order[0]
        idx = make_rng(plan.seed, rep, 0).integers(0, n, size=n)
        columns: Dict[str, np.ndarray] = {first: original.column(first)[idx]}
        for j, model in enumerate(models, start=1):
            partial = Dataset(
                original.schema.select(model.predictors),
                {c: columns[c] for c in model.predictors},
            )
            leaves = model.tree.apply(model.features.raw(partial))
            rng = make_rng(plan.seed, rep, j)
            chosen = np.empty(n, dtype=np.int64)
            for leaf in np.unique(leaves):
                rows = np.flatnonzero(leaves == leaf)
                pool = model.donors[int(leaf)]
                chosen[rows] = pool[rng.integers(0, len(pool), size=len(rows))]
            columns[model.name] = original.column(model.name)[chosen]
        return Dataset(original.schema, columns)

    return parallel_map(replicate, range(plan.m), threads)


def cart_synthesizer(plan: Optional[SynthesisPlan] = None) -> Synthesizer:
    """
    Training sets with fewer than 10 rows, such as leave-one-out folds of a
    small dataset, get a bootstrap resample instead of CART synthesis.

    Returns:
        Synthesizer: A one-replicate CART synthesizer for cross-validation.

    """
    base = plan or SynthesisPlan()

    def synthesize(data: Dataset, seed: int) -> Dataset:
        if 0 < data.n < MIN_ROWS:
            warnings.warn(
                f"Only {data.n} training rows; releasing a bootstrap resample "
                "instead of CART synthesis.",
                SmallTrainingSet,
            )
            return data.take(make_rng(seed).integers(0, data.n, size=data.n))
        return synthesize_cart(data, base.updated(m=1, seed=seed))[0]

    return synthesize


def _output_schema(text: str, schema: Schema) -> Schema:
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None or sorted(header) != sorted(schema.names):
        raise SynthesizerFailure(f"Synthesizer output header {header} does not match {schema.names}.")
    position = {name: j for j, name in enumerate(header)}
    rows = [row for row in reader if row]
    columns = []
    for name, kind in schema.columns:
        if isinstance(kind, Categorical):
            j = position[name]
            labels = [row[j] for row in rows if len(row) > j and row[j] != ""]
            new = [lv for lv in dict.fromkeys(labels) if lv not in kind.levels]
            if new:
                kind = kind.union(Categorical(new))
        columns.append((name, kind))
    return Schema(columns, {n: schema.role(n) for n in schema.names})


def command_synthesizer(command: Union[str, Sequence[str]], timeout: Optional[float] = None) -> Synthesizer:
    """
    Wraps an external command as a synthesizer. The command reads the training
    data as CSV on stdin and writes one synthetic CSV on stdout; the seed is
    passed in the RAPID_SEED environment variable.

    Args:
        command (Union[str, Sequence[str]]): The command line.
        timeout (float, optional): Seconds before the command is killed.
            Defaults to None.

    Returns:
        Synthesizer: The wrapped command.

    """
    argv = shlex.split(command) if isinstance(command, str) else list(command)

    def synthesize(data: Dataset, seed: int) -> Dataset:
        env = {**os.environ, SEED_ENV: str(seed)}
        try:
            done = subprocess.run(
                argv,
                input=dumps_csv(data),
                capture_output=True,
                text=True,
                timeout=timeout,
                env=env,
            )
        except subprocess.TimeoutExpired:
            raise SynthesizerFailure(f"{argv[0]} timed out after {timeout} seconds.")
        except OSError as e:
            raise SynthesizerFailure(f"{argv[0]} could not be run: {e}")
        if done.returncode != 0:
            raise SynthesizerFailure(
                f"{argv[0]} exited with code {done.returncode}: {done.stderr.strip()}"
            )
        try:
            return loads_csv(done.stdout, _output_schema(done.stdout, data.schema), source=argv[0])
        except DataError as e:
            raise SynthesizerFailure(f"{argv[0]} wrote unusable CSV: {e}")

    return synthesize


@dataclass(frozen=True)
class ReplicatedUniques:
    n_unique: int
    n_replicated: int

    @property
    def proportion(self) -> float:
        return self.n_replicated / self.n_unique if self.n_unique else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_unique": self.n_unique,
            "n_replicated": self.n_replicated,
            "proportion": self.proportion,
        }


def replicated_uniques(
    original: Dataset, synthetic: Dataset, columns: Optional[Sequence[str]] = None
) -> ReplicatedUniques:
    """
    Counts the records that are unique in the original data and appear
    verbatim in the synthetic data.
    """
    columns = list(columns or original.names)
    orig_rows = list(zip(*(original.labels(c) for c in columns)))
    synth_rows = set(zip(*(synthetic.labels(c) for c in columns)))
    counts: Dict[Tuple[Any, ...], int] = {}
    for row in orig_rows:
        counts[row] = counts.get(row, 0) + 1
    uniques = [row for row, c in counts.items() if c == 1]
    return ReplicatedUniques(len(uniques), sum(1 for row in uniques if row in synth_rows))


@dataclass(frozen=True)
class CvResult:
    fold_scores: Tuple[float, ...]
    mean: float
    sd: float
    normal_ci: Tuple[float, float]
    percentile_ci: Tuple[float, float]
    k: int
    level: float
    tau: Optional[float]
    epsilon: Optional[float]
    attacker: Dict[str, Any]
    fold_results: Tuple[RapidResult, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fold_scores": list(self.fold_scores),
            "mean": self.mean,
            terms.SD: self.sd,
            "normal_ci": list(self.normal_ci),
            "percentile_ci": list(self.percentile_ci),
            "k": self.k,
            "level": self.level,
            terms.TAU: self.tau,
            terms.EPSILON: self.epsilon,
            terms.ATTACKER: self.attacker,
            terms.BASELINE: terms.BASELINE_TRAINING_FOLDS,
        }


def rapid_synthesizer_cv(
    original: Dataset,
    synthesize: Synthesizer,
    qi: Sequence[str],
    sensitive: str,
    k: int = 5,
    spec: Optional[AttackerSpec] = None,
    tau: float = DEFAULT_TAU,
    epsilon: float = DEFAULT_EPSILON,
    metric: Optional[ErrorMetric] = None,
    rng_seed: int = 0,
    level: float = DEFAULT_LEVEL,
    threads: Optional[int] = None,
) -> CvResult:
    """
    Expected risk of a synthesizer: for each fold, synthesize from the other
    folds and score only the held-out records, with baselines from the training
    folds.

    Args:
        original (Dataset): The original data.
        synthesize (Synthesizer): (training data, seed) -> released data.
        qi (Sequence[str]): Quasi-identifier column names.
        sensitive (str): The sensitive column.
        k (int, optional): Number of folds. Defaults to 5.
        spec (AttackerSpec, optional): Defaults to None, a random forest.
        tau (float, optional): Defaults to 0.3.
        epsilon (float, optional): Defaults to 0.10.
        metric (ErrorMetric, optional): Defaults to None.
        rng_seed (int, optional): Seed for folds and synthesis. Defaults to 0.
        level (float, optional): Level of both intervals. Defaults to 0.95.
        threads (int, optional): Worker threads for attacker training.
            Defaults to None.

    Returns:
        CvResult: Per-fold scores and their summaries.

    Raises:
        InvalidK: If k is outside [2, n].
        FoldFailures: If the synthesizer failed on any fold.

    """
    level = check_threshold("level", level, 0.0, 1.0)
    spec = spec or AttackerSpec()
    categorical = original.kind(sensitive).is_categorical
    folds = split_folds(original, k, sensitive if categorical else None, rng_seed)
    logger.info("Cross-validation baselines come from the training folds' marginals.")
    results: List[RapidResult] = []
    failures: List[Tuple[int, str]] = []
    for f in range(k):
        train_idx, test_idx = folds.train_indices(f), folds.test_indices(f)
        train = original.take(train_idx)
        try:
            released = synthesize(train, derive_seed(rng_seed, f))
        except Exception as e:
            logger.debug("Synthesizer failed on fold %d.", f, exc_info=True)
            failures.append((f, str(e)))
            continue
        baselines = None
        if categorical:
            baselines = baseline_marginals(train.labels(sensitive))
            for label in original.take(test_idx).labels(sensitive):
                if label is not None and label not in baselines:
                    logger.info("Class %r is absent from the training folds of fold %d.", label, f)
                    baselines[label] = 0.0
        result = rapid_assess(
            original,
            released,
            qi,
            sensitive,
            spec.with_seed(derive_seed(spec.seed, f)),
            tau,
            epsilon,
            metric,
            mode=Holdout(test_idx.tolist()),
            baselines=baselines,
            threads=threads,
        )
        logger.debug("Fold %d scored %.4f on %d records.", f, result.score, result.n_evaluated)
        results.append(result)
    if failures:
        raise FoldFailures(failures)
    scores = np.array([res.score for res in results])
    mean = float(scores.mean())
    sd = float(scores.std(ddof=1))
    z = float(stats.norm.ppf(1 - (1 - level) / 2))
    half = z * sd / np.sqrt(k)
    alpha = 1 - level
    lo, hi = np.quantile(scores, [alpha / 2, 1 - alpha / 2], method="linear")
    return CvResult(
        fold_scores=tuple(scores.tolist()),
        mean=mean,
        sd=sd,
        normal_ci=(max(0.0, mean - half), min(1.0, mean + half)),
        percentile_ci=(float(lo), float(hi)),
        k=k,
        level=level,
        tau=results[0].tau,
        epsilon=results[0].epsilon,
        attacker=spec.to_dict(),
        fold_results=tuple(results),
    )
