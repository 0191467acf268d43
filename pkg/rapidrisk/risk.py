"""
Per-record and aggregate attribute-inference risk: baselines, normalized gain,
error metrics, the assessment protocol and multi-model aggregation.
"""

from __future__ import annotations

import logging
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _terms as terms
from ._core import ConfigurationError, DataError
from .dataset import Dataset, SchemaMismatch, unify_levels
from .dtypes import Categorical
from .interfaces import DEFAULT_DELTA, DEFAULT_EPSILON, DEFAULT_TAU, check_threshold
from .learners import AttackerSpec, TrainedAttacker, predict_proba, predict_value, train

logger = logging.getLogger(__name__)


class EmptyColumn(DataError):
    """
    Error raised when a baseline is requested for a column with no values.
    """


class LengthMismatch(DataError):
    def __init__(self, what: str, a: int, b: int) -> None:
        super().__init__(f"{what} have different lengths ({a} vs {b}).")


class ClassNotInBaseline(DataError):
    def __init__(self, label: str) -> None:
        super().__init__(f"True class {label!r} has no baseline proportion.")
        self.label = label


class IncompatibleKinds(DataError):
    """
    Error raised when a column is categorical in one dataset and continuous in
    the other.
    """


class EmptyTargetSet(DataError):
    """
    Error raised when no original records are selected for scoring.
    """


class MixedConfigurations(ConfigurationError):
    """
    Error raised when results computed under different thresholds, metrics,
    modes or target sets are aggregated together.
    """


class DegenerateBaselineWarning(UserWarning):
    """
    Warning issued when a sensitive column has a single class, so no record can
    be at risk.
    """


class ErrorMetric(ABC):
    """
    How far a continuous prediction is from the truth.
    """

    name: str

    @abstractmethod
    def error(self, y: Any, yhat: Any) -> np.ndarray:
        """
        Args:
            y (Any): True values.
            yhat (Any): Predictions.

        Returns:
            np.ndarray: Non-negative errors.

        """

    @property
    def is_relative(self) -> bool:
        return True

    def to_dict(self) -> Dict[str, Any]:
        return {terms.NAME: self.name}

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ErrorMetric) and other.to_dict() == self.to_dict()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_dict()})"


class _RelativeMetric(ErrorMetric):
    def __init__(self, delta: float = DEFAULT_DELTA) -> None:
        if not delta > 0:
            raise ConfigurationError(f"delta={delta} must be positive.")
        self.delta = float(delta)

    def to_dict(self) -> Dict[str, Any]:
        return {terms.NAME: self.name, terms.DELTA: self.delta}


class SymmetricRelative(_RelativeMetric):
    """
    2|y - yhat| / (|y| + |yhat| + 2 delta). Always below 2.
    """

    name = "symmetric"

    def error(self, y: Any, yhat: Any) -> np.ndarray:
        y, yhat = np.asarray(y, dtype=np.float64), np.asarray(yhat, dtype=np.float64)
        return 2.0 * np.abs(y - yhat) / (np.abs(y) + np.abs(yhat) + 2.0 * self.delta)


class StabilisedRelative(_RelativeMetric):
    """
    |y - yhat| / (|y| + delta).
    """

    name = "stabilised"

    def error(self, y: Any, yhat: Any) -> np.ndarray:
        y, yhat = np.asarray(y, dtype=np.float64), np.asarray(yhat, dtype=np.float64)
        return np.abs(y - yhat) / (np.abs(y) + self.delta)


class Absolute(ErrorMetric):
    """
    |y - yhat|, in the units of the sensitive column.
    """

    name = "absolute"

    @property
    def is_relative(self) -> bool:
        return False

    def error(self, y: Any, yhat: Any) -> np.ndarray:
        y, yhat = np.asarray(y, dtype=np.float64), np.asarray(yhat, dtype=np.float64)
        return np.abs(y - yhat)


METRICS = {
    SymmetricRelative.name: SymmetricRelative,
    StabilisedRelative.name: StabilisedRelative,
    Absolute.name: Absolute,
}
"""Dictionary mapping metric names to ErrorMetric classes."""


def metric_from_name(name: str, delta: float = DEFAULT_DELTA) -> ErrorMetric:
    """
    Raises:
        ConfigurationError: If name is not a known metric.
    """
    if name not in METRICS:
        raise ConfigurationError(f"Unknown metric {name!r}; expected one of {sorted(METRICS)}.")
    if name == Absolute.name:
        return Absolute()
    return METRICS[name](delta)  # type: ignore


@dataclass(frozen=True)
class AllRecords:
    """
    Score every original record.
    """

    name = terms.ALL_RECORDS


@dataclass(frozen=True)
class Holdout:
    """
    Score only the original records at the given positions.
    """

    rows: Tuple[int, ...]
    name = terms.HOLDOUT

    def __init__(self, rows: Sequence[int]) -> None:
        object.__setattr__(self, "rows", tuple(int(r) for r in rows))


Mode = Union[AllRecords, Holdout]


@dataclass(frozen=True)
class CategoricalRecordRisk:
    row: int
    true_value: str
    predicted: Optional[str]
    g: float
    b: float
    r: float
    at_risk: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            terms.ROW: self.row,
            terms.TRUE_VALUE: self.true_value,
            terms.PREDICTION: self.predicted,
            terms.G: self.g,
            terms.B: self.b,
            terms.R: self.r,
            terms.AT_RISK: self.at_risk,
        }


@dataclass(frozen=True)
class ContinuousRecordRisk:
    row: int
    true_value: float
    prediction: float
    e: float
    at_risk: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            terms.ROW: self.row,
            terms.TRUE_VALUE: self.true_value,
            terms.PREDICTION: self.prediction,
            terms.E: self.e,
            terms.AT_RISK: self.at_risk,
        }


RecordRisk = Union[CategoricalRecordRisk, ContinuousRecordRisk]


@dataclass(frozen=True)
class RapidResult:
    """
    The outcome of one assessment: the score, its counts, every record's risk
    and the settings that produced them.
    """

    score: float
    n_at_risk: int
    n_evaluated: int
    records: Tuple[RecordRisk, ...]
    target_kind: str
    tau: Optional[float] = None
    epsilon: Optional[float] = None
    metric: Optional[ErrorMetric] = None
    attacker: Dict[str, Any] = field(default_factory=dict)
    mode: str = terms.ALL_RECORDS
    baseline: Optional[str] = None
    accuracy: Optional[float] = None
    mae: Optional[float] = None

    @property
    def is_categorical(self) -> bool:
        return self.target_kind == terms.CATEGORICAL

    @property
    def threshold(self) -> float:
        value = self.tau if self.is_categorical else self.epsilon
        assert value is not None
        return value

    @property
    def rows(self) -> np.ndarray:
        return np.array([rec.row for rec in self.records], dtype=np.int64)

    @property
    def flags(self) -> np.ndarray:
        return np.array([rec.at_risk for rec in self.records], dtype=bool)

    @property
    def r(self) -> np.ndarray:
        return np.array([rec.r for rec in self.records])  # type: ignore

    @property
    def g(self) -> np.ndarray:
        return np.array([rec.g for rec in self.records])  # type: ignore

    @property
    def b(self) -> np.ndarray:
        return np.array([rec.b for rec in self.records])  # type: ignore

    @property
    def e(self) -> np.ndarray:
        return np.array([rec.e for rec in self.records])  # type: ignore

    def risk_values(self) -> np.ndarray:
        """
        Returns:
            np.ndarray: r per record (categorical) or e per record (continuous).

        """
        return self.r if self.is_categorical else self.e

    def with_threshold(self, value: float) -> RapidResult:
        """
        Re-applies a different tau (categorical) or epsilon (continuous) to the
        stored record risks; nothing is retrained.
        """
        if self.is_categorical:
            records: Tuple[RecordRisk, ...] = tuple(
                replace(rec, at_risk=bool(rec.r > value)) for rec in self.records  # type: ignore
            )
            changes: Dict[str, Any] = {"tau": float(value)}
        else:
            records = tuple(
                replace(rec, at_risk=bool(rec.e < value)) for rec in self.records  # type: ignore
            )
            changes = {"epsilon": float(value)}
        n_at_risk = sum(rec.at_risk for rec in records)
        return replace(
            self,
            records=records,
            n_at_risk=n_at_risk,
            score=n_at_risk / self.n_evaluated,
            **changes,
        )

    def config_key(self) -> Tuple[Any, ...]:
        metric = None if self.metric is None else tuple(sorted(self.metric.to_dict().items()))
        return (self.target_kind, self.tau, self.epsilon, metric, self.mode, tuple(self.rows))

    def summary(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            terms.SCORE: self.score,
            terms.N_AT_RISK: self.n_at_risk,
            terms.N_EVALUATED: self.n_evaluated,
            terms.TARGET_KIND: self.target_kind,
            terms.MODE: self.mode,
            terms.ATTACKER: self.attacker,
        }
        if self.is_categorical:
            out[terms.TAU] = self.tau
            out[terms.BASELINE] = self.baseline
            out[terms.ACCURACY] = self.accuracy
        else:
            out[terms.EPSILON] = self.epsilon
            out[terms.METRIC] = None if self.metric is None else self.metric.to_dict()
            out[terms.MAE] = self.mae
        return out


def baseline_marginals(y_original: Sequence[Optional[str]]) -> Dict[str, float]:
    """
    Args:
        y_original (Sequence[Optional[str]]): The original data's sensitive
            labels; None entries are ignored.

    Returns:
        Dict[str, float]: Class to proportion, in order of first appearance.

    Raises:
        EmptyColumn: If there are no labels.

    """
    counts: Dict[str, int] = {}
    for label in y_original:
        if label is not None:
            counts[label] = counts.get(label, 0) + 1
    total = sum(counts.values())
    if total == 0:
        raise EmptyColumn("Cannot compute baselines from an empty column.")
    return {label: c / total for label, c in counts.items()}


def normalized_gain(g: Any, b: Any) -> Any:
    """
    (g - b) / (1 - b), defined as 0 where b = 1.

    Args:
        g (Any): True-class probability, scalar or array.
        b (Any): Baseline, scalar or array.

    Returns:
        Any: A float for scalar inputs, otherwise an array.

    """
    g_arr, b_arr = np.asarray(g, dtype=np.float64), np.asarray(b, dtype=np.float64)
    denom = np.where(b_arr < 1.0, 1.0 - b_arr, 1.0)
    out = np.where(b_arr < 1.0, (g_arr - b_arr) / denom, 0.0)
    return float(out) if out.ndim == 0 else out


def prediction_error(y: Any, yhat: Any, metric: ErrorMetric) -> Any:
    out = metric.error(y, yhat)
    return float(out) if np.ndim(out) == 0 else out


def rapid_categorical(
    probs: Any,
    y_true: Sequence[str],
    baselines: Dict[str, float],
    tau: float = DEFAULT_TAU,
    classes: Optional[Sequence[str]] = None,
    rows: Optional[Sequence[int]] = None,
) -> RapidResult:
    """
    Scores categorical records: g is the attacker's probability of the true
    class, r its normalized gain over the baseline, and a record is at risk when
    r > tau.

    Args:
        probs (Any): n x K probabilities.
        y_true (Sequence[str]): True labels.
        baselines (Dict[str, float]): Baseline proportion per class.
        tau (float, optional): Threshold in (0, 1). Defaults to 0.3.
        classes (Sequence[str], optional): Class of each probs column.
            Defaults to None, meaning the order of baselines. A true class
            missing from classes gets g = 0.
        rows (Sequence[int], optional): Row ids for the records. Defaults to
            None, meaning 0..n-1.

    Returns:
        RapidResult: The scored records.

    Raises:
        LengthMismatch: If probs and y_true (or rows) differ in length.
        ClassNotInBaseline: If a true label has no baseline.

    """
    tau = check_threshold("tau", tau, 0.0, 1.0)
    P = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    n = len(y_true)
    if P.shape[0] != n:
        raise LengthMismatch("Probabilities and true labels", P.shape[0], n)
    rows = list(range(n)) if rows is None else [int(r) for r in rows]
    if len(rows) != n:
        raise LengthMismatch("Row ids and true labels", len(rows), n)
    classes = list(baselines) if classes is None else list(classes)
    if P.shape[1] != len(classes):
        raise LengthMismatch("Probability columns and classes", P.shape[1], len(classes))
    col = {c: j for j, c in enumerate(classes)}
    if any(b >= 1.0 for b in baselines.values()):
        warnings.warn(
            "The sensitive column has a single class; normalized gain is 0 for every record.",
            DegenerateBaselineWarning,
        )
    top = np.argmax(P, axis=1) if len(classes) else np.zeros(n, dtype=np.int64)
    records: List[RecordRisk] = []
    for i, label in enumerate(y_true):
        if label not in baselines:
            raise ClassNotInBaseline(label)
        b = baselines[label]
        g = float(P[i, col[label]]) if label in col else 0.0
        r = normalized_gain(g, b)
        predicted = classes[top[i]] if classes else None
        records.append(CategoricalRecordRisk(rows[i], label, predicted, g, b, r, bool(r > tau)))
    n_at_risk = sum(rec.at_risk for rec in records)
    accuracy = float(np.mean([rec.predicted == rec.true_value for rec in records])) if n else None
    return RapidResult(
        score=n_at_risk / n if n else 0.0,
        n_at_risk=n_at_risk,
        n_evaluated=n,
        records=tuple(records),
        target_kind=terms.CATEGORICAL,
        tau=tau,
        accuracy=accuracy,
    )


def rapid_continuous(
    yhat: Any,
    y_true: Any,
    epsilon: float = DEFAULT_EPSILON,
    metric: Optional[ErrorMetric] = None,
    rows: Optional[Sequence[int]] = None,
) -> RapidResult:
    """
    Scores continuous records: a record is at risk when its prediction error is
    below epsilon.

    Args:
        yhat (Any): Predictions.
        y_true (Any): True values.
        epsilon (float, optional): Positive tolerance. Defaults to 0.10.
        metric (ErrorMetric, optional): Defaults to None, meaning
            SymmetricRelative(0.01).
        rows (Sequence[int], optional): Row ids. Defaults to None.

    Returns:
        RapidResult: The scored records, with the MAE as context.

    Raises:
        LengthMismatch: If the vectors differ in length.

    """
    if not epsilon > 0:
        raise ConfigurationError(f"epsilon={epsilon} must be positive.")
    metric = metric or SymmetricRelative()
    yhat = np.asarray(yhat, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    n = len(y_true)
    if len(yhat) != n:
        raise LengthMismatch("Predictions and true values", len(yhat), n)
    rows = list(range(n)) if rows is None else [int(r) for r in rows]
    if len(rows) != n:
        raise LengthMismatch("Row ids and true values", len(rows), n)
    errors = metric.error(y_true, yhat)
    records = tuple(
        ContinuousRecordRisk(rows[i], float(y_true[i]), float(yhat[i]), float(errors[i]), bool(errors[i] < epsilon))
        for i in range(n)
    )
    n_at_risk = sum(rec.at_risk for rec in records)
    return RapidResult(
        score=n_at_risk / n if n else 0.0,
        n_at_risk=n_at_risk,
        n_evaluated=n,
        records=records,
        target_kind=terms.CONTINUOUS,
        epsilon=float(epsilon),
        metric=metric,
        mae=float(np.mean(np.abs(y_true - yhat))) if n else None,
    )


def prepare_pair(
    original: Dataset, released: Dataset, qi: Sequence[str], sensitive: str
) -> Tuple[Dataset, Dataset]:
    """
    Checks that both datasets carry the assessment columns with matching kinds
    and puts them into a shared level space, missing categorical
    quasi-identifiers becoming an explicit level.

    Raises:
        SchemaMismatch: If a column is absent from either dataset.
        IncompatibleKinds: If a column's kind differs between them.

    """
    for name in [*qi, sensitive]:
        for which, data in (("original", original), ("released", released)):
            if name not in data.schema:
                raise SchemaMismatch(f"Column {name!r} is missing from the {which} data.")
        if original.kind(name).is_categorical != released.kind(name).is_categorical:
            raise IncompatibleKinds(
                f"Column {name!r} is {original.kind(name)} in the original data but "
                f"{released.kind(name)} in the released data."
            )
    for name in qi:
        if original.kind(name).is_categorical:
            original = original.fill_missing_level(name)
            released = released.fill_missing_level(name)
    categorical = [n for n in [*qi, sensitive] if original.kind(n).is_categorical]
    return unify_levels(original, released, categorical)


def _target_rows(original: Dataset, mode: Mode) -> np.ndarray:
    if isinstance(mode, AllRecords):
        idx = np.arange(original.n)
    else:
        idx = np.asarray(mode.rows, dtype=np.int64)
        if len(idx) and (idx.min() < 0 or idx.max() >= original.n):
            raise ConfigurationError("Holdout rows fall outside the original data.")
    if len(idx) == 0:
        raise EmptyTargetSet("No original records were selected for scoring.")
    return idx


def score_records(
    model: TrainedAttacker,
    original: Dataset,
    sensitive: str,
    tau: float = DEFAULT_TAU,
    epsilon: float = DEFAULT_EPSILON,
    metric: Optional[ErrorMetric] = None,
    mode: Mode = AllRecords(),
    baseline: str = terms.BASELINE_FULL,
    baselines: Optional[Dict[str, float]] = None,
) -> RapidResult:
    """
    Scores original records against an already trained attacker. The
    datasets must already share a level space (see prepare_pair).

    Args:
        model (TrainedAttacker): The attacker.
        original (Dataset): The original data.
        sensitive (str): The sensitive column.
        tau (float, optional): Defaults to 0.3.
        epsilon (float, optional): Defaults to 0.10.
        metric (ErrorMetric, optional): Defaults to None.
        mode (Mode, optional): AllRecords() or Holdout(rows). Defaults to
            AllRecords().
        baseline (str, optional): "full" for marginals of every original record
            or "target" for marginals of the scored records only. Ignored when
            baselines is given. Defaults to "full".
        baselines (Dict[str, float], optional): Explicit baselines. Defaults to
            None.

    Returns:
        RapidResult: The scored records.

    """
    idx = _target_rows(original, mode)
    targets = original.take(idx)
    targets, dropped = targets.drop_missing(sensitive)
    if dropped:
        logger.info("Excluded %d records with a missing %r value from scoring.", dropped, sensitive)
    if targets.n == 0:
        raise EmptyTargetSet(f"Every selected record is missing {sensitive!r}.")
    rows = targets.row_ids.tolist()
    if model.is_categorical:
        policy = baseline
        if baselines is None:
            if baseline == terms.BASELINE_FULL:
                baselines = baseline_marginals(original.labels(sensitive))
            elif baseline == terms.BASELINE_TARGET:
                baselines = baseline_marginals(targets.labels(sensitive))
            else:
                raise ConfigurationError(f"Unknown baseline policy {baseline!r}.")
        else:
            policy = terms.BASELINE_TRAINING_FOLDS if baseline == terms.BASELINE_FULL else baseline
        result = rapid_categorical(
            predict_proba(model, targets),
            targets.labels(sensitive),
            baselines,
            tau,
            classes=model.classes,
            rows=rows,
        )
        result = replace(result, baseline=policy)
    else:
        result = rapid_continuous(
            predict_value(model, targets),
            targets.column(sensitive),
            epsilon,
            metric,
            rows=rows,
        )
    return replace(result, attacker=model.spec.to_dict(), mode=mode.name)


def rapid_assess(
    original: Dataset,
    released: Dataset,
    qi: Sequence[str],
    sensitive: str,
    spec: Optional[AttackerSpec] = None,
    tau: float = DEFAULT_TAU,
    epsilon: float = DEFAULT_EPSILON,
    metric: Optional[ErrorMetric] = None,
    mode: Mode = AllRecords(),
    baseline: str = terms.BASELINE_FULL,
    baselines: Optional[Dict[str, float]] = None,
    threads: Optional[int] = None,
) -> RapidResult:
    """
    Trains an attacker on the released data (quasi-identifiers to sensitive
    column) and scores the original records with it.

    Args:
        original (Dataset): The confidential data.
        released (Dataset): The released or synthetic data.
        qi (Sequence[str]): Quasi-identifier column names.
        sensitive (str): The sensitive column name.
        spec (AttackerSpec, optional): Defaults to None, a 500-tree random
            forest.
        tau (float, optional): Categorical threshold. Defaults to 0.3.
        epsilon (float, optional): Continuous tolerance. Defaults to 0.10.
        metric (ErrorMetric, optional): Continuous error metric. Defaults to
            None, symmetric relative error with delta 0.01.
        mode (Mode, optional): Which original records to score. Defaults to
            AllRecords().
        baseline (str, optional): Baseline policy, "full" or "target".
            Defaults to "full".
        baselines (Dict[str, float], optional): Explicit baselines, overriding
            the policy. Defaults to None.
        threads (int, optional): Worker threads for training. Defaults to None.

    Returns:
        RapidResult: The assessment.

    Raises:
        SchemaMismatch: If a column is absent from either dataset.
        IncompatibleKinds: If the sensitive column's kind differs.
        EmptyTargetSet: If the holdout selection is empty.

    """
    spec = spec or AttackerSpec()
    if sensitive in qi:
        raise ConfigurationError(f"{sensitive!r} cannot be both sensitive and a quasi-identifier.")
    original, released = prepare_pair(original, released, qi, sensitive)
    _target_rows(original, mode)
    model = train(spec, released, qi, sensitive, threads)
    return score_records(
        model, original, sensitive, tau, epsilon, metric, mode, baseline, baselines
    )


@dataclass(frozen=True)
class MultiModelSummary:
    mean_score: float
    max_score: float
    max_attacker: str
    scores: Tuple[Tuple[str, float], ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean_score": self.mean_score,
            "max_score": self.max_score,
            "max_attacker": self.max_attacker,
            "scores": [{terms.FAMILY: f, terms.SCORE: s} for f, s in self.scores],
        }


def _check_compatible(results: Sequence[RapidResult]) -> None:
    if not results:
        raise ConfigurationError("At least one result is needed.")
    key = results[0].config_key()
    for res in results[1:]:
        if res.config_key() != key:
            raise MixedConfigurations(
                "Results differ in thresholds, metric, evaluation mode or target records."
            )


def aggregate_multi_model(results: Sequence[RapidResult]) -> MultiModelSummary:
    """
    The average and the worst case over attackers run on the same records with
    the same thresholds.

    Raises:
        MixedConfigurations: If the results are not comparable.

    """
    _check_compatible(results)
    scores = tuple((str(res.attacker.get(terms.FAMILY, "?")), res.score) for res in results)
    values = np.array([s for _, s in scores])
    top = int(np.argmax(values))
    return MultiModelSummary(
        mean_score=float(values.mean()),
        max_score=float(values[top]),
        max_attacker=scores[top][0],
        scores=scores,
    )


@dataclass(frozen=True)
class ReplicateSummary:
    mean_score: float
    max_score: float
    scores: Tuple[float, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean_score": self.mean_score,
            "max_score": self.max_score,
            "scores": list(self.scores),
        }


def aggregate_replicates(results: Sequence[RapidResult]) -> ReplicateSummary:
    """
    The average and the worst case across results for several released
    replicates of the same original data.

    Raises:
        MixedConfigurations: If the results are not comparable.

    """
    _check_compatible(results)
    scores = tuple(res.score for res in results)
    return ReplicateSummary(float(np.mean(scores)), float(np.max(scores)), scores)
