"""
Record-level risk diagnostics: at-risk rates stratified by subgroups of the
original data, and a logistic attribution model regressing the at-risk flags
on quasi-identifiers.
"""

from __future__ import annotations

import csv
import itertools
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import _terms as terms
from ._core import ConfigurationError, DataError
from .dataset import Dataset, SchemaMismatch, UnknownColumn
from .dtypes import MISSING_LEVEL, Categorical, format_real
from .interfaces import DEFAULT_LEVEL
from .learners._logistic import irls_binary
from .risk import LengthMismatch, RapidResult
from .uncertainty import IntervalEstimate, wilson_interval

logger = logging.getLogger(__name__)

NO_INTERACTIONS = "none"
TWO_WAY = "two_way"
THREE_WAY = "three_way"
INTERACTION_ORDERS = {NO_INTERACTIONS: 1, TWO_WAY: 2, THREE_WAY: 3}

INTERCEPT = "(Intercept)"
SEPARATION_RIDGE = 1e-8
DEFAULT_QUANTILES = (0.25, 0.5, 0.75)


class MissingBinSpec(ConfigurationError):
    def __init__(self, name: str) -> None:
        super().__init__(f"Continuous grouping column {name!r} needs a bin count.")


class DegenerateFlags(DataError):
    def __init__(self, value: bool) -> None:
        super().__init__(f"Every flag is {value}; an attribution model needs both outcomes.")


class PerfectSeparation(UserWarning):
    """
    Warning issued when the flags are perfectly separated by the design and a
    small ridge penalty is applied to keep the fit finite.
    """


class RankDeficientDesign(UserWarning):
    """
    Warning issued when attribution terms are dropped because they are linear
    combinations of earlier terms.
    """


@dataclass(frozen=True)
class RiskGroup:
    key: Tuple[str, ...]
    n: int
    n_at_risk: int
    interval: IntervalEstimate

    @property
    def rate(self) -> float:
        return self.n_at_risk / self.n


@dataclass(frozen=True)
class StratifiedRisk:
    by: Tuple[str, ...]
    groups: Tuple[RiskGroup, ...]
    score: float
    n_evaluated: int

    def rows(self) -> List[Dict[str, Any]]:
        out = []
        for group in self.groups:
            row: Dict[str, Any] = dict(zip(self.by, group.key))
            row.update(
                {
                    "n": group.n,
                    terms.N_AT_RISK: group.n_at_risk,
                    "rate": group.rate,
                    "lower": group.interval.lower,
                    "upper": group.interval.upper,
                }
            )
            out.append(row)
        return out

    def to_csv(self, path: Union[str, Path]) -> None:
        _write_rows(self.rows(), path)


def _write_rows(rows: Sequence[Dict[str, Any]], path: Union[str, Path]) -> None:
    header = list(rows[0].keys()) if rows else []
    with open(path, "w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[row[h] for h in header] for row in rows])


def _positions(original: Dataset, rows: Sequence[int]) -> np.ndarray:
    lookup = {rid: i for i, rid in enumerate(original.row_ids.tolist())}
    try:
        return np.array([lookup[int(r)] for r in rows], dtype=np.int64)
    except KeyError as e:
        raise SchemaMismatch(f"Scored row {e.args[0]} is not a row of the original data.")


def _bin_labels(values: np.ndarray, bins: int) -> Tuple[np.ndarray, List[str]]:
    present = values[~np.isnan(values)]
    low, high = (float(present.min()), float(present.max())) if len(present) else (0.0, 0.0)
    edges = np.linspace(low, high, bins + 1)
    codes = np.clip(np.searchsorted(edges, values, side="right") - 1, 0, bins - 1)
    codes = np.where(np.isnan(values), bins, codes)
    labels = [
        f"[{format_real(edges[i])}, {format_real(edges[i + 1])}{']' if i == bins - 1 else ')'}"
        for i in range(bins)
    ]
    return codes, labels + [MISSING_LEVEL]


def stratify_risk(
    result: RapidResult,
    original: Dataset,
    by: Union[str, Sequence[str]],
    bins: Optional[Mapping[str, int]] = None,
    level: float = DEFAULT_LEVEL,
) -> StratifiedRisk:
    """
    Splits the evaluated records into groups by one or more columns of the
    original data and reports the at-risk rate of each.

    Args:
        result (RapidResult): An assessment of original.
        original (Dataset): The original data the result scored.
        by (Union[str, Sequence[str]]): Grouping columns. Stratifying by the
            sensitive column gives per-class risk.
        bins (Mapping[str, int], optional): Equal-width bin counts for
            continuous grouping columns. Defaults to None.
        level (float, optional): Wilson interval level. Defaults to 0.95.

    Returns:
        StratifiedRisk: Non-empty groups in level (or bin) order.

    Raises:
        UnknownColumn: If a grouping column is not in original.
        MissingBinSpec: If a continuous grouping column has no bin count.

    """
    return stratify_flags(result.rows.tolist(), result.flags, original, by, bins, level)


def stratify_flags(
    rows: Sequence[int],
    flags: Sequence[bool],
    original: Dataset,
    by: Union[str, Sequence[str]],
    bins: Optional[Mapping[str, int]] = None,
    level: float = DEFAULT_LEVEL,
) -> StratifiedRisk:
    """
    stratify_risk for flags read back from a per-record table: rows are the
    row identifiers of the scored records and flags their at-risk indicators.
    """
    by = [by] if isinstance(by, str) else list(by)
    bins = dict(bins or {})
    if not by:
        raise ConfigurationError("Stratification needs at least one grouping column.")
    for name in by:
        if name not in original.schema:
            raise UnknownColumn(name, original.names)
    flags = np.asarray(flags, dtype=bool)
    if len(flags) != len(rows):
        raise LengthMismatch("flags and rows", len(flags), len(rows))
    if not len(flags):
        raise DataError("There are no scored records to stratify.")
    idx = _positions(original, rows)
    codes = []
    labels: List[List[str]] = []
    for name in by:
        kind = original.kind(name)
        vec = original.column(name)[idx]
        if isinstance(kind, Categorical):
            codes.append(np.where(vec < 0, len(kind), vec))
            labels.append(list(kind.levels) + [MISSING_LEVEL])
        else:
            if name not in bins:
                raise MissingBinSpec(name)
            if bins[name] < 1:
                raise ConfigurationError(f"Bin count for {name!r} must be >= 1.")
            col_codes, col_labels = _bin_labels(vec, bins[name])
            codes.append(col_codes)
            labels.append(col_labels)

    matrix = np.column_stack(codes)
    keys, inverse = np.unique(matrix, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    groups = []
    for g, key in enumerate(keys):
        members = inverse == g
        n, k = int(members.sum()), int(flags[members].sum())
        groups.append(
            RiskGroup(
                tuple(labels[j][int(c)] for j, c in enumerate(key)),
                n,
                k,
                wilson_interval(k, n, level),
            )
        )
    logger.debug("Stratified %d records into %d groups by %s.", len(idx), len(groups), by)
    return StratifiedRisk(tuple(by), tuple(groups), float(flags.mean()), len(flags))


@dataclass(frozen=True)
class _Encoding:
    """
    How one quasi-identifier enters the design. Categorical columns are dummy
    coded against their first observed level; continuous columns are
    median-imputed and standardized.
    """

    name: str
    levels: Optional[Tuple[str, ...]] = None
    median: float = 0.0
    center: float = 0.0
    scale: float = 1.0

    @property
    def is_categorical(self) -> bool:
        return self.levels is not None

    def term_names(self) -> List[str]:
        if self.levels is None:
            return [self.name]
        return [f"{self.name}[{level}]" for level in self.levels[1:]]

    def block(self, values: Sequence[Any]) -> np.ndarray:
        if self.levels is None:
            x = np.array([np.nan if v is None else float(v) for v in values], dtype=np.float64)
            x = np.where(np.isnan(x), self.median, x)
            return ((x - self.center) / self.scale)[:, None]
        labels = np.array([MISSING_LEVEL if v is None else str(v) for v in values], dtype=object)
        out = np.zeros((len(labels), len(self.levels) - 1))
        for j, level in enumerate(self.levels[1:]):
            out[:, j] = labels == level
        return out


def _encode(data: Dataset, name: str) -> _Encoding:
    if data.kind(name).is_categorical:
        seen = [MISSING_LEVEL if v is None else v for v in data.labels(name)]
        return _Encoding(name, levels=tuple(dict.fromkeys(sorted(seen, key=_level_order(data, name)))))
    x = data.column(name)
    present = x[~np.isnan(x)]
    if not len(present):
        raise DataError(f"Column {name!r} has no observed values.")
    median = float(np.median(present))
    filled = np.where(np.isnan(x), median, x)
    sd = float(filled.std(ddof=1)) if len(filled) > 1 else 0.0
    return _Encoding(name, median=median, center=float(filled.mean()), scale=sd if sd > 0 else 1.0)


def _level_order(data: Dataset, name: str) -> Any:
    kind = data.kind(name)
    assert isinstance(kind, Categorical)
    order = {level: i for i, level in enumerate(kind.levels)}
    return lambda label: order.get(label, len(order))


def _design(
    encodings: Sequence[_Encoding], values: Mapping[str, Sequence[Any]], order: int, n: int
) -> Tuple[List[str], np.ndarray]:
    names = [INTERCEPT]
    columns = [np.ones((n, 1))]
    blocks = {enc.name: (enc.term_names(), enc.block(values[enc.name])) for enc in encodings}
    for size in range(1, order + 1):
        for combo in itertools.combinations([enc.name for enc in encodings], size):
            parts = [blocks[c] for c in combo]
            for picks in itertools.product(*[range(len(p[0])) for p in parts]):
                names.append(":".join(p[0][i] for p, i in zip(parts, picks)))
                col = np.ones(n)
                for p, i in zip(parts, picks):
                    col = col * p[1][:, i]
                columns.append(col[:, None])
    return names, np.hstack(columns)


def _independent_columns(X: np.ndarray) -> List[int]:
    kept: List[int] = []
    rank = 0
    for j in range(X.shape[1]):
        trial = np.linalg.matrix_rank(X[:, kept + [j]])
        if trial > rank:
            kept.append(j)
            rank = trial
    return kept


@dataclass(frozen=True)
class AttributionModel:
    """
    A logistic regression of at-risk flags on quasi-identifiers. Estimates
    are on the log-odds scale; continuous quasi-identifiers enter
    standardized, so their terms read per standard deviation.
    """

    qi: Tuple[str, ...]
    interactions: str
    term_names: Tuple[str, ...]
    coef: np.ndarray
    std_error: np.ndarray
    dropped: Tuple[str, ...]
    separated: bool
    converged: bool
    log_odds: np.ndarray
    grid: Tuple[Dict[str, Any], ...] = field(default_factory=tuple)

    @property
    def z(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coef / self.std_error

    def coefficient(self, term: str) -> float:
        return float(self.coef[self.term_names.index(term)])

    def rows(self) -> List[Dict[str, Any]]:
        return [
            {terms.TERM: t, terms.ESTIMATE: float(b), terms.STD_ERROR: float(s), terms.Z: float(z)}
            for t, b, s, z in zip(self.term_names, self.coef, self.std_error, self.z)
        ]

    def to_csv(self, path: Union[str, Path]) -> None:
        """
        Writes term, estimate, std_error and z.
        """
        _write_rows(self.rows(), path)

    def grid_to_csv(self, path: Union[str, Path]) -> None:
        """
        Writes the predicted-log-odds grid, one column per quasi-identifier.
        """
        _write_rows(list(self.grid), path)


def fit_attribution(
    flags: Sequence[bool],
    original: Dataset,
    qi: Sequence[str],
    interactions: str = NO_INTERACTIONS,
    conditioning: Optional[Mapping[str, Sequence[float]]] = None,
) -> AttributionModel:
    """
    Fits an unpenalized logistic regression of the flags on the
    quasi-identifiers by iteratively reweighted least squares.

    Args:
        flags (Sequence[bool]): One at-risk flag per row of original.
        original (Dataset): The scored records, in flag order.
        qi (Sequence[str]): Quasi-identifier columns.
        interactions (str, optional): "none", "two_way" or "three_way".
            Defaults to "none".
        conditioning (Mapping[str, Sequence[float]], optional): Values at
            which continuous quasi-identifiers are held in the prediction
            grid. Defaults to None, the sample quartiles.

    Returns:
        AttributionModel: Coefficients, standard errors and the grid of
        predicted log-odds over observed categorical combinations.

    Raises:
        DegenerateFlags: If every flag has the same value.
        LengthMismatch: If flags and original differ in length.
        UnknownColumn: If a quasi-identifier is not in original.

    """
    if interactions not in INTERACTION_ORDERS:
        raise ConfigurationError(
            f"interactions must be one of {sorted(INTERACTION_ORDERS)}, got {interactions!r}."
        )
    y = np.asarray(flags, dtype=bool)
    if len(y) != original.n:
        raise LengthMismatch("flags and records", len(y), original.n)
    if y.all() or not y.any():
        raise DegenerateFlags(bool(y[0]) if len(y) else False)
    qi = list(qi)
    for name in qi:
        if name not in original.schema:
            raise UnknownColumn(name, original.names)

    order = min(INTERACTION_ORDERS[interactions], len(qi))
    encodings = [_encode(original, name) for name in qi]
    values = {name: original.labels(name) for name in qi}
    names, X = _design(encodings, values, order, original.n)
    kept = _independent_columns(X)
    dropped = tuple(names[j] for j in range(len(names)) if j not in kept)
    if dropped:
        warnings.warn(
            f"Dropped {len(dropped)} linearly dependent terms: {', '.join(dropped)}.",
            RankDeficientDesign,
        )
    X = X[:, kept]

    fit = irls_binary(X, y.astype(np.float64))
    separated = fit.separated
    if separated:
        warnings.warn(
            f"Flags are perfectly separated; refitting with ridge {SEPARATION_RIDGE}.",
            PerfectSeparation,
        )
        fit = irls_binary(X, y.astype(np.float64), ridge=SEPARATION_RIDGE)
    if not fit.converged:
        logger.info("Attribution fit stopped before converging.")
    std_error = np.sqrt(np.clip(np.diag(fit.covariance), 0.0, None))

    grid = _prediction_grid(original, encodings, order, kept, fit.coef, conditioning or {})
    return AttributionModel(
        qi=tuple(qi),
        interactions=interactions,
        term_names=tuple(names[j] for j in kept),
        coef=fit.coef,
        std_error=std_error,
        dropped=dropped,
        separated=separated,
        converged=fit.converged,
        log_odds=X @ fit.coef,
        grid=grid,
    )


def _prediction_grid(
    original: Dataset,
    encodings: Sequence[_Encoding],
    order: int,
    kept: Sequence[int],
    coef: np.ndarray,
    conditioning: Mapping[str, Sequence[float]],
) -> Tuple[Dict[str, Any], ...]:
    categorical = [enc.name for enc in encodings if enc.is_categorical]
    continuous = [enc.name for enc in encodings if not enc.is_categorical]
    if categorical:
        observed = list(
            dict.fromkeys(
                zip(*[[MISSING_LEVEL if v is None else v for v in original.labels(c)] for c in categorical])
            )
        )
    else:
        observed = [()]
    held = []
    for name in continuous:
        if name in conditioning:
            held.append([float(v) for v in conditioning[name]])
        else:
            x = original.column(name)
            held.append(np.quantile(x[~np.isnan(x)], DEFAULT_QUANTILES).tolist())
    cells = [cat + cont for cat in observed for cont in itertools.product(*held)]
    names = categorical + continuous
    values = {name: [cell[j] for cell in cells] for j, name in enumerate(names)}
    _, X = _design(encodings, values, order, len(cells))
    log_odds = X[:, list(kept)] @ coef
    return tuple(
        {**dict(zip(names, cell)), terms.LOG_ODDS: float(lo)} for cell, lo in zip(cells, log_odds)
    )
