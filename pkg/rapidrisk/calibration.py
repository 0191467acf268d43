"""
Threshold-sensitivity curves and permutation-null threshold selection.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from . import _terms as terms
from ._core import ConfigurationError, derive_seed, parallel_map
from .dataset import Dataset, permute_column
from .learners import AttackerSpec
from .risk import (
    CategoricalRecordRisk,
    RapidResult,
    RecordRisk,
    rapid_assess,
)
from .typing import Grid
from .uncertainty import EmptyInput

logger = logging.getLogger(__name__)

CATEGORICAL_TAU = "categorical_tau"
CONTINUOUS_EPSILON = "continuous_epsilon"
PERMUTE_RELEASED = "released"
PERMUTE_ORIGINAL = "original"
MIN_PERMUTATIONS = 20


class TooFewPermutations(ConfigurationError):
    def __init__(self, n_perm: int) -> None:
        super().__init__(f"{n_perm} permutations requested; at least {MIN_PERMUTATIONS} needed.")


class NoThresholdFound(UserWarning):
    """
    Warning issued when observed risk never exceeds the permutation null.
    """


def default_tau_grid() -> np.ndarray:
    """
    Returns:
        np.ndarray: 0.05, 0.10, ..., 0.95.

    """
    return np.round(np.arange(1, 20) * 0.05, 10)


def parse_grid(raw: str) -> np.ndarray:
    """
    Args:
        raw (str): Either "start:stop:step" (stop included) or a comma
            separated list of values.

    Returns:
        np.ndarray: The ascending grid.

    Raises:
        ConfigurationError: If raw cannot be parsed or is not ascending.

    """
    try:
        if ":" in raw:
            start, stop, step = (float(p) for p in raw.split(":"))
            if step <= 0:
                raise ValueError
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            grid = np.round(start + step * np.arange(count), 10)
        else:
            grid = np.array([float(p) for p in raw.split(",") if p.strip()])
    except ValueError:
        raise ConfigurationError(f"Cannot parse threshold grid {raw!r}.")
    if len(grid) == 0:
        raise ConfigurationError(f"Threshold grid {raw!r} holds no values.")
    _check_grid(grid)
    return grid


def _check_grid(grid: np.ndarray) -> None:
    if len(grid) == 0:
        raise EmptyInput("The threshold grid is empty.")
    if np.any(np.diff(grid) < 0):
        raise ConfigurationError("Threshold grids must be sorted ascending.")


@dataclass(frozen=True)
class ThresholdCurve:
    """
    RAPID at each point of a threshold grid, optionally with one row of scores
    per released replicate.
    """

    grid: np.ndarray
    scores: np.ndarray
    kind: str
    replicate_scores: Optional[np.ndarray] = None

    def rows(self) -> List[Dict[str, float]]:
        out = []
        for j, (t, s) in enumerate(zip(self.grid.tolist(), self.scores.tolist())):
            row: Dict[str, float] = {terms.THRESHOLD: t, terms.SCORE: s}
            if self.replicate_scores is not None:
                col = self.replicate_scores[:, j]
                row[terms.SCORE_MIN] = float(col.min())
                row[terms.SCORE_MAX] = float(col.max())
                for i, v in enumerate(col.tolist()):
                    row[f"{terms.REPLICATE}_{i}"] = v
            out.append(row)
        return out

    def to_csv(self, path: Union[str, Path]) -> None:
        """
        Writes threshold, score (and score_min, score_max, one column per
        replicate when present) as CSV.
        """
        rows = self.rows()
        header = list(rows[0].keys())
        with open(path, "w", encoding="utf-8", newline="") as file:
            writer = csv.writer(file, lineterminator="\n")
            writer.writerow(header)
            writer.writerows([[row[h] for h in header] for row in rows])


def _curve_scores(records: Sequence[RecordRisk], grid: np.ndarray) -> np.ndarray:
    if isinstance(records[0], CategoricalRecordRisk):
        r = np.array([rec.r for rec in records])  # type: ignore
        return (r[None, :] > grid[:, None]).mean(axis=1)
    e = np.array([rec.e for rec in records])  # type: ignore
    return (e[None, :] < grid[:, None]).mean(axis=1)


def threshold_curve(records: Union[RapidResult, Sequence[RecordRisk]], grid: Grid) -> ThresholdCurve:
    """
    Re-thresholds stored record risks over a grid; nothing is retrained.

    Args:
        records (Union[RapidResult, Sequence[RecordRisk]]): A result or its
            records.
        grid (Grid): Ascending tau (categorical) or epsilon (continuous)
            values.

    Returns:
        ThresholdCurve: RAPID at each grid value.

    Raises:
        EmptyInput: If records or grid is empty.

    """
    if isinstance(records, RapidResult):
        records = records.records
    grid = np.asarray(grid, dtype=np.float64)
    if not len(records):
        raise EmptyInput("No records to build a threshold curve from.")
    _check_grid(grid)
    kind = CATEGORICAL_TAU if isinstance(records[0], CategoricalRecordRisk) else CONTINUOUS_EPSILON
    return ThresholdCurve(grid, _curve_scores(records, grid), kind)


def replicate_curve(results: Sequence[RapidResult], grid: Grid) -> ThresholdCurve:
    """
    One curve per released replicate, averaged, with the per-replicate matrix
    kept for a min/max band.
    """
    if not results:
        raise EmptyInput("No results to build a replicate curve from.")
    curves = [threshold_curve(res, grid) for res in results]
    matrix = np.vstack([c.scores for c in curves])
    return ThresholdCurve(curves[0].grid, matrix.mean(axis=0), curves[0].kind, matrix)


@dataclass(frozen=True)
class PermutationNull:
    grid: np.ndarray
    observed: np.ndarray
    null_scores: np.ndarray
    null_quantiles: np.ndarray
    quantile: float
    selected_threshold: Optional[float]
    permuted: str

    @property
    def found(self) -> bool:
        return self.selected_threshold is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": self.grid.tolist(),
            "observed": self.observed.tolist(),
            "null_quantiles": self.null_quantiles.tolist(),
            "null_scores": self.null_scores.tolist(),
            "quantile": self.quantile,
            "selected_threshold": self.selected_threshold,
            "found": self.found,
            "permuted": self.permuted,
        }


def permutation_null_threshold(
    original: Dataset,
    released: Dataset,
    qi: Sequence[str],
    sensitive: str,
    spec: Optional[AttackerSpec] = None,
    n_perm: int = 100,
    quantile: float = 0.95,
    grid: Optional[Grid] = None,
    rng_seed: int = 0,
    permute: str = PERMUTE_RELEASED,
    threads: Optional[int] = None,
) -> PermutationNull:
    """
    Builds a no-information null for RAPID by permuting the sensitive column and
    retraining, then picks the smallest tau at which observed RAPID beats the
    null's quantile.

    Args:
        original (Dataset): The original data.
        released (Dataset): The released data.
        qi (Sequence[str]): Quasi-identifier column names.
        sensitive (str): A categorical sensitive column.
        spec (AttackerSpec, optional): Defaults to None, a random forest.
        n_perm (int, optional): Permutations, at least 20. Defaults to 100.
        quantile (float, optional): Null quantile to beat. Defaults to 0.95.
        grid (Grid, optional): Tau grid. Defaults to None, meaning
            default_tau_grid().
        rng_seed (int, optional): Seed. Defaults to 0.
        permute (str, optional): "released" permutes the attacker's training
            signal; "original" permutes the scored truth. Defaults to
            "released".
        threads (int, optional): Worker threads across permutations.
            Defaults to None.

    Returns:
        PermutationNull: Observed and null curves plus the selected tau, which
        is None (with a NoThresholdFound warning) when none qualifies.

    Raises:
        TooFewPermutations: If n_perm < 20.
        ConfigurationError: If the sensitive column is continuous or permute is
            unknown.

    """
    if n_perm < MIN_PERMUTATIONS:
        raise TooFewPermutations(n_perm)
    if permute not in (PERMUTE_RELEASED, PERMUTE_ORIGINAL):
        raise ConfigurationError(f"permute must be 'released' or 'original', got {permute!r}.")
    if not original.kind(sensitive).is_categorical:
        raise ConfigurationError("Permutation thresholds need a categorical sensitive column.")
    spec = spec or AttackerSpec()
    tau_grid = default_tau_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    _check_grid(tau_grid)
    logger.info("Building the permutation null by permuting %r in the %s data.", sensitive, permute)

    observed = threshold_curve(
        rapid_assess(original, released, qi, sensitive, spec, threads=threads), tau_grid
    ).scores

    def one(p: int) -> np.ndarray:
        seed = derive_seed(rng_seed, p)
        orig, rel = original, released
        if permute == PERMUTE_RELEASED:
            rel = permute_column(released, sensitive, seed)
        else:
            orig = permute_column(original, sensitive, seed)
        rep_spec = spec.with_seed(derive_seed(spec.seed, p))  # type: ignore
        result = rapid_assess(orig, rel, qi, sensitive, rep_spec, threads=1)
        logger.debug("Permutation %d scored %.4f at tau=%s.", p, result.score, result.tau)
        return threshold_curve(result, tau_grid).scores

    null = np.vstack(parallel_map(one, range(n_perm), threads))
    q = np.quantile(null, quantile, axis=0, method="linear")
    above = np.flatnonzero(observed > q)
    selected = float(tau_grid[above[0]]) if len(above) else None
    if selected is None:
        warnings.warn(
            "Observed RAPID never exceeds the permutation null; no threshold selected.",
            NoThresholdFound,
        )
    return PermutationNull(tau_grid, observed, null, q, quantile, selected, permute)
