from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy import optimize, special, stats

from ._core import ConfigurationError, DataError, derive_seed, make_rng, parallel_map
from .dataset import Dataset
from .interfaces import (
    DEFAULT_BOOTSTRAP,
    DEFAULT_EPSILON,
    DEFAULT_LEVEL,
    DEFAULT_TAU,
    check_threshold,
)
from .learners import AttackerSpec
from .risk import rapid_assess

logger = logging.getLogger(__name__)

MIN_REPLICATES = 100
"""Smallest bootstrap replicate count bootstrap_ci accepts."""

MIN_RETRAINING_REPLICATES = 20
"""Smallest replicate count retraining_bootstrap_ci accepts."""

BOOTSTRAP_PERCENTILE = "bootstrap_percentile"
RETRAINING_BOOTSTRAP = "retraining_bootstrap"
WILSON = "wilson"
CLOPPER_PEARSON = "clopper_pearson"


class TooFewReplicates(ConfigurationError):
    def __init__(self, replicates: int, minimum: int) -> None:
        super().__init__(f"{replicates} bootstrap replicates requested; at least {minimum} needed.")


class InvalidCounts(ConfigurationError):
    def __init__(self, k: Any, n: Any) -> None:
        super().__init__(f"Counts k={k}, n={n} are invalid; need integers 0 <= k <= n, n >= 1.")


class EmptyInput(DataError):
    """
    Error raised when there is nothing to summarize.
    """


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    lower: float
    upper: float
    level: float
    method: str
    replicates: Optional[int] = None

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "point": self.point,
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "method": self.method,
        }
        if self.replicates is not None:
            out["replicates"] = self.replicates
        return out


def _clamped(
    point: float, lower: float, upper: float, level: float, method: str, reps: Optional[int] = None
) -> IntervalEstimate:
    lower = max(0.0, min(lower, point))
    upper = min(1.0, max(upper, point))
    return IntervalEstimate(float(point), float(lower), float(upper), level, method, reps)


def bootstrap_ci(
    flags: Sequence[bool],
    replicates: int = DEFAULT_BOOTSTRAP,
    level: float = DEFAULT_LEVEL,
    rng_seed: int = 0,
    threads: Optional[int] = None,
) -> IntervalEstimate:
    """
    Percentile bootstrap interval for the at-risk proportion, resampling the
    record-level flags with the attacker held fixed.

    Args:
        flags (Sequence[bool]): Per-record at-risk indicators.
        replicates (int, optional): Number of resamples. Defaults to 500.
        level (float, optional): Confidence level. Defaults to 0.95.
        rng_seed (int, optional): Seed; replicate i uses stream i. Defaults
            to 0.
        threads (int, optional): Worker threads. Defaults to None.

    Returns:
        IntervalEstimate: Linear-interpolation percentile interval.

    Raises:
        TooFewReplicates: If replicates < 100.
        EmptyInput: If flags is empty.

    """
    level = check_threshold("level", level, 0.0, 1.0)
    if replicates < MIN_REPLICATES:
        raise TooFewReplicates(replicates, MIN_REPLICATES)
    x = np.asarray(flags, dtype=np.float64)
    n = len(x)
    if n == 0:
        raise EmptyInput("Cannot bootstrap an empty set of flags.")

    def one(rep: int) -> float:
        idx = make_rng(rng_seed, rep).integers(0, n, size=n)
        return float(x[idx].mean())

    means = np.array(parallel_map(one, range(replicates), threads))
    alpha = 1.0 - level
    lower, upper = np.quantile(means, [alpha / 2, 1 - alpha / 2], method="linear")
    return _clamped(float(x.mean()), lower, upper, level, BOOTSTRAP_PERCENTILE, replicates)


def _check_counts(k: Any, n: Any) -> None:
    if int(k) != k or int(n) != n or n < 1 or not 0 <= k <= n:
        raise InvalidCounts(k, n)


def wilson_interval(k: int, n: int, level: float = DEFAULT_LEVEL) -> IntervalEstimate:
    """
    Wilson score interval for k successes out of n.

    Raises:
        InvalidCounts: Unless 0 <= k <= n and n >= 1.
    """
    _check_counts(k, n)
    level = check_threshold("level", level, 0.0, 1.0)
    z = float(stats.norm.ppf(1 - (1 - level) / 2))
    p = k / n
    denom = 1 + z ** 2 / n
    center = (p + z ** 2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z ** 2 / (4 * n ** 2)) / denom
    lower = 0.0 if k == 0 else center - half
    upper = 1.0 if k == n else center + half
    return _clamped(p, lower, upper, level, WILSON)


def beta_quantile(q: float, a: float, b: float) -> float:
    """
    The q-quantile of Beta(a, b), by bisection on the regularized incomplete
    beta function.
    """
    return float(
        optimize.bisect(lambda x: special.betainc(a, b, x) - q, 0.0, 1.0, xtol=1e-12, maxiter=200)
    )


def clopper_pearson_interval(k: int, n: int, level: float = DEFAULT_LEVEL) -> IntervalEstimate:
    """
    Exact binomial interval from Beta quantiles.

    Raises:
        InvalidCounts: Unless 0 <= k <= n and n >= 1.
    """
    _check_counts(k, n)
    level = check_threshold("level", level, 0.0, 1.0)
    alpha = 1 - level
    lower = 0.0 if k == 0 else beta_quantile(alpha / 2, k, n - k + 1)
    upper = 1.0 if k == n else beta_quantile(1 - alpha / 2, k + 1, n - k)
    return _clamped(k / n, lower, upper, level, CLOPPER_PEARSON)


def retraining_bootstrap_ci(
    original: Dataset,
    released: Dataset,
    qi: Sequence[str],
    sensitive: str,
    spec: Optional[AttackerSpec] = None,
    tau: float = DEFAULT_TAU,
    epsilon: float = DEFAULT_EPSILON,
    metric: Any = None,
    replicates: int = 100,
    level: float = DEFAULT_LEVEL,
    rng_seed: int = 0,
    threads: Optional[int] = None,
) -> IntervalEstimate:
    """
    Sensitivity-mode interval: every replicate resamples both the original and
    the released records, retrains the attacker and rescores. Far more
    expensive than bootstrap_ci.

    Raises:
        TooFewReplicates: If replicates < 20.
    """
    level = check_threshold("level", level, 0.0, 1.0)
    if replicates < MIN_RETRAINING_REPLICATES:
        raise TooFewReplicates(replicates, MIN_RETRAINING_REPLICATES)
    spec = spec or AttackerSpec()
    point = rapid_assess(
        original, released, qi, sensitive, spec, tau, epsilon, metric, threads=threads
    ).score
    scores = []
    for rep in range(replicates):
        rng = make_rng(rng_seed, rep)
        orig = original.take(rng.integers(0, original.n, size=original.n))
        rel = released.take(rng.integers(0, released.n, size=released.n))
        rep_spec = spec.with_seed(derive_seed(spec.seed, rep))
        scores.append(
            rapid_assess(orig, rel, qi, sensitive, rep_spec, tau, epsilon, metric, threads=threads).score
        )
        logger.debug("Retraining bootstrap replicate %d scored %.4f.", rep, scores[-1])
    alpha = 1 - level
    lower, upper = np.quantile(scores, [alpha / 2, 1 - alpha / 2], method="linear")
    return _clamped(point, lower, upper, level, RETRAINING_BOOTSTRAP, replicates)
