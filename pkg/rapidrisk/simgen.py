"""
Simulated health microdata whose quasi-identifier to disease dependency is
tuned by one parameter, kappa, plus the kappa and threshold sweeps built on it.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from . import _terms as terms
from ._core import ConfigurationError, derive_seed, make_rng, parallel_map
from .dataset import Dataset, Schema
from .dtypes import Categorical, Continuous
from .interfaces import DEFAULT_TAU, _Interface
from .learners import AttackerSpec
from .risk import RapidResult, rapid_assess
from .synthesizer import SynthesisPlan, synthesize_cart
from .typing import Grid
from .uncertainty import EmptyInput

logger = logging.getLogger(__name__)

GENDER = "gender"
AGE = "age"
EDUCATION = "education"
INCOME = "income"
HEALTH = "health"
DISEASE = "disease_status"

SIM_QI = (GENDER, AGE, EDUCATION, INCOME, HEALTH)
"""The quasi-identifiers of a simulated dataset."""

GENDER_LEVELS = ("female", "male")
EDUCATION_LEVELS = ("0", "1", "2")
DISEASE_LEVELS = ("healthy", "diabetic", "hypertensive")

# Education latent: 0.8 SES - 0.4 age
EDU_SES, EDU_AGE = 0.8, -0.4
# Log income: 0.5 SES + 0.3 age + 0.25 education, centered at 10
INC_SES, INC_AGE, INC_EDU = 0.5, 0.3, 0.25
INCOME_CENTER = 10.0
# Health: 0.6 SES - 0.5 age + 0.2 education + 0.2 log income
HEALTH_SES, HEALTH_AGE, HEALTH_EDU, HEALTH_INC = 0.6, -0.5, 0.2, 0.2
HEALTH_SCALE = 100.0
# Disease logits against healthy, slopes multiplied by kappa
DIABETIC_INTERCEPT, DIABETIC_AGE, DIABETIC_INC, DIABETIC_EDU = -1.5, 0.8, -0.3, -0.2
HYPER_INTERCEPT, HYPER_AGE, HYPER_INC, HYPER_EDU = -1.3, 1.0, -0.2, -0.1
# Gender (male) logit: 0.3 SES - 0.2 age + 0.2 education, no noise term
GENDER_SES, GENDER_AGE, GENDER_EDU = 0.3, -0.2, 0.2


class NegativeKappa(ConfigurationError):
    def __init__(self, kappa: float) -> None:
        super().__init__(f"kappa must be >= 0, got {kappa}.")


class EmptyGrid(ConfigurationError):
    """
    Error raised when a sweep is given no kappa values.
    """


class SimConfig(_Interface[Any]):
    def __init__(
        self,
        n: int = 1000,
        kappa: float = 1.0,
        seed: int = 0,
        age_mean: float = 45.0,
        age_sd: float = 12.0,
        age_min: float = 18.0,
        age_max: float = 85.0,
        cutoffs: Tuple[float, float] = (-0.3, 0.7),
    ) -> None:
        """
        Args:
            n (int, optional): Records, defaults to 1000.
            kappa (float, optional): Dependency strength, defaults to 1.0.
            seed (int, optional): Seed, defaults to 0.
            age_mean (float, optional): Defaults to 45.
            age_sd (float, optional): Defaults to 12.
            age_min (float, optional): Defaults to 18.
            age_max (float, optional): Defaults to 85.
            cutoffs (Tuple[float, float], optional): Education latent cutoffs,
                defaults to (-0.3, 0.7).

        Raises:
            NegativeKappa: If kappa < 0.
            ConfigurationError: If n < 1 or bounds are not ordered.

        """
        if kappa < 0:
            raise NegativeKappa(kappa)
        if n < 1:
            raise ConfigurationError(f"n must be >= 1, got {n}.")
        if not age_min < age_max or age_sd <= 0:
            raise ConfigurationError("Age bounds must be ordered and age_sd positive.")
        if not cutoffs[0] < cutoffs[1]:
            raise ConfigurationError(f"Education cutoffs {cutoffs} must be ascending.")
        self.n = int(n)
        self.kappa = float(kappa)
        self.seed = int(seed)
        self.age_mean = float(age_mean)
        self.age_sd = float(age_sd)
        self.age_min = float(age_min)
        self.age_max = float(age_max)
        self.cutoffs = (float(cutoffs[0]), float(cutoffs[1]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            terms.KAPPA: self.kappa,
            "seed": self.seed,
            "age_mean": self.age_mean,
            "age_sd": self.age_sd,
            "age_min": self.age_min,
            "age_max": self.age_max,
            "cutoffs": list(self.cutoffs),
        }


def signal_noise_weights(kappa: float) -> Tuple[float, float]:
    """
    Returns:
        Tuple[float, float]: (sqrt(kappa / (1 + kappa)), sqrt(1 / (1 + kappa))).

    Raises:
        NegativeKappa: If kappa < 0.

    """
    if kappa < 0:
        raise NegativeKappa(kappa)
    return math.sqrt(kappa / (1 + kappa)), math.sqrt(1 / (1 + kappa))


def truncated_normal(
    rng: np.random.Generator, n: int, mean: float, sd: float, low: float, high: float
) -> np.ndarray:
    """
    Inverse-CDF draws from a normal truncated to [low, high].
    """
    lo = special.ndtr((low - mean) / sd)
    hi = special.ndtr((high - mean) / sd)
    u = rng.uniform(lo, hi, size=n)
    return np.clip(mean + sd * special.ndtri(u), low, high)


def _standardize(x: np.ndarray) -> np.ndarray:
    sd = x.std(ddof=1) if len(x) > 1 else 0.0
    return (x - x.mean()) / sd if sd > 0 else x - x.mean()


def generate(config: Optional[SimConfig] = None) -> Dataset:
    """
    Draws one simulated dataset. Standardized predictors use the sample mean
    and standard deviation of the generated vector.

    Args:
        config (SimConfig, optional): Defaults to None, SimConfig().

    Returns:
        Dataset: gender, age, education, income, health and disease_status,
        with disease_status sensitive and the rest quasi-identifiers. Education
        is labelled by its ordinal code "0", "1" or "2".

    """
    config = config or SimConfig()
    n, kappa = config.n, config.kappa
    w_s, w_n = signal_noise_weights(kappa)
    rng = make_rng(config.seed)

    ses = rng.standard_normal(n)
    age = truncated_normal(rng, n, config.age_mean, config.age_sd, config.age_min, config.age_max)
    age_z = _standardize(age)

    latent = w_s * (EDU_SES * ses + EDU_AGE * age_z) + w_n * rng.standard_normal(n)
    c1, c2 = config.cutoffs
    edu = np.where(latent < c1, 0, np.where(latent < c2, 1, 2))

    log_star = w_s * (INC_SES * ses + INC_AGE * age_z + INC_EDU * edu) + w_n * rng.standard_normal(n)
    log_income = INCOME_CENTER + log_star
    income = np.exp(log_income)
    inc_z = _standardize(log_income)

    h_star = (
        w_s * (HEALTH_SES * ses + HEALTH_AGE * age_z + HEALTH_EDU * edu + HEALTH_INC * inc_z)
        + w_n * rng.standard_normal(n)
    )
    health = HEALTH_SCALE / (1.0 + np.exp(-h_star))

    logits = np.column_stack(
        [
            np.zeros(n),
            DIABETIC_INTERCEPT + kappa * (DIABETIC_AGE * age_z + DIABETIC_INC * inc_z + DIABETIC_EDU * edu),
            HYPER_INTERCEPT + kappa * (HYPER_AGE * age_z + HYPER_INC * inc_z + HYPER_EDU * edu),
        ]
    )
    probs = special.softmax(logits, axis=1)
    u = rng.uniform(size=n)
    disease = np.minimum((u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1), 2)

    eta = w_s * (GENDER_SES * ses + GENDER_AGE * age_z + GENDER_EDU * edu)
    male = rng.uniform(size=n) < special.expit(eta)

    logger.info("Generated %d records at kappa=%s, standardizing with sample moments.", n, kappa)
    columns = [
        (GENDER, Categorical(GENDER_LEVELS)),
        (AGE, Continuous()),
        (EDUCATION, Categorical(EDUCATION_LEVELS)),
        (INCOME, Continuous()),
        (HEALTH, Continuous()),
        (DISEASE, Categorical(DISEASE_LEVELS)),
    ]
    schema = Schema(columns, {**{q: terms.QI for q in SIM_QI}, DISEASE: terms.SENSITIVE})
    return Dataset(
        schema,
        {
            GENDER: male.astype(np.int64),
            AGE: age,
            EDUCATION: edu.astype(np.int64),
            INCOME: income,
            HEALTH: health,
            DISEASE: disease.astype(np.int64),
        },
    )


@dataclass(frozen=True)
class SweepRun:
    kappa: float
    rep: int
    result: RapidResult


@dataclass(frozen=True)
class SweepTable:
    """
    Per-run rows and per-kappa (or per kappa and tau) summary rows.
    """

    runs: Tuple[Dict[str, Any], ...]
    summary: Tuple[Dict[str, Any], ...]

    def to_csv(self, path: Union[str, Path], which: str = "runs") -> None:
        rows = self.runs if which == "runs" else self.summary
        header = list(rows[0].keys())
        with open(path, "w", encoding="utf-8", newline="") as file:
            writer = csv.writer(file, lineterminator="\n")
            writer.writerow(header)
            writer.writerows([[row[h] for h in header] for row in rows])


def _sweep_runs(
    kappas: Sequence[float],
    n: int,
    replications: int,
    spec: Optional[AttackerSpec],
    tau: float,
    plan: Optional[SynthesisPlan],
    seed: int,
    threads: Optional[int],
) -> List[SweepRun]:
    if len(kappas) == 0:
        raise EmptyGrid("The kappa grid is empty.")
    if replications < 1:
        raise ConfigurationError(f"replications must be >= 1, got {replications}.")
    for kappa in kappas:
        if kappa < 0:
            raise NegativeKappa(kappa)
    spec = spec or AttackerSpec()
    plan = plan or SynthesisPlan()
    jobs = [(i, float(k), rep) for i, k in enumerate(kappas) for rep in range(replications)]

    def one(job: Tuple[int, float, int]) -> SweepRun:
        i, kappa, rep = job
        run_seed = derive_seed(seed, i, rep)
        data = generate(SimConfig(n=n, kappa=kappa, seed=run_seed))
        released = synthesize_cart(data, plan.updated(m=1, seed=run_seed), threads=1)[0]
        result = rapid_assess(
            data, released, list(SIM_QI), DISEASE, spec.with_seed(run_seed), tau, threads=1  # type: ignore
        )
        logger.debug("kappa=%s rep=%d scored %.4f.", kappa, rep, result.score)
        return SweepRun(kappa, rep, result)

    return parallel_map(one, jobs, threads)


def kappa_sweep(
    kappas: Grid,
    n: int = 1000,
    replications: int = 10,
    spec: Optional[AttackerSpec] = None,
    tau: float = DEFAULT_TAU,
    plan: Optional[SynthesisPlan] = None,
    seed: int = 0,
    threads: Optional[int] = None,
) -> SweepTable:
    """
    For every kappa and replication: generate, synthesize one CART replicate,
    assess. Runs are spread across threads with seeds derived from
    (seed, kappa index, replication).

    Returns:
        SweepTable: runs (kappa, rep, rapid, accuracy) and summary (kappa,
        mean_rapid, sd, mean_accuracy).

    Raises:
        EmptyGrid: If kappas is empty.
        NegativeKappa: If a kappa is negative.

    """
    runs = _sweep_runs(list(kappas), n, replications, spec, tau, plan, seed, threads)
    run_rows = tuple(
        {
            terms.KAPPA: run.kappa,
            terms.REP: run.rep,
            terms.RAPID: run.result.score,
            terms.ACCURACY: run.result.accuracy,
        }
        for run in runs
    )
    summary = []
    for kappa in dict.fromkeys(run.kappa for run in runs):
        scores = np.array([run.result.score for run in runs if run.kappa == kappa])
        accs = np.array([run.result.accuracy for run in runs if run.kappa == kappa], dtype=float)
        summary.append(
            {
                terms.KAPPA: kappa,
                terms.MEAN_RAPID: float(scores.mean()),
                terms.SD: float(scores.std(ddof=1)) if len(scores) > 1 else 0.0,
                terms.MEAN_ACCURACY: float(accs.mean()),
            }
        )
    return SweepTable(run_rows, tuple(summary))


def threshold_sweep(
    kappas: Grid,
    taus: Grid,
    n: int = 1000,
    replications: int = 10,
    spec: Optional[AttackerSpec] = None,
    plan: Optional[SynthesisPlan] = None,
    seed: int = 0,
    threads: Optional[int] = None,
) -> SweepTable:
    """
    Like kappa_sweep, but re-thresholds every run's record risks over a tau
    grid, so each (kappa, rep) is trained once.

    Returns:
        SweepTable: runs (kappa, rep, tau, rapid) and summary (kappa, tau,
        mean_rapid, sd).

    """
    tau_grid = np.asarray(taus, dtype=np.float64)
    if len(tau_grid) == 0:
        raise EmptyInput("The tau grid is empty.")
    runs = _sweep_runs(list(kappas), n, replications, spec, DEFAULT_TAU, plan, seed, threads)
    run_rows = []
    for run in runs:
        r = run.result.r
        for tau in tau_grid.tolist():
            run_rows.append(
                {
                    terms.KAPPA: run.kappa,
                    terms.REP: run.rep,
                    terms.TAU: tau,
                    terms.RAPID: float(np.mean(r > tau)),
                }
            )
    summary = []
    for kappa in dict.fromkeys(run.kappa for run in runs):
        for tau in tau_grid.tolist():
            scores = np.array(
                [row[terms.RAPID] for row in run_rows if row[terms.KAPPA] == kappa and row[terms.TAU] == tau]
            )
            summary.append(
                {
                    terms.KAPPA: kappa,
                    terms.TAU: tau,
                    terms.MEAN_RAPID: float(scores.mean()),
                    terms.SD: float(scores.std(ddof=1)) if len(scores) > 1 else 0.0,
                }
            )
    return SweepTable(tuple(run_rows), tuple(summary))
