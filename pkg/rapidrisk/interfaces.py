from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Iterator, Mapping, Sequence, Tuple, TypeVar

import toml

from ._core import ConfigurationError, resolve_threads

DEFAULT_TAU = 0.3
"""Default normalized-gain threshold for categorical sensitive attributes."""
DEFAULT_EPSILON = 0.10
"""Default error tolerance for continuous sensitive attributes."""
DEFAULT_DELTA = 0.01
"""Default smoothing constant of the relative error metrics."""
DEFAULT_BOOTSTRAP = 500
"""Default number of bootstrap replicates."""
DEFAULT_LEVEL = 0.95
"""Default confidence level of every interval."""
SETTINGS_TABLE = "rapidrisk"
"""Name of the TOML table read by load_settings."""

_T = TypeVar("_T")


class _Interface(Mapping[str, _T]):
    """
    Base class for all configuration objects. Interfaces behave like read-only
    dictionaries so they can be echoed straight into reports.
    """

    def to_dict(self) -> Dict[str, _T]:
        return {}

    def __iter__(self) -> Iterator[str]:
        return iter(self.to_dict())

    def __getitem__(self, k: str) -> _T:
        return self.to_dict()[k]

    def __len__(self) -> int:
        return len(self.to_dict())

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_dict()})"


def check_threshold(name: str, value: float, low: float, high: float) -> float:
    """
    Validates that value lies strictly inside (low, high).

    Args:
        name (str): The parameter name, for the error message.
        value (float): The value to check.
        low (float): Exclusive lower bound.
        high (float): Exclusive upper bound.

    Returns:
        float: The value, as a float.

    Raises:
        ConfigurationError: If the value is outside the open interval.

    """
    value = float(value)
    if not low < value < high:
        raise ConfigurationError(f"{name}={value} must lie in ({low}, {high}).")
    return value


class RapidSettings(_Interface[Any]):
    """
    Tool-wide defaults. Loaded from a TOML file by the CLI; explicit flags win
    over file values, which win over the defaults here.
    """

    _fields = (
        "tau",
        "epsilon",
        "metric",
        "delta",
        "bootstrap",
        "level",
        "attackers",
        "n_trees",
        "seed",
        "threads",
    )

    def __init__(
        self,
        tau: float = DEFAULT_TAU,
        epsilon: float = DEFAULT_EPSILON,
        metric: str = "symmetric",
        delta: float = DEFAULT_DELTA,
        bootstrap: int = DEFAULT_BOOTSTRAP,
        level: float = DEFAULT_LEVEL,
        attackers: Sequence[str] = ("rf",),
        n_trees: int = 500,
        seed: int = 0,
        threads: int | None = None,
    ) -> None:
        """

        Args:
            tau (float, optional): Normalized-gain threshold, defaults to 0.3.
            epsilon (float, optional): Continuous error tolerance, defaults to
                0.10.
            metric (str, optional): One of symmetric, stabilised or absolute,
                defaults to symmetric.
            delta (float, optional): Relative-error smoothing, defaults to 0.01.
            bootstrap (int, optional): Bootstrap replicates (0 disables),
                defaults to 500.
            level (float, optional): Confidence level, defaults to 0.95.
            attackers (Sequence[str], optional): Attacker families, defaults to
                ("rf",).
            n_trees (int, optional): Trees per random forest, defaults to 500.
            seed (int, optional): Master seed, defaults to 0.
            threads (int, optional): Worker threads. Defaults to None, meaning
                RAPID_THREADS or all cores.

        """
        self.tau = check_threshold("tau", tau, 0.0, 1.0)
        if float(epsilon) <= 0:
            raise ConfigurationError(f"epsilon={epsilon} must be positive.")
        self.epsilon = float(epsilon)
        self.metric = str(metric)
        self.delta = float(delta)
        self.bootstrap = int(bootstrap)
        self.level = check_threshold("level", level, 0.0, 1.0)
        self.attackers: Tuple[str, ...] = tuple(attackers)
        self.n_trees = int(n_trees)
        self.seed = int(seed)
        self.threads = threads if threads is None else resolve_threads(int(threads))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tau": self.tau,
            "epsilon": self.epsilon,
            "metric": self.metric,
            "delta": self.delta,
            "bootstrap": self.bootstrap,
            "level": self.level,
            "attackers": list(self.attackers),
            "n_trees": self.n_trees,
            "seed": self.seed,
            "threads": self.threads,
        }

    def updated(self, **overrides: Any) -> RapidSettings:
        """
        Args:
            **overrides (Any): Field values to replace; None values are ignored.

        Returns:
            RapidSettings: A new settings object.

        """
        values = self.to_dict()
        for k, v in overrides.items():
            if k not in self._fields:
                raise ConfigurationError(f"Unknown setting {k!r}.")
            if v is not None:
                values[k] = v
        return RapidSettings(**values)


def load_settings(path: str | Path | None = None) -> RapidSettings:
    """
    Reads RapidSettings from the [rapidrisk] table of a TOML file.

    Args:
        path (str | Path, optional): The TOML file. Defaults to None, which
            returns the built-in defaults.

    Returns:
        RapidSettings: The loaded settings.

    Raises:
        ConfigurationError: If the file is missing, unparsable, or holds
            unknown keys.

    """
    if path is None:
        return RapidSettings()
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"Settings file {p} could not be found.")
    try:
        raw = toml.load(p)
    except toml.TomlDecodeError as e:
        raise ConfigurationError(f"Settings file {p} is not valid TOML: {e}")
    table = raw.get(SETTINGS_TABLE, {})
    unknown = set(table) - set(RapidSettings._fields)
    if unknown:
        raise ConfigurationError(
            f"Unknown keys in [{SETTINGS_TABLE}] of {p}: {', '.join(sorted(unknown))}."
        )
    return RapidSettings(**table)
