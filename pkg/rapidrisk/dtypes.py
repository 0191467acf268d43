from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Any, Dict, Iterable, Sequence, Tuple, Type

from ._core import ConfigurationError, DataError
from . import _terms as terms

MISSING_LEVEL = "⟨missing⟩"
"""The extra level that missing categorical quasi-identifier values become."""


class UnknownLevel(DataError):
    """
    Error raised when a value is not among the levels of a categorical column.
    """

    def __init__(self, value: str, levels: Sequence[str], column: str | None = None) -> None:
        """
        Args:
            value (str): The offending value.
            levels (Sequence[str]): The allowed levels.
            column (str, optional): The column name, if known. Defaults to None.
        """
        where = f" in column {column!r}" if column else ""
        super().__init__(f"{value!r}{where} is not one of the levels {list(levels)}.")
        self.value = value
        self.column = column


class ColumnKind(ABC):
    """
    Abstract base class for the two kinds of column a Dataset can hold.
    """

    kind_key: str

    def __str__(self) -> str:
        return self.kind_key

    @property
    def is_categorical(self) -> bool:
        return False

    @abstractmethod
    def parse(self, raw: str) -> float | int:
        """
        Converts a non-empty CSV cell into its stored representation.
        """

    @abstractmethod
    def format(self, value: float | int) -> str:
        """
        Converts a stored value back into its canonical CSV cell.
        """

    def to_dict(self) -> Dict[str, Any]:
        return {terms.KIND: self.kind_key}


class Categorical(ColumnKind):
    """
    Categorical datatype. Values are stored as indices into an ordered, duplicate
    free list of level labels.
    """

    kind_key = terms.CATEGORICAL

    def __init__(self, levels: Iterable[str]) -> None:
        """
        Args:
            levels (Iterable[str]): The level labels, in order.

        Raises:
            ConfigurationError: If levels is empty or has duplicates.
        """
        self._levels: Tuple[str, ...] = tuple(str(lv) for lv in levels)
        if not self._levels:
            raise ConfigurationError("Categorical level lists must be non-empty.")
        if len(set(self._levels)) != len(self._levels):
            raise ConfigurationError(f"Duplicate categorical levels in {list(self._levels)}.")
        self._index = {lv: i for i, lv in enumerate(self._levels)}

    @property
    def levels(self) -> Tuple[str, ...]:
        """
        Returns:
            Tuple[str, ...]: The level labels.

        """
        return self._levels

    @property
    def is_categorical(self) -> bool:
        return True

    def __len__(self) -> int:
        return len(self._levels)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Categorical) and other.levels == self.levels

    def __hash__(self) -> int:
        return hash(self._levels)

    def __repr__(self) -> str:
        return f"Categorical({list(self._levels)})"

    def index(self, label: str) -> int:
        """
        Args:
            label (str): A level label.

        Returns:
            int: The label's position in the level list.

        Raises:
            UnknownLevel: If the label is not a level.

        """
        try:
            return self._index[label]
        except KeyError:
            raise UnknownLevel(label, self._levels)

    def parse(self, raw: str) -> int:
        return self.index(raw)

    def format(self, value: float | int) -> str:
        return self._levels[int(value)]

    def union(self, other: Categorical) -> Categorical:
        """
        Args:
            other (Categorical): Another categorical kind.

        Returns:
            Categorical: This kind's levels followed by the levels of other that
            are not already present.

        """
        extra = [lv for lv in other.levels if lv not in self._index]
        return Categorical([*self._levels, *extra]) if extra else self

    def to_dict(self) -> Dict[str, Any]:
        return {terms.KIND: self.kind_key, terms.LEVELS: list(self._levels)}


class Continuous(ColumnKind):
    """
    Continuous datatype, stored as unit-free float64 values.
    """

    kind_key = terms.CONTINUOUS

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Continuous)

    def __hash__(self) -> int:
        return hash(self.kind_key)

    def __repr__(self) -> str:
        return "Continuous()"

    def parse(self, raw: str) -> float:
        """
        Raises:
            ValueError: If raw is not a number.
        """
        return float(raw)

    def format(self, value: float | int) -> str:
        return format_real(float(value))


class Role:
    """
    The part a column plays in an assessment.
    """

    def __init__(self, role: str) -> None:
        self.role = role

    def __str__(self) -> str:
        return self.role

    def __repr__(self) -> str:
        return f"Role({self.role!r})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Role) and other.role == self.role

    def __hash__(self) -> int:
        return hash(self.role)


QuasiIdentifier = Role(terms.QI)
"""A column assumed to be known to the attacker."""

Sensitive = Role(terms.SENSITIVE)
"""The confidential column the attacker tries to infer."""

Unused = Role(terms.UNUSED)
"""A column that takes no part in the assessment."""

ROLES = (QuasiIdentifier, Sensitive, Unused)
"""A tuple of all roles."""

ROLE_MAP = {str(r): r for r in ROLES}
"""Dictionary mapping role names to Role objects."""

KIND_MAP: Dict[str, Type[ColumnKind]] = {
    terms.CATEGORICAL: Categorical,
    terms.CONTINUOUS: Continuous,
}
"""Dictionary mapping kind names to ColumnKind classes."""


def format_real(value: float) -> str:
    """
    Canonical CSV formatting for reals: integral values within 2**53 are written
    without a decimal point (negative zero as "-0"), everything else uses the
    shortest repr that round-trips.

    Args:
        value (float): Any finite float.

    Returns:
        str: The canonical string.

    """
    if value == 0 and math.copysign(1.0, value) < 0:
        return "-0"
    if math.isfinite(value) and value.is_integer() and abs(value) < 2 ** 53:
        return str(int(value))
    return repr(value)


def is_number(raw: str) -> bool:
    """
    Args:
        raw (str): A CSV cell.

    Returns:
        bool: True if the cell parses as a finite float.

    """
    try:
        return math.isfinite(float(raw))
    except ValueError:
        return False
