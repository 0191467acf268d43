"""
The typed, column-oriented table every other module consumes, plus CSV and
schema-file IO, fold splitting and column permutation.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import (
    Any,
    Dict,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from . import _terms as terms
from ._core import ConfigurationError, DataError, make_rng
from .dtypes import (
    KIND_MAP,
    MISSING_LEVEL,
    ROLE_MAP,
    Categorical,
    ColumnKind,
    Continuous,
    QuasiIdentifier,
    Role,
    Sensitive,
    UnknownLevel,
    Unused,
    is_number,
)

logger = logging.getLogger(__name__)


class MalformedCsv(DataError):
    """
    Error raised when a CSV row does not have as many fields as the header.
    """

    def __init__(self, source: str, line: int, expected: int, got: int) -> None:
        msg = f"{source}: line {line} has {got} fields, expected {expected}."
        super().__init__(msg)
        self.line = line


class EmptyFile(DataError):
    """
    Error raised when a CSV file has no header row.
    """

    def __init__(self, source: str) -> None:
        super().__init__(f"{source} is empty; a header row is required.")


class SchemaMismatch(DataError):
    """
    Error raised when data does not carry the columns or kinds a schema or a
    trained model expects.
    """


class SchemaError(ConfigurationError):
    """
    Error raised when a schema is internally inconsistent.
    """


class UnknownColumn(ConfigurationError):
    """
    Error raised when a column name is not present.
    """

    def __init__(self, name: str, available: Sequence[str]) -> None:
        super().__init__(f"Unknown column {name!r}; available: {list(available)}.")
        self.name = name


class InvalidK(ConfigurationError):
    """
    Error raised when a fold count is outside [2, n].
    """

    def __init__(self, k: int, n: int) -> None:
        super().__init__(f"k={k} is invalid for {n} records; need 2 <= k <= n.")


class Schema:
    """
    The ordered, named and typed columns of a Dataset together with the role
    each column plays in an assessment.
    """

    def __init__(
        self,
        columns: Sequence[Tuple[str, ColumnKind]],
        roles: Mapping[str, Role | str] | None = None,
    ) -> None:
        """
        Args:
            columns (Sequence[Tuple[str, ColumnKind]]): (name, kind) pairs.
            roles (Mapping[str, Role | str], optional): Role per column name;
                unnamed columns are Unused. Defaults to None.

        Raises:
            SchemaError: On duplicate names, unknown role names, or more than
                one sensitive column.
        """
        self._columns: Tuple[Tuple[str, ColumnKind], ...] = tuple(
            (str(n), k) for n, k in columns
        )
        names = [n for n, _ in self._columns]
        if len(set(names)) != len(names):
            raise SchemaError(f"Column names must be unique, got {names}.")
        self._kinds: Dict[str, ColumnKind] = dict(self._columns)
        self._roles: Dict[str, Role] = {n: Unused for n in names}
        for name, role in (roles or {}).items():
            if name not in self._kinds:
                raise UnknownColumn(name, names)
            if isinstance(role, str):
                if role not in ROLE_MAP:
                    raise SchemaError(f"Unknown role {role!r} for column {name!r}.")
                role = ROLE_MAP[role]
            self._roles[name] = role
        if len([r for r in self._roles.values() if r == Sensitive]) > 1:
            raise SchemaError("At most one column may be sensitive.")

    @property
    def names(self) -> List[str]:
        return [n for n, _ in self._columns]

    @property
    def columns(self) -> Tuple[Tuple[str, ColumnKind], ...]:
        return self._columns

    @property
    def quasi_identifiers(self) -> List[str]:
        return [n for n in self.names if self._roles[n] == QuasiIdentifier]

    @property
    def sensitive(self) -> Optional[str]:
        for n in self.names:
            if self._roles[n] == Sensitive:
                return n
        return None

    def __contains__(self, name: object) -> bool:
        return name in self._kinds

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Schema)
            and other._columns == self._columns
            and other._roles == self._roles
        )

    def __repr__(self) -> str:
        return f"Schema({self.to_dict()})"

    def kind(self, name: str) -> ColumnKind:
        """
        Raises:
            UnknownColumn: If name is not a column.
        """
        try:
            return self._kinds[name]
        except KeyError:
            raise UnknownColumn(name, self.names)

    def role(self, name: str) -> Role:
        self.kind(name)
        return self._roles[name]

    def require_sensitive(self) -> str:
        """
        Returns:
            str: The name of the single sensitive column.

        Raises:
            SchemaError: If no column is sensitive.

        """
        name = self.sensitive
        if name is None:
            raise SchemaError("Exactly one column must have role sensitive.")
        return name

    def with_roles(self, qi: Sequence[str], sensitive: str) -> Schema:
        """
        Args:
            qi (Sequence[str]): Quasi-identifier column names.
            sensitive (str): The sensitive column name.

        Returns:
            Schema: The same columns with every other column set to unused.

        """
        for name in [*qi, sensitive]:
            self.kind(name)
        if sensitive in qi:
            raise SchemaError(f"{sensitive!r} cannot be both sensitive and a quasi-identifier.")
        roles: Dict[str, Role] = {n: QuasiIdentifier for n in qi}
        roles[sensitive] = Sensitive
        return Schema(self._columns, roles)

    def with_kind(self, name: str, kind: ColumnKind) -> Schema:
        self.kind(name)
        cols = [(n, kind if n == name else k) for n, k in self._columns]
        return Schema(cols, self._roles)

    def select(self, names: Sequence[str]) -> Schema:
        cols = [(n, self.kind(n)) for n in names]
        return Schema(cols, {n: self._roles[n] for n in names})

    def to_dict(self) -> Dict[str, Any]:
        return {
            terms.COLUMNS: [
                {terms.NAME: n, **k.to_dict(), terms.ROLE: str(self._roles[n])}
                for n, k in self._columns
            ]
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> Schema:
        """
        Args:
            raw (Mapping[str, Any]): A dictionary in the schema-file layout.

        Returns:
            Schema: The parsed schema.

        Raises:
            SchemaError: On unknown kinds or missing categorical levels.

        """
        columns: List[Tuple[str, ColumnKind]] = []
        roles: Dict[str, str] = {}
        for col in raw.get(terms.COLUMNS, []):
            name = col[terms.NAME]
            kind_name = col.get(terms.KIND)
            if kind_name not in KIND_MAP:
                raise SchemaError(f"Column {name!r} has unknown kind {kind_name!r}.")
            if kind_name == terms.CATEGORICAL:
                if not col.get(terms.LEVELS):
                    raise SchemaError(f"Categorical column {name!r} needs levels.")
                kind: ColumnKind = Categorical(col[terms.LEVELS])
            else:
                kind = Continuous()
            columns.append((name, kind))
            roles[name] = col.get(terms.ROLE, terms.UNUSED)
        return cls(columns, roles)


class Dataset:
    """
    An immutable, column-oriented table. Categorical values are stored as level
    indices (-1 where missing); continuous values as float64 (nan where missing).
    Every operation that looks like a mutation returns a new Dataset.
    """

    def __init__(
        self,
        schema: Schema,
        columns: Mapping[str, Any],
        row_ids: Any = None,
    ) -> None:
        """
        Args:
            schema (Schema): The table's schema.
            columns (Mapping[str, Any]): Stored-representation vectors, one per
                schema column.
            row_ids (Any, optional): Integer identity tags carried through
                take(). Defaults to None, giving 0..n-1.

        Raises:
            SchemaMismatch: If columns do not match the schema, vector lengths
                differ, or a categorical index is out of range.
        """
        self._schema = schema
        if set(columns) != set(schema.names):
            raise SchemaMismatch(
                f"Columns {sorted(columns)} do not match schema {schema.names}."
            )
        lengths = {len(columns[n]) for n in schema.names}
        if len(lengths) > 1:
            raise SchemaMismatch(f"Column vectors have differing lengths {sorted(lengths)}.")
        self._n = lengths.pop() if lengths else 0
        self._columns: Dict[str, np.ndarray] = {}
        for name, kind in schema.columns:
            if isinstance(kind, Categorical):
                vec = np.asarray(columns[name], dtype=np.int64).copy()
                bad = (vec < -1) | (vec >= len(kind))
                if bad.any():
                    raise SchemaMismatch(
                        f"Column {name!r} holds level indices outside [0, {len(kind)})."
                    )
            else:
                vec = np.asarray(columns[name], dtype=np.float64).copy()
            vec.flags.writeable = False
            self._columns[name] = vec
        ids = np.arange(self._n) if row_ids is None else np.asarray(row_ids, dtype=np.int64).copy()
        if len(ids) != self._n:
            raise SchemaMismatch("row_ids length does not match the record count.")
        ids.flags.writeable = False
        self._row_ids = ids

    @classmethod
    def from_values(
        cls,
        values: Mapping[str, Sequence[Any]],
        kinds: Mapping[str, ColumnKind] | None = None,
        roles: Mapping[str, Role | str] | None = None,
    ) -> Dataset:
        """
        Builds a Dataset from plain Python values (labels for categorical columns,
        numbers for continuous ones, None for missing).

        Args:
            values (Mapping[str, Sequence[Any]]): Column name to values.
            kinds (Mapping[str, ColumnKind], optional): Explicit kinds. Columns
                without one are inferred the same way load_csv does. Defaults to
                None.
            roles (Mapping[str, Role | str], optional): Roles. Defaults to None.

        Returns:
            Dataset: The new table.

        """
        kinds = dict(kinds or {})
        cols: List[Tuple[str, ColumnKind]] = []
        stored: Dict[str, Any] = {}
        for name, vals in values.items():
            kind = kinds.get(name)
            if kind is None:
                cells = ["" if v is None else str(v) for v in vals]
                kind = _infer_kind(cells)
            cols.append((name, kind))
            if isinstance(kind, Categorical):
                stored[name] = [-1 if v is None else kind.index(str(v)) for v in vals]
            else:
                stored[name] = [np.nan if v is None else float(v) for v in vals]
        return cls(Schema(cols, roles), stored)

    @property
    def schema(self) -> Schema:
        return self._schema

    @property
    def n(self) -> int:
        return self._n

    @property
    def names(self) -> List[str]:
        return self._schema.names

    @property
    def row_ids(self) -> np.ndarray:
        """
        Returns:
            np.ndarray: The identity tag of every record, preserved by take().

        """
        return self._row_ids

    def __len__(self) -> int:
        return self._n

    def __repr__(self) -> str:
        return f"Dataset(n={self._n}, columns={self.names})"

    def kind(self, name: str) -> ColumnKind:
        return self._schema.kind(name)

    def column(self, name: str) -> np.ndarray:
        """
        Returns:
            np.ndarray: The read-only stored vector of a column.

        Raises:
            UnknownColumn: If name is not a column.

        """
        self._schema.kind(name)
        return self._columns[name]

    def missing(self, name: str) -> np.ndarray:
        """
        Returns:
            np.ndarray: Boolean mask, True where the column is missing.

        """
        vec = self.column(name)
        if self.kind(name).is_categorical:
            return vec < 0
        return np.isnan(vec)

    def labels(self, name: str) -> List[Any]:
        """
        Returns:
            List[Any]: Level labels (categorical) or floats (continuous), with
            None for missing values.

        """
        kind = self.kind(name)
        vec = self.column(name)
        if isinstance(kind, Categorical):
            return [None if v < 0 else kind.levels[v] for v in vec]
        return [None if np.isnan(v) else float(v) for v in vec]

    def equals(self, other: Dataset) -> bool:
        """
        Returns:
            bool: True if schema and every stored value are identical.

        """
        if self._schema != other.schema or self._n != other.n:
            return False
        for name in self.names:
            a, b = self._columns[name], other.column(name)
            if a.dtype.kind == "f":
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif not np.array_equal(a, b):
                return False
        return True

    def take(self, indices: Any) -> Dataset:
        """
        Args:
            indices (Any): Integer positions or a boolean mask.

        Returns:
            Dataset: The selected records, row identity tags included.

        """
        idx = np.asarray(indices)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        cols = {n: v[idx] for n, v in self._columns.items()}
        return Dataset(self._schema, cols, self._row_ids[idx])

    def select(self, names: Sequence[str]) -> Dataset:
        cols = {n: self.column(n) for n in names}
        return Dataset(self._schema.select(names), cols, self._row_ids)

    def with_roles(self, qi: Sequence[str], sensitive: str) -> Dataset:
        return Dataset(self._schema.with_roles(qi, sensitive), self._columns, self._row_ids)

    def replace(self, name: str, stored: Any, kind: ColumnKind | None = None) -> Dataset:
        """
        Args:
            name (str): The column to replace.
            stored (Any): The new stored-representation vector.
            kind (ColumnKind, optional): A new kind. Defaults to None, keeping
                the current one.

        Returns:
            Dataset: A copy with that single column replaced.

        """
        schema = self._schema if kind is None else self._schema.with_kind(name, kind)
        self._schema.kind(name)
        cols = dict(self._columns)
        cols[name] = stored
        return Dataset(schema, cols, self._row_ids)

    def with_levels(self, name: str, kind: Categorical) -> Dataset:
        """
        Re-expresses a categorical column over a superset level list.

        Args:
            name (str): A categorical column.
            kind (Categorical): The new levels; must contain every current level.

        Returns:
            Dataset: The re-indexed copy.

        """
        current = self.kind(name)
        if not isinstance(current, Categorical):
            raise SchemaMismatch(f"Column {name!r} is not categorical.")
        if current == kind:
            return self
        remap = np.array([kind.index(lv) for lv in current.levels], dtype=np.int64)
        vec = self._columns[name]
        new = np.where(vec < 0, -1, remap[np.clip(vec, 0, None)])
        return self.replace(name, new, kind)

    def fill_missing_level(self, name: str) -> Dataset:
        """
        Turns missing values of a categorical column into the explicit
        MISSING_LEVEL level.

        Returns:
            Dataset: The filled copy, or this Dataset if nothing is missing.

        """
        kind = self.kind(name)
        if not isinstance(kind, Categorical):
            raise SchemaMismatch(f"Column {name!r} is not categorical.")
        mask = self.missing(name)
        if not mask.any():
            return self
        new_kind = kind.union(Categorical([MISSING_LEVEL]))
        vec = np.where(mask, new_kind.index(MISSING_LEVEL), self._columns[name])
        return self.replace(name, vec, new_kind)

    def drop_missing(self, name: str) -> Tuple[Dataset, int]:
        """
        Returns:
            Tuple[Dataset, int]: The records where the column is present, and
            the number dropped.

        """
        mask = self.missing(name)
        dropped = int(mask.sum())
        if dropped == 0:
            return self, 0
        return self.take(~mask), dropped

    def rows(self) -> Iterator[List[str]]:
        """
        Yields:
            List[str]: Each record as canonical CSV cells ("" for missing).

        """
        formatted: List[List[str]] = []
        for name, kind in self._schema.columns:
            missing = self.missing(name)
            vec = self._columns[name]
            formatted.append(
                ["" if m else kind.format(v) for v, m in zip(vec.tolist(), missing.tolist())]
            )
        for i in range(self._n):
            yield [col[i] for col in formatted]


def _infer_kind(cells: Sequence[str]) -> ColumnKind:
    present = [c for c in cells if c != ""]
    if all(is_number(c) for c in present):
        return Continuous()
    seen: Dict[str, None] = {}
    for c in present:
        seen.setdefault(c, None)
    return Categorical(seen.keys())


def _read_rows(reader: Iterator[List[str]], source: str) -> Tuple[List[str], List[List[str]]]:
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyFile(source)
    if not header or header == [""]:
        raise EmptyFile(source)
    rows: List[List[str]] = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise MalformedCsv(source, line, len(header), len(row))
        rows.append(row)
    return header, rows


def _build(header: List[str], rows: List[List[str]], schema: Schema | None, source: str) -> Dataset:
    if schema is None:
        cols = [(name, _infer_kind([r[j] for r in rows])) for j, name in enumerate(header)]
        schema = Schema(cols)
    elif sorted(header) != sorted(schema.names):
        raise SchemaMismatch(
            f"{source}: header {header} does not match schema columns {schema.names}."
        )
    position = {name: j for j, name in enumerate(header)}
    stored: Dict[str, Any] = {}
    for name, kind in schema.columns:
        j = position[name]
        if isinstance(kind, Categorical):
            vec = np.empty(len(rows), dtype=np.int64)
            for i, r in enumerate(rows):
                cell = r[j]
                if cell == "":
                    vec[i] = -1
                else:
                    try:
                        vec[i] = kind.index(cell)
                    except UnknownLevel:
                        raise UnknownLevel(cell, kind.levels, name)
        else:
            fvec = np.empty(len(rows), dtype=np.float64)
            for i, r in enumerate(rows):
                cell = r[j]
                if cell == "":
                    fvec[i] = np.nan
                else:
                    try:
                        fvec[i] = kind.parse(cell)
                    except ValueError:
                        raise SchemaMismatch(
                            f"{source}: line {i + 2}, column {name!r}: {cell!r} is not a number."
                        )
            vec = fvec
        stored[name] = vec
    return Dataset(schema, stored)


def load_csv(path: str | Path, schema: Schema | None = None) -> Dataset:
    """
    Reads an RFC-4180 style, UTF-8 CSV file with a header row.

    Args:
        path (str | Path): The file to read.
        schema (Schema, optional): Expected columns and kinds. Defaults to None,
            in which case all-numeric columns become Continuous and the rest
            Categorical with levels in order of first appearance.

    Returns:
        Dataset: The loaded table; empty cells are missing values.

    Raises:
        EmptyFile: If the file has no header.
        MalformedCsv: If a row has the wrong number of fields.
        UnknownLevel: If a value is not among a provided categorical level set.
        SchemaMismatch: If the header does not match the schema.

    """
    p = Path(path)
    with open(p, "r", encoding="utf-8", newline="") as file:
        header, rows = _read_rows(csv.reader(file), str(p))
    logger.debug("Read %d rows and %d columns from %s.", len(rows), len(header), p)
    return _build(header, rows, schema, str(p))


def loads_csv(text: str, schema: Schema | None = None, source: str = "<string>") -> Dataset:
    """
    Same as load_csv, for CSV text held in memory.
    """
    header, rows = _read_rows(csv.reader(io.StringIO(text, newline="")), source)
    return _build(header, rows, schema, source)


def dumps_csv(data: Dataset) -> str:
    """
    Returns:
        str: The dataset as CSV text with a header row.

    """
    buffer = io.StringIO(newline="")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(data.names)
    writer.writerows(data.rows())
    return buffer.getvalue()


def write_csv(data: Dataset, path: str | Path) -> None:
    """
    Saves a dataset as CSV. Reals use the canonical format of
    :func:`rapidrisk.dtypes.format_real` so load_csv/write_csv round-trips cell
    values exactly.

    Args:
        data (Dataset): The table.
        path (str | Path): The path-like to save to.

    """
    with open(path, "w", encoding="utf-8", newline="") as file:
        file.write(dumps_csv(data))


def load_schema(path: str | Path) -> Schema:
    """
    Reads a JSON schema file
    (``{"columns": [{"name", "kind", "levels"?, "role"}]}``).
    """
    with open(path, "r", encoding="utf-8") as file:
        try:
            raw = json.load(file)
        except json.JSONDecodeError as e:
            raise SchemaError(f"Schema file {path} is not valid JSON: {e}")
    return Schema.from_dict(raw)


def save_schema(schema: Schema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as file:
        json.dump(schema.to_dict(), file, indent=2, ensure_ascii=False)
        file.write("\n")


def unify_levels(
    a: Dataset, b: Dataset, names: Sequence[str] | None = None
) -> Tuple[Dataset, Dataset]:
    """
    Puts the categorical columns of two datasets into one shared level space
    (levels of a first, then the levels only b has).

    Args:
        a (Dataset): Usually the original data.
        b (Dataset): Usually the released data.
        names (Sequence[str], optional): Columns to unify. Defaults to None, all
            categorical columns the two share.

    Returns:
        Tuple[Dataset, Dataset]: Re-indexed copies.

    Raises:
        SchemaMismatch: If a named column is categorical in one and not the
            other.

    """
    if names is None:
        names = [n for n in a.names if n in b.schema and a.kind(n).is_categorical]
    for name in names:
        ka, kb = a.kind(name), b.kind(name)
        if not (isinstance(ka, Categorical) and isinstance(kb, Categorical)):
            raise SchemaMismatch(f"Column {name!r} is not categorical in both datasets.")
        shared = ka.union(kb)
        a, b = a.with_levels(name, shared), b.with_levels(name, shared)
    return a, b


@dataclass(frozen=True)
class FoldAssignment:
    """
    The fold index of every record of a dataset.
    """

    k: int
    assignment: np.ndarray

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    @property
    def sizes(self) -> List[int]:
        return np.bincount(self.assignment, minlength=self.k).tolist()


def split_folds(
    data: Dataset, k: int, stratify_by: str | None = None, rng_seed: int = 0
) -> FoldAssignment:
    """
    Partitions the records into k folds whose sizes differ by at most one. With
    stratification, each class is dealt out round-robin so its per-fold count
    also differs by at most one.

    Args:
        data (Dataset): The dataset to split.
        k (int): Number of folds.
        stratify_by (str, optional): A categorical column to stratify on.
            Defaults to None.
        rng_seed (int, optional): Seed; the split is a pure function of it.
            Defaults to 0.

    Returns:
        FoldAssignment: The fold of each record.

    Raises:
        InvalidK: If k < 2 or k > n.
        UnknownColumn: If stratify_by is not a column.

    """
    n = data.n
    if k < 2 or k > n:
        raise InvalidK(k, n)
    rng = make_rng(rng_seed)
    if stratify_by is None:
        order = rng.permutation(n)
    else:
        kind = data.kind(stratify_by)
        if not kind.is_categorical:
            raise ConfigurationError(f"Cannot stratify on continuous column {stratify_by!r}.")
        strata = data.column(stratify_by)
        blocks = []
        for cls in np.unique(strata):
            members = np.flatnonzero(strata == cls)
            blocks.append(members[rng.permutation(len(members))])
        order = np.concatenate(blocks)
    relabel = rng.permutation(k)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = relabel[np.arange(n) % k]
    return FoldAssignment(k=k, assignment=assignment)


def permute_column(data: Dataset, column: str, rng_seed: int = 0) -> Dataset:
    """
    Args:
        data (Dataset): The dataset.
        column (str): The column whose values are shuffled.
        rng_seed (int, optional): Seed. Defaults to 0.

    Returns:
        Dataset: A copy where only that column has been permuted uniformly at
        random; every other column is untouched.

    Raises:
        UnknownColumn: If the column does not exist.

    """
    vec = data.column(column)
    perm = make_rng(rng_seed).permutation(data.n)
    return data.replace(column, vec[perm])
