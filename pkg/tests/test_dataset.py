from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from rapidrisk.dataset import (
    Dataset,
    EmptyFile,
    InvalidK,
    MalformedCsv,
    Schema,
    SchemaError,
    SchemaMismatch,
    UnknownColumn,
    dumps_csv,
    load_csv,
    load_schema,
    loads_csv,
    permute_column,
    save_schema,
    split_folds,
    unify_levels,
    write_csv,
)
from rapidrisk.dtypes import MISSING_LEVEL, Categorical, Continuous, UnknownLevel

from .samples.data import csv_text, mapped_data

EDU = Categorical(["low", "medium", "high"])


class TestLoadCsv:
    def test_that_it_infers_kinds(self):
        data = loads_csv(csv_text([["age", "edu"], [34, "low"], [51.5, "high"], [29, "low"]]))
        assert data.n == 3
        assert data.kind("age") == Continuous()
        assert data.kind("edu") == Categorical(["low", "high"])
        assert data.labels("edu") == ["low", "high", "low"]
        assert data.labels("age") == [34.0, 51.5, 29.0]

    def test_that_empty_cells_are_missing(self):
        data = loads_csv(csv_text([["age", "edu"], ["", "low"], [40, ""]]))
        assert data.missing("age").tolist() == [True, False]
        assert data.missing("edu").tolist() == [False, True]
        assert data.labels("edu") == ["low", None]

    def test_that_ragged_rows_are_rejected(self):
        with pytest.raises(MalformedCsv, match="line 3 has 4 fields, expected 3"):
            loads_csv("a,b,c\n1,2,3\n1,2,3,4\n")

    def test_that_empty_files_are_rejected(self):
        with pytest.raises(EmptyFile):
            loads_csv("")

    def test_that_a_schema_rejects_unknown_levels(self):
        schema = Schema([("edu", EDU)])
        with pytest.raises(UnknownLevel, match="'hgih' in column 'edu'"):
            loads_csv("edu\nlow\nhgih\n", schema)

    def test_that_a_schema_rejects_other_headers(self):
        schema = Schema([("edu", EDU)])
        with pytest.raises(SchemaMismatch, match="does not match schema"):
            loads_csv("education\nlow\n", schema)

    def test_that_a_schema_rejects_text_in_continuous_columns(self):
        schema = Schema([("age", Continuous())])
        with pytest.raises(SchemaMismatch, match="is not a number"):
            loads_csv("age\n31\nold\n", schema)

    def test_that_csv_files_round_trip_exactly(self, tmp_path: Path):
        text = csv_text(
            [["age", "edu", "income"], [34, "low", 0.1], [51, "high", 123456.789], ["", "", 1e-05]]
        )
        src = tmp_path / "in.csv"
        src.write_text(text, encoding="utf-8")
        out = tmp_path / "out.csv"
        write_csv(load_csv(src), out)
        assert out.read_text(encoding="utf-8") == text
        assert load_csv(out).equals(load_csv(src))

    def test_that_negative_zero_survives_a_round_trip(self):
        data = Dataset.from_values({"x": [-0.0, 0.0, 1.5]}, kinds={"x": Continuous()})
        text = dumps_csv(data)
        assert text.splitlines()[1:] == ["-0", "0", "1.5"]
        assert np.signbit(loads_csv(text).column("x")).tolist() == [True, False, False]

    def test_that_missing_files_raise(self, tmp_path: Path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv")


class TestSchema:
    def test_that_roles_are_tracked(self):
        schema = Schema([("a", EDU), ("b", Continuous()), ("y", EDU)], {"a": "qi", "y": "sensitive"})
        assert schema.quasi_identifiers == ["a"]
        assert schema.sensitive == "y"
        assert str(schema.role("b")) == "unused"

    def test_that_it_rejects_inconsistent_definitions(self):
        with pytest.raises(SchemaError, match="unique"):
            Schema([("a", EDU), ("a", EDU)])
        with pytest.raises(SchemaError, match="At most one"):
            Schema([("a", EDU), ("b", EDU)], {"a": "sensitive", "b": "sensitive"})
        with pytest.raises(UnknownColumn):
            Schema([("a", EDU)], {"z": "qi"})

    def test_that_schema_files_round_trip(self, tmp_path: Path):
        schema = Schema([("edu", EDU), ("age", Continuous())], {"edu": "qi", "age": "sensitive"})
        p = tmp_path / "schema.json"
        save_schema(schema, p)
        assert load_schema(p) == schema

    def test_that_schema_files_need_levels(self):
        raw = {"columns": [{"name": "edu", "kind": "categorical"}]}
        with pytest.raises(SchemaError, match="needs levels"):
            Schema.from_dict(raw)

    def test_that_unknown_columns_raise(self):
        with pytest.raises(UnknownColumn, match="Unknown column 'zz'"):
            mapped_data(6).column("zz")


class TestDataset:
    def test_that_take_keeps_row_ids(self):
        data = mapped_data(6)
        taken = data.take([4, 1])
        assert taken.row_ids.tolist() == [4, 1]
        assert taken.labels("zone") == ["b", "b"]
        assert data.take(np.array([True, False, True, False, False, False])).row_ids.tolist() == [0, 2]

    def test_that_columns_are_read_only(self):
        data = mapped_data(6)
        with pytest.raises(ValueError):
            data.column("zone")[0] = 2

    def test_that_missing_levels_can_be_made_explicit(self):
        data = Dataset.from_values({"edu": ["low", None, "high"]}, kinds={"edu": EDU})
        filled = data.fill_missing_level("edu")
        assert filled.labels("edu") == ["low", MISSING_LEVEL, "high"]
        assert filled.kind("edu").levels[-1] == MISSING_LEVEL

    def test_that_drop_missing_counts_dropped_rows(self):
        data = Dataset.from_values({"y": [1.0, None, 3.0]})
        kept, dropped = data.drop_missing("y")
        assert dropped == 1
        assert kept.row_ids.tolist() == [0, 2]

    def test_that_unify_levels_shares_one_level_space(self):
        a = Dataset.from_values({"c": ["x", "y"]})
        b = Dataset.from_values({"c": ["z", "x"]})
        ua, ub = unify_levels(a, b)
        assert ua.kind("c") == ub.kind("c") == Categorical(["x", "y", "z"])
        assert ua.labels("c") == ["x", "y"]
        assert ub.labels("c") == ["z", "x"]

    def test_that_unify_levels_rejects_kind_clashes(self):
        a = Dataset.from_values({"c": ["x", "y"]})
        b = Dataset.from_values({"c": [1.0, 2.0]})
        with pytest.raises(SchemaMismatch, match="not categorical in both"):
            unify_levels(a, b, ["c"])

    def test_that_dumps_csv_writes_missing_as_empty(self):
        data = Dataset.from_values({"a": [1.0, None], "b": ["x", None]})
        assert dumps_csv(data) == "a,b\n1,x\n,\n"


class TestSplitFolds:
    def test_that_exact_division_gives_equal_folds(self):
        folds = split_folds(mapped_data(10), 5, rng_seed=3)
        assert sorted(folds.sizes) == [2, 2, 2, 2, 2]

    def test_that_folds_partition_the_records(self):
        folds = split_folds(mapped_data(23), 4, rng_seed=1)
        seen = np.concatenate([folds.test_indices(f) for f in range(4)])
        assert sorted(seen.tolist()) == list(range(23))
        assert max(folds.sizes) - min(folds.sizes) <= 1
        for f in range(4):
            assert set(folds.train_indices(f)).isdisjoint(folds.test_indices(f))

    def test_that_stratified_folds_balance_classes(self):
        data = Dataset.from_values({"y": ["p"] * 6 + ["q"] * 3})
        folds = split_folds(data, 2, stratify_by="y", rng_seed=7)
        labels = data.labels("y")
        counts = sorted(
            (
                sum(labels[i] == "p" for i in folds.test_indices(f)),
                sum(labels[i] == "q" for i in folds.test_indices(f)),
            )
            for f in range(2)
        )
        assert counts == [(3, 1), (3, 2)]

    def test_that_it_is_deterministic(self):
        data = mapped_data(30)
        a = split_folds(data, 3, "status", rng_seed=11)
        b = split_folds(data, 3, "status", rng_seed=11)
        assert np.array_equal(a.assignment, b.assignment)

    def test_that_invalid_k_is_rejected(self):
        with pytest.raises(InvalidK, match="k=1 is invalid"):
            split_folds(mapped_data(10), 1)
        with pytest.raises(InvalidK):
            split_folds(mapped_data(10), 11)


class TestPermuteColumn:
    def test_that_the_multiset_is_preserved(self):
        data = Dataset.from_values({"c": ["a", "a", "b"], "k": [1.0, 2.0, 3.0]})
        permuted = permute_column(data, "c", rng_seed=5)
        assert Counter(permuted.labels("c")) == Counter(["a", "a", "b"])

    def test_that_constant_columns_are_fixed_points(self):
        data = Dataset.from_values({"c": [5.0, 5.0, 5.0]})
        assert permute_column(data, "c", rng_seed=2).labels("c") == [5.0, 5.0, 5.0]

    def test_that_it_is_deterministic(self):
        data = mapped_data(30)
        a = permute_column(data, "status", rng_seed=9)
        b = permute_column(data, "status", rng_seed=9)
        assert a.equals(b)

    def test_that_other_columns_are_untouched(self):
        data = mapped_data(30)
        permuted = permute_column(data, "status", rng_seed=9)
        assert np.array_equal(permuted.column("zone"), data.column("zone"))
        assert permuted.row_ids.tolist() == data.row_ids.tolist()

    def test_that_unknown_columns_raise(self):
        with pytest.raises(UnknownColumn):
            permute_column(mapped_data(6), "nope")
