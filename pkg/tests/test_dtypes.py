import math

import pytest

from rapidrisk._core import ConfigurationError
from rapidrisk.dtypes import (
    ROLE_MAP,
    Categorical,
    Continuous,
    QuasiIdentifier,
    Sensitive,
    UnknownLevel,
    format_real,
    is_number,
)


class TestCategorical:
    def test_that_to_string_works(self):
        assert str(Categorical(["a"])) == Categorical.kind_key
        assert str(Continuous()) == Continuous.kind_key

    def test_that_it_indexes_levels_in_order(self):
        kind = Categorical(["low", "medium", "high"])
        assert kind.index("low") == 0
        assert kind.index("high") == 2
        assert kind.parse("medium") == 1
        assert kind.format(2) == "high"
        assert len(kind) == 3

    def test_that_it_rejects_unknown_labels(self):
        kind = Categorical(["low", "medium", "high"])
        with pytest.raises(UnknownLevel, match="'hgih' is not one of the levels"):
            kind.index("hgih")

    def test_that_it_rejects_bad_level_lists(self):
        with pytest.raises(ConfigurationError, match="non-empty"):
            Categorical([])
        with pytest.raises(ConfigurationError, match="Duplicate"):
            Categorical(["a", "b", "a"])

    def test_that_union_appends_only_new_levels(self):
        a = Categorical(["x", "y"])
        b = Categorical(["z", "y"])
        assert a.union(b).levels == ("x", "y", "z")
        assert a.union(Categorical(["y"])) is a

    def test_that_kinds_compare_by_levels(self):
        assert Categorical(["a", "b"]) == Categorical(["a", "b"])
        assert Categorical(["a", "b"]) != Categorical(["b", "a"])
        assert Continuous() == Continuous()
        assert Categorical(["a"]).is_categorical
        assert not Continuous().is_categorical

    def test_that_to_dict_carries_levels(self):
        assert Categorical(["a", "b"]).to_dict() == {"kind": "categorical", "levels": ["a", "b"]}
        assert Continuous().to_dict() == {"kind": "continuous"}


class TestRoles:
    def test_that_role_map_resolves_names(self):
        assert ROLE_MAP["qi"] == QuasiIdentifier
        assert ROLE_MAP["sensitive"] == Sensitive
        assert str(Sensitive) == "sensitive"


class TestFormatting:
    def test_that_integral_reals_drop_the_decimal_point(self):
        assert format_real(3.0) == "3"
        assert format_real(-12.0) == "-12"

    def test_that_other_reals_use_shortest_repr(self):
        assert format_real(0.1) == "0.1"
        assert format_real(2.5e-7) == "2.5e-07"
        assert format_real(1e300) == "1e+300"

    def test_that_negative_zero_keeps_its_sign(self):
        assert format_real(-0.0) == "-0"
        assert format_real(0.0) == "0"
        assert math.copysign(1.0, Continuous().parse(Continuous().format(-0.0))) == -1.0

    def test_that_it_recognizes_numbers(self):
        assert is_number("1e3")
        assert is_number("-0.5")
        assert not is_number("abc")
        assert not is_number("nan")
        assert not is_number("inf")
        assert not is_number("")
