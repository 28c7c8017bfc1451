"""Columnar store: CSV parsing, typing, stats and immutability."""

import numpy as np
import pytest

from aqplearn import (
    Dataset,
    Kind,
    NullPolicy,
    continuous_stats,
    distinct_members,
    dump_csv,
    dump_schema,
    load_csv,
    load_schema,
    make_schema,
)
from aqplearn.errors import (
    EmptyDataset,
    MalformedRow,
    ParseError,
    UnknownAttribute,
    WrongKind,
)


def one_column(values) -> Dataset:
    schema = make_schema([("x", Kind.CONTINUOUS)])
    return Dataset.from_columns(schema, {"x": list(values)})


class TestContinuousStats:
    def test_uniform_1_to_1000(self):
        """Quartiles of {1..1000} by linear interpolation: the q-th quartile
        sits at order-statistic position 1 + q/4 * 999."""
        ds = one_column(range(1, 1001))
        st = continuous_stats(ds, "x")
        assert (st.min, st.q1, st.median, st.q3, st.max) == (1.0, 250.75, 500.5, 750.25, 1000.0)

    def test_five_values(self):
        st = continuous_stats(one_column([1, 2, 3, 4, 5]), "x")
        assert (st.min, st.q1, st.median, st.q3, st.max) == (1.0, 2.0, 3.0, 4.0, 5.0)

    def test_constant_column(self):
        st = continuous_stats(one_column([7.0] * 12), "x")
        assert (st.min, st.q1, st.median, st.q3, st.max) == (7.0,) * 5

    def test_row_order_invariance(self):
        values = [3.0, 141.0, 5.0, 9.0, 26.0, 53.0, 58.0, 97.0]
        a = continuous_stats(one_column(values), "x")
        b = continuous_stats(one_column(values[::-1]), "x")
        assert a == b

    def test_intervals_cover_range(self):
        st = continuous_stats(one_column(range(1, 101)), "x")
        iv = st.intervals()
        assert len(iv) == 4
        assert iv[0][0] == st.min and iv[-1][1] == st.max
        for (_, hi), (lo, _) in zip(iv, iv[1:]):
            assert hi == lo

    def test_empty_dataset_rejected(self):
        with pytest.raises(EmptyDataset):
            continuous_stats(one_column([]), "x")


class TestDataset:
    def test_kinds_and_members(self, transactions):
        assert transactions.row_count == 10
        assert transactions.kind_of("region") is Kind.NOMINAL
        assert transactions.kind_of("sales") is Kind.CONTINUOUS
        assert distinct_members(transactions, "region") == ["east", "north", "south", "west"]
        assert transactions.member_id("region", "atlantis") is None

    def test_unknown_attribute(self, transactions):
        with pytest.raises(UnknownAttribute):
            transactions.attribute("price")

    def test_kind_enforcement(self, transactions):
        with pytest.raises(WrongKind):
            transactions.continuous_values("region")
        with pytest.raises(WrongKind):
            transactions.nominal_id_values("sales")

    def test_columns_are_immutable(self, transactions):
        with pytest.raises(ValueError):
            transactions.continuous_values("sales")[0] = 0.0
        with pytest.raises(ValueError):
            transactions.nominal_id_values("region")[0] = 0

    def test_mismatched_column_lengths(self):
        schema = make_schema([("x", Kind.CONTINUOUS), ("g", Kind.NOMINAL)])
        with pytest.raises(MalformedRow):
            Dataset.from_columns(schema, {"x": [1.0, 2.0], "g": ["a"]})

    def test_missing_column(self):
        schema = make_schema([("x", Kind.CONTINUOUS)])
        with pytest.raises(UnknownAttribute):
            Dataset.from_columns(schema, {})


class TestLoadCsv:
    def test_round_trip(self, transactions_csv, transactions):
        path, schema_path = transactions_csv
        ds = load_csv(path, load_schema(schema_path))
        assert ds.row_count == transactions.row_count
        np.testing.assert_array_equal(
            ds.continuous_values("sales"), transactions.continuous_values("sales")
        )
        assert ds.members("region") == transactions.members("region")

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        schema = make_schema([("x", Kind.CONTINUOUS), ("y", Kind.CONTINUOUS)])
        with pytest.raises(MalformedRow):
            load_csv(path, schema)

    def test_wrong_arity_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n1,2\n3\n")
        schema = make_schema([("x", Kind.CONTINUOUS), ("y", Kind.CONTINUOUS)])
        with pytest.raises(MalformedRow, match="row 2"):
            load_csv(path, schema)

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x\n1\nabc\n")
        schema = make_schema([("x", Kind.CONTINUOUS)])
        with pytest.raises(ParseError, match=r"row 2.*'x'"):
            load_csv(path, schema)

    def test_header_only_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("x\n")
        ds = load_csv(path, make_schema([("x", Kind.CONTINUOUS)]))
        assert ds.row_count == 0

    def test_null_policy_drop(self, tmp_path):
        path = tmp_path / "nulls.csv"
        path.write_text("x,g\n1,a\n,b\n3,c\n")
        schema = make_schema([("x", Kind.CONTINUOUS), ("g", Kind.NOMINAL)])
        ds = load_csv(path, schema, null_policy=NullPolicy.DROP_ROW)
        assert ds.row_count == 2
        np.testing.assert_array_equal(ds.continuous_values("x"), [1.0, 3.0])

    def test_null_policy_reject(self, tmp_path):
        path = tmp_path / "nulls.csv"
        path.write_text("x,g\n1,a\n,b\n")
        schema = make_schema([("x", Kind.CONTINUOUS), ("g", Kind.NOMINAL)])
        with pytest.raises(ParseError, match="row 2"):
            load_csv(path, schema, null_policy=NullPolicy.REJECT)

    def test_dump_then_load_is_identity(self, transactions, tmp_path):
        path = tmp_path / "out.csv"
        dump_csv(transactions, path)
        back = load_csv(path, list(transactions.schema))
        np.testing.assert_array_equal(
            back.continuous_values("units"), transactions.continuous_values("units")
        )
        assert back.members("category") == transactions.members("category")


class TestSchemaFiles:
    def test_schema_round_trip(self, tmp_path, transactions):
        path = tmp_path / "schema.json"
        dump_schema(list(transactions.schema), path)
        assert load_schema(path) == list(transactions.schema)

    def test_duplicate_names_rejected(self):
        with pytest.raises(ParseError):
            make_schema([("x", Kind.CONTINUOUS), ("x", Kind.NOMINAL)])

    def test_bad_kind_rejected(self, tmp_path):
        path = tmp_path / "schema.json"
        path.write_text('[{"name": "x", "kind": "decimal"}]')
        with pytest.raises(ParseError):
            load_schema(path)
