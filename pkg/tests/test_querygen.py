"""Workload generation: templates, filter sampling, flattening, splits, IO."""

import numpy as np
import pytest

from aqplearn import (
    AggregationFunction,
    AggregationTarget,
    BetweenFilter,
    FlatQuery,
    GroupByQuery,
    InFilter,
    LabeledQuery,
    QueryTemplate,
    build_select_clause,
    execute_groupby,
    flatten_groupby,
    generate_workload,
    load_template,
    read_workload,
    split,
    split_indices,
    write_workload,
)
from aqplearn.errors import (
    EmptyCombos,
    InvalidTarget,
    ShapeMismatch,
    TooFewQueries,
    WrongKind,
)
from aqplearn.executor import GroupByResult, GroupByRow
from aqplearn.querygen import (
    gen_between_filters,
    gen_in_filter_combinations,
    pair_filters,
    snap_to_grid,
)
from aqplearn.store import ContinuousStats

AVG = AggregationFunction.AVG
SUM = AggregationFunction.SUM
COUNT = AggregationFunction.COUNT


class TestSelectClause:
    def test_cross_product(self, transactions):
        targets = build_select_clause([AVG, SUM], ["sales", "units"], transactions)
        assert [t.token() for t in targets] == [
            "avg(sales)",
            "avg(units)",
            "sum(sales)",
            "sum(units)",
        ]

    def test_nominal_attr_strict_raises(self, transactions):
        with pytest.raises(InvalidTarget):
            build_select_clause([AVG], ["region"], transactions)

    def test_nominal_attr_lenient_skips(self, transactions):
        targets = build_select_clause([AVG, COUNT], ["region"], transactions, strict=False)
        assert [t.token() for t in targets] == ["count(region)"]


class TestTemplate:
    def test_attr_lists_normalized_to_schema_order(self, transactions):
        t = QueryTemplate.build(
            transactions,
            targets=[AggregationTarget(AVG, "sales")],
            cont_filter_attrs=["units", "sales"],
            nom_filter_attrs=["category", "region"],
        )
        assert t.cont_filter_attrs == ("sales", "units")
        assert t.nom_filter_attrs == ("region", "category")

    def test_kind_checks(self, transactions):
        with pytest.raises(WrongKind):
            QueryTemplate.build(
                transactions,
                targets=[AggregationTarget(AVG, "sales")],
                cont_filter_attrs=["region"],
                nom_filter_attrs=[],
            )
        with pytest.raises(InvalidTarget):
            QueryTemplate.build(
                transactions,
                targets=[AggregationTarget(AVG, "region")],
                cont_filter_attrs=[],
                nom_filter_attrs=[],
            )

    def test_load_from_dict_with_func_attr_lists(self, transactions):
        t = load_template(
            {
                "agg_funcs": ["avg", "sum"],
                "agg_attrs": ["sales"],
                "cont_filter_attrs": ["sales"],
                "nom_filter_attrs": ["region"],
                "n_cont_samples": 7,
                "seed": 5,
            },
            transactions,
        )
        assert [x.token() for x in t.targets] == ["avg(sales)", "sum(sales)"]
        assert t.n_cont_samples == 7 and t.seed == 5

    def test_record_round_trip(self, transactions):
        t = QueryTemplate.build(
            transactions,
            targets=[AggregationTarget(AVG, "sales")],
            cont_filter_attrs=["sales"],
            nom_filter_attrs=["region"],
            numeric_scales={"sales": 10.0},
        )
        assert load_template(t.to_record(), transactions) == t


class TestSnapToGrid:
    def test_rounds_to_nearest_grid_point(self):
        assert snap_to_grid(2.5004, 10.0, 0.0, 5.0) == 2.5
        assert snap_to_grid(121.3, 1.0, 100.0, 900.0) == 121.0

    def test_clips_inside_the_attribute_range(self):
        assert snap_to_grid(0.01, 1.0, 0.5, 5.0) == 1.0
        assert snap_to_grid(5.4, 1.0, 0.5, 4.5) == 4.0

    def test_no_grid_point_in_range(self):
        with pytest.raises(ValueError):
            snap_to_grid(6.5, 1.0, 6.2, 6.8)


class TestBetweenGeneration:
    STATS = {"x": ContinuousStats(100.0, 300.0, 500.0, 700.0, 900.0)}

    def test_bounds_ordered_on_grid_and_in_range(self):
        rng = np.random.default_rng(42)
        combos = gen_between_filters(self.STATS, ["x"], 200, rng)
        assert len(combos) == 200
        for (f,) in combos:
            assert f.attr == "x"
            assert 100.0 <= f.lower <= f.upper <= 900.0
            assert f.lower == int(f.lower) and f.upper == int(f.upper)  # scale 1 grid

    def test_same_seed_same_filters(self):
        a = gen_between_filters(self.STATS, ["x"], 50, np.random.default_rng(42))
        b = gen_between_filters(self.STATS, ["x"], 50, np.random.default_rng(42))
        assert a == b

    def test_bounds_cross_quartile_intervals(self):
        """With two independent interval picks, some windows must span
        non-adjacent quartiles (e.g. a q1 draw paired with a q4 draw)."""
        rng = np.random.default_rng(0)
        combos = gen_between_filters(self.STATS, ["x"], 300, rng)
        assert any(f.lower < 300.0 and f.upper > 700.0 for (f,) in combos)
        assert any(f.upper <= 300.0 for (f,) in combos)  # both draws in the first interval

    def test_constant_attribute_degenerates_to_point_filter(self):
        stats = {"x": ContinuousStats(7.0, 7.0, 7.0, 7.0, 7.0)}
        (f,), = gen_between_filters(stats, ["x"], 1, np.random.default_rng(1))
        assert (f.lower, f.upper) == (7.0, 7.0)

    def test_multiple_attributes_one_filter_each(self):
        stats = dict(self.STATS, y=ContinuousStats(0.0, 1.0, 2.0, 3.0, 4.0))
        combos = gen_between_filters(stats, ["x", "y"], 10, np.random.default_rng(3))
        for combo in combos:
            assert [f.attr for f in combo] == ["x", "y"]


class TestInFiltersAndPairing:
    def test_combinations_to_filters(self):
        sets = gen_in_filter_combinations(
            [("north", "food"), ("south", "tools")], ["region", "category"]
        )
        assert sets[0] == (InFilter("region", "north"), InFilter("category", "food"))
        assert len(sets) == 2

    def test_empty_combos_raise(self):
        with pytest.raises(EmptyCombos):
            gen_in_filter_combinations([], ["region"])

    def test_misaligned_combo_raises(self):
        with pytest.raises(ShapeMismatch):
            gen_in_filter_combinations([("north",)], ["region", "category"])

    def test_pairing_is_full_cross_product(self):
        b = [(BetweenFilter("x", float(i), float(i + 1)),) for i in range(3)]
        i_ = [(InFilter("g", m),) for m in "abcd"]
        pairs = pair_filters(b, i_)
        assert len(pairs) == 12
        assert len(set(pairs)) == 12

    def test_empty_side_strict_and_lenient(self):
        with pytest.raises(EmptyCombos):
            pair_filters([], [(InFilter("g", "a"),)])
        assert pair_filters([], [(InFilter("g", "a"),)], strict=False) == []


class TestGenerateWorkload:
    def test_counts_and_determinism(self, transactions):
        template = QueryTemplate.build(
            transactions,
            targets=[AggregationTarget(AVG, "sales"), AggregationTarget(COUNT, "sales")],
            cont_filter_attrs=["sales"],
            nom_filter_attrs=["region", "category"],
            n_cont_samples=4,
            seed=9,
        )
        queries, report = generate_workload(transactions, template)
        # 7 observed (region, category) pairs; east/tools etc. all present except none missing
        n_combos = report.n_member_combos
        assert report.n_queries == 2 * 4 * n_combos == len(queries)
        again, _ = generate_workload(transactions, template)
        assert queries == again

    def test_every_query_is_executable_as_encoded(self, transactions):
        """Generated bounds already sit on the quantization grid, so the
        executed query and the encoded query are the same query."""
        template = QueryTemplate.build(
            transactions,
            targets=[AggregationTarget(AVG, "sales")],
            cont_filter_attrs=["sales"],
            nom_filter_attrs=[],
            n_cont_samples=25,
            seed=2,
            numeric_scales={"sales": 2.0},
        )
        queries, _ = generate_workload(transactions, template)
        for q in queries:
            (f,) = q.between_filters
            assert f.lower * 2 == round(f.lower * 2)
            assert f.upper * 2 == round(f.upper * 2)

    def test_no_filter_attrs_yields_bare_queries(self, transactions):
        template = QueryTemplate.build(
            transactions,
            targets=[AggregationTarget(AVG, "sales")],
            cont_filter_attrs=[],
            nom_filter_attrs=[],
        )
        queries, report = generate_workload(transactions, template)
        assert queries == [FlatQuery(AggregationTarget(AVG, "sales"))]
        assert report.n_queries == 1


class TestFlattenGroupBy:
    def test_one_query_per_cell(self, transactions):
        gq = GroupByQuery(
            (AggregationTarget(AVG, "sales"), AggregationTarget(COUNT, "sales")),
            (),
            ("region",),
        )
        res = execute_groupby(transactions, gq)
        flat = flatten_groupby(gq, res)
        assert len(flat) == len(res.rows) * 2
        by_key = {
            (lq.query.in_filters[0].member, lq.query.target.func): lq.label for lq in flat
        }
        assert by_key[("north", AVG)] == 102.0
        assert by_key[("south", AVG)] == 82.0
        assert by_key[("north", COUNT)] == 3.0

    def test_filters_carried_into_flat_queries(self, transactions):
        between = (BetweenFilter("sales", 80.0, 110.0),)
        gq = GroupByQuery((AggregationTarget(AVG, "sales"),), between, ("region", "category"))
        flat = flatten_groupby(gq, execute_groupby(transactions, gq))
        for lq in flat:
            assert lq.query.between_filters == between
            assert [f.attr for f in lq.query.in_filters] == ["region", "category"]
            assert lq.support >= 1

    def test_result_for_different_query_rejected(self, transactions):
        gq = GroupByQuery((AggregationTarget(AVG, "sales"),), (), ("region",))
        other = GroupByQuery((AggregationTarget(AVG, "sales"),), (), ("category",))
        res = execute_groupby(transactions, gq)
        with pytest.raises(ShapeMismatch):
            flatten_groupby(other, res)

    def test_malformed_row_rejected(self):
        gq = GroupByQuery((AggregationTarget(AVG, "sales"),), (), ("region",))
        res = GroupByResult(
            ("region",),
            (AggregationTarget(AVG, "sales"),),
            (GroupByRow(("north", "extra"), (1.0,), 1),),
        )
        with pytest.raises(ShapeMismatch):
            flatten_groupby(gq, res)


class TestSplit:
    def workload(self, n):
        return [
            LabeledQuery(
                FlatQuery(AggregationTarget(COUNT, "sales"), (BetweenFilter("sales", 0.0, float(i)),)),
                float(i),
                i,
            )
            for i in range(n)
        ]

    def test_100_splits_70_15_15(self):
        s = split(self.workload(100), seed=1)
        assert (len(s.train), len(s.validation), len(s.test)) == (70, 15, 15)

    def test_10_splits_7_1_2(self):
        s = split(self.workload(10), seed=1)
        assert (len(s.train), len(s.validation), len(s.test)) == (7, 1, 2)

    def test_partition_is_disjoint_and_complete(self):
        w = self.workload(53)
        s = split(w, seed=4)
        recombined = sorted(lq.support for part in (s.train, s.validation, s.test) for lq in part)
        assert recombined == list(range(53))

    def test_same_seed_same_split(self):
        w = self.workload(20)
        assert split(w, seed=3) == split(w, seed=3)
        assert split(w, seed=3) != split(w, seed=4)

    def test_too_few_queries(self):
        with pytest.raises(TooFewQueries):
            split(self.workload(2))

    def test_bad_fractions(self):
        with pytest.raises(ValueError):
            split_indices(10, fractions=(0.5, 0.4, 0.2))


class TestWorkloadFiles:
    def test_unlabeled_round_trip(self, transactions, tmp_path):
        template = QueryTemplate.build(
            transactions,
            targets=[AggregationTarget(AVG, "sales")],
            cont_filter_attrs=["sales"],
            nom_filter_attrs=["region"],
            n_cont_samples=3,
        )
        queries, _ = generate_workload(transactions, template)
        path = tmp_path / "w.jsonl"
        write_workload(path, queries, meta={"note": "test"})
        header, back = read_workload(path)
        assert back == queries
        assert header["labeled"] is False and header["note"] == "test"

    def test_labeled_round_trip(self, tmp_path):
        records = TestSplit().workload(5)
        path = tmp_path / "l.jsonl"
        write_workload(path, records)
        header, back = read_workload(path)
        assert back == records and header["labeled"] is True

    def test_truncated_file_rejected(self, tmp_path):
        records = TestSplit().workload(5)
        path = tmp_path / "l.jsonl"
        write_workload(path, records)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ShapeMismatch):
            read_workload(path)

    def test_alien_file_rejected(self, tmp_path):
        path = tmp_path / "x.jsonl"
        path.write_text('{"kind": "something-else"}\n')
        with pytest.raises(ShapeMismatch):
            read_workload(path)
