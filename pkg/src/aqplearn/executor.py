"""Exact aggregation engine over the columnar store.

Evaluates flat and group-by queries by full scan (boolean masks, no
indexes) and supplies the training labels. It doubles as the correctness
oracle for the learned model, so exactness and determinism matter more
than speed here.

Filter semantics: BETWEEN is inclusive on both bounds; IN binds a nominal
attribute to exactly one member. Median of an even-sized multiset is the
mean of the two middle order statistics.

Every aggregate, whether reached through execute_flat or through a
group-by cell, goes through the same kernel on the same row-ordered value
sequence, so flattened group-by cells reproduce execute_flat results
bit-for-bit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EmptyAggregate, WrongKind
from .queries import (
    COUNTING_FUNCS,
    AggregationFunction,
    AggregationTarget,
    BetweenFilter,
    FlatQuery,
    GroupByQuery,
    InFilter,
    LabeledQuery,
)
from .store import Dataset, Kind


@dataclass(frozen=True)
class GroupByRow:
    members: tuple[str, ...]
    values: tuple[float, ...]
    support: int


@dataclass(frozen=True)
class GroupByResult:
    """Observed groups only, sorted lexicographically by member tuple."""

    groupby_attrs: tuple[str, ...]
    targets: tuple[AggregationTarget, ...]
    rows: tuple[GroupByRow, ...]


@dataclass(frozen=True)
class LabelReport:
    """Outcome counts of a batch labeling run."""

    total: int
    labeled: int
    zero_filled: int
    excluded_empty: int


def _aggregate(func: AggregationFunction, values: np.ndarray) -> float:
    """Aggregation kernel; `values` must be in dataset row order."""
    if func is AggregationFunction.COUNT:
        return float(len(values))
    if func is AggregationFunction.COUNT_DISTINCT:
        return float(len(np.unique(values)))
    if func is AggregationFunction.SUM:
        return float(np.sum(values)) if len(values) else 0.0
    if len(values) == 0:
        raise EmptyAggregate(f"{func.value} over zero matched rows")
    if func is AggregationFunction.AVG:
        return float(np.mean(values))
    if func is AggregationFunction.MEDIAN:
        return float(np.median(values))
    if func is AggregationFunction.MIN:
        return float(np.min(values))
    if func is AggregationFunction.MAX:
        return float(np.max(values))
    raise ValueError(f"unhandled aggregation {func}")  # pragma: no cover


def _target_column(ds: Dataset, target: AggregationTarget) -> np.ndarray:
    kind = ds.kind_of(target.attr)
    if kind is Kind.CONTINUOUS:
        return ds.continuous_values(target.attr)
    if target.func not in {AggregationFunction.COUNT, AggregationFunction.COUNT_DISTINCT}:
        raise WrongKind(
            f"{target.func.value} is not applicable to nominal attribute {target.attr!r}"
        )
    return ds.nominal_id_values(target.attr)


def _filter_mask(
    ds: Dataset,
    between: tuple[BetweenFilter, ...],
    in_filters: tuple[InFilter, ...] = (),
) -> np.ndarray:
    mask = np.ones(ds.row_count, dtype=bool)
    for f in between:
        v = ds.continuous_values(f.attr)
        mask &= (v >= f.lower) & (v <= f.upper)
    for f in in_filters:
        ids = ds.nominal_id_values(f.attr)
        mid = ds.member_id(f.attr, f.member)
        if mid is None:
            mask[:] = False
        else:
            mask &= ids == mid
    return mask


def execute_flat(ds: Dataset, q: FlatQuery) -> tuple[float, int]:
    """Evaluate a flat query exactly; returns (value, matched row count).

    Avg/Median/Min/Max over zero matched rows raise EmptyAggregate;
    Count/CountDistinct/Sum return 0.
    """
    column = _target_column(ds, q.target)
    mask = _filter_mask(ds, q.between_filters, q.in_filters)
    values = column[mask]
    value = _aggregate(q.target.func, values)
    return value, int(len(values))


def _group_codes(ds: Dataset, attrs: tuple[str, ...], rows: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Composite group code per row, plus the dictionary shape for decoding."""
    id_arrays = [ds.nominal_id_values(a)[rows] for a in attrs]
    dims = tuple(max(len(ds.members(a)), 1) for a in attrs)
    codes = np.ravel_multi_index(id_arrays, dims)
    return codes, dims


def execute_groupby(ds: Dataset, gq: GroupByQuery) -> GroupByResult:
    """Evaluate a group-by query exactly over the rows passing its filters.

    Only member tuples observed among the matched rows appear (support is
    always >= 1), one row per tuple, sorted lexicographically.
    """
    for a in gq.groupby_attrs:
        if ds.kind_of(a) is not Kind.NOMINAL:
            raise WrongKind(f"GROUP BY attribute {a!r} must be nominal")
    columns = [_target_column(ds, t) for t in gq.targets]
    mask = _filter_mask(ds, gq.between_filters)
    matched = np.flatnonzero(mask)

    rows: list[GroupByRow] = []
    if len(matched):
        codes, dims = _group_codes(ds, gq.groupby_attrs, matched)
        order = np.argsort(codes, kind="stable")  # keeps row order within groups
        sorted_codes = codes[order]
        sorted_rows = matched[order]
        starts = np.concatenate(([0], np.flatnonzero(np.diff(sorted_codes)) + 1))
        ends = np.concatenate((starts[1:], [len(sorted_codes)]))
        member_lists = [ds.members(a) for a in gq.groupby_attrs]
        for s, e in zip(starts, ends):
            group_rows = sorted_rows[s:e]
            ids = np.unravel_index(int(sorted_codes[s]), dims)
            members = tuple(member_lists[k][int(i)] for k, i in enumerate(ids))
            values = tuple(_aggregate(t.func, col[group_rows]) for t, col in zip(gq.targets, columns))
            rows.append(GroupByRow(members, values, int(e - s)))
    rows.sort(key=lambda r: r.members)
    return GroupByResult(tuple(gq.groupby_attrs), tuple(gq.targets), tuple(rows))


def extract_member_combinations(ds: Dataset, nominal_attrs: list[str]) -> list[tuple[str, ...]]:
    """Distinct member tuples observed in the data, lexicographically sorted."""
    if not nominal_attrs:
        raise WrongKind("at least one nominal attribute required")
    for a in nominal_attrs:
        if ds.kind_of(a) is not Kind.NOMINAL:
            raise WrongKind(f"attribute {a!r} must be nominal")
    if ds.row_count == 0:
        return []
    all_rows = np.arange(ds.row_count)
    codes, dims = _group_codes(ds, tuple(nominal_attrs), all_rows)
    member_lists = [ds.members(a) for a in nominal_attrs]
    combos = []
    for code in np.unique(codes):
        ids = np.unravel_index(int(code), dims)
        combos.append(tuple(member_lists[k][int(i)] for k, i in enumerate(ids)))
    combos.sort()
    return combos


def label_workload(
    ds: Dataset,
    queries: list[FlatQuery],
    threads: int = 1,
) -> tuple[list[LabeledQuery], LabelReport]:
    """Label a batch of flat queries against the dataset.

    Queries sharing the same BETWEEN filters and nominal attributes are
    evaluated through one group-by scan each, which is what makes labeling
    hundreds of thousands of generated queries tractable; the per-group
    aggregation kernel is the one execute_flat uses, so the shortcut is
    exact. Zero-support queries get label 0 for counting aggregates
    (Count/CountDistinct/Sum) and are excluded otherwise. Output order
    matches input order minus exclusions.
    """
    results: list[LabeledQuery | None] = [None] * len(queries)
    zero_filled = 0
    excluded = 0

    groups: dict[tuple, list[int]] = {}
    for i, q in enumerate(queries):
        key = (q.between_filters, tuple(f.attr for f in q.in_filters))
        groups.setdefault(key, []).append(i)

    def handle_zero(i: int, q: FlatQuery) -> tuple[int, LabeledQuery | None]:
        if q.target.func in COUNTING_FUNCS:
            return i, LabeledQuery(q, 0.0, 0)
        return i, None

    def run_group(key: tuple, idxs: list[int]) -> list[tuple[int, LabeledQuery | None]]:
        between, in_attrs = key
        out: list[tuple[int, LabeledQuery | None]] = []
        if not in_attrs:
            for i in idxs:
                q = queries[i]
                value, support = execute_flat(ds, q)
                if support == 0:
                    out.append(handle_zero(i, q))
                else:
                    out.append((i, LabeledQuery(q, value, support)))
            return out
        targets: list[AggregationTarget] = []
        for i in idxs:
            if queries[i].target not in targets:
                targets.append(queries[i].target)
        gq = GroupByQuery(tuple(targets), between, in_attrs)
        res = execute_groupby(ds, gq)
        by_members = {row.members: row for row in res.rows}
        t_index = {t: k for k, t in enumerate(targets)}
        for i in idxs:
            q = queries[i]
            members = tuple(f.member for f in q.in_filters)
            row = by_members.get(members)
            if row is None:
                out.append(handle_zero(i, q))
            else:
                out.append((i, LabeledQuery(q, row.values[t_index[q.target]], row.support)))
        return out

    if threads > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = pool.map(lambda kv: run_group(*kv), groups.items())
            resolved = [item for chunk in chunks for item in chunk]
    else:
        resolved = [item for key, idxs in groups.items() for item in run_group(key, idxs)]

    for i, lq in resolved:
        results[i] = lq
        if lq is None:
            excluded += 1
        elif lq.support == 0:
            zero_filled += 1

    labeled = [lq for lq in results if lq is not None]
    report = LabelReport(
        total=len(queries),
        labeled=len(labeled),
        zero_filled=zero_filled,
        excluded_empty=excluded,
    )
    return labeled, report
