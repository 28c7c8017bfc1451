"""Artificial workload generation from a domain-expert query template.

The template declares the SELECT targets plus the continuous and nominal
attributes eligible for filters. Continuous BETWEEN bounds are sampled
from the attribute's four quartile intervals (two interval picks with
replacement, one uniform draw from each, smaller value becomes the lower
bound). Nominal IN filters enumerate the member combinations actually
observed in the data. Each combination of nominal filters is paired with
each continuous filter, and every target gets the full pairing.

Sampled bounds are snapped to the encoder's quantization grid (round to
the nearest multiple of 1/scale, clipped inside [min, max]) so the query
that gets executed is bit-identical to the query the model sees.

Everything here is a pure function of (Dataset, QueryTemplate): the same
seed reproduces the same workload byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import executor
from .errors import EmptyCombos, InvalidTarget, ShapeMismatch, TooFewQueries, WrongKind
from .queries import (
    AggregationFunction,
    AggregationTarget,
    BetweenFilter,
    FlatQuery,
    GroupByQuery,
    InFilter,
    LabeledQuery,
    target_allowed,
)
from .store import ContinuousStats, Dataset, Kind, continuous_stats

DEFAULT_N_CONT_SAMPLES = 200
WORKLOAD_VERSION = 1


@dataclass(frozen=True)
class QueryTemplate:
    """Declaration a workload is sampled from.

    Attribute lists are kept in schema order regardless of the order they
    were declared in, which fixes the canonical token sequence used by the
    encoder. Build instances through :meth:`QueryTemplate.build` so the
    lists are validated against the dataset.
    """

    targets: tuple[AggregationTarget, ...]
    cont_filter_attrs: tuple[str, ...]
    nom_filter_attrs: tuple[str, ...]
    n_cont_samples: int = DEFAULT_N_CONT_SAMPLES
    seed: int = 0
    numeric_scales: dict = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        ds: Dataset,
        targets: list[AggregationTarget],
        cont_filter_attrs: list[str],
        nom_filter_attrs: list[str],
        n_cont_samples: int = DEFAULT_N_CONT_SAMPLES,
        seed: int = 0,
        numeric_scales: dict | None = None,
    ) -> "QueryTemplate":
        if not targets:
            raise InvalidTarget("template needs at least one aggregation target")
        for t in targets:
            t.validate(ds)
        if len(set(targets)) != len(targets):
            raise InvalidTarget(f"duplicate targets: {[t.token() for t in targets]}")
        for attrs, kind in ((cont_filter_attrs, Kind.CONTINUOUS), (nom_filter_attrs, Kind.NOMINAL)):
            if len(set(attrs)) != len(attrs):
                raise WrongKind(f"duplicate filter attributes: {attrs}")
            for a in attrs:
                if ds.kind_of(a) is not kind:
                    raise WrongKind(f"filter attribute {a!r} is not {kind.value}")
        if n_cont_samples < 1:
            raise ValueError("n_cont_samples must be >= 1")
        scales = dict(numeric_scales or {})
        for a, s in scales.items():
            if ds.kind_of(a) is not Kind.CONTINUOUS or s <= 0:
                raise ValueError(f"numeric scale for {a!r} must be positive on a continuous attribute")
        order = lambda a: ds.attribute(a).index
        return cls(
            targets=tuple(targets),
            cont_filter_attrs=tuple(sorted(cont_filter_attrs, key=order)),
            nom_filter_attrs=tuple(sorted(nom_filter_attrs, key=order)),
            n_cont_samples=int(n_cont_samples),
            seed=int(seed),
            numeric_scales=scales,
        )

    def scale(self, attr: str) -> float:
        return float(self.numeric_scales.get(attr, 1.0))

    def to_record(self) -> dict:
        return {
            "targets": [{"func": t.func.value, "attr": t.attr} for t in self.targets],
            "cont_filter_attrs": list(self.cont_filter_attrs),
            "nom_filter_attrs": list(self.nom_filter_attrs),
            "n_cont_samples": self.n_cont_samples,
            "seed": self.seed,
            "numeric_scales": dict(self.numeric_scales),
        }


def load_template(source: str | Path | dict, ds: Dataset) -> QueryTemplate:
    """Read a template config (JSON file or dict) and validate it.

    Targets come either as explicit {func, attr} pairs under "targets" or
    as "agg_funcs" x "agg_attrs" lists expanded via build_select_clause.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raw = dict(source)
    if "targets" in raw:
        targets = [
            AggregationTarget(AggregationFunction(t["func"]), t["attr"]) for t in raw["targets"]
        ]
    elif "agg_funcs" in raw and "agg_attrs" in raw:
        funcs = [AggregationFunction(f) for f in raw["agg_funcs"]]
        targets = build_select_clause(funcs, raw["agg_attrs"], ds, strict=raw.get("strict", True))
    else:
        raise InvalidTarget("template must declare 'targets' or 'agg_funcs'+'agg_attrs'")
    return QueryTemplate.build(
        ds,
        targets=targets,
        cont_filter_attrs=raw.get("cont_filter_attrs", []),
        nom_filter_attrs=raw.get("nom_filter_attrs", []),
        n_cont_samples=raw.get("n_cont_samples", DEFAULT_N_CONT_SAMPLES),
        seed=raw.get("seed", 0),
        numeric_scales=raw.get("numeric_scales"),
    )


def build_select_clause(
    funcs: list[AggregationFunction],
    attrs: list[str],
    ds: Dataset,
    strict: bool = True,
) -> list[AggregationTarget]:
    """Cross product of aggregation functions and attributes.

    Only Count/CountDistinct may hit a nominal attribute; in strict mode a
    forbidden pair raises InvalidTarget, otherwise it is silently skipped.
    Each resulting target later gets its own model and training set.
    """
    targets = []
    for func in funcs:
        for attr in attrs:
            kind = ds.kind_of(attr)
            if target_allowed(func, kind):
                targets.append(AggregationTarget(func, attr))
            elif strict:
                raise InvalidTarget(
                    f"{func.value} is not applicable to nominal attribute {attr!r}"
                )
    return targets


def snap_to_grid(value: float, scale: float, lo: float, hi: float) -> float:
    """Round onto the grid {k/scale} and clip to grid points inside [lo, hi]."""
    k_lo = math.ceil(lo * scale - 1e-9)
    k_hi = math.floor(hi * scale + 1e-9)
    if k_lo > k_hi:
        raise ValueError(
            f"no grid point with scale {scale} inside [{lo}, {hi}]; increase the scale"
        )
    k = int(np.rint(value * scale))
    k = min(max(k, k_lo), k_hi)
    return k / scale


def gen_between_filters(
    stats: dict[str, ContinuousStats],
    attrs: list[str],
    n: int,
    rng: np.random.Generator,
    scales: dict | None = None,
) -> list[tuple[BetweenFilter, ...]]:
    """Sample n combinations of one BETWEEN filter per continuous attribute.

    Per attribute and sample: draw two of the four quartile intervals
    uniformly with replacement, one uniform value from each, order them and
    snap to the quantization grid. Deterministic given the generator state.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    scales = scales or {}
    combos: list[tuple[BetweenFilter, ...]] = []
    intervals = {a: stats[a].intervals() for a in attrs}
    for _ in range(n):
        filters = []
        for a in attrs:
            iv = intervals[a]
            picks = rng.integers(0, len(iv), size=2)
            draws = [rng.uniform(iv[p][0], iv[p][1]) for p in picks]
            s = float(scales.get(a, 1.0))
            lo, hi = stats[a].min, stats[a].max
            bounds = sorted(snap_to_grid(d, s, lo, hi) for d in draws)
            filters.append(BetweenFilter(a, bounds[0], bounds[1]))
        combos.append(tuple(filters))
    return combos


def gen_in_filter_combinations(
    combos: list[tuple[str, ...]],
    nominal_attrs: list[str],
) -> list[tuple[InFilter, ...]]:
    """One IN-filter set per observed member combination.

    `combos` must come from executor.extract_member_combinations over the
    same attribute list, so only combinations that exist in the result set
    are turned into filters.
    """
    if not combos:
        raise EmptyCombos("group-by result set is empty; no member combinations")
    sets = []
    for combo in combos:
        if len(combo) != len(nominal_attrs):
            raise ShapeMismatch(
                f"combo {combo} does not align with attributes {nominal_attrs}"
            )
        sets.append(tuple(InFilter(a, m) for a, m in zip(nominal_attrs, combo)))
    return sets


def pair_filters(
    between_sets: list[tuple[BetweenFilter, ...]],
    in_sets: list[tuple[InFilter, ...]],
    strict: bool = True,
) -> list[tuple[tuple[BetweenFilter, ...], tuple[InFilter, ...]]]:
    """Full cross product of continuous and nominal filter sets."""
    if not between_sets or not in_sets:
        if strict:
            raise EmptyCombos("both filter set lists must be non-empty")
        return []
    return [(b, i) for b in between_sets for i in in_sets]


@dataclass(frozen=True)
class GenerationReport:
    n_targets: int
    n_between_sets: int
    n_member_combos: int
    n_queries: int


def generate_workload(ds: Dataset, template: QueryTemplate) -> tuple[list[FlatQuery], GenerationReport]:
    """Instantiate the template into a full unlabeled workload.

    Order is deterministic: targets outermost, then continuous filter
    samples, then member combinations.
    """
    rng = np.random.default_rng(template.seed)
    if template.cont_filter_attrs:
        stats = {a: continuous_stats(ds, a) for a in template.cont_filter_attrs}
        between_sets = gen_between_filters(
            stats,
            list(template.cont_filter_attrs),
            template.n_cont_samples,
            rng,
            template.numeric_scales,
        )
    else:
        between_sets = [()]
    if template.nom_filter_attrs:
        combos = executor.extract_member_combinations(ds, list(template.nom_filter_attrs))
        in_sets = gen_in_filter_combinations(combos, list(template.nom_filter_attrs))
    else:
        in_sets = [()]
    pairs = pair_filters(between_sets, in_sets)
    queries = [
        FlatQuery(target, b, i) for target in template.targets for (b, i) in pairs
    ]
    report = GenerationReport(
        n_targets=len(template.targets),
        n_between_sets=len(between_sets),
        n_member_combos=len(in_sets),
        n_queries=len(queries),
    )
    return queries, report


def flatten_groupby(gq: GroupByQuery, result: executor.GroupByResult) -> list[LabeledQuery]:
    """Expand a group-by result table into one labeled flat query per cell.

    Every row contributes one query per target, carrying the row's member
    tuple as IN filters and the query's BETWEEN filters; the cell value is
    the label. Output count is always rows x targets.
    """
    if result.groupby_attrs != gq.groupby_attrs:
        raise ShapeMismatch(
            f"result grouped by {result.groupby_attrs}, query by {gq.groupby_attrs}"
        )
    if result.targets != gq.targets:
        raise ShapeMismatch("result table targets do not align with the query's targets")
    flat: list[LabeledQuery] = []
    for row in result.rows:
        if len(row.members) != len(gq.groupby_attrs) or len(row.values) != len(gq.targets):
            raise ShapeMismatch(f"malformed result row: {row}")
        in_filters = tuple(InFilter(a, m) for a, m in zip(gq.groupby_attrs, row.members))
        for k, target in enumerate(gq.targets):
            flat.append(
                LabeledQuery(
                    FlatQuery(target, gq.between_filters, in_filters),
                    label=row.values[k],
                    support=row.support,
                )
            )
    return flat


@dataclass(frozen=True)
class WorkloadSplit:
    train: list[LabeledQuery]
    validation: list[LabeledQuery]
    test: list[LabeledQuery]


def split_indices(
    n: int,
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15),
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shuffled train/validation/test index arrays over range(n).

    Sizes follow floor(train), floor(validation), remainder to test, so
    100 queries split as 70/15/15 and 10 as 7/1/2.
    """
    if n < 3:
        raise TooFewQueries(f"need at least 3 queries to split, got {n}")
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three non-negatives summing to 1: {fractions}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(math.floor(fractions[0] * n))
    n_val = int(math.floor(fractions[1] * n))
    return perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]


def split(
    workload: list[LabeledQuery],
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15),
    seed: int = 0,
) -> WorkloadSplit:
    """Shuffle under the seed and partition train/validation/test."""
    tr, va, te = split_indices(len(workload), fractions, seed)
    return WorkloadSplit(
        [workload[i] for i in tr],
        [workload[i] for i in va],
        [workload[i] for i in te],
    )


# -- workload files ---------------------------------------------------------

def write_workload(
    path: str | Path,
    records: list[FlatQuery] | list[LabeledQuery],
    meta: dict | None = None,
) -> None:
    """Write a workload file: one JSON header line, then one query per line."""
    labeled = bool(records) and isinstance(records[0], LabeledQuery)
    header = {
        "kind": "workload",
        "version": WORKLOAD_VERSION,
        "labeled": labeled,
        "count": len(records),
    }
    header.update(meta or {})
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for r in records:
            rec = r.to_record()
            if not labeled:
                rec["label"] = None
                rec["support"] = None
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_workload(path: str | Path) -> tuple[dict, list]:
    """Read a workload file back into FlatQuery or LabeledQuery objects."""
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "workload" or header.get("version") != WORKLOAD_VERSION:
            raise ShapeMismatch(f"{path} is not a version-{WORKLOAD_VERSION} workload file")
        records = []
        for line in fh:
            rec = json.loads(line)
            if header["labeled"]:
                records.append(LabeledQuery.from_record(rec))
            else:
                records.append(FlatQuery.from_record(rec))
    if len(records) != header["count"]:
        raise ShapeMismatch(
            f"{path}: header declares {header['count']} records, found {len(records)}"
        )
    return header, records
