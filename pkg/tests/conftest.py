"""Shared fixtures: a small hand-written transactions table whose
aggregates are easy to verify by hand, reused across the suite."""

import pytest

from aqplearn import Dataset, Kind, make_schema

# region, category, sales, units. Sales are chosen so that
# avg(sales) is 102 for north and 82 for south.
TRANSACTION_ROWS = [
    ("north", "food", 100.0, 5.0),
    ("north", "tools", 104.0, 3.0),
    ("north", "food", 102.0, 5.0),
    ("south", "food", 82.0, 2.0),
    ("south", "tools", 80.0, 4.0),
    ("south", "food", 84.0, 2.0),
    ("east", "tools", 120.0, 7.0),
    ("east", "food", 60.0, 1.0),
    ("west", "tools", 90.0, 6.0),
    ("west", "food", 110.0, 8.0),
]

TRANSACTION_COLUMNS = [
    ("region", Kind.NOMINAL),
    ("category", Kind.NOMINAL),
    ("sales", Kind.CONTINUOUS),
    ("units", Kind.CONTINUOUS),
]


def build_transactions(rows=None) -> Dataset:
    rows = TRANSACTION_ROWS if rows is None else rows
    schema = make_schema(TRANSACTION_COLUMNS)
    columns = {
        "region": [r[0] for r in rows],
        "category": [r[1] for r in rows],
        "sales": [r[2] for r in rows],
        "units": [r[3] for r in rows],
    }
    return Dataset.from_columns(schema, columns)


@pytest.fixture
def transactions() -> Dataset:
    return build_transactions()


@pytest.fixture
def transactions_csv(tmp_path):
    """The same table as a CSV file plus its schema declaration."""
    import json

    path = tmp_path / "transactions.csv"
    lines = ["region,category,sales,units"]
    lines += [f"{r},{c},{s},{u}" for r, c, s, u in TRANSACTION_ROWS]
    path.write_text("\n".join(lines) + "\n")
    schema_path = tmp_path / "schema.json"
    schema_path.write_text(
        json.dumps([{"name": n, "kind": k.value} for n, k in TRANSACTION_COLUMNS])
    )
    return path, schema_path
