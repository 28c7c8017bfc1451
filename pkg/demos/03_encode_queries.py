"""
Turning queries into fixed-size binary matrices
===============================================

The model consumes queries as (L, 1+B) binary matrices: L token rows,
each carrying one flag bit plus a B-bit big-endian payload. Token rows
name the aggregate, attributes, and members; literal rows carry
quantized filter bounds. Absent filters stay as all-zero padding, so
every query from one template has the same shape.
"""

from aqplearn import (
    AggregationFunction,
    AggregationTarget,
    QueryTemplate,
    build_vocabulary,
    decode,
    encode,
    generate_workload,
    synth,
)

ds = synth.make_transactions_table()
template = QueryTemplate.build(
    ds,
    targets=[AggregationTarget(AggregationFunction.AVG, "sales")],
    cont_filter_attrs=["sales"],
    nom_filter_attrs=["region", "category"],
    n_cont_samples=40,
    seed=7,
    numeric_scales={"sales": 1.0},
)
queries, _ = generate_workload(ds, template)

# The vocabulary assigns every token a positive integer ID (0 is
# padding) and fixes the payload width B from the largest ID and the
# largest quantized literal in the workload.
vocab = build_vocabulary(queries, template)
print(f"vocabulary: {vocab.size} tokens, bit width {vocab.bit_width}")
print(f"matrix shape: ({vocab.sequence_length}, {vocab.row_width})")
for token, tid in list(vocab.entries.items())[:6]:
    print(f"  id {tid}: {token}")

# Encode one query and read the matrix row by row.
q = queries[0]
print(f"\n{q.to_sql()}")
X = encode(q, vocab)
for row in X:
    flag, payload = row[0], row[1:]
    value = int("".join(str(b) for b in payload), 2)
    kind = "literal" if flag else ("padding" if value == 0 else "token")
    print(f"  {row.tolist()}  {kind} {value}")

# Decoding restores the identical query object.
assert decode(X, vocab) == q
print("\ndecode(encode(q)) == q")
