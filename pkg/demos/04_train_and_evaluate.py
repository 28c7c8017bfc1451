"""
Training the sequence regressor on labeled queries
==================================================

End-to-end learning pass: sample a workload, label it exactly, encode
it, train the LSTM regressor, and score held-out queries with NRMSE
(RMSE as a percentage of the label range).
"""

import numpy as np

from aqplearn import (
    AggregationFunction,
    AggregationTarget,
    LstmModel,
    ModelConfig,
    QueryTemplate,
    build_vocabulary,
    encode_workload,
    generate_workload,
    label_workload,
    nrmse,
    split_indices,
    synth,
)

ds = synth.make_transactions_table(n_rows=2000, seed=3)
template = QueryTemplate.build(
    ds,
    targets=[AggregationTarget(AggregationFunction.AVG, "sales")],
    cont_filter_attrs=["sales"],
    nom_filter_attrs=["region", "category"],
    n_cont_samples=250,
    seed=21,
    numeric_scales={"sales": 1.0},
)
queries, _ = generate_workload(ds, template)
labeled, report = label_workload(ds, queries)
print(f"workload: {report.labeled} labeled queries")

vocab = build_vocabulary([lq.query for lq in labeled], template)
X = encode_workload(labeled, vocab)
y = np.array([lq.label for lq in labeled])
print(f"encoded tensor: {X.shape}, {X.nbytes / 1e6:.1f} MB")

# 70/15/15 split; the validation part steers early stopping, the test
# part is only touched for the final score.
tr, va, te = split_indices(len(y), (0.70, 0.15, 0.15), seed=0)
config = ModelConfig(
    lstm_units=24,
    dense_units=32,
    learning_rate=3e-3,
    batch_size=32,
    max_epochs=60,
    patience=10,
    seed=0,
)
model = LstmModel(config, vocab.sequence_length, vocab.row_width, vocab.content_hash())
train_report = model.fit(X[tr], y[tr], X[va], y[va])
print(
    f"trained {train_report.epochs_run} epochs in {train_report.wall_seconds:.1f}s, "
    f"best validation MSE {train_report.best_val_mse:.5f} at epoch {train_report.best_epoch}"
)

pred = model.predict_batch(X[te])
print(f"test NRMSE: {nrmse(pred, y[te]):.2f}% of label range "
      f"[{y[te].min():.1f}, {y[te].max():.1f}]")

# A few held-out queries, predicted vs exact.
print("\nprediction  exact     query")
for i in range(5):
    lq = [labeled[j] for j in te][i]
    print(f"{pred[i]:9.2f}  {lq.label:8.2f}  {lq.query.to_sql()[:76]}")
