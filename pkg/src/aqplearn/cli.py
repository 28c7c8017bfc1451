"""Command-line pipeline: profile, generate, label, encode, train, predict,
eval, bench.

Each stage reads the previous stage's artifact and writes its own. Files
embed the SHA-256 of their upstream inputs, and every stage verifies the
chain before doing work, so a stale or swapped file fails fast instead of
silently producing labels for the wrong table or predictions under the
wrong vocabulary.

Exit codes: 0 on success, 1 on an expected pipeline error (reported as a
one-line JSON object on stderr), 2 on bad command-line usage. Output files
are written to a temporary name and renamed into place, so an interrupted
run never leaves a half-written artifact behind.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import encoder, executor, metrics, nnet, querygen, store
from .errors import AqpError, HashMismatch, InvalidTarget, ShapeMismatch


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


class _atomic:
    """Write to <path>.tmp and rename into place on success."""

    def __init__(self, path):
        self.path = Path(path)
        self.tmp = Path(str(path) + ".tmp")

    def __enter__(self) -> Path:
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            os.replace(self.tmp, self.path)
        elif self.tmp.exists():
            self.tmp.unlink()
        return False


def _load_dataset(args) -> store.Dataset:
    schema = store.load_schema(args.schema)
    return store.load_csv(args.data, schema)


def _check_upstream(header: dict, key: str, path, what: str) -> None:
    recorded = header.get(key)
    if recorded is None:
        return
    actual = _sha256_file(path)
    if recorded != actual:
        raise HashMismatch(
            f"{what} {path} (sha256 {actual[:12]}..) is not the file this artifact "
            f"was built from (expected {recorded[:12]}..)"
        )


# -- subcommands -------------------------------------------------------------

def cmd_profile(args) -> int:
    ds = _load_dataset(args)
    report = {"rows": ds.row_count, "attributes": []}
    for attr in ds.schema:
        entry = {"name": attr.name, "kind": attr.kind.value}
        if attr.kind is store.Kind.CONTINUOUS:
            st = store.continuous_stats(ds, attr.name)
            entry.update(min=st.min, q1=st.q1, median=st.median, q3=st.q3, max=st.max)
        else:
            entry["members"] = store.distinct_members(ds, attr.name)
        entry["entropy_bits"] = metrics.column_entropy(ds, attr.name)
        report["attributes"].append(entry)
    report["mean_entropy_bits"] = metrics.mean_entropy(
        a["entropy_bits"] for a in report["attributes"]
    )
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
        return 0
    print(f"rows: {report['rows']}")
    for entry in report["attributes"]:
        if entry["kind"] == "continuous":
            detail = (
                f"min={entry['min']:g} q1={entry['q1']:g} median={entry['median']:g} "
                f"q3={entry['q3']:g} max={entry['max']:g}"
            )
        else:
            detail = f"members={len(entry['members'])}"
        print(f"{entry['name']:<20} {entry['kind']:<11} {detail}  "
              f"entropy={entry['entropy_bits']:.3f} bits")
    print(f"mean entropy: {report['mean_entropy_bits']:.3f} bits")
    return 0


def cmd_generate(args) -> int:
    ds = _load_dataset(args)
    template = querygen.load_template(args.template, ds)
    if args.seed is not None:
        template = dataclasses.replace(template, seed=args.seed)
    queries, report = querygen.generate_workload(ds, template)
    meta = {
        "dataset_sha256": _sha256_file(args.data),
        "template": template.to_record(),
        "generation": dataclasses.asdict(report),
    }
    with _atomic(args.out) as tmp:
        querygen.write_workload(tmp, queries, meta)
    if args.sql:
        with _atomic(str(args.out) + ".sql") as tmp:
            with open(tmp, "w", encoding="utf-8") as fh:
                for q in queries:
                    fh.write(q.to_sql() + ";\n")
    print(
        f"generated {report.n_queries} queries "
        f"({report.n_targets} targets x {report.n_between_sets} windows "
        f"x {report.n_member_combos} member combos) -> {args.out}"
    )
    return 0


def cmd_label(args) -> int:
    ds = _load_dataset(args)
    header, queries = querygen.read_workload(args.workload)
    if header.get("labeled"):
        raise ShapeMismatch(f"{args.workload} is already labeled")
    _check_upstream(header, "dataset_sha256", args.data, "dataset")
    labeled, report = executor.label_workload(ds, queries, threads=args.threads)
    meta = {
        "dataset_sha256": _sha256_file(args.data),
        "workload_sha256": _sha256_file(args.workload),
        "template": header.get("template"),
        "labeling": dataclasses.asdict(report),
    }
    with _atomic(args.out) as tmp:
        querygen.write_workload(tmp, labeled, meta)
    print(
        f"labeled {report.labeled}/{report.total} queries "
        f"({report.zero_filled} zero-support kept, "
        f"{report.excluded_empty} empty excluded) -> {args.out}"
    )
    return 0


def cmd_encode(args) -> int:
    ds = _load_dataset(args)
    template = querygen.load_template(args.template, ds)
    header, records = querygen.read_workload(args.workload)
    if not header.get("labeled"):
        raise ShapeMismatch(f"{args.workload} is not labeled; run the label stage first")
    _check_upstream(header, "dataset_sha256", args.data, "dataset")
    vocab = encoder.build_vocabulary(records, template)
    X = encoder.encode_workload(records, vocab)
    y = np.array([lq.label for lq in records], dtype=np.float64)
    support = np.array([lq.support for lq in records], dtype=np.int64)
    workload_hash = _sha256_file(args.workload)
    with _atomic(args.out_vocab) as tmp:
        encoder.save_vocabulary(vocab, tmp, meta={"workload_sha256": workload_hash})
    with _atomic(args.out_encoded) as tmp:
        encoder.save_encoded(
            tmp, X, y, support,
            meta={"workload_sha256": workload_hash, "vocab_content_hash": vocab.content_hash()},
        )
    print(
        f"encoded {len(records)} queries as {X.shape[1]}x{X.shape[2]} matrices "
        f"({vocab.size} tokens, {vocab.bit_width} payload bits) "
        f"-> {args.out_encoded}, {args.out_vocab}"
    )
    return 0


def _select_target_rows(X, vocab, target: str | None) -> np.ndarray:
    if target is None:
        if len(vocab.targets) > 1:
            raise InvalidTarget(
                f"vocabulary holds {len(vocab.targets)} targets {list(vocab.targets)}; "
                "pick one with --target"
            )
        return np.arange(len(X))
    token_id = vocab.token_id(target)
    return np.flatnonzero(encoder.row_token_ids(X) == token_id)


def _model_config(args) -> nnet.ModelConfig:
    fields = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            fields.update(json.load(fh))
    for name, value in (
        ("lstm_units", args.lstm_units),
        ("dense_units", args.dense_units),
        ("learning_rate", args.lr),
        ("batch_size", args.batch_size),
        ("max_epochs", args.max_epochs),
        ("patience", args.patience),
        ("seed", args.seed),
    ):
        if value is not None:
            fields[name] = value
    return nnet.ModelConfig(**fields)


def _load_vocab_and_check(vocab_path, encoded_meta) -> encoder.TokenVocabulary:
    vocab, _ = encoder.load_vocabulary(vocab_path)
    recorded = encoded_meta.get("vocab_content_hash")
    if recorded is not None and recorded != vocab.content_hash():
        raise HashMismatch(
            f"{vocab_path} is not the vocabulary the encoded workload was built with"
        )
    return vocab


def cmd_train(args) -> int:
    X, y, _, meta = encoder.load_encoded(args.encoded)
    vocab = _load_vocab_and_check(args.vocab, meta)
    rows = _select_target_rows(X, vocab, args.target)
    if len(rows) == 0:
        raise InvalidTarget(f"no queries for target {args.target!r} in {args.encoded}")
    X, y = X[rows], y[rows]
    config = _model_config(args)
    tr, va, te = querygen.split_indices(len(X), seed=args.split_seed)
    model = nnet.LstmModel(
        config, vocab.sequence_length, vocab.row_width, vocab_hash=vocab.content_hash()
    )
    report = model.fit(X[tr], y[tr], X[va], y[va])
    with _atomic(args.out) as tmp:
        model.save(tmp)
    sidecar = {
        "target": args.target,
        "split_seed": args.split_seed,
        "n_train": len(tr),
        "n_validation": len(va),
        "n_test": len(te),
        "train_report": report.to_record(),
    }
    with _atomic(str(args.out) + ".report.json") as tmp:
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(
        f"trained {report.epochs_run} epochs (best epoch {report.best_epoch}, "
        f"validation MSE {report.best_val_mse:.6g}, {report.wall_seconds:.1f}s) -> {args.out}"
    )
    return 0


def cmd_predict(args) -> int:
    vocab, _ = encoder.load_vocabulary(args.vocab)
    model = nnet.LstmModel.load(args.checkpoint, expected_vocab_hash=vocab.content_hash())
    header, records = querygen.read_workload(args.workload)
    X = encoder.encode_workload(records, vocab)
    preds = model.predict_batch(X, n_workers=args.workers)
    with _atomic(args.out) as tmp:
        with open(tmp, "w", encoding="utf-8") as fh:
            head = {
                "kind": "predictions",
                "version": 1,
                "count": len(records),
                "checkpoint_sha256": _sha256_file(args.checkpoint),
            }
            fh.write(json.dumps(head, sort_keys=True) + "\n")
            for rec, p in zip(records, preds):
                fq = rec.query if hasattr(rec, "query") else rec
                row = {"query": fq.to_record(), "prediction": float(p)}
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"predicted {len(records)} queries -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    X, y, _, meta = encoder.load_encoded(args.encoded)
    vocab = _load_vocab_and_check(args.vocab, meta)
    model = nnet.LstmModel.load(args.checkpoint, expected_vocab_hash=vocab.content_hash())
    rows = _select_target_rows(X, vocab, args.target)
    X, y = X[rows], y[rows]
    if args.split == "all":
        X_eval, y_eval = X, y
    else:
        tr, va, te = querygen.split_indices(len(X), seed=args.split_seed)
        part = {"train": tr, "validation": va, "test": te}[args.split]
        X_eval, y_eval = X[part], y[part]
    preds = model.predict_batch(X_eval, n_workers=args.workers)
    report = metrics.evaluate_predictions(preds, y_eval)
    extra = {
        "input_variance": metrics.input_tensor_variance(X_eval),
    }
    if args.data and args.schema:
        ds = _load_dataset(args)
        extra["mean_entropy_bits"] = metrics.dataset_entropy(ds)["mean"]
    report = dataclasses.replace(
        report,
        input_variance=extra["input_variance"],
        mean_entropy_bits=extra.get("mean_entropy_bits"),
    )
    if args.out:
        doc = report.to_record()
        doc.update(split=args.split, split_seed=args.split_seed, target=args.target)
        with _atomic(args.out) as tmp:
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
                fh.write("\n")
    print(report.to_text())
    return 0


def cmd_bench(args) -> int:
    X, _, _, meta = encoder.load_encoded(args.encoded)
    vocab = _load_vocab_and_check(args.vocab, meta)
    model = nnet.LstmModel.load(args.checkpoint, expected_vocab_hash=vocab.content_hash())
    n_ql = min(args.ql_queries, len(X))
    ql = metrics.measure_ql(model.predict, X[:n_ql])
    qt = metrics.measure_qt(model.predict_batch, X, n_workers=args.workers)
    doc = {
        "ql_mean_ms": ql.mean_ms,
        "ql_max_ms": ql.max_ms,
        "ql_queries": ql.n,
        "qt_qps": qt.qps,
        "qt_queries": qt.queries,
        "qt_seconds": qt.seconds,
        "workers": args.workers,
    }
    if args.out:
        with _atomic(args.out) as tmp:
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
                fh.write("\n")
    print(
        f"QL {ql.mean_ms:.3f} ms/query (max {ql.max_ms:.3f}, n={ql.n})  "
        f"QT {qt.qps:.0f} queries/s ({qt.queries} queries, {args.workers} workers)"
    )
    return 0


# -- parser -------------------------------------------------------------------

def _add_data_args(p):
    p.add_argument("--data", required=True, help="CSV data file")
    p.add_argument("--schema", required=True, help="JSON schema declaration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aqplearn",
        description="Learned approximate query processing pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="summarize a dataset's attributes")
    _add_data_args(p)
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    p.set_defaults(fn=cmd_profile)

    p = sub.add_parser("generate", help="sample an artificial workload from a template")
    _add_data_args(p)
    p.add_argument("--template", required=True, help="JSON query template")
    p.add_argument("--out", required=True, help="output workload file")
    p.add_argument("--seed", type=int, default=None, help="override the template seed")
    p.add_argument("--sql", action="store_true", help="also write <out>.sql with query text")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("label", help="run every workload query exactly and record labels")
    _add_data_args(p)
    p.add_argument("--workload", required=True, help="unlabeled workload file")
    p.add_argument("--out", required=True, help="output labeled workload file")
    p.add_argument("--threads", type=int, default=1, help="executor thread count")
    p.set_defaults(fn=cmd_label)

    p = sub.add_parser("encode", help="build the vocabulary and encode a labeled workload")
    _add_data_args(p)
    p.add_argument("--template", required=True, help="JSON query template")
    p.add_argument("--workload", required=True, help="labeled workload file")
    p.add_argument("--out-vocab", required=True, help="output vocabulary file")
    p.add_argument("--out-encoded", required=True, help="output encoded tensor file")
    p.set_defaults(fn=cmd_encode)

    p = sub.add_parser("train", help="train the regressor on an encoded workload")
    p.add_argument("--encoded", required=True, help="encoded tensor file")
    p.add_argument("--vocab", required=True, help="vocabulary file")
    p.add_argument("--out", required=True, help="output checkpoint file")
    p.add_argument("--target", default=None, help="target token, e.g. 'avg(sales)'")
    p.add_argument("--config", default=None, help="JSON file of model settings")
    p.add_argument("--lstm-units", type=int, default=None)
    p.add_argument("--dense-units", type=int, default=None)
    p.add_argument("--lr", type=float, default=None, help="learning rate")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="weight init and shuffle seed")
    p.add_argument("--split-seed", type=int, default=0, help="train/validation/test shuffle seed")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="answer workload queries with a trained model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--workload", required=True, help="workload file (labels ignored)")
    p.add_argument("--out", required=True, help="output predictions file")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("eval", help="accuracy report on a split of an encoded workload")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--encoded", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--target", default=None, help="target token (must match training)")
    p.add_argument("--split", choices=["train", "validation", "test", "all"], default="test")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--data", default=None, help="CSV data file (adds entropy to the report)")
    p.add_argument("--schema", default=None)
    p.add_argument("--out", default=None, help="optional JSON report file")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bench", help="measure per-query latency and batch throughput")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--encoded", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--ql-queries", type=int, default=200,
                   help="how many single-query latency samples to take")
    p.add_argument("--out", default=None, help="optional JSON report file")
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (AqpError, OSError) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
