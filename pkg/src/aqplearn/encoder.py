"""Binary matrix encoding of flat queries.

A query becomes an L x (1 + B) matrix of 0/1 values. Each row is one
sequence element: the first bit says whether the payload is a vocabulary
token ID (0) or a quantized numeric literal (1); the remaining B bits are
the payload in big-endian binary.

The layout is fixed by the vocabulary, not by the individual query:

    row 0:                     target token
    per continuous attribute:  [attribute token, lower literal, upper literal]
    per nominal attribute:     [attribute token, member token]

Attributes appear in template order (which is schema order). A query that
does not filter some attribute leaves that attribute's rows as padding
(all zeros, reserved token ID 0), so every query from one template encodes
to the same shape and decoding is unambiguous.

Continuous literals are stored as k = round(value * scale) using the
attribute's quantization scale; decoding returns k / scale. Literals must
fit in B bits and be non-negative, otherwise NumericOverflow.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MalformedMatrix, NumericOverflow, UnknownToken, VersionMismatch
from .queries import (
    AggregationFunction,
    AggregationTarget,
    BetweenFilter,
    FlatQuery,
    InFilter,
    LabeledQuery,
)

PADDING_ID = 0
VOCAB_VERSION = 1


def _bits_needed(value: int) -> int:
    return max(int(value).bit_length(), 1)


def member_token(attr: str, member: str) -> str:
    """Vocabulary token for a nominal member, namespaced by its attribute."""
    return f"{attr}={member}"


@dataclass(frozen=True)
class TokenVocabulary:
    """Token-to-ID table plus the sequence layout it implies.

    IDs are assigned from 1 (0 is padding): targets first, then per
    continuous attribute its name token, then per nominal attribute its
    name token followed by its member tokens in sorted order. bit_width is
    the payload width B, wide enough for the largest ID and the largest
    quantized literal seen when the vocabulary was built.
    """

    targets: tuple[str, ...]
    cont_attrs: tuple[str, ...]
    nom_attrs: tuple[str, ...]
    members: dict
    numeric_scales: dict
    bit_width: int
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.entries:
            entries = {}
            for token in self.targets:
                entries[token] = len(entries) + 1
            for attr in self.cont_attrs:
                entries[attr] = len(entries) + 1
            for attr in self.nom_attrs:
                entries[attr] = len(entries) + 1
                for m in self.members[attr]:
                    entries[member_token(attr, m)] = len(entries) + 1
            object.__setattr__(self, "entries", entries)
        object.__setattr__(
            self, "_id_to_token", {i: t for t, i in self.entries.items()}
        )

    @property
    def sequence_length(self) -> int:
        return 1 + 3 * len(self.cont_attrs) + 2 * len(self.nom_attrs)

    @property
    def row_width(self) -> int:
        return 1 + self.bit_width

    @property
    def size(self) -> int:
        return len(self.entries)

    def token_id(self, token: str) -> int:
        try:
            return self.entries[token]
        except KeyError:
            raise UnknownToken(f"token {token!r} is not in the vocabulary") from None

    def token_of(self, token_id: int) -> str:
        token = self._id_to_token.get(token_id)
        if token is None:
            raise MalformedMatrix(f"token ID {token_id} is not in the vocabulary")
        return token

    def scale(self, attr: str) -> float:
        return float(self.numeric_scales.get(attr, 1.0))

    def content_hash(self) -> str:
        payload = json.dumps(self.to_record(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()

    def to_record(self) -> dict:
        return {
            "targets": list(self.targets),
            "cont_attrs": list(self.cont_attrs),
            "nom_attrs": list(self.nom_attrs),
            "members": {a: list(ms) for a, ms in self.members.items()},
            "numeric_scales": dict(self.numeric_scales),
            "bit_width": self.bit_width,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TokenVocabulary":
        return cls(
            targets=tuple(rec["targets"]),
            cont_attrs=tuple(rec["cont_attrs"]),
            nom_attrs=tuple(rec["nom_attrs"]),
            members={a: tuple(ms) for a, ms in rec["members"].items()},
            numeric_scales=dict(rec["numeric_scales"]),
            bit_width=int(rec["bit_width"]),
        )


def build_vocabulary(queries: list, template) -> TokenVocabulary:
    """Derive the vocabulary and payload width from a workload.

    Targets and filterable attributes come from the template; nominal
    members are collected from the workload's IN filters and sorted per
    attribute so the ID assignment does not depend on query order.
    """
    members: dict[str, set] = {a: set() for a in template.nom_filter_attrs}
    max_literal = 0
    for q in queries:
        fq = q.query if isinstance(q, LabeledQuery) else q
        for f in fq.in_filters:
            if f.attr not in members:
                raise UnknownToken(f"IN filter on {f.attr!r} not covered by the template")
            members[f.attr].add(f.member)
        for f in fq.between_filters:
            s = template.scale(f.attr)
            k = int(np.rint(f.upper * s))
            max_literal = max(max_literal, k)
    vocab_size = (
        len(template.targets)
        + len(template.cont_filter_attrs)
        + sum(1 + len(ms) for ms in members.values())
    )
    bit_width = max(_bits_needed(vocab_size), _bits_needed(max_literal))
    return TokenVocabulary(
        targets=tuple(t.token() for t in template.targets),
        cont_attrs=tuple(template.cont_filter_attrs),
        nom_attrs=tuple(template.nom_filter_attrs),
        members={a: tuple(sorted(ms)) for a, ms in members.items()},
        numeric_scales=dict(template.numeric_scales),
        bit_width=bit_width,
    )


def _payload_bits(value: int, bit_width: int) -> np.ndarray:
    bits = np.zeros(bit_width, dtype=np.uint8)
    for pos in range(bit_width):
        bits[bit_width - 1 - pos] = (value >> pos) & 1
    return bits


def _token_row(token_id: int, bit_width: int) -> np.ndarray:
    return np.concatenate(([0], _payload_bits(token_id, bit_width))).astype(np.uint8)


def _literal_row(k: int, bit_width: int, context: str) -> np.ndarray:
    if k < 0 or k >= (1 << bit_width):
        raise NumericOverflow(
            f"literal {k} for {context} does not fit in {bit_width} unsigned bits"
        )
    return np.concatenate(([1], _payload_bits(k, bit_width))).astype(np.uint8)


def encode(query: FlatQuery, vocab: TokenVocabulary) -> np.ndarray:
    """Encode one flat query as an (L, 1+B) uint8 matrix."""
    B = vocab.bit_width
    rows = [_token_row(vocab.token_id(query.target.token()), B)]
    between = {f.attr: f for f in query.between_filters}
    in_by_attr = {f.attr: f for f in query.in_filters}
    for attr in set(between) - set(vocab.cont_attrs):
        raise UnknownToken(f"BETWEEN filter on {attr!r} not covered by the vocabulary")
    for attr in set(in_by_attr) - set(vocab.nom_attrs):
        raise UnknownToken(f"IN filter on {attr!r} not covered by the vocabulary")
    for attr in vocab.cont_attrs:
        f = between.get(attr)
        if f is None:
            rows.extend(np.zeros(vocab.row_width, dtype=np.uint8) for _ in range(3))
            continue
        s = vocab.scale(attr)
        rows.append(_token_row(vocab.token_id(attr), B))
        rows.append(_literal_row(int(np.rint(f.lower * s)), B, f"{attr} lower bound"))
        rows.append(_literal_row(int(np.rint(f.upper * s)), B, f"{attr} upper bound"))
    for attr in vocab.nom_attrs:
        f = in_by_attr.get(attr)
        if f is None:
            rows.extend(np.zeros(vocab.row_width, dtype=np.uint8) for _ in range(2))
            continue
        rows.append(_token_row(vocab.token_id(attr), B))
        rows.append(_token_row(vocab.token_id(member_token(attr, f.member)), B))
    return np.stack(rows)


def encode_workload(queries: list, vocab: TokenVocabulary) -> np.ndarray:
    """Encode a list of (optionally labeled) queries into an (n, L, 1+B) tensor."""
    mats = []
    for q in queries:
        fq = q.query if isinstance(q, LabeledQuery) else q
        mats.append(encode(fq, vocab))
    if not mats:
        return np.zeros((0, vocab.sequence_length, vocab.row_width), dtype=np.uint8)
    return np.stack(mats)


def _payload_value(row: np.ndarray) -> int:
    value = 0
    for bit in row[1:]:
        value = (value << 1) | int(bit)
    return value


def decode(matrix: np.ndarray, vocab: TokenVocabulary) -> FlatQuery:
    """Invert encode(); raises MalformedMatrix on anything that is not a
    well-formed encoding under this vocabulary."""
    mat = np.asarray(matrix)
    expected = (vocab.sequence_length, vocab.row_width)
    if mat.shape != expected:
        raise MalformedMatrix(f"expected shape {expected}, got {mat.shape}")
    if not np.isin(mat, (0, 1)).all():
        raise MalformedMatrix("matrix contains values other than 0 and 1")
    mat = mat.astype(np.uint8)

    def is_padding(row):
        return not row.any()

    def token_at(r, what):
        row = mat[r]
        if row[0] != 0:
            raise MalformedMatrix(f"row {r}: expected a token row for {what}, got a literal")
        token_id = _payload_value(row)
        if token_id == PADDING_ID:
            raise MalformedMatrix(f"row {r}: unexpected padding where {what} should be")
        return vocab.token_of(token_id)

    def literal_at(r, what):
        row = mat[r]
        if row[0] != 1:
            raise MalformedMatrix(f"row {r}: expected a numeric literal for {what}")
        return _payload_value(row)

    target_token = token_at(0, "the aggregation target")
    if target_token not in vocab.targets:
        raise MalformedMatrix(f"row 0: {target_token!r} is not an aggregation target")
    func_name, _, rest = target_token.partition("(")
    target = AggregationTarget(AggregationFunction(func_name), rest.rstrip(")"))

    betweens = []
    r = 1
    for attr in vocab.cont_attrs:
        chunk = mat[r : r + 3]
        if all(is_padding(row) for row in chunk):
            r += 3
            continue
        if any(is_padding(row) for row in chunk):
            raise MalformedMatrix(f"rows {r}..{r + 2}: partially padded BETWEEN block")
        if token_at(r, "a filter attribute") != attr:
            raise MalformedMatrix(f"row {r}: expected attribute token {attr!r}")
        s = vocab.scale(attr)
        lo = literal_at(r + 1, "the lower bound") / s
        hi = literal_at(r + 2, "the upper bound") / s
        if lo > hi:
            raise MalformedMatrix(f"rows {r + 1}..{r + 2}: bounds out of order ({lo} > {hi})")
        betweens.append(BetweenFilter(attr, lo, hi))
        r += 3
    ins = []
    for attr in vocab.nom_attrs:
        chunk = mat[r : r + 2]
        if all(is_padding(row) for row in chunk):
            r += 2
            continue
        if any(is_padding(row) for row in chunk):
            raise MalformedMatrix(f"rows {r}..{r + 1}: partially padded IN block")
        if token_at(r, "a filter attribute") != attr:
            raise MalformedMatrix(f"row {r}: expected attribute token {attr!r}")
        mtok = token_at(r + 1, "a member")
        prefix = f"{attr}="
        if not mtok.startswith(prefix):
            raise MalformedMatrix(f"row {r + 1}: {mtok!r} is not a member of {attr!r}")
        ins.append(InFilter(attr, mtok[len(prefix):]))
        r += 2
    return FlatQuery(target, tuple(betweens), tuple(ins))


def row_token_ids(X: np.ndarray, row: int = 0) -> np.ndarray:
    """Token IDs stored at one sequence row across a whole encoded tensor."""
    X = np.asarray(X)
    payload = X[:, row, 1:].astype(np.int64)
    weights = 1 << np.arange(payload.shape[1] - 1, -1, -1, dtype=np.int64)
    return payload @ weights


# -- encoded tensor files -----------------------------------------------------

ENCODED_VERSION = 1


def save_encoded(path, X: np.ndarray, y: np.ndarray, support: np.ndarray,
                 meta: dict | None = None) -> None:
    """Store an encoded workload: inputs, labels, supports and metadata."""
    doc = {"kind": "encoded", "version": ENCODED_VERSION, "count": int(len(X))}
    doc.update(meta or {})
    with open(path, "wb") as fh:
        np.savez(
            fh,
            X=np.asarray(X, dtype=np.uint8),
            y=np.asarray(y, dtype=np.float64),
            support=np.asarray(support, dtype=np.int64),
            meta=np.frombuffer(json.dumps(doc, sort_keys=True).encode(), dtype=np.uint8),
        )


def load_encoded(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("kind") != "encoded" or meta.get("version") != ENCODED_VERSION:
            raise VersionMismatch(f"{path} is not a version-{ENCODED_VERSION} encoded workload")
        return data["X"].copy(), data["y"].copy(), data["support"].copy(), meta


# -- vocabulary files -------------------------------------------------------

def save_vocabulary(vocab: TokenVocabulary, path: str | Path, meta: dict | None = None) -> None:
    doc = {"kind": "vocabulary", "version": VOCAB_VERSION}
    doc.update(meta or {})
    doc.update(vocab.to_record())
    doc["content_hash"] = vocab.content_hash()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_vocabulary(path: str | Path) -> tuple[TokenVocabulary, dict]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != "vocabulary" or doc.get("version") != VOCAB_VERSION:
        raise VersionMismatch(f"{path} is not a version-{VOCAB_VERSION} vocabulary file")
    vocab = TokenVocabulary.from_record(doc)
    if doc.get("content_hash") != vocab.content_hash():
        raise VersionMismatch(f"{path}: content hash does not match the vocabulary")
    return vocab, doc
