"""Tokenization, vocabulary, rating encoding, and dataset ingestion.

File formats handled here:

* reviews: JSON Lines, one object per line with keys ``product_id``
  (string), ``rating`` (number, integral 1-5), ``review`` (string).
* features: binary, magic ``IMGF``, u32-LE record count, u32-LE feature
  dim, then per record a u16-LE id byte-length, the UTF-8 product id,
  and dim float32-LE values (widened to float64 on load).
* embeddings: UTF-8 text, per line a token followed by its
  space-separated components.
"""

from __future__ import annotations

import json
import logging
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>")

_PUNCT = ".,!?;:"
DEFAULT_MAX_LEN = 100
DEFAULT_MIN_COUNT = 5


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, and peel ``.,!?;:`` into their
    own tokens.  Apostrophes stay inside words, so contractions survive.
    """
    tokens = []
    for chunk in text.lower().split():
        word = []
        for ch in chunk:
            if ch in _PUNCT:
                if word:
                    tokens.append("".join(word))
                    word = []
                tokens.append(ch)
            else:
                word.append(ch)
        if word:
            tokens.append("".join(word))
    return tokens


def detokenize(tokens) -> str:
    """Space-join with punctuation attached to the preceding word."""
    parts: list[str] = []
    for tok in tokens:
        if tok in _PUNCT and parts:
            parts[-1] += tok
        else:
            parts.append(tok)
    return " ".join(parts)


class Vocabulary:
    """Bidirectional token/id table with four reserved control ids."""

    def __init__(self, tokens=()):
        self.id_to_token = list(RESERVED_TOKENS) + [
            t for t in tokens if t not in RESERVED_TOKENS]
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise DataError("duplicate token in vocabulary")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        return self.id_to_token[idx]

    def encode(self, tokens, add_control: bool = True) -> list[int]:
        """Token ids, bracketed with BOS/EOS unless ``add_control`` is off."""
        ids = [self.id_of(t) for t in tokens]
        return [BOS_ID] + ids + [EOS_ID] if add_control else ids

    def decode(self, ids, strip_control: bool = True) -> list[str]:
        toks = [self.token_of(i) for i in ids]
        if strip_control:
            ctrl = {RESERVED_TOKENS[PAD_ID], RESERVED_TOKENS[BOS_ID],
                    RESERVED_TOKENS[EOS_ID]}
            toks = [t for t in toks if t not in ctrl]
        return toks

    def to_json(self) -> dict:
        return {"tokens": self.id_to_token[len(RESERVED_TOKENS):]}

    @classmethod
    def from_json(cls, payload: dict) -> "Vocabulary":
        return cls(payload["tokens"])


def build_vocab(corpus, min_count: int = 1) -> Vocabulary:
    """Vocabulary over token sequences, keeping tokens seen at least
    ``min_count`` times, ordered by frequency (desc) then token (asc).
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counts: Counter = Counter()
    for seq in corpus:
        counts.update(t for t in seq if t not in RESERVED_TOKENS)
    kept = sorted((t for t, n in counts.items() if n >= min_count),
                  key=lambda t: (-counts[t], t))
    return Vocabulary(kept)


def rating_dim(mode: str) -> int:
    if mode == "onehot":
        return 5
    if mode == "scalar":
        return 1
    raise ValueError(f"unknown rating mode {mode!r}")


def encode_rating(r: int, mode: str = "onehot") -> np.ndarray:
    """Rating 1..5 as a guidance vector.

    ``onehot`` puts a single 1 at index r-1; ``scalar`` maps to the
    single value (r - 3) / 2 in [-1, 1].
    """
    if not isinstance(r, (int, np.integer)) or not 1 <= r <= 5:
        raise DataError(f"rating must be an integer in 1..5, got {r!r}")
    if mode == "onehot":
        g = np.zeros(5)
        g[r - 1] = 1.0
        return g
    if mode == "scalar":
        return np.array([(r - 3) / 2.0])
    raise ValueError(f"unknown rating mode {mode!r}")


@dataclass
class ReviewExample:
    """One aligned training record."""

    product_id: str
    rating: int
    tokens: list[int]          # BOS ... EOS
    feature: np.ndarray

    @property
    def length(self) -> int:
        """Content tokens, excluding BOS/EOS."""
        return len(self.tokens) - 2


@dataclass
class EmbeddingTable:
    """Word-embedding matrix, one row per vocabulary id."""

    weights: np.ndarray
    trainable: bool = True


def load_embeddings(path, vocab: Vocabulary, embed_dim: int,
                    trainable: bool = True) -> EmbeddingTable:
    """Plain-text embeddings; rows for out-of-file tokens stay zero."""
    weights = np.zeros((len(vocab), embed_dim))
    matched = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != embed_dim:
                raise DataError(
                    f"{path}:{lineno}: expected {embed_dim} components, "
                    f"got {len(values)}")
            if token in vocab:
                weights[vocab.id_of(token)] = [float(v) for v in values]
                matched += 1
    log.info("loaded embeddings for %d/%d vocabulary tokens", matched,
             len(vocab))
    return EmbeddingTable(weights=weights, trainable=trainable)


FEATURE_MAGIC = b"IMGF"


def write_features(path, features: dict[str, np.ndarray]):
    """Write an IMGF feature file; values are stored as float32."""
    dims = {v.shape[0] for v in features.values()}
    if len(dims) > 1:
        raise DataError(f"inconsistent feature lengths {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", len(features), dim))
        for pid, vec in features.items():
            encoded = pid.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(np.asarray(vec, dtype="<f4").tobytes())


def read_features(path, expect_dim: int | None = None) -> dict[str, np.ndarray]:
    """Read an IMGF feature file into float64 vectors keyed by id."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != FEATURE_MAGIC:
        raise DataError(f"{path}: not a feature file (bad magic)")
    if len(data) < 12:
        raise DataError(f"{path}: truncated header")
    count, dim = struct.unpack_from("<II", data, 4)
    if expect_dim is not None and dim != expect_dim:
        raise DataError(
            f"{path}: feature dim {dim} != configured dim {expect_dim}")
    features = {}
    offset = 12
    for _ in range(count):
        if offset + 2 > len(data):
            raise DataError(f"{path}: truncated record header")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        end = offset + id_len + 4 * dim
        if end > len(data):
            raise DataError(f"{path}: truncated record payload")
        pid = data[offset:offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
        features[pid] = vec.astype(np.float64)
        offset += 4 * dim
    return features


@dataclass
class LoadStats:
    total: int = 0
    kept: int = 0
    dropped_overlong: int = 0
    dropped_missing_feature: int = 0

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "kept": self.kept,
            "dropped": {
                "overlong": self.dropped_overlong,
                "missing_feature": self.dropped_missing_feature,
            },
        }


@dataclass
class LoadResult:
    examples: list[ReviewExample]
    vocab: Vocabulary
    feature_dim: int
    stats: LoadStats


def _parse_review_line(line: str, lineno: int, path) -> tuple[str, int, str]:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(record, dict):
        raise DataError(f"{path}:{lineno}: expected a JSON object")
    for key in ("product_id", "rating", "review"):
        if key not in record:
            raise DataError(f"{path}:{lineno}: missing key {key!r}")
    rating = record["rating"]
    if isinstance(rating, float):
        if not rating.is_integer():
            raise DataError(
                f"{path}:{lineno}: rating {rating} is not integral")
        rating = int(rating)
    if not isinstance(rating, int) or isinstance(rating, bool) \
            or not 1 <= rating <= 5:
        raise DataError(
            f"{path}:{lineno}: rating must be an integer in 1..5, "
            f"got {record['rating']!r}")
    if not isinstance(record["product_id"], str) \
            or not isinstance(record["review"], str):
        raise DataError(f"{path}:{lineno}: product_id and review must be strings")
    return record["product_id"], rating, record["review"]


def load_dataset(reviews_path, features_path, max_len: int = DEFAULT_MAX_LEN,
                 min_count: int = DEFAULT_MIN_COUNT,
                 feature_dim: int | None = None,
                 vocab: Vocabulary | None = None) -> LoadResult:
    """Read, tokenize, filter, and align reviews with their features.

    Reviews whose token count exceeds ``max_len`` and reviews without a
    matching feature record are dropped (counted, logged); malformed
    records raise with their line number.  When ``vocab`` is omitted it
    is built from the surviving reviews with ``min_count``.
    """
    features = read_features(features_path, expect_dim=feature_dim)
    stats = LoadStats()
    rows = []
    with open(reviews_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            stats.total += 1
            pid, rating, text = _parse_review_line(line, lineno, reviews_path)
            tokens = tokenize(text)
            if len(tokens) > max_len:
                stats.dropped_overlong += 1
                log.info("%s:%d: dropped (%d tokens > max_len %d)",
                         reviews_path, lineno, len(tokens), max_len)
                continue
            if pid not in features:
                stats.dropped_missing_feature += 1
                log.info("%s:%d: dropped (no feature for product %r)",
                         reviews_path, lineno, pid)
                continue
            rows.append((pid, rating, tokens))
    if vocab is None:
        vocab = build_vocab((tokens for _, _, tokens in rows), min_count)
    examples = [
        ReviewExample(product_id=pid, rating=rating,
                      tokens=vocab.encode(tokens), feature=features[pid])
        for pid, rating, tokens in rows
    ]
    stats.kept = len(examples)
    dim = next(iter(features.values())).shape[0] if features else \
        (feature_dim or 0)
    log.info("loaded %d examples (%d overlong, %d missing feature)",
             stats.kept, stats.dropped_overlong, stats.dropped_missing_feature)
    return LoadResult(examples=examples, vocab=vocab, feature_dim=dim,
                      stats=stats)
