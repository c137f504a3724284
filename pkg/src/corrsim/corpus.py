"""Sentence-pair ingestion, vocabulary, embeddings, splitting and batching.

File formats handled here:

* pair TSV: one pair per nonblank line, ``score<TAB>sent1<TAB>sent2`` for
  labeled data or ``sent1<TAB>sent2`` for unlabeled, UTF-8, LF or CRLF.
* embedding text: optional ``count dim`` header, then ``token v1 .. vD``.
* embedding binary: ASCII header ``count dim\\n``, then per word a
  space-terminated token followed by ``dim`` little-endian float32 values.
* word frequencies: ``token<TAB>count`` per line.

Tokenization is deliberately simple and deterministic: lowercase, split on
whitespace, then peel terminal punctuation characters into their own tokens.
Inputs are expected to be English already; no translation happens here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, FormatError
from .numkit import SeededRng, TRAIN_DTYPE, init_uniform

UNK_TOKEN = "<unk>"
UNK_INDEX = 0

_TERMINAL_PUNCT = ".,!?;:"


def tokenize(text: str) -> list[str]:
    """Lowercase, whitespace-split, and split off terminal punctuation."""
    out = []
    for raw in text.lower().split():
        tail = []
        while len(raw) > 1 and raw[-1] in _TERMINAL_PUNCT:
            tail.append(raw[-1])
            raw = raw[:-1]
        out.append(raw)
        out.extend(reversed(tail))
    return out


@dataclass
class SentencePair:
    """Two token sequences plus an optional gold similarity in [0, 5]."""

    id: str
    tokens1: list[str]
    tokens2: list[str]
    gold: float | None = None


def parse_sts_tsv(path) -> list[SentencePair]:
    """Read a pair TSV; the line number becomes the pair id."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not valid UTF-8 ({exc})") from None
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) == 3:
            try:
                gold = float(fields[0])
            except ValueError:
                raise FormatError(
                    f"{path}:{lineno}: score field {fields[0]!r} is not a number"
                ) from None
            if not (0.0 <= gold <= 5.0) or not np.isfinite(gold):
                raise FormatError(
                    f"{path}:{lineno}: score {gold} outside [0, 5]")
            s1, s2 = fields[1], fields[2]
        elif len(fields) == 2:
            gold = None
            s1, s2 = fields
        else:
            raise FormatError(
                f"{path}:{lineno}: expected 2 or 3 tab-separated fields, "
                f"got {len(fields)}")
        tokens1 = tokenize(s1)
        tokens2 = tokenize(s2)
        if not tokens1 or not tokens2:
            raise FormatError(f"{path}:{lineno}: empty sentence")
        pairs.append(SentencePair(str(lineno), tokens1, tokens2, gold))
    return pairs


def write_sts_tsv(pairs: Sequence[SentencePair], path) -> None:
    """Inverse of parse_sts_tsv; token sequences and golds round-trip exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            s1 = " ".join(p.tokens1)
            s2 = " ".join(p.tokens2)
            if p.gold is None:
                fh.write(f"{s1}\t{s2}\n")
            else:
                fh.write(f"{p.gold}\t{s1}\t{s2}\n")


class Vocabulary:
    """Token-to-index map with UNK reserved at index 0.

    Known tokens map to 1..len-1 in first-appearance order; anything unseen
    resolves to the shared UNK index.
    """

    def __init__(self, tokens: Sequence[str]):
        self.tokens = [UNK_TOKEN] + list(tokens)
        self._index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise DataError("duplicate tokens in vocabulary")

    @classmethod
    def from_pairs(cls, pairs: Sequence[SentencePair]) -> "Vocabulary":
        seen: dict[str, None] = {}
        for p in pairs:
            for tok in p.tokens1:
                seen.setdefault(tok, None)
            for tok in p.tokens2:
                seen.setdefault(tok, None)
        return cls(list(seen))

    def __len__(self) -> int:
        return len(self.tokens)

    def index(self, token: str) -> int:
        return self._index.get(token, UNK_INDEX)

    def indices(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.index(t) for t in tokens], dtype=np.int64)

    def oov_count(self, tokens: Sequence[str]) -> int:
        return sum(1 for t in tokens if t not in self._index)

    def pair_oov_count(self, pair: SentencePair) -> int:
        return self.oov_count(pair.tokens1) + self.oov_count(pair.tokens2)


class EmbeddingTable:
    """Trainable token-to-vector map aligned with a Vocabulary.

    Row i is the vector of vocabulary index i; row 0 is the shared trainable
    UNK vector. `origin` records whether the table started random ("ri") or
    from pretrained vectors ("wi").
    """

    def __init__(self, vocab: Vocabulary, vectors: np.ndarray, origin: str):
        if vectors.ndim != 2 or vectors.shape[0] != len(vocab):
            raise DataError(
                f"embedding rows {vectors.shape} do not cover vocabulary of "
                f"size {len(vocab)}")
        if origin not in ("ri", "wi"):
            raise ConfigError(f"unknown embedding origin {origin!r}")
        self.vocab = vocab
        self.vectors = vectors
        self.origin = origin

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def random(cls, vocab: Vocabulary, dim: int, rng: SeededRng,
               scale: float = 0.05, dtype=TRAIN_DTYPE,
               origin: str = "ri") -> "EmbeddingTable":
        return cls(vocab, init_uniform(len(vocab), dim, scale, rng, dtype), origin)

    def row(self, token: str) -> np.ndarray:
        return self.vectors[self.vocab.index(token)]

    def rows(self, tokens: Sequence[str]) -> np.ndarray:
        return self.vectors[self.vocab.indices(tokens)]

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.vocab, self.vectors.copy(), self.origin)


def _assemble_table(found: dict[str, np.ndarray], dim: int, vocab: Vocabulary,
                    rng: SeededRng, dtype, source: str) -> EmbeddingTable:
    """Common tail of both loaders: random-fill then copy matched rows."""
    vectors = init_uniform(len(vocab), dim, 0.05, rng, dtype)
    matched = 0
    for token, vec in found.items():
        idx = vocab.index(token)
        if idx != UNK_INDEX:
            vectors[idx] = vec.astype(dtype)
            matched += 1
    if matched == 0:
        raise FormatError(
            f"{source}: no embedding vectors matched the vocabulary")
    return EmbeddingTable(vocab, vectors, "wi")


def load_embeddings_text(path, vocab: Vocabulary, rng: SeededRng,
                         dtype=TRAIN_DTYPE) -> EmbeddingTable:
    """Load text-format vectors; unseen vocabulary rows get seeded random init.

    The first occurrence of a token wins if the file repeats it.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    found: dict[str, np.ndarray] = {}
    dim = None
    start = 0
    if lines:
        head = lines[0].split()
        if len(head) == 2 and all(re.fullmatch(r"\d+", f) for f in head):
            start = 1
    for lineno in range(start, len(lines)):
        line = lines[lineno]
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) < 2:
            raise FormatError(f"{path}:{lineno + 1}: expected token and values")
        token = fields[0]
        try:
            vec = np.array([float(f) for f in fields[1:]], dtype=np.float64)
        except ValueError:
            raise FormatError(
                f"{path}:{lineno + 1}: non-numeric embedding value") from None
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise FormatError(
                f"{path}:{lineno + 1}: dimension {vec.shape[0]} differs from "
                f"{dim} seen earlier")
        found.setdefault(token, vec)
    if dim is None:
        raise FormatError(f"{path}: no embedding vectors in file")
    return _assemble_table(found, dim, vocab, rng, dtype, str(path))


def load_embeddings_binary(path, vocab: Vocabulary, rng: SeededRng,
                           dtype=TRAIN_DTYPE) -> EmbeddingTable:
    """Load word2vec-style binary vectors (header, then token + raw float32)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    nl = blob.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing header line")
    head = blob[:nl].split()
    if len(head) != 2:
        raise FormatError(f"{path}: header must be 'count dim'")
    try:
        count, dim = int(head[0]), int(head[1])
    except ValueError:
        raise FormatError(f"{path}: header must be 'count dim'") from None
    if count <= 0 or dim <= 0:
        raise FormatError(f"{path}: header declares {count} vectors of dim {dim}")
    found: dict[str, np.ndarray] = {}
    off = nl + 1
    for _ in range(count):
        while off < len(blob) and blob[off:off + 1] in (b"\n", b"\r", b" "):
            off += 1
        end = blob.find(b" ", off)
        if end < 0:
            raise FormatError(
                f"{path}: truncated token at byte offset {off}")
        try:
            token = blob[off:end].decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(
                f"{path}: token at byte offset {off} is not UTF-8") from None
        off = end + 1
        need = 4 * dim
        if off + need > len(blob):
            raise FormatError(
                f"{path}: truncated vector for {token!r} at byte offset {off}")
        vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=off).astype(np.float64)
        off += need
        found.setdefault(token, vec)
    return _assemble_table(found, dim, vocab, rng, dtype, str(path))


def load_word_frequencies(path) -> dict[str, int]:
    """Read a ``token<TAB>count`` file; counts must be positive integers."""
    freqs: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh.read().splitlines(), start=1):
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise FormatError(
                    f"{path}:{lineno}: expected token<TAB>count")
            try:
                count = int(fields[1])
            except ValueError:
                raise FormatError(
                    f"{path}:{lineno}: count {fields[1]!r} is not an integer"
                ) from None
            if count < 1:
                raise FormatError(f"{path}:{lineno}: count must be positive")
            freqs[fields[0]] = count
    if not freqs:
        raise FormatError(f"{path}: empty frequency file")
    return freqs


@dataclass
class DatasetSplit:
    """Disjoint train/validation partition produced by a seeded shuffle."""

    train: list[SentencePair]
    validation: list[SentencePair]
    seed: int


def split_80_20(pairs: Sequence[SentencePair], seed: int) -> DatasetSplit:
    """Seeded shuffle, then floor(80%) to train and the rest to validation."""
    n = len(pairs)
    if n < 5:
        raise DataError(f"need at least 5 pairs to split, got {n}")
    perm = SeededRng(seed).permutation(n)
    k = (4 * n) // 5
    train = [pairs[i] for i in perm[:k]]
    validation = [pairs[i] for i in perm[k:]]
    return DatasetSplit(train, validation, seed)


def batches(items: Sequence, batch_size: int, seed: int) -> list[list]:
    """Seeded shuffle cut into batches; a trailing singleton is dropped.

    Callers reshuffle per epoch by varying the seed. The singleton drop keeps
    every batch usable under the correlation loss, which needs at least two
    samples.
    """
    if batch_size < 2:
        raise ConfigError(f"batch size must be at least 2, got {batch_size}")
    perm = SeededRng(seed).permutation(len(items))
    out = []
    for lo in range(0, len(items), batch_size):
        chunk = [items[i] for i in perm[lo:lo + batch_size]]
        if len(chunk) >= 2:
            out.append(chunk)
    return out
