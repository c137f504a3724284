"""Surface similarity features for a sentence pair.

The feature vector has 8 components, always in this order:

    [unigram overlap, bigram overlap, trigram overlap,
     pathlen soft overlap, lin soft overlap,
     ic-weighted embedding cosine, greedy alignment coverage,
     length ratio]

Every component lies in [0, 1] and is symmetric in the two sentences. The
vector is a fixed input to the scorer: no gradients flow back into feature
extraction, and the embedding table used here is a frozen snapshot.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .corpus import EmbeddingTable, SentencePair
from .errors import DataError, FormatError

FEATURE_COUNT = 8
FEATURE_NAMES = (
    "unigram_overlap",
    "bigram_overlap",
    "trigram_overlap",
    "pathlen_soft_overlap",
    "lin_soft_overlap",
    "weighted_cosine",
    "greedy_alignment",
    "length_ratio",
)

MEASURES = ("pathlen", "lin")


class WordSimilarityProvider:
    """Precomputed word-pair similarities for the two knowledge measures.

    Lookup is symmetric; sim(w, w) is 1 by definition and unknown pairs
    fall back to exact-match (1 if equal else 0).
    """

    def __init__(self, table: dict[tuple[str, str], tuple[float, float]]):
        self._table = {}
        for (w1, w2), sims in table.items():
            key = (w1, w2) if w1 <= w2 else (w2, w1)
            self._table[key] = sims

    @classmethod
    def empty(cls) -> "WordSimilarityProvider":
        return cls({})

    @classmethod
    def load_tsv(cls, path) -> "WordSimilarityProvider":
        """Read ``w1<TAB>w2<TAB>pathlen<TAB>lin`` rows; later rows win."""
        table: dict[tuple[str, str], tuple[float, float]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh.read().splitlines(), start=1):
                if not line.strip():
                    continue
                fields = line.split("\t")
                if len(fields) != 4:
                    raise FormatError(
                        f"{path}:{lineno}: expected w1<TAB>w2<TAB>pathlen<TAB>lin")
                try:
                    pathlen, lin = float(fields[2]), float(fields[3])
                except ValueError:
                    raise FormatError(
                        f"{path}:{lineno}: similarity values must be numbers"
                    ) from None
                if not (0.0 <= pathlen <= 1.0 and 0.0 <= lin <= 1.0):
                    raise FormatError(
                        f"{path}:{lineno}: similarities must lie in [0, 1]")
                key = (fields[0], fields[1])
                if key[0] > key[1]:
                    key = (key[1], key[0])
                table[key] = (pathlen, lin)
        return cls(table)

    def rows(self) -> list[tuple[str, str, float, float]]:
        """Stored pairs in canonical order, for serialization."""
        return sorted((w1, w2, s[0], s[1])
                      for (w1, w2), s in self._table.items())

    def sim(self, w1: str, w2: str, measure: str) -> float:
        if measure not in MEASURES:
            raise DataError(f"unknown similarity measure {measure!r}")
        if w1 == w2:
            return 1.0
        key = (w1, w2) if w1 <= w2 else (w2, w1)
        entry = self._table.get(key)
        if entry is None:
            return 0.0
        return entry[MEASURES.index(measure)]


class InformationContent:
    """ic(w) = ln(total / freq(w)) over a corpus frequency table.

    Unseen tokens count as frequency 1, so they carry the maximum weight
    ln(total). Rarer words always weigh more than common ones.
    """

    def __init__(self, freqs: dict[str, int]):
        if not freqs:
            raise DataError("empty word-frequency table")
        self.freqs = dict(freqs)
        self.total = sum(self.freqs.values())

    def ic(self, token: str) -> float:
        freq = self.freqs.get(token, 1)
        return math.log(self.total / freq)


def _ngrams(tokens: Sequence[str], n: int) -> set[tuple[str, ...]]:
    return {tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)}


def ngram_overlap(tokens1: Sequence[str], tokens2: Sequence[str], n: int) -> float:
    """Harmonic mean of the two per-sentence n-gram overlap degrees."""
    if n not in (1, 2, 3):
        raise DataError(f"n-gram order must be 1, 2 or 3, got {n}")
    s1 = _ngrams(tokens1, n)
    s2 = _ngrams(tokens2, n)
    overlap = len(s1 & s2)
    if overlap == 0:
        return 0.0
    return 2.0 / (len(s1) / overlap + len(s2) / overlap)


def _coverage(src: Sequence[str], dst: Sequence[str], measure: str,
              provider: WordSimilarityProvider) -> float:
    return sum(max(provider.sim(w, w2, measure) for w2 in dst) for w in src) / len(src)


def soft_overlap(tokens1: Sequence[str], tokens2: Sequence[str], measure: str,
                 provider: WordSimilarityProvider) -> float:
    """Harmonic mean of best-match coverage in both directions."""
    if not tokens1 or not tokens2:
        raise DataError("soft_overlap needs nonempty token lists")
    c12 = _coverage(tokens1, tokens2, measure, provider)
    c21 = _coverage(tokens2, tokens1, measure, provider)
    if c12 == 0.0 or c21 == 0.0:
        return 0.0
    return 2.0 * c12 * c21 / (c12 + c21)


def _ic_weighted_sum(tokens: Sequence[str], emb: EmbeddingTable,
                     ic: InformationContent) -> np.ndarray:
    v = np.zeros(emb.dim, dtype=np.float64)
    for w in tokens:
        v += ic.ic(w) * emb.row(w).astype(np.float64)
    return v


def weighted_cosine(tokens1: Sequence[str], tokens2: Sequence[str],
                    emb: EmbeddingTable, ic: InformationContent) -> float:
    """Cosine of the ic-weighted embedding sums, clamped to [0, 1]."""
    if not tokens1 or not tokens2:
        raise DataError("weighted_cosine needs nonempty token lists")
    v1 = _ic_weighted_sum(tokens1, emb, ic)
    v2 = _ic_weighted_sum(tokens2, emb, ic)
    n1 = np.linalg.norm(v1)
    n2 = np.linalg.norm(v2)
    if n1 < 1e-12 or n2 < 1e-12:
        return 0.0
    return float(min(1.0, max(0.0, v1 @ v2 / (n1 * n2))))


def _token_cosines(tokens1: Sequence[str], tokens2: Sequence[str],
                   emb: EmbeddingTable) -> np.ndarray:
    """Pairwise embedding cosines; zero-norm rows produce cosine 0."""
    r1 = np.stack([emb.row(w).astype(np.float64) for w in tokens1])
    r2 = np.stack([emb.row(w).astype(np.float64) for w in tokens2])
    n1 = np.linalg.norm(r1, axis=1)
    n2 = np.linalg.norm(r2, axis=1)
    denom = np.outer(n1, n2)
    cos = np.zeros((len(tokens1), len(tokens2)))
    ok = denom >= 1e-24
    cos[ok] = (r1 @ r2.T)[ok] / denom[ok]
    return cos


def greedy_alignment(tokens1: Sequence[str], tokens2: Sequence[str],
                     emb: EmbeddingTable, ic: InformationContent,
                     threshold: float = 0.5) -> float:
    """Information mass covered by greedily aligned token pairs.

    Pairs are aligned best-cosine-first (ties by lexicographic index pair),
    each token at most once, stopping below the threshold. The pair is put
    into a canonical order first so the result is symmetric.
    """
    if not tokens1 or not tokens2:
        raise DataError("greedy_alignment needs nonempty token lists")
    if tuple(tokens2) < tuple(tokens1):
        tokens1, tokens2 = tokens2, tokens1
    cos = _token_cosines(tokens1, tokens2, emb)
    candidates = sorted(
        ((i, j) for i in range(len(tokens1)) for j in range(len(tokens2))
         if cos[i, j] >= threshold),
        key=lambda ij: (-cos[ij], ij[0], ij[1]))
    used1 = set()
    used2 = set()
    aligned_mass = 0.0
    for i, j in candidates:
        if i in used1 or j in used2:
            continue
        used1.add(i)
        used2.add(j)
        aligned_mass += ic.ic(tokens1[i]) + ic.ic(tokens2[j])
    total_mass = sum(ic.ic(w) for w in tokens1) + sum(ic.ic(w) for w in tokens2)
    if total_mass <= 1e-12:
        return 0.0
    return min(1.0, aligned_mass / total_mass)


def length_ratio(tokens1: Sequence[str], tokens2: Sequence[str]) -> float:
    n1, n2 = len(tokens1), len(tokens2)
    return min(n1, n2) / max(n1, n2)


def extract(pair: SentencePair, emb: EmbeddingTable, ic: InformationContent,
            provider: WordSimilarityProvider) -> np.ndarray:
    """The 8-component feature vector in the fixed order above."""
    t1, t2 = pair.tokens1, pair.tokens2
    return np.array([
        ngram_overlap(t1, t2, 1),
        ngram_overlap(t1, t2, 2),
        ngram_overlap(t1, t2, 3),
        soft_overlap(t1, t2, "pathlen", provider),
        soft_overlap(t1, t2, "lin", provider),
        weighted_cosine(t1, t2, emb, ic),
        greedy_alignment(t1, t2, emb, ic),
        length_ratio(t1, t2),
    ], dtype=np.float64)
