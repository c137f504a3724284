"""Shared fixtures: synthetic teacher-generated datasets.

A frozen random model scores random token sentences; those scores become the
gold labels. A student trained on such data has a realizable target, which
makes overfit-capacity and objective-comparison tests meaningful.
"""

from __future__ import annotations

import numpy as np

from corrsim.corpus import EmbeddingTable, SentencePair, Vocabulary
from corrsim.features import InformationContent, WordSimilarityProvider
from corrsim.model import ModelBundle, TrainConfig
from corrsim.numkit import SeededRng
from corrsim.trainer import pair_features, score_dataset


def random_pairs(rng: SeededRng, n_pairs: int, vocab_size: int = 30,
                 min_len: int = 3, max_len: int = 7) -> list[SentencePair]:
    tokens = [f"tok{i}" for i in range(vocab_size)]
    pairs = []
    for i in range(n_pairs):
        n1 = int(rng.integers(min_len, max_len + 1))
        n2 = int(rng.integers(min_len, max_len + 1))
        t1 = [tokens[int(k)] for k in rng.integers(0, vocab_size, n1)]
        t2 = [tokens[int(k)] for k in rng.integers(0, vocab_size, n2)]
        pairs.append(SentencePair(str(i + 1), t1, t2, None))
    return pairs


def teacher_dataset(seed: int, n_pairs: int, vocab_size: int = 30,
                    dim: int = 8, hidden: int = 8, score_gain: float = 4.0,
                    gold_std: float | None = 1.2):
    """Pairs labeled by a frozen random teacher model.

    Returns (pairs, teacher_bundle). The teacher's output layer is scaled by
    `score_gain` so its score distributions are peaky rather than uniform,
    and the resulting scores are affinely spread to `gold_std` around 2.5
    (clipped to [0, 5]) so the golds cover the scale the way real similarity
    data does.
    """
    rng = SeededRng(seed)
    pairs = random_pairs(rng.split(1), n_pairs, vocab_size)
    vocab = Vocabulary.from_pairs(pairs)
    emb = EmbeddingTable.random(vocab, dim, rng.split(2), scale=0.5)
    freqs = {tok: int(c) for tok, c in
             zip(vocab.tokens[1:], rng.split(3).integers(1, 100, len(vocab) - 1))}
    ic = InformationContent(freqs)
    provider = WordSimilarityProvider.empty()
    config = TrainConfig(dim=dim, hidden=hidden, seed=seed, epochs=0)
    teacher = ModelBundle.init(config, vocab, emb, ic, provider)
    teacher.scorer.v *= score_gain
    golds = score_dataset(teacher, pairs)
    if gold_std is not None:
        centered = golds - golds.mean()
        scale = gold_std / max(float(centered.std()), 1e-9)
        golds = np.clip(2.5 + scale * centered, 0.0, 5.0)
    for pair, gold in zip(pairs, golds):
        pair.gold = float(gold)
    return pairs, teacher


def student_resources(teacher: ModelBundle, seed: int, use_teacher_emb: bool):
    """Embedding table, ic and provider for a student of the given teacher."""
    if use_teacher_emb:
        emb = EmbeddingTable(teacher.vocab, teacher.emb.vectors.copy(), "wi")
    else:
        emb = EmbeddingTable.random(teacher.vocab, teacher.emb.dim,
                                    SeededRng(seed).split(77), scale=0.5)
    return emb, teacher.ic, teacher.provider
