"""Training loop, evaluation and the NaN watchdog.

Each epoch reshuffles the training pairs (seed derived from the run seed and
the epoch index), walks the batches, and applies one Adam step per batch to
every trainable parameter: embeddings, both GRU directions of each encoder,
attention, and the scorer MLP. The learning rate halves after every
`lr_halve_every` completed epochs.

Surface features are computed once per pair up front, against the frozen
feature embedding table in the bundle, and enter the network as constants.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .corpus import SentencePair, batches
from .errors import DataError, NumericError
from .features import extract
from .model import ModelBundle, TrainConfig
from .numkit import AdamState, GradientTape, adam_step, derive_seed
from .objective import (Batch, ScoreTape, batch_loss, batch_loss_backward,
                        pearson, score_pair)

_EPOCH_KEY = 0x5148


@dataclass
class EpochReport:
    """One row of training progress."""

    epoch: int
    mean_loss: float
    train_pcc: float
    val_pcc: float
    seconds: float
    lr: float

    TSV_HEADER = "epoch\tmean_loss\ttrain_pcc\tval_pcc\tseconds\tlr"

    def tsv(self) -> str:
        return (f"{self.epoch}\t{self.mean_loss:.6f}\t{self.train_pcc:.6f}"
                f"\t{self.val_pcc:.6f}\t{self.seconds:.3f}\t{self.lr:.8g}")


@dataclass
class TrainResult:
    final: ModelBundle
    best: ModelBundle
    reports: list[EpochReport]

    @property
    def best_val_pcc(self) -> float:
        return max((r.val_pcc for r in self.reports), default=float("nan"))


def epoch_lr(config: TrainConfig, epoch: int) -> float:
    """Learning rate for a 1-based epoch index; halves every period."""
    return config.lr * 0.5 ** ((epoch - 1) // config.lr_halve_every)


def pair_features(bundle: ModelBundle, pairs: list[SentencePair]) -> list[np.ndarray]:
    return [extract(p, bundle.feature_emb, bundle.ic, bundle.provider)
            for p in pairs]


@dataclass
class _PairTape:
    indices1: np.ndarray
    indices2: np.ndarray
    enc_tape1: object
    enc_tape2: object
    score_tape: ScoreTape


def forward_pair(bundle: ModelBundle, pair: SentencePair, m: np.ndarray):
    """Encode both sentences and score; returns (distribution, tape)."""
    idx1 = bundle.vocab.indices(pair.tokens1)
    idx2 = bundle.vocab.indices(pair.tokens2)
    emb1, tape1 = bundle.encoder1.encode(bundle.emb.vectors[idx1])
    emb2, tape2 = bundle.encoder2.encode(bundle.emb.vectors[idx2])
    dist, stape = score_pair(emb1.u, emb2.u, m, bundle.scorer)
    return dist, _PairTape(idx1, idx2, tape1, tape2, stape)


def score_dataset(bundle: ModelBundle, pairs: list[SentencePair],
                  ms: list[np.ndarray] | None = None) -> np.ndarray:
    if ms is None:
        ms = pair_features(bundle, pairs)
    return np.array([forward_pair(bundle, p, m)[0].y
                     for p, m in zip(pairs, ms)], dtype=np.float64)


def evaluate(bundle: ModelBundle, pairs: list[SentencePair]
             ) -> tuple[float, np.ndarray]:
    """Pearson correlation and per-pair scores on labeled data."""
    if any(p.gold is None for p in pairs):
        raise DataError(
            "dataset contains unlabeled pairs; use `score` for those")
    if len(pairs) < 2:
        raise DataError("evaluation needs at least two pairs")
    scores = score_dataset(bundle, pairs)
    golds = np.array([p.gold for p in pairs], dtype=np.float64)
    return pearson(scores, golds), scores


def _first_nonfinite(batch: Batch, bundle: ModelBundle) -> str:
    for i in range(batch.size):
        if not np.all(np.isfinite(batch.p[i])):
            return f"class distribution of batch sample {i}"
    for name, param in bundle.trainable_parameters():
        if not np.all(np.isfinite(param)):
            return f"parameter {name}"
    return "batch loss"


def batch_gradients(bundle: ModelBundle, batch: Batch,
                     tapes: list[_PairTape]) -> GradientTape:
    tape = GradientTape()
    _, dus = batch_loss_backward(bundle.config.loss, batch,
                                 [t.score_tape for t in tapes], bundle.scorer,
                                 tape)
    demb = np.zeros_like(bundle.emb.vectors)
    tied = len(bundle.encoders) == 1
    for pt, (du1, du2) in zip(tapes, dus):
        dwords1 = bundle.encoder1.backward(pt.enc_tape1, du1, tape, "enc0.")
        dwords2 = bundle.encoder2.backward(pt.enc_tape2, du2, tape,
                                           "enc0." if tied else "enc1.")
        np.add.at(demb, pt.indices1, dwords1)
        np.add.at(demb, pt.indices2, dwords2)
    tape.add("emb.vectors", demb)
    return tape


def train(config: TrainConfig, train_pairs: list[SentencePair],
          val_pairs: list[SentencePair], emb, ic, provider) -> TrainResult:
    """Full training run; returns final and best-on-validation bundles."""
    config.validate()
    if not train_pairs:
        raise DataError("training set is empty")
    if any(p.gold is None for p in train_pairs):
        raise DataError("training pairs must all carry gold scores")
    bundle = ModelBundle.init(config, emb.vocab, emb, ic, provider)
    if config.epochs == 0:
        return TrainResult(bundle, bundle.copy(), [])
    if len(val_pairs) < 2 or any(p.gold is None for p in val_pairs):
        raise DataError("validation needs at least two labeled pairs")

    m_train = pair_features(bundle, train_pairs)
    m_val = pair_features(bundle, val_pairs)
    val_golds = np.array([p.gold for p in val_pairs], dtype=np.float64)
    items = list(zip(train_pairs, m_train))
    states = {name: AdamState.for_param(param)
              for name, param in bundle.trainable_parameters()}

    reports: list[EpochReport] = []
    best = bundle.copy()
    best_pcc = -np.inf
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        lr = epoch_lr(config, epoch)
        losses: list[float] = []
        seen_scores: list[float] = []
        seen_golds: list[float] = []
        epoch_seed = derive_seed(config.seed, _EPOCH_KEY, epoch)
        for batch_items in batches(items, config.batch_size, epoch_seed):
            dists = []
            tapes = []
            golds = []
            for pair, m in batch_items:
                dist, pt = forward_pair(bundle, pair, m)
                dists.append(dist)
                tapes.append(pt)
                golds.append(pair.gold)
            batch = Batch.from_predictions(dists, golds)
            loss = batch_loss(config.loss, batch)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}; first non-finite "
                    f"tensor: {_first_nonfinite(batch, bundle)}")
            grads = batch_gradients(bundle, batch, tapes)
            for name, param in bundle.trainable_parameters():
                adam_step(param, grads[name], states[name], lr)
            losses.append(loss)
            seen_scores.extend(batch.y)
            seen_golds.extend(batch.gold)
        train_pcc = pearson(np.array(seen_scores), np.array(seen_golds))
        val_scores = score_dataset(bundle, val_pairs, m_val)
        val_pcc = pearson(val_scores, val_golds)
        reports.append(EpochReport(epoch, float(np.mean(losses)), train_pcc,
                                   val_pcc, time.perf_counter() - t0, lr))
        if val_pcc > best_pcc:
            best_pcc = val_pcc
            best = bundle.copy()
    return TrainResult(bundle, best, reports)
