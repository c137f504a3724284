"""Scoring head, training objectives and the Pearson metric.

The scorer is a one-hidden-layer MLP over [u1; u2; m] ending in a softmax
over the six integer similarity classes 0..5; the continuous score is the
expectation y = sum_i i * P(S = i).

Four batch objectives are supported:

    nll  sum of -log p[t] with t the gold rounded to the nearest class
    mse  mean of (y - gold)^2
    kld  sum of KL(gold distribution || p), gold mass split over the two
         classes adjacent to the real-valued gold
    pcc  negative Pearson correlation between scores and golds, which is
         invariant to location and scale of the scores

Loss-layer math runs in float64 regardless of the network precision; the
resulting logit cotangents are cast back on their way into the scorer.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .numkit import GradientTape, SeededRng, TRAIN_DTYPE, init_uniform, softmax

NUM_CLASSES = 6
CLASS_SCORES = np.arange(NUM_CLASSES, dtype=np.float64)

# floor applied to standard deviations before dividing; keeps constant
# batches finite without breaking scale invariance of the correlation
STD_FLOOR = 1e-8


class LossKind(enum.Enum):
    NLL = "nll"
    MSE = "mse"
    KLD = "kld"
    PCC = "pcc"


@dataclass
class ScorerParams:
    """MLP weights: hidden layer u/bu over [u1; u2; m], output layer v/bv.

    feature_width is the length of m, needed to split the input gradient
    back into the two sentence-embedding cotangents.
    """

    u: np.ndarray
    bu: np.ndarray
    v: np.ndarray
    bv: np.ndarray
    feature_width: int

    @property
    def hidden(self) -> int:
        return self.u.shape[0]

    @property
    def input_dim(self) -> int:
        return self.u.shape[1]

    @classmethod
    def init(cls, hidden: int, pair_dim: int, feature_width: int,
             rng: SeededRng, dtype=TRAIN_DTYPE) -> "ScorerParams":
        """pair_dim is the width of one sentence embedding (2H)."""
        input_dim = 2 * pair_dim + feature_width
        u = init_uniform(hidden, input_dim, 1.0 / np.sqrt(input_dim), rng, dtype)
        v = init_uniform(NUM_CLASSES, hidden, 1.0 / np.sqrt(hidden), rng, dtype)
        return cls(u, np.zeros(hidden, dtype=dtype), v,
                   np.zeros(NUM_CLASSES, dtype=dtype), feature_width)

    def named(self, prefix: str = "scorer.") -> list[tuple[str, np.ndarray]]:
        return [(prefix + "u", self.u), (prefix + "bu", self.bu),
                (prefix + "v", self.v), (prefix + "bv", self.bv)]

    def copy(self) -> "ScorerParams":
        return ScorerParams(self.u.copy(), self.bu.copy(),
                            self.v.copy(), self.bv.copy(), self.feature_width)


@dataclass
class ScoreDistribution:
    """Six-way class distribution and its expectation."""

    p: np.ndarray
    y: float


@dataclass
class ScoreTape:
    x: np.ndarray
    hidden: np.ndarray
    p: np.ndarray


def expected_score(p: np.ndarray) -> float:
    return float(CLASS_SCORES @ np.asarray(p, dtype=np.float64))


def score_pair(u1: np.ndarray, u2: np.ndarray, m: np.ndarray,
               params: ScorerParams) -> tuple[ScoreDistribution, ScoreTape]:
    """p = softmax(V tanh(U [u1; u2; m] + bU) + bV), y = E[S]."""
    x = np.concatenate([u1, u2, np.asarray(m)]).astype(params.u.dtype)
    if x.shape != (params.input_dim,):
        raise ShapeError(
            f"scorer input width {x.shape[0]} does not match parameters "
            f"({params.input_dim})")
    hid = np.tanh(params.u @ x + params.bu)
    logits = params.v @ hid + params.bv
    p = softmax(logits.astype(np.float64))
    return ScoreDistribution(p, expected_score(p)), ScoreTape(x, hid, p)


def score_backward(params: ScorerParams, tape: ScoreTape, dlogits: np.ndarray,
                   out: GradientTape) -> tuple[np.ndarray, np.ndarray]:
    """Push a logit cotangent through the MLP; returns (du1, du2).

    The feature slice of the input gradient is discarded: m is a constant
    input by design.
    """
    dl = dlogits.astype(params.v.dtype)
    out.add("scorer.v", np.outer(dl, tape.hidden))
    out.add("scorer.bv", dl)
    dhid = (params.v.T @ dl) * (1.0 - tape.hidden * tape.hidden)
    out.add("scorer.u", np.outer(dhid, tape.x))
    out.add("scorer.bu", dhid)
    dx = params.u.T @ dhid
    pair_width = params.input_dim - params.feature_width
    half = pair_width // 2
    return dx[:half], dx[half:pair_width]


def nearest_class(gold: float) -> int:
    """Gold rounded to the nearest class, halves away from zero."""
    if not (0.0 <= gold <= 5.0):
        raise DataError(f"gold score {gold} outside [0, 5]")
    return int(math.floor(gold + 0.5))


def gold_distribution(gold: float) -> np.ndarray:
    """Two-point simplex over adjacent classes whose mean equals the gold."""
    if not (0.0 <= gold <= 5.0):
        raise DataError(f"gold score {gold} outside [0, 5]")
    p = np.zeros(NUM_CLASSES, dtype=np.float64)
    low = int(math.floor(gold))
    if gold == low:
        p[low] = 1.0
    else:
        p[low] = low + 1.0 - gold
        p[low + 1] = gold - low
    return p


@dataclass
class Batch:
    """Predicted distributions/scores and gold scores for N samples."""

    p: np.ndarray
    y: np.ndarray
    gold: np.ndarray

    def __post_init__(self):
        if self.p.ndim != 2 or self.p.shape[1] != NUM_CLASSES:
            raise ShapeError(f"batch distributions must be (N, 6), got {self.p.shape}")
        if self.y.shape != (self.p.shape[0],) or self.gold.shape != self.y.shape:
            raise ShapeError("batch score/gold lengths do not match distributions")

    @classmethod
    def from_predictions(cls, dists: Sequence[ScoreDistribution],
                         golds: Sequence[float]) -> "Batch":
        if len(dists) != len(golds):
            raise ShapeError("predictions and golds differ in length")
        return cls(np.stack([d.p for d in dists]),
                   np.array([d.y for d in dists], dtype=np.float64),
                   np.asarray(golds, dtype=np.float64))

    @property
    def size(self) -> int:
        return self.p.shape[0]


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Centered correlation with floored standard deviations."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"pearson got lengths {a.shape} and {b.shape}")
    if a.ndim != 1 or a.shape[0] < 2:
        raise DataError("pearson needs at least two samples")
    ca = a - a.mean()
    cb = b - b.mean()
    sa = max(float(np.sqrt(ca @ ca)), STD_FLOOR)
    sb = max(float(np.sqrt(cb @ cb)), STD_FLOOR)
    return float(ca @ cb / (sa * sb))


def batch_loss(kind: LossKind, batch: Batch) -> float:
    if kind is LossKind.NLL:
        t = [nearest_class(g) for g in batch.gold]
        return float(-np.sum(np.log(batch.p[np.arange(batch.size), t])))
    if kind is LossKind.MSE:
        return float(np.mean((batch.y - batch.gold) ** 2))
    if kind is LossKind.KLD:
        total = 0.0
        for n in range(batch.size):
            phat = gold_distribution(batch.gold[n])
            nz = phat > 0.0
            total += float(np.sum(phat[nz] * np.log(phat[nz] / batch.p[n, nz])))
        return total
    if kind is LossKind.PCC:
        if batch.size < 2:
            raise DataError("correlation loss needs a batch of at least 2")
        return -pearson(batch.y, batch.gold)
    raise ConfigError(f"unknown loss kind {kind!r}")


def pcc_loss_dscores(y: np.ndarray, gold: np.ndarray) -> np.ndarray:
    """d(-pearson)/dy with the same std floor the loss itself uses."""
    y = np.asarray(y, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    cy = y - y.mean()
    cg = gold - gold.mean()
    sy = float(np.sqrt(cy @ cy))
    sg = float(np.sqrt(cg @ cg))
    syf = max(sy, STD_FLOOR)
    sgf = max(sg, STD_FLOOR)
    cov = float(cy @ cg)
    d = -cg / (syf * sgf)
    if sy > STD_FLOOR:
        # quotient-rule term through the score standard deviation
        d += cov * cy / (sy * syf * syf * sgf)
    return d


def loss_dlogits(kind: LossKind, batch: Batch) -> np.ndarray:
    """Cotangent of the batch loss with respect to each sample's logits."""
    n = batch.size
    out = np.zeros((n, NUM_CLASSES), dtype=np.float64)
    if kind is LossKind.NLL:
        for i in range(n):
            out[i] = batch.p[i].copy()
            out[i, nearest_class(batch.gold[i])] -= 1.0
        return out
    if kind is LossKind.KLD:
        for i in range(n):
            out[i] = batch.p[i] - gold_distribution(batch.gold[i])
        return out
    if kind is LossKind.MSE:
        dy = 2.0 * (batch.y - batch.gold) / n
    elif kind is LossKind.PCC:
        if n < 2:
            raise DataError("correlation loss needs a batch of at least 2")
        dy = pcc_loss_dscores(batch.y, batch.gold)
    else:
        raise ConfigError(f"unknown loss kind {kind!r}")
    # chain dy through y = v . p and the softmax: dlogit = dy * p * (v - y)
    for i in range(n):
        out[i] = dy[i] * batch.p[i] * (CLASS_SCORES - batch.y[i])
    return out


def batch_loss_backward(kind: LossKind, batch: Batch,
                        tapes: Sequence[ScoreTape], params: ScorerParams,
                        out: GradientTape | None = None
                        ) -> tuple[GradientTape, list[tuple[np.ndarray, np.ndarray]]]:
    """Gradients of the batch loss through the scorer.

    Accumulates scorer parameter gradients into `out` and returns the
    per-sample cotangents (du1, du2) to feed the encoders.
    """
    if len(tapes) != batch.size:
        raise DataError("tape count does not match batch size")
    if out is None:
        out = GradientTape()
    dls = loss_dlogits(kind, batch)
    dus = [score_backward(params, tapes[i], dls[i], out) for i in range(batch.size)]
    return out, dus
