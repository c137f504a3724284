"""Finite-difference validation of the full-model analytic gradients.

Runs a tiny float64 model (dims are capped so the loop over every parameter
element stays cheap) on a synthetic batch, compares the manual backward pass
against central differences, and reports the worst relative error per
parameter group.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import EmbeddingTable, SentencePair, Vocabulary
from .errors import ConfigError
from .features import InformationContent, WordSimilarityProvider
from .model import ModelBundle, TrainConfig
from .numkit import CHECK_DTYPE, SeededRng
from .objective import Batch, LossKind, batch_loss
from .trainer import batch_gradients, forward_pair, pair_features

PASS_THRESHOLD = 1e-4


@dataclass
class GradCheckReport:
    loss: LossKind
    rows: list[tuple[str, float]]

    @property
    def max_error(self) -> float:
        return max(err for _, err in self.rows)

    def passed(self, threshold: float = PASS_THRESHOLD) -> bool:
        return self.max_error < threshold

    def tsv(self) -> str:
        lines = [f"{name}\t{err:.3e}" for name, err in self.rows]
        return "\n".join(lines)


def _synthetic_sample(rng: SeededRng, batch: int
                      ) -> tuple[list[SentencePair], Vocabulary,
                                 InformationContent, WordSimilarityProvider]:
    tokens = [f"w{i}" for i in range(10)]
    pairs = []
    for i in range(batch):
        n1 = int(rng.integers(2, 6))
        n2 = int(rng.integers(2, 6))
        t1 = [tokens[int(k)] for k in rng.integers(0, len(tokens), n1)]
        t2 = [tokens[int(k)] for k in rng.integers(0, len(tokens), n2)]
        gold = float(rng.uniform(0.2, 4.8))
        pairs.append(SentencePair(str(i), t1, t2, gold))
    vocab = Vocabulary.from_pairs(pairs)
    freqs = {tok: int(rng.integers(1, 50)) for tok in tokens}
    ic = InformationContent(freqs)
    provider = WordSimilarityProvider(
        {(tokens[0], tokens[1]): (0.8, 0.6), (tokens[2], tokens[3]): (0.4, 0.7)})
    return pairs, vocab, ic, provider


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    # the 1e-5 denominator floor keeps elements with negligible gradients
    # from being judged by finite-difference noise (~1e-10 absolute at step
    # 1e-5); sign or scale bugs still register at >= 0.1 even on such
    # elements, far above the pass threshold
    worst = 0.0
    for a, n in zip(np.ravel(analytic), np.ravel(numeric)):
        err = abs(a - n) / max(abs(a), abs(n), 1e-5)
        worst = max(worst, err)
    return worst


def gradient_check(loss: LossKind, seed: int = 0, hidden: int = 4,
                   dim: int = 3, batch: int = 5, untied: bool = False,
                   step: float = 1e-5,
                   negate_group: str | None = None) -> GradCheckReport:
    """Compare analytic and central-difference gradients group by group.

    `negate_group` flips the sign of one analytic gradient group; it exists
    so tests can confirm the harness actually detects broken gradients.
    """
    if hidden > 8 or dim > 8 or batch > 6:
        raise ConfigError(
            "gradient checking is restricted to hidden <= 8, dim <= 8, "
            "batch <= 6")
    rng = SeededRng(seed)
    pairs, vocab, ic, provider = _synthetic_sample(rng.split(1), batch)
    config = TrainConfig(loss=loss, batch_size=max(2, batch), epochs=1,
                         dim=dim, hidden=hidden, seed=seed, untied=untied)
    emb = EmbeddingTable.random(vocab, dim, rng.split(2), scale=0.4,
                                dtype=CHECK_DTYPE)
    bundle = ModelBundle.init(config, vocab, emb, ic, provider,
                              dtype=CHECK_DTYPE)
    ms = pair_features(bundle, pairs)
    golds = [p.gold for p in pairs]

    def loss_value() -> float:
        results = [forward_pair(bundle, p, m) for p, m in zip(pairs, ms)]
        b = Batch.from_predictions([r[0] for r in results], golds)
        return batch_loss(loss, b)

    results = [forward_pair(bundle, p, m) for p, m in zip(pairs, ms)]
    b = Batch.from_predictions([r[0] for r in results], golds)
    analytic = batch_gradients(bundle, b, [r[1] for r in results])

    rows = []
    for name, param in bundle.trainable_parameters():
        grad_a = np.array(analytic[name], copy=True)
        if name == negate_group:
            grad_a = -grad_a
        grad_n = np.zeros_like(param, dtype=np.float64)
        flat = param.reshape(-1)
        nflat = grad_n.reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_value()
            flat[i] = orig - step
            down = loss_value()
            flat[i] = orig
            nflat[i] = (up - down) / (2.0 * step)
        rows.append((name, _relative_error(grad_a, grad_n)))
    return GradCheckReport(loss, rows)
