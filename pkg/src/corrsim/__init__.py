"""Sentence-pair similarity engine: attentive BiGRU encoder, surface
features, expectation decoding over six score classes, and training under
NLL, MSE, KLD or a direct negative-Pearson objective."""

__version__ = "0.1.0"

from .corpus import (DatasetSplit, EmbeddingTable, SentencePair, Vocabulary,
                     batches, parse_sts_tsv, split_80_20)
from .encoder import (AttentionParams, GruCellParams, SentenceEmbedding,
                      SentenceEncoder)
from .features import (FEATURE_COUNT, FEATURE_NAMES, InformationContent,
                       WordSimilarityProvider, extract)
from .gradcheck import GradCheckReport, gradient_check
from .model import ModelBundle, TrainConfig, load_bundle, save_bundle
from .numkit import AdamState, GradientTape, SeededRng, adam_step
from .objective import (Batch, LossKind, ScoreDistribution, ScorerParams,
                        batch_loss, gold_distribution, pearson, score_pair)
from .trainer import EpochReport, TrainResult, evaluate, train

__all__ = [
    "AdamState", "AttentionParams", "Batch", "DatasetSplit", "EmbeddingTable",
    "EpochReport", "FEATURE_COUNT", "FEATURE_NAMES", "GradCheckReport",
    "GradientTape", "GruCellParams", "InformationContent", "LossKind",
    "ModelBundle", "ScoreDistribution", "ScorerParams", "SeededRng",
    "SentenceEmbedding", "SentenceEncoder", "SentencePair", "TrainConfig",
    "TrainResult", "Vocabulary", "WordSimilarityProvider", "adam_step",
    "batch_loss", "batches", "evaluate", "extract", "gold_distribution",
    "gradient_check", "load_bundle", "parse_sts_tsv", "pearson",
    "save_bundle", "score_pair", "split_80_20", "train",
]
