"""Model bundle: everything needed to score new sentence pairs, plus the
binary serialization format.

File layout (all integers little-endian):

    magic  b"CSIM"
    u32    format version
    u32    length of the JSON metadata block, then that many UTF-8 bytes
           (config snapshot, vocabulary, word frequencies, similarity rows)
    u32    parameter record count
    per record:
        u32 name length, name bytes,
        u32 rank, u32 per dimension,
        row-major float32 values
    u32    CRC-32 of every preceding byte

The bundle carries the feature resources (frozen feature embedding table,
frequency table, similarity provider) so a saved model can score new data
with exactly the features it was trained with.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .corpus import EmbeddingTable, Vocabulary
from .encoder import SentenceEncoder
from .errors import ConfigError, FormatError, ShapeError
from .features import FEATURE_COUNT, InformationContent, WordSimilarityProvider
from .numkit import TRAIN_DTYPE, SeededRng
from .objective import LossKind, ScorerParams

MAGIC = b"CSIM"
FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    """Hyperparameters of one training run."""

    loss: LossKind = LossKind.PCC
    batch_size: int = 125
    epochs: int = 15
    lr: float = 1e-4
    lr_halve_every: int = 5
    dim: int = 300
    hidden: int = 200
    attention_width: int | None = None
    scorer_hidden: int | None = None
    seed: int = 1
    init: str = "ri"
    untied: bool = False

    def __post_init__(self):
        if isinstance(self.loss, str):
            self.loss = LossKind(self.loss)

    @property
    def att_width(self) -> int:
        return self.attention_width if self.attention_width else self.hidden

    @property
    def mlp_hidden(self) -> int:
        return self.scorer_hidden if self.scorer_hidden else self.hidden

    def validate(self) -> None:
        for name in ("batch_size", "epochs", "lr", "lr_halve_every", "dim",
                     "hidden"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must not be negative")
        if self.batch_size < 2:
            raise ConfigError("batch size must be at least 2")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.lr_halve_every < 1:
            raise ConfigError("lr halving period must be at least 1 epoch")
        if self.dim < 1 or self.hidden < 1:
            raise ConfigError("dim and hidden must be positive")
        if self.init not in ("ri", "wi"):
            raise ConfigError(f"init must be 'ri' or 'wi', got {self.init!r}")

    def to_json_dict(self) -> dict:
        return {
            "loss": self.loss.value,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "lr": self.lr,
            "lr_halve_every": self.lr_halve_every,
            "dim": self.dim,
            "hidden": self.hidden,
            "attention_width": self.attention_width,
            "scorer_hidden": self.scorer_hidden,
            "seed": self.seed,
            "init": self.init,
            "untied": self.untied,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrainConfig":
        return cls(**{**d, "loss": LossKind(d["loss"])})


class ModelBundle:
    """Live model: parameters plus the resources features are computed from."""

    def __init__(self, config: TrainConfig, vocab: Vocabulary,
                 emb: EmbeddingTable, feature_emb: EmbeddingTable,
                 encoders: list[SentenceEncoder], scorer: ScorerParams,
                 ic: InformationContent, provider: WordSimilarityProvider):
        self.config = config
        self.vocab = vocab
        self.emb = emb
        self.feature_emb = feature_emb
        self.encoders = encoders
        self.scorer = scorer
        self.ic = ic
        self.provider = provider

    @classmethod
    def init(cls, config: TrainConfig, vocab: Vocabulary, emb: EmbeddingTable,
             ic: InformationContent, provider: WordSimilarityProvider,
             dtype=TRAIN_DTYPE) -> "ModelBundle":
        """Fresh parameters from the config seed; features freeze the initial
        embedding table."""
        config.validate()
        if emb.dim != config.dim:
            raise ConfigError(
                f"embedding table dim {emb.dim} does not match config dim "
                f"{config.dim}")
        rng = SeededRng(config.seed)
        n_enc = 2 if config.untied else 1
        encoders = [
            SentenceEncoder.init(config.hidden, config.dim, config.att_width,
                                 rng.split(10 + k), dtype)
            for k in range(n_enc)
        ]
        scorer = ScorerParams.init(config.mlp_hidden, 2 * config.hidden,
                                   FEATURE_COUNT, rng.split(20), dtype)
        return cls(config, vocab, emb, emb.copy(), encoders, scorer, ic, provider)

    @property
    def encoder1(self) -> SentenceEncoder:
        return self.encoders[0]

    @property
    def encoder2(self) -> SentenceEncoder:
        return self.encoders[-1]

    def trainable_parameters(self) -> list[tuple[str, np.ndarray]]:
        named = [("emb.vectors", self.emb.vectors)]
        for k, enc in enumerate(self.encoders):
            named.extend(enc.named(f"enc{k}."))
        named.extend(self.scorer.named())
        return named

    def serialized_parameters(self) -> list[tuple[str, np.ndarray]]:
        return (self.trainable_parameters()
                + [("feature_emb.vectors", self.feature_emb.vectors)])

    def copy(self) -> "ModelBundle":
        return ModelBundle(self.config, self.vocab, self.emb.copy(),
                           self.feature_emb.copy(),
                           [e.copy() for e in self.encoders],
                           self.scorer.copy(), self.ic, self.provider)


def save_bundle(bundle: ModelBundle, path) -> None:
    meta = {
        "config": bundle.config.to_json_dict(),
        "vocab": bundle.vocab.tokens[1:],
        "emb_origin": bundle.emb.origin,
        "freqs": bundle.ic.freqs,
        "sims": [list(row) for row in bundle.provider.rows()],
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", FORMAT_VERSION)
    out += struct.pack("<I", len(meta_bytes))
    out += meta_bytes
    params = bundle.serialized_parameters()
    out += struct.pack("<I", len(params))
    for name, arr in params:
        name_b = name.encode("utf-8")
        out += struct.pack("<I", len(name_b))
        out += name_b
        out += struct.pack("<I", arr.ndim)
        for d in arr.shape:
            out += struct.pack("<I", d)
        out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    with open(path, "wb") as fh:
        fh.write(bytes(out))


class _Reader:
    def __init__(self, blob: bytes, path: str):
        self.blob = blob
        self.path = path
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.blob):
            raise FormatError(
                f"{self.path}: truncated at byte offset {self.off}")
        b = self.blob[self.off:self.off + n]
        self.off += n
        return b

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_bundle(path) -> ModelBundle:
    """Parse and verify a saved model; never returns a partial bundle."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise FormatError(f"{path}: file too short to be a model bundle")
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic, not a model bundle")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise FormatError(f"{path}: checksum failure, file corrupt or truncated")
    rd = _Reader(blob[:-4], str(path))
    rd.take(4)
    version = rd.u32()
    if version != FORMAT_VERSION:
        raise FormatError(
            f"{path}: format version {version} not supported "
            f"(expected {FORMAT_VERSION})")
    meta = json.loads(rd.take(rd.u32()).decode("utf-8"))
    config = TrainConfig.from_json_dict(meta["config"])
    vocab = Vocabulary(meta["vocab"])
    arrays: dict[str, np.ndarray] = {}
    for _ in range(rd.u32()):
        name = rd.take(rd.u32()).decode("utf-8")
        rank = rd.u32()
        shape = tuple(rd.u32() for _ in range(rank))
        n_values = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(rd.take(4 * n_values), dtype="<f4")
        arrays[name] = data.reshape(shape).astype(TRAIN_DTYPE)
    if rd.off != len(rd.blob):
        raise FormatError(f"{path}: {len(rd.blob) - rd.off} trailing bytes")

    ic = InformationContent({k: int(v) for k, v in meta["freqs"].items()})
    provider = WordSimilarityProvider(
        {(w1, w2): (float(a), float(b)) for w1, w2, a, b in meta["sims"]})
    emb = EmbeddingTable(vocab, arrays.pop("emb.vectors"), meta["emb_origin"])
    feature_emb = EmbeddingTable(vocab, arrays.pop("feature_emb.vectors"),
                                 meta["emb_origin"])
    bundle = ModelBundle.init(config, vocab, emb, ic, provider)
    bundle.feature_emb = feature_emb
    for name, param in bundle.trainable_parameters():
        if name == "emb.vectors":
            continue
        try:
            stored = arrays.pop(name)
        except KeyError:
            raise FormatError(f"{path}: missing parameter record {name!r}") from None
        if stored.shape != param.shape:
            raise ShapeError(
                f"{path}: parameter {name!r} has shape {stored.shape}, "
                f"expected {param.shape}")
        param[...] = stored
    if arrays:
        raise FormatError(
            f"{path}: unexpected parameter records {sorted(arrays)}")
    return bundle
