"""Attentive bidirectional GRU sentence encoder with manual backprop.

Forward, per token vector w (D,) and previous state h_prev (H,):

    z = sigmoid(Wz w + Uz h_prev + bz)
    r = sigmoid(Wr w + Ur h_prev + br)
    hbar = tanh(Wh w + Uh (r * h_prev) + bh)
    h = (1 - z) * h_prev + z * hbar

Both directions run from a zero initial state; states are concatenated to
x_i (2H,). Attention scores each state with r_att . tanh(W_att x_i), and the
sentence embedding u is the softmax-weighted sum of states.

Every forward returns a tape of cached activations; the backward functions
replay it in reverse and accumulate parameter gradients into a GradientTape
under dotted names ("fwd.wz", "att.w", ...), returning the gradient with
respect to the input word vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError
from .numkit import GradientTape, SeededRng, TRAIN_DTYPE, init_uniform, sigmoid, softmax


@dataclass
class GruCellParams:
    """Update gate, reset gate and candidate weights for one direction."""

    wz: np.ndarray
    uz: np.ndarray
    bz: np.ndarray
    wr: np.ndarray
    ur: np.ndarray
    br: np.ndarray
    wh: np.ndarray
    uh: np.ndarray
    bh: np.ndarray

    @property
    def hidden(self) -> int:
        return self.wz.shape[0]

    @property
    def input_dim(self) -> int:
        return self.wz.shape[1]

    @classmethod
    def init(cls, hidden: int, input_dim: int, rng: SeededRng,
             dtype=TRAIN_DTYPE) -> "GruCellParams":
        # uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) keeps pre-activations O(1)
        sw = 1.0 / np.sqrt(input_dim)
        su = 1.0 / np.sqrt(hidden)
        mats = {}
        for gate in ("z", "r", "h"):
            mats["w" + gate] = init_uniform(hidden, input_dim, sw, rng, dtype)
            mats["u" + gate] = init_uniform(hidden, hidden, su, rng, dtype)
            mats["b" + gate] = np.zeros(hidden, dtype=dtype)
        return cls(**mats)

    def named(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        return [(prefix + n, getattr(self, n))
                for n in ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")]

    def copy(self) -> "GruCellParams":
        return GruCellParams(**{n: a.copy() for n, a in self.named()})


@dataclass
class GruStepCache:
    """Activations one gru_step needs again on the way back."""

    w: np.ndarray
    h_prev: np.ndarray
    z: np.ndarray
    r: np.ndarray
    rh: np.ndarray
    hbar: np.ndarray


def gru_step(params: GruCellParams, h_prev: np.ndarray,
             w: np.ndarray) -> tuple[np.ndarray, GruStepCache]:
    """One GRU step; returns the new state and the cache for backward."""
    if w.shape != (params.input_dim,) or h_prev.shape != (params.hidden,):
        raise ShapeError(
            f"gru_step got input {w.shape} and state {h_prev.shape}, expected "
            f"({params.input_dim},) and ({params.hidden},)")
    z = sigmoid(params.wz @ w + params.uz @ h_prev + params.bz)
    r = sigmoid(params.wr @ w + params.ur @ h_prev + params.br)
    rh = r * h_prev
    hbar = np.tanh(params.wh @ w + params.uh @ rh + params.bh)
    h = (1.0 - z) * h_prev + z * hbar
    return h, GruStepCache(w, h_prev, z, r, rh, hbar)


def gru_step_backward(params: GruCellParams, cache: GruStepCache,
                      dh: np.ndarray, out: GradientTape,
                      prefix: str) -> tuple[np.ndarray, np.ndarray]:
    """Reverse one gru_step: returns (dh_prev, dw) and accumulates into out."""
    dz = dh * (cache.hbar - cache.h_prev)
    dhbar = dh * cache.z
    dh_prev = dh * (1.0 - cache.z)

    dah = dhbar * (1.0 - cache.hbar * cache.hbar)
    out.add(prefix + "wh", np.outer(dah, cache.w))
    out.add(prefix + "uh", np.outer(dah, cache.rh))
    out.add(prefix + "bh", dah)
    drh = params.uh.T @ dah
    dh_prev += drh * cache.r

    dar = (drh * cache.h_prev) * cache.r * (1.0 - cache.r)
    out.add(prefix + "wr", np.outer(dar, cache.w))
    out.add(prefix + "ur", np.outer(dar, cache.h_prev))
    out.add(prefix + "br", dar)
    dh_prev += params.ur.T @ dar

    daz = dz * cache.z * (1.0 - cache.z)
    out.add(prefix + "wz", np.outer(daz, cache.w))
    out.add(prefix + "uz", np.outer(daz, cache.h_prev))
    out.add(prefix + "bz", daz)
    dh_prev += params.uz.T @ daz

    dw = params.wh.T @ dah + params.wr.T @ dar + params.wz.T @ daz
    return dh_prev, dw


@dataclass
class AttentionParams:
    """Projection and scoring vector for attention pooling."""

    w: np.ndarray
    r: np.ndarray

    @property
    def width(self) -> int:
        return self.w.shape[0]

    @classmethod
    def init(cls, width: int, state_dim: int, rng: SeededRng,
             dtype=TRAIN_DTYPE) -> "AttentionParams":
        w = init_uniform(width, state_dim, 1.0 / np.sqrt(state_dim), rng, dtype)
        r = init_uniform(width, 1, 1.0 / np.sqrt(width), rng, dtype).ravel()
        return cls(w, r)

    def named(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        return [(prefix + "w", self.w), (prefix + "r", self.r)]

    def copy(self) -> "AttentionParams":
        return AttentionParams(self.w.copy(), self.r.copy())


@dataclass
class BiGruTape:
    fwd_caches: list[GruStepCache]
    bwd_caches: list[GruStepCache]


@dataclass
class AttendCache:
    states: np.ndarray
    t: np.ndarray
    a: np.ndarray


@dataclass
class SentenceEmbedding:
    """Pooled embedding u with the states and attention weights behind it."""

    u: np.ndarray
    states: np.ndarray
    weights: np.ndarray


@dataclass
class EncoderTape:
    """Everything the encoder backward pass needs, keyed to one forward."""

    bigru: BiGruTape
    attend: AttendCache
    n: int
    state_dim: int


def bigru_encode(fwd: GruCellParams, bwd: GruCellParams,
                 words: np.ndarray) -> tuple[np.ndarray, BiGruTape]:
    """Run both GRU chains over words (n, D); states come back as (n, 2H)."""
    words = np.asarray(words)
    if words.ndim != 2 or words.shape[0] == 0:
        raise DataError(f"bigru_encode needs a nonempty (n, D) input, got {words.shape}")
    n = words.shape[0]
    hidden = fwd.hidden
    dtype = words.dtype
    states = np.zeros((n, 2 * hidden), dtype=dtype)
    fwd_caches: list[GruStepCache] = []
    bwd_caches: list[GruStepCache] = []
    h = np.zeros(hidden, dtype=dtype)
    for i in range(n):
        h, cache = gru_step(fwd, h, words[i])
        states[i, :hidden] = h
        fwd_caches.append(cache)
    h = np.zeros(hidden, dtype=dtype)
    for i in range(n - 1, -1, -1):
        h, cache = gru_step(bwd, h, words[i])
        states[i, hidden:] = h
        bwd_caches.append(cache)
    bwd_caches.reverse()
    return states, BiGruTape(fwd_caches, bwd_caches)


def bigru_backward(fwd: GruCellParams, bwd: GruCellParams, tape: BiGruTape,
                   dstates: np.ndarray, out: GradientTape,
                   prefix: str = "") -> np.ndarray:
    """Backprop through both chains; returns gradients for the word vectors."""
    n = dstates.shape[0]
    hidden = fwd.hidden
    dwords = np.zeros((n, fwd.input_dim), dtype=dstates.dtype)
    # the forward chain ran left to right, so its BPTT runs right to left
    carry = np.zeros(hidden, dtype=dstates.dtype)
    for i in range(n - 1, -1, -1):
        carry, dw = gru_step_backward(
            fwd, tape.fwd_caches[i], dstates[i, :hidden] + carry, out,
            prefix + "fwd.")
        dwords[i] += dw
    carry = np.zeros(hidden, dtype=dstates.dtype)
    for i in range(n):
        carry, dw = gru_step_backward(
            bwd, tape.bwd_caches[i], dstates[i, hidden:] + carry, out,
            prefix + "bwd.")
        dwords[i] += dw
    return dwords


def attend(att: AttentionParams, states: np.ndarray
           ) -> tuple[SentenceEmbedding, AttendCache]:
    """Pool states (n, 2H) into u = sum_j a_j x_j with softmax attention."""
    states = np.asarray(states)
    if states.ndim != 2 or states.shape[0] == 0:
        raise DataError(f"attend needs a nonempty (n, 2H) input, got {states.shape}")
    if states.shape[1] != att.w.shape[1]:
        raise ShapeError(
            f"attention projection expects width {att.w.shape[1]}, "
            f"states have {states.shape[1]}")
    t = np.tanh(states @ att.w.T)
    logits = t @ att.r
    a = softmax(logits)
    u = a @ states
    return SentenceEmbedding(u, states, a), AttendCache(states, t, a)


def attend_backward(att: AttentionParams, cache: AttendCache, du: np.ndarray,
                    out: GradientTape, prefix: str = "") -> np.ndarray:
    """Backprop through attention pooling; returns gradients for the states."""
    da = cache.states @ du
    dstates = np.outer(cache.a, du)
    dlogits = cache.a * (da - cache.a @ da)
    out.add(prefix + "r", cache.t.T @ dlogits)
    dt = np.outer(dlogits, att.r) * (1.0 - cache.t * cache.t)
    out.add(prefix + "w", dt.T @ cache.states)
    dstates += dt @ att.w
    return dstates


class SentenceEncoder:
    """One direction pair of GRU cells plus attention pooling."""

    def __init__(self, fwd: GruCellParams, bwd: GruCellParams,
                 att: AttentionParams):
        self.fwd = fwd
        self.bwd = bwd
        self.att = att

    @classmethod
    def init(cls, hidden: int, input_dim: int, att_width: int,
             rng: SeededRng, dtype=TRAIN_DTYPE) -> "SentenceEncoder":
        return cls(GruCellParams.init(hidden, input_dim, rng.split(1), dtype),
                   GruCellParams.init(hidden, input_dim, rng.split(2), dtype),
                   AttentionParams.init(att_width, 2 * hidden, rng.split(3), dtype))

    @property
    def hidden(self) -> int:
        return self.fwd.hidden

    def encode(self, words: np.ndarray) -> tuple[SentenceEmbedding, EncoderTape]:
        states, bigru_tape = bigru_encode(self.fwd, self.bwd, words)
        emb, att_cache = attend(self.att, states)
        tape = EncoderTape(bigru_tape, att_cache, states.shape[0], states.shape[1])
        return emb, tape

    def backward(self, tape: EncoderTape, du: np.ndarray, out: GradientTape,
                 prefix: str = "") -> np.ndarray:
        if du.shape != (tape.state_dim,):
            raise ShapeError(
                f"cotangent shape {du.shape} does not match tape state width "
                f"({tape.state_dim},)")
        if len(tape.bigru.fwd_caches) != tape.n:
            raise DataError("encoder tape is stale or mismatched")
        dstates = attend_backward(self.att, tape.attend, du, out, prefix + "att.")
        return bigru_backward(self.fwd, self.bwd, tape.bigru, dstates, out, prefix)

    def named(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        return (self.fwd.named(prefix + "fwd.")
                + self.bwd.named(prefix + "bwd.")
                + self.att.named(prefix + "att."))

    def copy(self) -> "SentenceEncoder":
        return SentenceEncoder(self.fwd.copy(), self.bwd.copy(), self.att.copy())


def encoder_backward(encoder: SentenceEncoder, tape: EncoderTape,
                     du: np.ndarray, out: GradientTape | None = None,
                     prefix: str = "") -> tuple[GradientTape, np.ndarray]:
    """Full reverse pass; returns the tape and the word-vector gradients."""
    if out is None:
        out = GradientTape()
    dwords = encoder.backward(tape, du, out, prefix)
    return out, dwords
