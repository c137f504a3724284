"""Numeric substrate: activations, checked matmul, seeded RNG, Adam.

Matrices are plain numpy arrays in row-major layout. Two precisions are
used deliberately: float32 for training speed, float64 for finite-difference
gradient checks (central differences drown in float32 rounding noise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

TRAIN_DTYPE = np.float32
CHECK_DTYPE = np.float64

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 round; backbone of deterministic seed derivation."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Mix integer keys into a seed so each subsystem gets its own stream."""
    h = seed & _MASK64
    for k in keys:
        h = splitmix64(h ^ (k & _MASK64))
    return h


class SeededRng:
    """Deterministic counter-based generator (Philox).

    The same seed yields the same draw sequence on every run and platform;
    `split` derives an independent, equally reproducible stream.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def split(self, *keys: int) -> "SeededRng":
        return SeededRng(derive_seed(self.seed, *keys))

    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Checked matrix product for 2-D operands."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def softmax(z: np.ndarray) -> np.ndarray:
    """Probability vector over the last axis, max-subtracted for stability."""
    z = np.asarray(z)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def tanh(x):
    return np.tanh(x)


def sigmoid(x):
    """Logistic function, stable on both tails."""
    x = np.asarray(x)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def init_uniform(rows: int, cols: int, scale: float, rng: SeededRng,
                 dtype=TRAIN_DTYPE) -> np.ndarray:
    """Matrix with entries i.i.d. uniform in [-scale, +scale]."""
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return rng.uniform(-scale, scale, (rows, cols)).astype(dtype)


@dataclass
class AdamState:
    """First/second moment accumulators and step counter for one parameter."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param: np.ndarray, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros_like(param), np.zeros_like(param), 0, beta1, beta2, eps)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState,
              lr: float) -> tuple[np.ndarray, AdamState]:
    """Bias-corrected Adam update, applied to `param` in place."""
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ShapeError(
            f"adam_step shapes differ: param {param.shape}, grad {grad.shape}, "
            f"state {state.m.shape}")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    param -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return param, state


class GradientTape:
    """Named gradient accumulator; repeated `add` calls sum contributions."""

    def __init__(self):
        self._grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> None:
        buf = self._grads.get(name)
        if buf is None:
            self._grads[name] = np.array(value, copy=True)
        else:
            if buf.shape != value.shape:
                raise ShapeError(
                    f"gradient for {name!r}: shape {value.shape} does not match "
                    f"accumulated {buf.shape}")
            buf += value

    def get(self, name: str):
        return self._grads.get(name)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._grads[name]

    def __contains__(self, name: str) -> bool:
        return name in self._grads

    def names(self) -> list[str]:
        return sorted(self._grads)

    def items(self):
        return self._grads.items()
