"""Dense kernels for desk-scale token correlation.

Everything is double precision and pure: matrices in, matrices out, no
shared state.  The third-order correlation tensor lives here together with
the attention, normalization and softmax kernels the rest of the package
is built from.

A lightweight flop counter can be activated around any call via
:func:`count_flops`; kernels charge one unit per multiply-accumulate (plus
a few units per cell for transcendental kernels).  Charges land in the
counter's *current category* so callers can separate, say, projection cost
from correlation cost.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError

AXES = ("region", "tracklet", "prompt")
CORE_KINDS = ("superdiagonal", "all-ones")


@dataclass
class FlopCounter:
    """Accumulates multiply-accumulate counts per category."""

    by_category: dict = field(default_factory=dict)
    category: str = "correlation"

    def charge(self, n: int) -> None:
        self.by_category[self.category] = self.by_category.get(self.category, 0) + int(n)

    @property
    def total(self) -> int:
        return sum(self.by_category.values())

    def get(self, category: str) -> int:
        return self.by_category.get(category, 0)


_COUNTERS: list[FlopCounter] = []


@contextmanager
def count_flops():
    """Activate a :class:`FlopCounter` for the duration of the block."""
    counter = FlopCounter()
    _COUNTERS.append(counter)
    try:
        yield counter
    finally:
        _COUNTERS.pop()


@contextmanager
def flop_category(name: str):
    """Route charges inside the block to ``name`` (no-op without a counter)."""
    if not _COUNTERS:
        yield
        return
    counter = _COUNTERS[-1]
    previous = counter.category
    counter.category = name
    try:
        yield
    finally:
        counter.category = previous


def charge_flops(n: int) -> None:
    if _COUNTERS:
        _COUNTERS[-1].charge(n)


def as_matrix(data) -> np.ndarray:
    m = np.asarray(data, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with explicit dimension check."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
    charge_flops(a.shape[0] * a.shape[1] * b.shape[1])
    return a @ b


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by row-max subtraction."""
    m = as_matrix(m)
    charge_flops(4 * m.size)
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def layer_norm(m: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Normalize each row to zero mean / unit variance, then apply gain and bias."""
    m = as_matrix(m)
    gain = np.asarray(gain, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if gain.shape != (m.shape[1],) or bias.shape != (m.shape[1],):
        raise ShapeError(f"layer_norm: gain/bias width must be {m.shape[1]}")
    charge_flops(8 * m.size)
    mu = m.mean(axis=1, keepdims=True)
    var = m.var(axis=1, keepdims=True)
    return (m - mu) / np.sqrt(var + eps) * gain + bias


def triple_correlation(e: np.ndarray, x: np.ndarray, p: np.ndarray, core: str = "superdiagonal") -> np.ndarray:
    """Third-order correlation tensor of three token matrices.

    With the superdiagonal core, ``T[i, j, k] = sum_d e[i, d] x[j, d] p[k, d]``.
    The all-ones core contracts each factor against a vector of ones first,
    which collapses the result to the rank-1 outer product of the row sums;
    it is kept selectable for fidelity experiments only.
    """
    e, x, p = as_matrix(e), as_matrix(x), as_matrix(p)
    if not (e.shape[1] == x.shape[1] == p.shape[1]):
        raise ShapeError(
            f"triple_correlation: widths differ, {e.shape[1]}/{x.shape[1]}/{p.shape[1]}"
        )
    if core == "superdiagonal":
        charge_flops(e.shape[0] * x.shape[0] * p.shape[0] * e.shape[1])
        return np.einsum("id,jd,kd->ijk", e, x, p)
    if core == "all-ones":
        charge_flops(e.size + x.size + p.size + e.shape[0] * x.shape[0] * p.shape[0])
        se, sx, sp = e.sum(axis=1), x.sum(axis=1), p.sum(axis=1)
        return np.einsum("i,j,k->ijk", se, sx, sp)
    raise ConfigError(f"unknown core kind {core!r}, expected one of {CORE_KINDS}")


def tensor_slice(t: np.ndarray, axis: str, index: int) -> np.ndarray:
    """2-d slice of a third-order tensor along a named axis."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3:
        raise ShapeError(f"tensor_slice: expected a 3-d tensor, got shape {t.shape}")
    try:
        ax = AXES.index(axis)
    except ValueError:
        raise ConfigError(f"unknown axis {axis!r}, expected one of {AXES}") from None
    if not 0 <= index < t.shape[ax]:
        raise IndexError(f"index {index} out of range for axis {axis!r} of size {t.shape[ax]}")
    return np.take(t, index, axis=ax)


@dataclass(frozen=True)
class FamilyProjections:
    """Query / key / value projections for one token family, each D x D."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray


@dataclass(frozen=True)
class AttentionParams:
    """Multi-head attention parameters keyed by token family.

    ``families`` maps family names (``image`` / ``tracklet`` / ``prompt``) to
    their projections.  The image and tracklet entries may reference the same
    object, which ties the visual encoder and extractor weights together.
    """

    dim: int
    heads: int
    families: dict

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ConfigError(f"width {self.dim} not divisible by {self.heads} heads")
        for name, fam in self.families.items():
            for w in (fam.w_q, fam.w_k, fam.w_v):
                if w is not None and w.shape != (self.dim, self.dim):
                    raise ShapeError(f"projection for family {name!r} must be {self.dim}x{self.dim}")


def attention_logits(
    x: np.ndarray, y: np.ndarray, w_q: np.ndarray, w_k: np.ndarray, heads: int, dim: int
) -> np.ndarray:
    """Per-head scaled attention logits, shape (heads, |x|, |y|).

    Queries and keys are split column-wise into ``heads`` equal chunks after
    projection; every head's scores are scaled by 1/sqrt(dim).
    """
    x, y = as_matrix(x), as_matrix(y)
    if x.shape[1] != dim or y.shape[1] != dim:
        raise ShapeError(f"attention: token width must be {dim}, got {x.shape[1]}/{y.shape[1]}")
    if dim % heads != 0:
        raise ConfigError(f"width {dim} not divisible by {heads} heads")
    with flop_category("setup"):
        q = matmul(x, w_q)
        k = matmul(y, w_k)
    hw = dim // heads
    charge_flops(x.shape[0] * y.shape[0] * dim)
    logits = np.empty((heads, x.shape[0], y.shape[0]))
    for h in range(heads):
        sl = slice(h * hw, (h + 1) * hw)
        logits[h] = q[:, sl] @ k[:, sl].T / np.sqrt(dim)
    return logits


def average_head_softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax each head's logit matrix and average over heads."""
    out = np.zeros(logits.shape[1:])
    for h in range(logits.shape[0]):
        out += softmax_rows(logits[h])
    return out / logits.shape[0]


def cross_attention(x, y, params: AttentionParams) -> np.ndarray:
    """Row-stochastic cross-attention A_{x|y} of shape |x| x |y|.

    ``x`` and ``y`` are token matrices (anything with ``.tokens`` and
    ``.family``); the query projection is taken from x's family and the key
    projection from y's.  Attention is computed per head and the head
    matrices are averaged, so the result is a single stochastic matrix
    regardless of the head count.
    """
    fx, fy = params.families[x.family], params.families[y.family]
    logits = attention_logits(x.tokens, y.tokens, fx.w_q, fy.w_k, params.heads, params.dim)
    return average_head_softmax(logits)
