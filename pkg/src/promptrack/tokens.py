"""Token producers: image tokens, prompt tokens, tracklet tokens.

All three producers emit rows of one shared width ``dim`` so the downstream
correlation never sees mismatched shapes.  The image encoder rasterizes a
synthetic scene frame onto a grid (one token per cell); the prompt embedder
works from a controlled vocabulary; tracklet tokens are pooled from the
previous frame's image tokens.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import autograd as ag
from . import catalog
from .errors import ConfigError, EmptyPromptError, ShapeError

TOKEN_CAPS = {"prompt": 250, "image": 500, "tracklet": 500}

_WORD_RE = re.compile(r"[a-z]+")


class PromptKind(str, Enum):
    NM = "nm"
    SYN = "syn"
    DEF = "def"
    CAP = "cap"
    RETR = "retr"

    @property
    def sentence_level(self) -> bool:
        """Definition, caption and retrieval prompts embed one token per sentence."""
        return self in (PromptKind.DEF, PromptKind.CAP, PromptKind.RETR)


@dataclass(frozen=True)
class PromptText:
    """A prompt as an ordered tuple of parts (words or sentences)."""

    kind: PromptKind
    parts: tuple

    @property
    def text(self) -> str:
        return ". ".join(self.parts)

    def words(self) -> list:
        """Lower-case alphabetic words across all parts, in order."""
        return [w for part in self.parts for w in _WORD_RE.findall(part.lower())]


def prompt_from_text(text: str, kind: PromptKind = PromptKind.NM) -> PromptText:
    """Build a prompt from free text; word-level kinds split on '. '."""
    if kind.sentence_level:
        parts = tuple(p.strip() for p in text.split(". ") if p.strip()) or (text,)
    else:
        parts = tuple(p.strip() for p in text.replace(".", " ").split() if p.strip())
    return PromptText(kind, parts)


@dataclass
class TokenMatrix:
    """Rows of dim-wide feature vectors for one token family."""

    family: str
    tokens: object  # (n, dim) ndarray, or autograd Var during training
    origin: tuple = ()

    def __post_init__(self):
        if self.family not in TOKEN_CAPS:
            raise ConfigError(f"unknown token family {self.family!r}")
        n = self.tokens.shape[0]
        if n > TOKEN_CAPS[self.family]:
            raise ConfigError(
                f"{self.family} tokens exceed the cap: {n} > {TOKEN_CAPS[self.family]}"
            )

    def __len__(self) -> int:
        return self.tokens.shape[0]

    @property
    def values(self) -> np.ndarray:
        return ag.value_of(self.tokens)


def positional_encoding(n: int, d: int) -> np.ndarray:
    """Sinusoidal position table: sin on even columns, cos on odd ones."""
    if d % 2 != 0:
        raise ConfigError(f"positional encoding width must be even, got {d}")
    pos = np.arange(n, dtype=np.float64)[:, None]
    freq = np.power(10000.0, -np.arange(0, d, 2, dtype=np.float64) / d)
    table = np.empty((n, d))
    table[:, 0::2] = np.sin(pos * freq)
    table[:, 1::2] = np.cos(pos * freq)
    return table


def grid_positional_encoding(grid: tuple, d: int) -> np.ndarray:
    """Per-cell position features: one sinusoid per axis, concatenated.

    The first half of each row encodes the cell column, the second half the
    cell row, so horizontal and vertical position decode independently.
    Rows are ordered row-major to match the image token layout.
    """
    gw, gh = grid
    if d % 4 != 0:
        raise ConfigError(f"grid positional encoding needs a width divisible by 4, got {d}")
    col_table = positional_encoding(gw, d // 2)
    row_table = positional_encoding(gh, d // 2)
    out = np.empty((gw * gh, d))
    for row in range(gh):
        for col in range(gw):
            out[row * gw + col, : d // 2] = col_table[col]
            out[row * gw + col, d // 2 :] = row_table[row]
    return out


@dataclass
class ResizerParams:
    """Linear map to the model width followed by layer norm and dropout."""

    w: object  # (d_in, dim)
    b: object  # (dim,)
    gain: object
    bias: object
    rate: float = 0.0


def feature_resize(raw, params: ResizerParams, training: bool = False, rng=None):
    """Project rows to the model width, normalize, and optionally drop out."""
    d_in = ag.value_of(raw).shape[1]
    if ag.value_of(params.w).shape[0] != d_in:
        raise ShapeError(
            f"feature_resize: input width {d_in} != projection rows {ag.value_of(params.w).shape[0]}"
        )
    out = ag.layer_norm(ag.add(ag.matmul(raw, params.w), params.b), params.gain, params.bias)
    if training and params.rate > 0.0:
        if rng is None:
            raise ConfigError("dropout during training needs an rng")
        keep = rng.random(ag.value_of(out).shape) >= params.rate
        out = ag.mul(out, keep / (1.0 - params.rate))
    return out


class Vocabulary:
    """Word list with a trainable embedding table.

    Rows 0..2 are reserved sentinels (sequence start, sentence separator,
    unknown word); regular words follow.  Unknown prompt words resolve to the
    unknown-word row.
    """

    START, SEP, UNK = 0, 1, 2
    _SPECIALS = 3

    def __init__(self, words, embeddings: np.ndarray):
        self.words = list(words)
        if len(set(self.words)) != len(self.words):
            raise ConfigError("vocabulary words must be unique")
        if embeddings.shape[0] != len(self.words) + self._SPECIALS:
            raise ShapeError("embedding table must have one row per word plus 3 sentinels")
        self.embeddings = embeddings
        self._index = {w: i + self._SPECIALS for i, w in enumerate(self.words)}

    @classmethod
    def create(cls, words, dim: int, seed: int = 0) -> "Vocabulary":
        # unit-variance rows: word embeddings must live at the same scale as
        # the image tokens or the prompt correlation starts out invisible
        rng = np.random.default_rng(seed)
        words = list(words)
        table = rng.normal(size=(len(words) + cls._SPECIALS, dim))
        return cls(words, table)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def lookup(self, word: str) -> int:
        return self._index.get(word, self.UNK)

    def save_words(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.words) + "\n")

    @classmethod
    def load_words(cls, path, dim: int, seed: int = 0) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            words = [line.strip() for line in fh if line.strip()]
        return cls.create(words, dim, seed)


def default_vocabulary(dim: int, seed: int = 0) -> Vocabulary:
    return Vocabulary.create(catalog.all_words(), dim, seed)


def embed_prompt(prompt: PromptText, vocab: Vocabulary, table=None) -> TokenMatrix:
    """Embed a prompt into prompt-family tokens.

    Word-level kinds (names, synonyms) produce one token per word.  Sentence
    level kinds (definitions, captions, retrieval) produce one token per
    sentence, the mean of its word embeddings.  ``table`` overrides the
    vocabulary's embedding table (used during training to thread gradients).
    """
    if table is None:
        table = vocab.embeddings
    if not prompt.parts:
        raise EmptyPromptError("prompt has no parts")
    if prompt.kind.sentence_level:
        groups = [_WORD_RE.findall(part.lower()) for part in prompt.parts]
        groups = [g for g in groups if g]
        if not groups:
            raise EmptyPromptError(f"prompt {prompt.text!r} tokenizes to nothing")
        flat = [vocab.lookup(w) for g in groups for w in g]
        pool = np.zeros((len(groups), len(flat)))
        at = 0
        for gi, g in enumerate(groups):
            pool[gi, at : at + len(g)] = 1.0 / len(g)
            at += len(g)
        tokens = ag.matmul(pool, ag.take(table, np.array(flat)))
        origin = tuple(prompt.parts)
    else:
        words = prompt.words()
        if not words:
            raise EmptyPromptError(f"prompt {prompt.text!r} tokenizes to nothing")
        ids = np.array([vocab.lookup(w) for w in words])
        tokens = ag.take(table, ids)
        origin = tuple(words)
    return TokenMatrix("prompt", tokens, origin)


@dataclass
class EncoderConfig:
    grid: tuple = (10, 10)
    dim: int = 64
    seed: int = 0
    use_positions: bool = True
    dropout: float = 0.0
    attribute_scale: float = 1.0


class ImageEncoder:
    """Grid rasterizer for synthetic scene frames.

    Each grid cell yields one token: a fixed random projection of the cell's
    object attribute one-hot (category, color, action), or a learned
    no-object row for empty cells, passed through the feature resizer, plus
    the sinusoidal position of the cell.  The projection is frozen at
    construction; the no-object row and the resizer are trainable.
    """

    def __init__(self, cfg: EncoderConfig):
        gw, gh = cfg.grid
        if gw * gh > TOKEN_CAPS["image"]:
            raise ConfigError(f"grid {cfg.grid} needs {gw * gh} tokens, cap is {TOKEN_CAPS['image']}")
        self.cfg = cfg
        self.n_cells = gw * gh
        rng = np.random.default_rng(cfg.seed)
        self._attr_index = _attribute_index()
        n_attr = len(self._attr_index)
        self.attr_proj = rng.normal(size=(n_attr, cfg.dim)) * cfg.attribute_scale  # fixed
        self.no_object = rng.normal(size=(1, cfg.dim)) * 0.5
        self.resizer = ResizerParams(
            w=np.eye(cfg.dim) + rng.normal(size=(cfg.dim, cfg.dim)) * 0.02,
            b=np.zeros(cfg.dim),
            gain=np.ones(cfg.dim),
            bias=np.zeros(cfg.dim),
            rate=cfg.dropout,
        )
        self.positions = grid_positional_encoding(cfg.grid, cfg.dim)

    def parameters(self) -> dict:
        return {
            "enc.no_object": self.no_object,
            "enc.resize.w": self.resizer.w,
            "enc.resize.b": self.resizer.b,
            "enc.resize.gain": self.resizer.gain,
            "enc.resize.bias": self.resizer.bias,
        }

    def load_parameters(self, params: dict) -> None:
        self.no_object = params["enc.no_object"]
        self.resizer = replace(
            self.resizer,
            w=params["enc.resize.w"],
            b=params["enc.resize.b"],
            gain=params["enc.resize.gain"],
            bias=params["enc.resize.bias"],
        )

    def cell_of(self, box) -> int:
        """Grid cell index (row-major) containing the box center."""
        gw, gh = self.cfg.grid
        cx, cy = box[0], box[1]
        col = min(int(cx * gw), gw - 1)
        row = min(int(cy * gh), gh - 1)
        return row * gw + col

    def cell_center(self, cell: int) -> tuple:
        gw, _ = self.cfg.grid
        row, col = divmod(cell, gw)
        return ((col + 0.5) / gw, (row + 0.5) / self.cfg.grid[1])

    def encode(self, frame, resizer: ResizerParams = None, no_object=None, training: bool = False, rng=None) -> TokenMatrix:
        """Encode a scene frame into image-family tokens, one per grid cell."""
        resizer = self.resizer if resizer is None else resizer
        no_object = self.no_object if no_object is None else no_object
        onehot = np.zeros((self.n_cells, self.attr_proj.shape[0]))
        empty = np.ones((self.n_cells, 1))
        origin = [None] * self.n_cells
        for obj in frame.objects:
            cell = self.cell_of(obj.box)
            for key in ((0, obj.category), (1, obj.color), (2, obj.action)):
                onehot[cell, self._attr_index[key]] = 1.0
            empty[cell, 0] = 0.0
            origin[cell] = obj.track_id
        raw = ag.add(onehot @ self.attr_proj, ag.matmul(empty, no_object))
        tokens = feature_resize(raw, resizer, training=training, rng=rng)
        if self.cfg.use_positions:
            tokens = ag.add(tokens, self.positions)
        return TokenMatrix("image", tokens, tuple(origin))


def _attribute_index() -> dict:
    index = {}
    for name in catalog.CATEGORY_NAMES:
        index[(0, name)] = len(index)
    for color in catalog.COLORS:
        index[(1, color)] = len(index)
    for action in catalog.ACTIONS:
        index[(2, action)] = len(index)
    return index


def extract_tracklets(tracklets, prev_image: TokenMatrix) -> TokenMatrix:
    """Pool previous-frame image tokens into one row per tracklet.

    Active tracklets take the mean of the image-token rows recorded at their
    last update (a single row in the usual one-cell case).  Inactive
    tracklets have no current assignment and contribute their stored feature
    row, frozen at deactivation.
    """
    n = len(tracklets)
    dim = ag.value_of(prev_image.tokens).shape[1] if prev_image is not None else None
    if n == 0:
        return TokenMatrix("tracklet", np.zeros((0, dim or 0)), ())
    m = len(prev_image) if prev_image is not None else 0
    pool = np.zeros((n, m))
    stored = np.zeros((n, ag.value_of(tracklets[0].feature).shape[0] if dim is None else dim))
    for j, tr in enumerate(tracklets):
        if tr.is_active and tr.assigned_token_indices and prev_image is not None:
            idx = tr.assigned_token_indices
            pool[j, list(idx)] = 1.0 / len(idx)
        else:
            stored[j] = ag.value_of(tr.feature)
    if prev_image is not None and pool.any():
        tokens = ag.add(ag.matmul(pool, prev_image.tokens), stored)
    else:
        tokens = stored
    return TokenMatrix("tracklet", tokens, tuple(tr.id for tr in tracklets))
