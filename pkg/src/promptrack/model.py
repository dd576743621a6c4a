"""Forward passes of the prompt-conditioned tracker network.

Two interchangeable correlation modes consume the same weights:

* the full mode materializes the third-order region-tracklet-prompt tensor
  and derives its two attention matrices by marginalization, which costs
  time and space proportional to M*N*K*D;
* the simplified mode chains two pairwise cross-attentions instead
  (region|tracklet times tracklet|prompt), which is quadratic in the token
  counts and is what the tracking pipeline runs.

Both feed the same aggregation and the same 3-layer box/confidence decoder.
The image and tracklet families share projections, which is what makes the
tracklet|prompt correlation at frame t reproduce the region|prompt
correlation at frame t-1 for pooled tracklets.

Flop accounting: the mode-dependent correlation and aggregation work is
charged to the active counter's default category, while token projections
and the decoder, identical in both modes, go to ``setup`` / ``decode``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import tensorops
from .errors import EmptyPromptError, ShapeError
from .tensorops import AttentionParams, FamilyProjections, flop_category
from .tokens import TokenMatrix


@dataclass(frozen=True)
class Candidate:
    """A decoded box proposal tied to the image token that produced it."""

    box: tuple  # (cx, cy, w, h), normalized
    conf: float
    token_index: int


@dataclass
class ModelWeights:
    """All learnable weights of the correlation network and decoder.

    ``attn.families`` maps the image and tracklet families to one shared
    projection set (the visual encoder and the tracklet extractor share
    weights) and the prompt family to its own.  The prompt family has no
    query projection because prompt tokens only ever act as keys.
    """

    dim: int
    heads: int
    attn: AttentionParams
    ffn: tuple  # ((w1, b1), (w2, b2), (w3, b3)), widths D -> D -> D -> 5

    @classmethod
    def create(cls, dim: int = 64, heads: int = 4, seed: int = 0) -> "ModelWeights":
        rng = np.random.default_rng(seed)

        def near_identity():
            return np.eye(dim) + rng.normal(size=(dim, dim)) * 0.02

        vis = FamilyProjections(near_identity(), near_identity(), near_identity())
        # prompt values start small: word rows carry full scale for sharp
        # attention keys, but their injection into the decoder should not
        # drown the token content the box head reads
        prm = FamilyProjections(None, near_identity(), near_identity() * 0.25)
        attn = AttentionParams(dim=dim, heads=heads, families={"image": vis, "tracklet": vis, "prompt": prm})
        w1 = rng.normal(size=(dim, dim)) * math.sqrt(2.0 / dim)
        w2 = rng.normal(size=(dim, dim)) * math.sqrt(2.0 / dim)
        w3 = rng.normal(size=(dim, 5)) * 0.01
        b3 = np.zeros(5)
        b3[4] = -2.0  # start below the confidence gate so untrained nets stay quiet
        ffn = ((w1, np.zeros(dim)), (w2, np.zeros(dim)), (w3, b3))
        return cls(dim=dim, heads=heads, attn=attn, ffn=ffn)

    def parameters(self) -> dict:
        vis = self.attn.families["image"]
        prm = self.attn.families["prompt"]
        out = {
            "attn.vis.w_q": vis.w_q,
            "attn.vis.w_k": vis.w_k,
            "attn.vis.w_v": vis.w_v,
            "attn.prm.w_k": prm.w_k,
            "attn.prm.w_v": prm.w_v,
        }
        for i, (w, b) in enumerate(self.ffn, start=1):
            out[f"ffn.w{i}"] = w
            out[f"ffn.b{i}"] = b
        return out

    def with_parameters(self, params: dict) -> "ModelWeights":
        """Rebuild the weight view from a flat mapping (arrays or Vars)."""
        vis = FamilyProjections(params["attn.vis.w_q"], params["attn.vis.w_k"], params["attn.vis.w_v"])
        prm = FamilyProjections(None, params["attn.prm.w_k"], params["attn.prm.w_v"])
        attn = AttentionParams(dim=self.dim, heads=self.heads, families={"image": vis, "tracklet": vis, "prompt": prm})
        ffn = tuple((params[f"ffn.w{i}"], params[f"ffn.b{i}"]) for i in (1, 2, 3))
        return ModelWeights(dim=self.dim, heads=self.heads, attn=attn, ffn=ffn)


def attention_matrix(x_tokens, y_tokens, w_q, w_k, heads: int, dim: int):
    """Head-averaged row-stochastic attention; accepts Vars or arrays."""
    with flop_category("setup"):
        q = ag.matmul(x_tokens, w_q)
        k = ag.matmul(y_tokens, w_k)
    hw = dim // heads
    scale = 1.0 / math.sqrt(dim)
    acc = None
    for h in range(heads):
        cols = (slice(None), slice(h * hw, (h + 1) * hw))
        logits = ag.mul(ag.matmul(q[cols], ag.transpose(k[cols])), scale)
        soft = ag.softmax_rows(logits)
        acc = soft if acc is None else ag.add(acc, soft)
    return ag.mul(acc, 1.0 / heads)


def _family(weights: ModelWeights, name: str) -> FamilyProjections:
    return weights.attn.families[name]


def _check_widths(weights: ModelWeights, *mats: TokenMatrix) -> None:
    for m in mats:
        width = ag.value_of(m.tokens).shape[1]
        if width != weights.dim:
            raise ShapeError(f"{m.family} tokens have width {width}, model expects {weights.dim}")


def ffn_decode(z, img: TokenMatrix, weights: ModelWeights):
    """Residual 3-layer decoder: boxes in [0, 1]^4 and confidence in [0, 1]."""
    with flop_category("decode"):
        x = ag.add(z, img.tokens) if z is not None else img.tokens
        (w1, b1), (w2, b2), (w3, b3) = weights.ffn
        h = ag.relu(ag.add(ag.matmul(x, w1), b1))
        h = ag.relu(ag.add(ag.matmul(h, w2), b2))
        out = ag.add(ag.matmul(h, w3), b3)
        boxes = ag.sigmoid(out[:, :4])
        conf = ag.sigmoid(out[:, 4])
    return boxes, conf


def candidates_from(boxes, conf, gamma: float) -> list:
    """Threshold decoded rows into candidates; row index = source token."""
    boxes = ag.value_of(boxes)
    conf = ag.value_of(conf)
    return [
        Candidate(box=tuple(boxes[i]), conf=float(conf[i]), token_index=i)
        for i in range(len(conf))
        if conf[i] >= gamma
    ]


def decode(z, img: TokenMatrix, weights: ModelWeights, gamma: float) -> list:
    boxes, conf = ffn_decode(z, img, weights)
    return candidates_from(boxes, conf, gamma)


def grounding_forward(img: TokenMatrix, prm: TokenMatrix, weights: ModelWeights):
    """Region-prompt correlation: attention over prompt tokens, then values."""
    if len(prm) == 0:
        raise EmptyPromptError("cannot ground with an empty prompt")
    _check_widths(weights, img, prm)
    vis, prmf = _family(weights, "image"), _family(weights, "prompt")
    a_ip = attention_matrix(img.tokens, prm.tokens, vis.w_q, prmf.w_k, weights.heads, weights.dim)
    with flop_category("setup"):
        v_p = ag.matmul(prm.tokens, prmf.w_v)
    z = ag.matmul(a_ip, v_p)
    return a_ip, z


def ground_regions(img: TokenMatrix, prm: TokenMatrix, weights: ModelWeights, gamma: float) -> list:
    """Decode prompt-matching regions of a frame without any tracklets."""
    _, z = grounding_forward(img, prm, weights)
    return decode(z, img, weights, gamma)


def _aggregate(a_it, a_tp, trk: TokenMatrix, prm: TokenMatrix, weights: ModelWeights):
    """Object representations: chained prompt values plus tracklet values."""
    with flop_category("setup"):
        v_p = ag.matmul(prm.tokens, _family(weights, "prompt").w_v)
        v_t = ag.matmul(trk.tokens, _family(weights, "tracklet").w_v)
    chain = ag.matmul(a_it, a_tp)
    return ag.add(ag.matmul(chain, v_p), ag.matmul(a_it, v_t))


def forward_simplified(img: TokenMatrix, trk: TokenMatrix, prm: TokenMatrix, weights: ModelWeights):
    """Factorized correlation: A_IT chained with A_TP, then aggregation.

    Returns ``(a_it, a_tp, z)``.  Cost grows with M*N*D + N*K*D + M*N*K,
    quadratic in the token counts at fixed width.
    """
    if len(trk) == 0:
        raise ShapeError("tracklet set is empty; route this frame through ground_regions")
    if len(prm) == 0:
        raise EmptyPromptError("cannot track with an empty prompt")
    _check_widths(weights, img, trk, prm)
    vis, prmf = _family(weights, "image"), _family(weights, "prompt")
    a_it = attention_matrix(img.tokens, trk.tokens, vis.w_q, vis.w_k, weights.heads, weights.dim)
    a_tp = attention_matrix(trk.tokens, prm.tokens, vis.w_q, prmf.w_k, weights.heads, weights.dim)
    z = _aggregate(a_it, a_tp, trk, prm, weights)
    return a_it, a_tp, z


def forward_full(img: TokenMatrix, trk: TokenMatrix, prm: TokenMatrix, weights: ModelWeights):
    """Third-order correlation: materialize the full tensor, then decode.

    Each family is projected by its correlation-side map (queries for
    regions, keys for tracklets and prompts) and the tensor entries are the
    scaled triple products summed over the feature axis.  The two attention
    matrices are recovered by marginalizing the tensor over the prompt and
    region axes respectively, so the aggregation path matches the simplified
    mode while the construction retains its cubic M*N*K*D cost.

    Inference-only ablation path: inputs are taken by value.
    """
    if len(trk) == 0:
        raise ShapeError("tracklet set is empty; route this frame through ground_regions")
    if len(prm) == 0:
        raise EmptyPromptError("cannot track with an empty prompt")
    _check_widths(weights, img, trk, prm)
    vis, prmf = _family(weights, "image"), _family(weights, "prompt")
    with flop_category("setup"):
        e = tensorops.matmul(ag.value_of(img.tokens), ag.value_of(vis.w_q))
        x = tensorops.matmul(ag.value_of(trk.tokens), ag.value_of(vis.w_k))
        p = tensorops.matmul(ag.value_of(prm.tokens), ag.value_of(prmf.w_k))
    tensor = tensorops.triple_correlation(e, x, p) / math.sqrt(weights.dim)
    tensorops.charge_flops(2 * tensor.size)
    a_it = tensorops.softmax_rows(tensor.sum(axis=2))
    a_tp = tensorops.softmax_rows(tensor.sum(axis=0))
    z = _aggregate(a_it, a_tp, trk, prm, weights)
    return tensor, a_it, a_tp, z
