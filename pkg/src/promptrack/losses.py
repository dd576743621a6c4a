"""Training losses: contrastive alignment, objectness, box overlap.

The alignment and objectness terms are log-softmax losses on raw token dot
products, so they shape the token producers directly.  The box term pairs
decoded boxes with ground truth through a minimum-cost assignment and
penalizes generalized overlap; a confidence log-loss rides along so the
decoder's score output is supervised too (the overlap term alone never
touches it).

Everything here accepts autograd variables and is verified against central
finite differences by :func:`grad_check`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import autograd as ag
from .boxes import giou, giou_pairs
from .errors import SupervisionError
from .tokens import TokenMatrix

__all__ = [
    "PositivePairs",
    "LossWeights",
    "alignment_loss",
    "objectness_loss",
    "giou",
    "giou_loss",
    "confidence_loss",
    "hungarian",
    "total_loss",
    "triplet_objective",
    "grad_check",
]


@dataclass(frozen=True)
class PositivePairs:
    """Ground-truth alignment links between tracklets and prompt tokens.

    ``prompt_positive`` holds (tracklet j, prompt token k) pairs scored
    against all prompt tokens; ``object_positive`` holds (prompt token k,
    tracklet j) pairs scored against all tracklets.  Both sides are usually
    the same relation read in both directions.
    """

    prompt_positive: tuple
    object_positive: tuple

    @classmethod
    def symmetric(cls, pairs) -> "PositivePairs":
        pairs = tuple(pairs)
        return cls(prompt_positive=pairs, object_positive=tuple((k, j) for j, k in pairs))


@dataclass(frozen=True)
class LossWeights:
    alignment: float = 0.3
    objectness: float = 0.3
    box: float = 0.3

    def __post_init__(self):
        if min(self.alignment, self.objectness, self.box) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.alignment == self.objectness == self.box == 0:
            raise ValueError("at least one loss weight must be positive")


def _log_softmax_pick(logits, row: int, col: int):
    """-log softmax of entry (row, col) with the denominator over the row."""
    r = logits[row : row + 1, :]
    return ag.sub(ag.logsumexp_rows(r)[0, 0], r[0, col])


def alignment_loss(trk: TokenMatrix, prm: TokenMatrix, pos: PositivePairs):
    """Symmetric two-term contrastive loss on tracklet/prompt dot products.

    The first term scores each positive pair against all prompt tokens and
    averages over the positive count; the second mirrors it over tracklets.
    """
    if not pos.prompt_positive or not pos.object_positive:
        raise SupervisionError("alignment needs non-empty positive sets")
    logits = ag.matmul(trk.tokens, ag.transpose(prm.tokens))
    over_prompts = None
    for j, k in pos.prompt_positive:
        term = _log_softmax_pick(logits, j, k)
        over_prompts = term if over_prompts is None else ag.add(over_prompts, term)
    over_prompts = ag.mul(over_prompts, 1.0 / len(pos.prompt_positive))
    logits_t = ag.transpose(logits)
    over_tracklets = None
    for k, j in pos.object_positive:
        term = _log_softmax_pick(logits_t, k, j)
        over_tracklets = term if over_tracklets is None else ag.add(over_tracklets, term)
    over_tracklets = ag.mul(over_tracklets, 1.0 / len(pos.object_positive))
    return ag.add(over_prompts, over_tracklets)


def objectness_loss(trk: TokenMatrix, img: TokenMatrix, assignment):
    """One-sided log-softmax loss tying each tracklet to its image token.

    ``assignment[j]`` is the ground-truth image token of tracklet j.  For
    each pair the score of tracklet j is normalized over all tracklet rows
    (single modality, one side only), and the per-pair losses are summed.
    """
    for i in assignment:
        if not 0 <= i < len(img):
            raise SupervisionError(f"assignment index {i} outside the image token range")
    logits = ag.matmul(trk.tokens, ag.transpose(img.tokens))  # (N, M)
    total = None
    for j, i in enumerate(assignment):
        col = logits[:, i : i + 1]  # scores of every tracklet against token i
        term = ag.sub(ag.logsumexp_rows(ag.transpose(col))[0, 0], col[j, 0])
        total = term if total is None else ag.add(total, term)
    if total is None:
        raise SupervisionError("objectness needs at least one tracklet")
    return total


def giou_loss(pred_boxes, gt_boxes: np.ndarray):
    """Sum of (1 - GIoU) over aligned box pairs."""
    if len(gt_boxes) == 0:
        return 0.0
    return ag.sum_(ag.sub(1.0, giou_pairs(pred_boxes, np.asarray(gt_boxes, dtype=np.float64))))


def confidence_loss(conf, matched_indices, negative_weight: float = 0.25, weights=None):
    """Binary log-loss on decoder confidences.

    Matched tokens are pushed toward 1, all others toward 0.  Without an
    explicit per-token ``weights`` vector, negatives are down-weighted by
    ``negative_weight`` because empty cells dominate the grid; callers that
    can tell hard negatives apart (visible but unprompted objects) should
    weight those fully.
    """
    n = ag.value_of(conf).shape[0]
    target = np.zeros(n)
    target[list(matched_indices)] = 1.0
    if weights is None:
        weights = np.where(target > 0, 1.0, negative_weight)
    c = ag.minimum(ag.maximum(conf, 1e-12), 1.0 - 1e-12)
    per_token = ag.add(
        ag.mul(target, ag.log(c)),
        ag.mul(1.0 - target, ag.log(ag.sub(1.0, c))),
    )
    return ag.mul(ag.sum_(ag.mul(per_token, weights)), -1.0)


def hungarian(cost: np.ndarray):
    """Minimum-total-cost one-to-one assignment.

    Returns (rows, cols) index arrays.  Rectangular inputs are padded with a
    large constant so every row/column of the smaller side is assigned.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0:
        return np.array([], dtype=int), np.array([], dtype=int)
    if not np.isfinite(cost).all():
        raise ValueError("hungarian: cost matrix must be finite")
    n, m = cost.shape
    if n != m:
        side = max(n, m)
        pad = np.full((side, side), cost.max() + 1.0 if cost.size else 1.0)
        pad[:n, :m] = cost
        rows, cols = linear_sum_assignment(pad)
        keep = (rows < n) & (cols < m)
        return rows[keep], cols[keep]
    return linear_sum_assignment(cost)


def total_loss(components, weights: LossWeights = LossWeights()):
    """Weighted sum of the (alignment, objectness, box) components."""
    align, obj, box = components
    return ag.add(
        ag.add(ag.mul(align, weights.alignment), ag.mul(obj, weights.objectness)),
        ag.mul(box, weights.box),
    )


def triplet_objective(tensor, pos):
    """-log softmax of one positive region-tracklet-prompt triplet.

    Diagnostic only: evaluated on held-out frames to confirm that the
    trainable losses also push the third-order objective down.
    """
    i, j, k = pos
    t = tensor if isinstance(tensor, ag.Var) else np.asarray(tensor, dtype=np.float64)
    shape = ag.value_of(t).shape
    if not (0 <= i < shape[0] and 0 <= j < shape[1] and 0 <= k < shape[2]):
        raise IndexError(f"triplet {pos} outside tensor of shape {shape}")
    flat = _reshape_rows(t, (1, shape[0] * shape[1] * shape[2]))
    lse = ag.logsumexp_rows(flat)[0, 0]
    return ag.sub(lse, t[i, j, k])


def _reshape_rows(x, shape):
    if isinstance(x, ag.Var):
        value = x.value.reshape(shape)
        return ag.Var(value, (x,), lambda g: (g.reshape(x.value.shape),))
    return np.asarray(x).reshape(shape)


def grad_check(loss_fn, params: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn`` maps a parameter vector to a scalar; it must accept both a
    plain array (for the numeric side) and a Var (for the analytic side).
    """
    params = np.asarray(params, dtype=np.float64)
    var = ag.Var(params.copy())
    out = loss_fn(var)
    ag.backward(out)
    analytic = np.zeros_like(params) if var.grad is None else var.grad
    worst = 0.0
    flat = params.ravel()
    for idx in range(flat.size):
        bumped = flat.copy()
        bumped[idx] += eps
        hi = float(ag.value_of(loss_fn(bumped.reshape(params.shape))))
        bumped[idx] -= 2 * eps
        lo = float(ag.value_of(loss_fn(bumped.reshape(params.shape))))
        numeric = (hi - lo) / (2 * eps)
        err = abs(analytic.ravel()[idx] - numeric) / max(1.0, abs(numeric))
        worst = max(worst, err)
    return worst
