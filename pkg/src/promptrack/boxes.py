"""Axis-aligned box geometry on (cx, cy, w, h) boxes.

Scalar forms are plain float math for the metrics; the vectorized forms
accept autograd variables so box losses can backpropagate.
"""

from __future__ import annotations

import numpy as np

from . import autograd as ag

EPS = 1e-9


def corners(box):
    cx, cy, w, h = box
    return (cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)


def iou(a, b) -> float:
    ax1, ay1, ax2, ay2 = corners(a)
    bx1, by1, bx2, by2 = corners(b)
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / (union + EPS)


def giou(a, b) -> float:
    """Generalized IoU in [-1, 1]; equals IoU when one box contains the other."""
    if a[2] < 0 or a[3] < 0 or b[2] < 0 or b[3] < 0:
        raise ValueError("giou: widths and heights must be non-negative")
    ax1, ay1, ax2, ay2 = corners(a)
    bx1, by1, bx2, by2 = corners(b)
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    hull = (max(ax2, bx2) - min(ax1, bx1)) * (max(ay2, by2) - min(ay1, by1))
    return inter / (union + EPS) - (hull - union) / (hull + EPS)


def giou_pairs(pred, gt: np.ndarray):
    """Row-wise GIoU between (m, 4) predicted boxes and (m, 4) targets.

    ``pred`` may be an autograd Var; the result is then differentiable.
    """
    px, py, pw, ph = (pred[:, i] for i in range(4))
    gx, gy, gw, gh = (gt[:, i] for i in range(4))
    ax1, ay1 = px - pw * 0.5, py - ph * 0.5
    ax2, ay2 = px + pw * 0.5, py + ph * 0.5
    bx1, by1 = gx - gw * 0.5, gy - gh * 0.5
    bx2, by2 = gx + gw * 0.5, gy + gh * 0.5
    iw = ag.maximum(ag.sub(ag.minimum(ax2, bx2), ag.maximum(ax1, bx1)), 0.0)
    ih = ag.maximum(ag.sub(ag.minimum(ay2, by2), ag.maximum(ay1, by1)), 0.0)
    inter = ag.mul(iw, ih)
    union = ag.sub(ag.add(ag.mul(pw, ph), gw * gh), inter)
    hull = ag.mul(
        ag.sub(ag.maximum(ax2, bx2), ag.minimum(ax1, bx1)),
        ag.sub(ag.maximum(ay2, by2), ag.minimum(ay1, by1)),
    )
    return ag.sub(
        ag.div(inter, ag.add(union, EPS)),
        ag.div(ag.sub(hull, union), ag.add(hull, EPS)),
    )


def giou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise GIoU between (n, 4) and (m, 4) boxes in (cx, cy, w, h)."""
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    ax1, ay1 = a[:, 0] - a[:, 2] / 2, a[:, 1] - a[:, 3] / 2
    ax2, ay2 = a[:, 0] + a[:, 2] / 2, a[:, 1] + a[:, 3] / 2
    bx1, by1 = b[:, 0] - b[:, 2] / 2, b[:, 1] - b[:, 3] / 2
    bx2, by2 = b[:, 0] + b[:, 2] / 2, b[:, 1] + b[:, 3] / 2
    iw = np.maximum(0.0, np.minimum(ax2[:, None], bx2) - np.maximum(ax1[:, None], bx1))
    ih = np.maximum(0.0, np.minimum(ay2[:, None], by2) - np.maximum(ay1[:, None], by1))
    inter = iw * ih
    union = (a[:, 2] * a[:, 3])[:, None] + b[:, 2] * b[:, 3] - inter
    hw = np.maximum(ax2[:, None], bx2) - np.minimum(ax1[:, None], bx1)
    hh = np.maximum(ay2[:, None], by2) - np.minimum(ay1[:, None], by1)
    hull = hw * hh
    return inter / (union + EPS) - (hull - union) / (hull + EPS)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between (n, 4) and (m, 4) boxes in (cx, cy, w, h)."""
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    ax1, ay1 = a[:, 0] - a[:, 2] / 2, a[:, 1] - a[:, 3] / 2
    ax2, ay2 = a[:, 0] + a[:, 2] / 2, a[:, 1] + a[:, 3] / 2
    bx1, by1 = b[:, 0] - b[:, 2] / 2, b[:, 1] - b[:, 3] / 2
    bx2, by2 = b[:, 0] + b[:, 2] / 2, b[:, 1] + b[:, 3] / 2
    iw = np.maximum(0.0, np.minimum(ax2[:, None], bx2) - np.maximum(ax1[:, None], bx1))
    ih = np.maximum(0.0, np.minimum(ay2[:, None], by2) - np.maximum(ay1[:, None], by1))
    inter = iw * ih
    union = (a[:, 2] * a[:, 3])[:, None] + b[:, 2] * b[:, 3] - inter
    return inter / (union + EPS)
