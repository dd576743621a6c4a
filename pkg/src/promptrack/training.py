"""Toy training loop over adjacent-frame pairs of a synthetic world.

Each step samples a prompt (full category list, a category subset, or a
color-qualified category so the net also learns what is *not* prompted),
builds ground-truth tracklets from the earlier frame, and descends on the
weighted sum of alignment, objectness and box losses.  Box supervision
pairs decoded boxes with targets through a fresh minimum-cost assignment
every step, and a confidence log-loss supervises the decoder's score
output, which the overlap term cannot reach.

Plain gradient descent, two learning rates: the word-embedding table moves
at the lower one.  Runs are bit-reproducible from (seed, step count).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import autograd as ag
from . import catalog
from .boxes import giou_matrix
from .errors import DivergenceError, SupervisionError
from .losses import (
    LossWeights,
    PositivePairs,
    alignment_loss,
    confidence_loss,
    giou_loss,
    hungarian,
    objectness_loss,
    total_loss,
    triplet_objective,
)
from .model import ffn_decode, forward_full, forward_simplified, grounding_forward
from .net import TrackerNet
from .simworld import Scenario, grid_cell, prompt_matches
from .tokens import PromptKind, PromptText, TokenMatrix, embed_prompt

DEFAULT_RATES = (5e-5, 1e-4)  # (word-embedding table, everything else)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 220
    rates: tuple = DEFAULT_RATES
    seed: int = 0
    loss_weights: LossWeights = LossWeights()
    confidence_weight: float = 0.3
    l1_weight: float = 1.0
    negative_weight: float = 0.25
    # Hard-negative (visible but unprompted object) weights per decode branch.
    # Grounding must read the prompt, so its distractors weigh heavily; the
    # tracking branch gets its selectivity from the tracklet set instead, and
    # a heavy weight there parks confidences at the decision gate.
    ground_distractor_weight: float = 2.0
    track_distractor_weight: float = 0.25


def describes(word: str, obj) -> bool:
    """Does a prompt word name this object's category, color or action?"""
    return (
        catalog.resolve_category(word) == obj.category
        or word == obj.color
        or word == obj.action
    )


def positives_for(objects, prompt_words) -> PositivePairs:
    pairs = [
        (j, k)
        for j, obj in enumerate(objects)
        for k, word in enumerate(prompt_words)
        if describes(word, obj)
    ]
    if not pairs:
        raise SupervisionError(f"no positive pairs between {len(objects)} objects and {prompt_words}")
    return PositivePairs.symmetric(pairs)


def sample_prompt(frame_objects, rng) -> PromptText:
    """Seeded prompt for one training pair; always covers >= 1 object."""
    cats = list(dict.fromkeys(o.category for o in frame_objects))
    draw = rng.random()
    if draw < 0.5 or len(cats) == 1:
        parts = tuple(cats)
    elif draw < 0.8:
        k = int(rng.integers(1, len(cats)))
        parts = tuple(str(c) for c in rng.choice(np.array(cats), size=k, replace=False))
    else:
        obj = frame_objects[int(rng.integers(0, len(frame_objects)))]
        parts = (obj.color, obj.category)
    return PromptText(PromptKind.NM, parts)


def assignment_cost(pred_boxes: np.ndarray, gt_boxes: np.ndarray, affinity: np.ndarray = None) -> np.ndarray:
    """Assignment cost between decoded and target boxes.

    Overlap plus center/size L1, minus an optional appearance-affinity term
    (cosine between each image token and the target object's token), which
    anchors the assignment while the box head is still uninformative.
    """
    cost = 1.0 - giou_matrix(pred_boxes, gt_boxes)
    cost += np.abs(pred_boxes[:, None, :] - gt_boxes[None, :, :]).sum(axis=2)
    if affinity is not None:
        cost -= 2.0 * affinity
    return cost


def _confidence_weights(n: int, matched, distractor_cells, cfg: TrainConfig, distractor_weight: float) -> np.ndarray:
    """Full weight on positives, branch-specific weight on hard negatives.

    Visible-but-unprompted object cells are the only evidence that
    confidence must read the prompt correlation, not just object presence;
    plain background is down-weighted as usual.
    """
    weights = np.full(n, cfg.negative_weight)
    weights[list(distractor_cells)] = distractor_weight
    weights[list(matched)] = 1.0
    return weights


def decoder_losses(boxes, conf, targets, cfg: TrainConfig, img, grid, distractor_cells=(), distractor_weight: float = 1.0):
    """Box losses (overlap plus L1) and confidence loss against the targets."""
    n = ag.value_of(conf).shape[0]
    if not targets:
        return 0.0, 0.0, confidence_loss(conf, [], weights=_confidence_weights(n, [], distractor_cells, cfg, distractor_weight)), []
    gt = np.array([o.box for o in targets], dtype=np.float64)
    tokens = img.values
    norm = tokens / np.maximum(np.linalg.norm(tokens, axis=1, keepdims=True), 1e-12)
    target_rows = norm[[grid_cell(o.box, grid) for o in targets]]
    affinity = norm @ target_rows.T
    rows, cols = hungarian(assignment_cost(ag.value_of(boxes), gt, affinity))
    matched = list(rows)
    sel = ag.take(boxes, np.array(rows))
    box_term = giou_loss(sel, gt[cols])
    l1_term = ag.sum_(ag.absolute(ag.sub(sel, gt[cols])))
    conf_term = confidence_loss(conf, matched, weights=_confidence_weights(n, matched, distractor_cells, cfg, distractor_weight))
    return box_term, l1_term, conf_term, matched


def train_step(net: TrackerNet, scenario: Scenario, t: int, cfg: TrainConfig) -> dict:
    """One descent step on the adjacent pair (t-1, t); mutates the net."""
    rng = np.random.default_rng([cfg.seed, net.step_count])
    frame_prev, frame_cur = scenario.frame(t - 1), scenario.frame(t)
    if not frame_prev.objects or not frame_cur.objects:
        raise SupervisionError(f"frames {t - 1}/{t} have no objects to train on")
    prompt = sample_prompt(frame_prev.objects, rng)
    prev_targets = [o for o in frame_prev.objects if prompt_matches(prompt, o)]
    cur_targets = [o for o in frame_cur.objects if prompt_matches(prompt, o)]
    if not prev_targets or not cur_targets:
        prompt = PromptText(PromptKind.NM, tuple(dict.fromkeys(o.category for o in frame_prev.objects)))
        prev_targets = [o for o in frame_prev.objects if prompt_matches(prompt, o)]
        cur_targets = [o for o in frame_cur.objects if prompt_matches(prompt, o)]

    arrays = net.parameters()
    params = {k: ag.Var(v) for k, v in arrays.items()}
    weights = net.weights.with_parameters(params)
    resizer = replace(
        net.encoder.resizer,
        w=params["enc.resize.w"],
        b=params["enc.resize.b"],
        gain=params["enc.resize.gain"],
        bias=params["enc.resize.bias"],
    )
    img_prev = net.encoder.encode(
        frame_prev, resizer=resizer, no_object=params["enc.no_object"], training=True, rng=rng
    )
    img_cur = net.encoder.encode(
        frame_cur, resizer=resizer, no_object=params["enc.no_object"], training=True, rng=rng
    )
    prm = embed_prompt(prompt, net.vocab, table=params["vocab"])

    prev_cells = np.array([grid_cell(o.box, scenario.grid) for o in prev_targets])
    trk = TokenMatrix(
        "tracklet",
        ag.take(img_prev.tokens, prev_cells),
        origin=tuple(o.track_id for o in prev_targets),
    )
    align = alignment_loss(trk, prm, positives_for(prev_targets, list(prm.origin)))

    cur_cell_by_id = {o.track_id: grid_cell(o.box, scenario.grid) for o in cur_targets}
    persisting = [j for j, o in enumerate(prev_targets) if o.track_id in cur_cell_by_id]
    if persisting:
        trk_pers = TokenMatrix("tracklet", ag.take(img_prev.tokens, prev_cells[persisting]))
        obj = objectness_loss(
            trk_pers, img_cur, [cur_cell_by_id[prev_targets[j].track_id] for j in persisting]
        )
    else:
        obj = 0.0

    target_ids = {o.track_id for o in cur_targets}
    distractors = [
        grid_cell(o.box, scenario.grid) for o in frame_cur.objects if o.track_id not in target_ids
    ]
    _, _, z = forward_simplified(img_cur, trk, prm, weights)
    boxes_t, conf_t = ffn_decode(z, img_cur, weights)
    box_t, l1_t, conf_loss_t, _ = decoder_losses(
        boxes_t, conf_t, cur_targets, cfg, img_cur, scenario.grid, distractors,
        cfg.track_distractor_weight,
    )

    _, z0 = grounding_forward(img_cur, prm, weights)
    boxes_g, conf_g = ffn_decode(z0, img_cur, weights)
    box_g, l1_g, conf_loss_g, _ = decoder_losses(
        boxes_g, conf_g, cur_targets, cfg, img_cur, scenario.grid, distractors,
        cfg.ground_distractor_weight,
    )

    box = ag.add(box_t, box_g)
    conf_total = ag.add(conf_loss_t, conf_loss_g)
    l1_total = ag.add(l1_t, l1_g)
    loss = ag.add(
        ag.add(
            total_loss((align, obj, box), cfg.loss_weights),
            ag.mul(conf_total, cfg.confidence_weight),
        ),
        ag.mul(l1_total, cfg.l1_weight),
    )
    loss_value = float(ag.value_of(loss))
    if not np.isfinite(loss_value):
        raise DivergenceError(
            f"non-finite loss at step {net.step_count} (frame pair {t - 1}/{t}, prompt {prompt.text!r})"
        )
    ag.backward(loss)
    lr_table, lr_other = cfg.rates
    for name, var in params.items():
        if var.grad is None:
            continue
        arrays[name] -= (lr_table if name == "vocab" else lr_other) * var.grad
    net.step_count += 1
    return {
        "alignment": float(ag.value_of(align)),
        "objectness": float(ag.value_of(obj)),
        "giou": float(ag.value_of(box)),
        "total": loss_value,
    }


def train(net: TrackerNet, scenario: Scenario, cfg: TrainConfig = TrainConfig(), csv_path=None) -> list:
    """Gradient descent over all adjacent pairs, ``cfg.epochs`` times.

    Returns one loss dict per epoch (means over the epoch's steps) and
    optionally writes them as a CSV loss curve.
    """
    history = []
    for epoch in range(cfg.epochs):
        sums = {"alignment": 0.0, "objectness": 0.0, "giou": 0.0, "total": 0.0}
        steps = 0
        for t in range(1, scenario.frames):
            losses = train_step(net, scenario, t, cfg)
            for k in sums:
                sums[k] += losses[k]
            steps += 1
        entry = {"epoch": epoch, **{k: v / max(steps, 1) for k, v in sums.items()}}
        history.append(entry)
    if csv_path is not None:
        write_loss_csv(history, csv_path)
    return history


def write_loss_csv(history, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "alignment", "objectness", "giou", "total"])
        writer.writeheader()
        for row in history:
            writer.writerow(row)


def triplet_diagnostic(net: TrackerNet, scenario: Scenario, frames=None) -> float:
    """Mean third-order objective of the positive triplets on given frames.

    Builds the full correlation tensor from ground-truth tracklets and the
    scene's category prompt, and averages the positive-triplet loss over all
    persisting objects.  Lower is better; used to confirm toy training also
    improves the objective it never optimizes directly.
    """
    if frames is None:
        frames = range(1, scenario.frames)
    prompt = PromptText(PromptKind.NM, scenario.categories_present())
    prm = embed_prompt(prompt, net.vocab)
    word_of = {w: k for k, w in enumerate(prm.origin)}
    values, count = 0.0, 0
    for t in frames:
        frame_prev, frame_cur = scenario.frame(t - 1), scenario.frame(t)
        prev = [o for o in frame_prev.objects]
        cur_by_id = {o.track_id: o for o in frame_cur.objects}
        if not prev:
            continue
        img_cur = net.encoder.encode(frame_cur)
        img_prev = net.encoder.encode(frame_prev)
        cells = np.array([grid_cell(o.box, scenario.grid) for o in prev])
        trk = TokenMatrix("tracklet", img_prev.values[cells])
        tensor, _, _, _ = forward_full(img_cur, trk, prm, net.weights)
        for j, o in enumerate(prev):
            if o.track_id not in cur_by_id or o.category not in word_of:
                continue
            i = grid_cell(cur_by_id[o.track_id].box, scenario.grid)
            k = word_of[o.category]
            values += float(ag.value_of(triplet_objective(tensor, (i, j, k))))
            count += 1
    if count == 0:
        raise SupervisionError("no positive triplets on the requested frames")
    return values / count
