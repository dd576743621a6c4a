"""Tracking metrics, class-aware and class-agnostic.

The class-agnostic variants pool every class into a single entry during
association, so a perfectly tracked but misclassified object still earns
full credit; the class-aware variants restrict association to equal labels,
which is the conventional protocol.  On single-class data the two coincide.

Frame-level counting follows the CLEAR protocol: matches carry over from
the previous frame while their overlap holds, remaining pairs are assigned
by minimum cost at an IoU gate of 0.5, and an identity switch is charged
whenever a ground-truth track's matched prediction id changes.  The
identity F-score comes from a global trajectory-level assignment, and the
detection AP uses all-point interpolation at the same gate.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .boxes import iou
from .errors import UndefinedMetricError
from .losses import hungarian

IOU_THRESHOLD = 0.5
MT_COVERAGE = 0.8

CLASS_AWARE = "class_aware"
CLASS_AGNOSTIC = "class_agnostic"


@dataclass(frozen=True)
class TrackRecord:
    frame: int
    id: int
    box: tuple  # (cx, cy, w, h)
    conf: float = 1.0
    label: str = ""


class TrackSet:
    """Frame-indexed track records; (frame, id) pairs are unique."""

    def __init__(self, records, is_gt: bool = False):
        self.records = list(records)
        self.is_gt = is_gt
        seen = set()
        for r in self.records:
            key = (r.frame, r.id)
            if key in seen:
                raise ValueError(f"duplicate (frame, id) record {key}")
            seen.add(key)
        self.by_frame = defaultdict(list)
        for r in self.records:
            self.by_frame[r.frame].append(r)

    def __len__(self):
        return len(self.records)

    def frames(self):
        return sorted(self.by_frame)

    def track_ids(self):
        return sorted({r.id for r in self.records})


@dataclass
class Counts:
    fn: int = 0
    fp: int = 0
    ids: int = 0
    gt: int = 0
    idtp: int = 0
    idfp: int = 0
    idfn: int = 0


@dataclass
class EvalCounts:
    pooled: Counts = field(default_factory=Counts)
    per_class: dict = field(default_factory=dict)

    def for_class(self, label: str) -> Counts:
        if label not in self.per_class:
            self.per_class[label] = Counts()
        return self.per_class[label]


def match_frames(gt: TrackSet, pred: TrackSet, iou_thr: float = IOU_THRESHOLD, mode: str = CLASS_AGNOSTIC):
    """CLEAR-style per-frame correspondence and error counting.

    Returns ``(matches, counts)`` where ``matches`` maps each frame to the
    list of matched (gt_id, pred_id) pairs.
    """
    if mode not in (CLASS_AWARE, CLASS_AGNOSTIC):
        raise ValueError(f"unknown mode {mode!r}")
    counts = EvalCounts()
    last_match: dict = {}  # gt id -> pred id, most recent correspondence
    matches_per_frame: dict = {}
    frames = sorted(set(gt.by_frame) | set(pred.by_frame))
    for t in frames:
        gts = gt.by_frame.get(t, [])
        preds = pred.by_frame.get(t, [])
        pred_by_id = {p.id: p for p in preds}
        matched_gt, matched_pred = set(), set()
        pairs = []

        def eligible(g, p):
            return mode == CLASS_AGNOSTIC or g.label == p.label

        # Carry over surviving correspondences first.
        for g in gts:
            p = pred_by_id.get(last_match.get(g.id))
            if p is not None and p.id not in matched_pred and eligible(g, p) and iou(g.box, p.box) >= iou_thr:
                pairs.append((g, p))
                matched_gt.add(g.id)
                matched_pred.add(p.id)
        free_gt = [g for g in gts if g.id not in matched_gt]
        free_pred = [p for p in preds if p.id not in matched_pred]
        if free_gt and free_pred:
            score = np.array(
                [
                    [iou(g.box, p.box) if eligible(g, p) else -1.0 for p in free_pred]
                    for g in free_gt
                ]
            )
            cost = np.where(score >= iou_thr, 1.0 - score, 1e6)
            rows, cols = hungarian(cost)
            for r, c in zip(rows, cols):
                if score[r, c] >= iou_thr:
                    pairs.append((free_gt[r], free_pred[c]))
                    matched_gt.add(free_gt[r].id)
                    matched_pred.add(free_pred[c].id)

        for g, p in pairs:
            previous = last_match.get(g.id)
            if previous is not None and previous != p.id:
                counts.pooled.ids += 1
                counts.for_class(g.label).ids += 1
            last_match[g.id] = p.id
        for g in gts:
            counts.pooled.gt += 1
            counts.for_class(g.label).gt += 1
            if g.id not in matched_gt:
                counts.pooled.fn += 1
                counts.for_class(g.label).fn += 1
        for p in preds:
            if p.id not in matched_pred:
                counts.pooled.fp += 1
                counts.for_class(p.label).fp += 1
        matches_per_frame[t] = [(g.id, p.id) for g, p in pairs]
    return matches_per_frame, counts


def mota_from_counts(counts: EvalCounts) -> float:
    c = counts.pooled
    if c.gt == 0:
        raise UndefinedMetricError("MOTA undefined without ground truth")
    return 1.0 - (c.fn + c.fp + c.ids) / c.gt


def ca_mota(counts: EvalCounts) -> float:
    """Class-agnostic MOTA over pooled associations."""
    return mota_from_counts(counts)


def _id_counts(gt: TrackSet, pred: TrackSet, iou_thr: float) -> tuple:
    """Global trajectory assignment; returns (idtp, idfp, idfn)."""
    gt_tracks = defaultdict(dict)  # id -> frame -> record
    for r in gt.records:
        gt_tracks[r.id][r.frame] = r
    pred_tracks = defaultdict(dict)
    for r in pred.records:
        pred_tracks[r.id][r.frame] = r
    g_ids, p_ids = sorted(gt_tracks), sorted(pred_tracks)
    total_gt, total_pred = len(gt.records), len(pred.records)
    if not g_ids or not p_ids:
        return 0, total_pred, total_gt
    overlap = np.zeros((len(g_ids), len(p_ids)))
    for gi, g_id in enumerate(g_ids):
        g_frames = gt_tracks[g_id]
        for pi, p_id in enumerate(p_ids):
            p_frames = pred_tracks[p_id]
            common = set(g_frames) & set(p_frames)
            overlap[gi, pi] = sum(
                1 for t in common if iou(g_frames[t].box, p_frames[t].box) >= iou_thr
            )
    lens_g = np.array([len(gt_tracks[g]) for g in g_ids], dtype=float)
    lens_p = np.array([len(pred_tracks[p]) for p in p_ids], dtype=float)
    cost = lens_g[:, None] + lens_p[None, :] - 2.0 * overlap
    rows, cols = hungarian(cost)
    idtp = int(overlap[rows, cols].sum())
    return idtp, total_pred - idtp, total_gt - idtp


def accumulate_id_counts(gt: TrackSet, pred: TrackSet, mode: str = CLASS_AGNOSTIC, iou_thr: float = IOU_THRESHOLD, counts: EvalCounts = None) -> EvalCounts:
    """Fill the global identity counters (IDTP/IDFP/IDFN) of an EvalCounts."""
    counts = EvalCounts() if counts is None else counts
    if mode == CLASS_AGNOSTIC:
        idtp, idfp, idfn = _id_counts(gt, pred, iou_thr)
        counts.pooled.idtp += idtp
        counts.pooled.idfp += idfp
        counts.pooled.idfn += idfn
    else:
        labels = sorted({r.label for r in gt.records} | {r.label for r in pred.records})
        for label in labels:
            sub_gt = TrackSet([r for r in gt.records if r.label == label], is_gt=True)
            sub_pred = TrackSet([r for r in pred.records if r.label == label])
            tp, fp, fn = _id_counts(sub_gt, sub_pred, iou_thr)
            per = counts.for_class(label)
            per.idtp, per.idfp, per.idfn = per.idtp + tp, per.idfp + fp, per.idfn + fn
            counts.pooled.idtp += tp
            counts.pooled.idfp += fp
            counts.pooled.idfn += fn
    return counts


def idf1_from_counts(counts: EvalCounts) -> float:
    c = counts.pooled
    denominator = 2 * c.idtp + c.idfp + c.idfn
    if denominator == 0:
        raise UndefinedMetricError("IDF1 undefined: no ground truth and no predictions")
    return 2 * c.idtp / denominator


def ca_idf1(gt: TrackSet, pred: TrackSet, mode: str = CLASS_AGNOSTIC, iou_thr: float = IOU_THRESHOLD) -> float:
    """Identity F-score from the optimal global trajectory matching."""
    return idf1_from_counts(accumulate_id_counts(gt, pred, mode, iou_thr))


def map50(gt: TrackSet, pred: TrackSet, iou_thr: float = IOU_THRESHOLD) -> float:
    """Class-agnostic average precision at the 0.5 overlap gate.

    Predictions are consumed in descending confidence; each may claim the
    best still-unclaimed ground-truth box of its frame.  The area under the
    precision-recall curve uses all-point interpolation.
    """
    total_gt = len(gt.records)
    if total_gt == 0:
        raise UndefinedMetricError("AP undefined without ground truth")
    order = sorted(pred.records, key=lambda r: (-r.conf, r.frame, r.id))
    claimed = set()
    tp_flags = []
    for p in order:
        best, best_iou = None, iou_thr
        for g in gt.by_frame.get(p.frame, []):
            if (p.frame, g.id) in claimed:
                continue
            v = iou(g.box, p.box)
            if v >= best_iou:
                best, best_iou = g, v
        if best is not None:
            claimed.add((p.frame, best.id))
            tp_flags.append(1.0)
        else:
            tp_flags.append(0.0)
    if not tp_flags:
        return 0.0
    tp = np.cumsum(tp_flags)
    fp = np.cumsum(1.0 - np.array(tp_flags))
    recall = tp / total_gt
    precision = tp / (tp + fp)
    ap = 0.0
    prev_r = 0.0
    for i in range(len(recall)):
        if recall[i] > prev_r:
            ap += (recall[i] - prev_r) * precision[i:].max()
            prev_r = recall[i]
    return float(ap)


def mostly_tracked(gt: TrackSet, matches: dict, coverage: float = MT_COVERAGE) -> int:
    """Ground-truth trajectories matched in at least 80% of their frames."""
    lifespan = defaultdict(int)
    covered = defaultdict(int)
    for r in gt.records:
        lifespan[r.id] += 1
    for t, pairs in matches.items():
        for g_id, _ in pairs:
            covered[g_id] += 1
    return sum(1 for g_id, n in lifespan.items() if covered[g_id] / n >= coverage)


@dataclass(frozen=True)
class MetricReport:
    ca_mota: float
    ca_idf1: float
    mota: float
    idf1: float
    map50: float
    mostly_tracked: int
    id_switches: int
    gt_tracks: int

    _FIELDS = (
        ("CA-MOTA", "ca_mota", "{:.4f}"),
        ("CA-IDF1", "ca_idf1", "{:.4f}"),
        ("MOTA", "mota", "{:.4f}"),
        ("IDF1", "idf1", "{:.4f}"),
        ("mAP50", "map50", "{:.4f}"),
        ("MT", "mostly_tracked", "{:d}"),
        ("IDs", "id_switches", "{:d}"),
        ("GT tracks", "gt_tracks", "{:d}"),
    )

    def as_text(self) -> str:
        width = max(len(name) for name, _, _ in self._FIELDS)
        lines = [
            f"{name:<{width}}  {fmt.format(getattr(self, attr))}"
            for name, attr, fmt in self._FIELDS
        ]
        return "\n".join(lines)

    def as_csv(self) -> str:
        header = ",".join(name for name, _, _ in self._FIELDS)
        row = ",".join(fmt.format(getattr(self, attr)) for _, attr, fmt in self._FIELDS)
        return header + "\n" + row + "\n"


def summary(gt: TrackSet, pred: TrackSet) -> MetricReport:
    """Consolidated report: agnostic and aware association in one pass each."""
    matches, agnostic = match_frames(gt, pred, mode=CLASS_AGNOSTIC)
    _, aware = match_frames(gt, pred, mode=CLASS_AWARE)
    accumulate_id_counts(gt, pred, CLASS_AGNOSTIC, counts=agnostic)
    accumulate_id_counts(gt, pred, CLASS_AWARE, counts=aware)
    try:
        ap = map50(gt, pred)
    except UndefinedMetricError:
        ap = 0.0
    return MetricReport(
        ca_mota=ca_mota(agnostic),
        ca_idf1=idf1_from_counts(agnostic),
        mota=mota_from_counts(aware),
        idf1=idf1_from_counts(aware),
        map50=ap,
        mostly_tracked=mostly_tracked(gt, matches),
        id_switches=agnostic.pooled.ids,
        gt_tracks=len(gt.track_ids()),
    )
