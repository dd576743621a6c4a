"""Auto-regressive tracking pipeline: lifecycle, matching, prompt changes.

One :class:`TrackerSession` owns the mutable state of a single tracking run.
Per frame it either grounds the prompt from scratch (no tracklets at all) or
runs the factorized correlation forward against the previous tracklets,
then reconciles decoded candidates with the previous set through a two
stage cascade: appearance similarity first, box overlap second.  Unmatched
old tracklets go inactive and stay eligible for re-identification until
they age out.

Identities are assigned once, ascendingly, and never reused in a session.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .boxes import iou
from .errors import SequencingError, ShapeError
from .losses import hungarian
from .tokens import PromptText, extract_tracklets

IOU_GATE = 0.5  # second-stage overlap gate of the matching cascade


@dataclass
class Tracklet:
    """One tracked object: box, score, identity, pooled feature, lifecycle."""

    id: int
    box: tuple
    conf: float
    feature: np.ndarray
    last_seen: int
    state: str = "active"  # 'active' | 'inactive'
    assigned_token_indices: tuple = ()

    @property
    def is_active(self) -> bool:
        return self.state == "active"


@dataclass(frozen=True)
class TrackerParams:
    gamma: float = 0.7
    gamma_reassign: float = 0.75
    t_tlr: int = 30


@dataclass(frozen=True)
class PromptSchedule:
    """Frame-stamped prompts; the first entry must fire at frame 0."""

    entries: tuple

    def __post_init__(self):
        frames = [f for f, _ in self.entries]
        if not frames or frames[0] != 0:
            raise ValueError("schedule must start with an entry at frame 0")
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("schedule frames must be strictly increasing")

    def entry_at(self, frame: int):
        for f, prompt in self.entries:
            if f == frame:
                return prompt
        return None

    @classmethod
    def single(cls, prompt: PromptText) -> "PromptSchedule":
        return cls(entries=((0, prompt),))


@dataclass(frozen=True)
class TrackletRecord:
    id: int
    box: tuple
    conf: float


@dataclass(frozen=True)
class FrameResult:
    frame: int
    prompt: str
    tracklets: tuple


def candidates_to_tracklets(candidates, img, frame_index: int) -> list:
    """Provisional tracklets (no ids yet) for the matching cascade."""
    values = img.values
    return [
        Tracklet(
            id=-1,
            box=tuple(c.box),
            conf=c.conf,
            feature=values[c.token_index].copy(),
            last_seen=frame_index,
            assigned_token_indices=(c.token_index,),
        )
        for c in candidates
    ]


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    na = a / np.maximum(np.linalg.norm(a, axis=1, keepdims=True), 1e-12)
    nb = b / np.maximum(np.linalg.norm(b, axis=1, keepdims=True), 1e-12)
    return na @ nb.T


def cascade_matching(new: list, prev: list, gamma_reassign: float):
    """Two-stage assignment between fresh and previous tracklets.

    Stage 1 runs a minimum-cost assignment on cosine feature similarity,
    keeping pairs at or above ``gamma_reassign``.  Stage 2 repeats on the
    leftovers with box IoU gated at 0.5.  Returns matched (new, prev) index
    pairs plus both unmatched index lists.
    """
    if new and prev:
        widths = {t.feature.shape[0] for t in new} | {t.feature.shape[0] for t in prev}
        if len(widths) != 1:
            raise ShapeError(f"cascade_matching: mixed feature widths {sorted(widths)}")
    matched = []
    free_new = list(range(len(new)))
    free_prev = list(range(len(prev)))

    def run_stage(score_fn, gate):
        nonlocal free_new, free_prev
        if not free_new or not free_prev:
            return
        scores = score_fn([new[i] for i in free_new], [prev[j] for j in free_prev])
        cost = np.where(scores >= gate, 1.0 - scores, 1e6)
        rows, cols = hungarian(cost)
        taken_new, taken_prev = set(), set()
        for r, c in zip(rows, cols):
            if scores[r, c] >= gate:
                matched.append((free_new[r], free_prev[c]))
                taken_new.add(free_new[r])
                taken_prev.add(free_prev[c])
        free_new = [i for i in free_new if i not in taken_new]
        free_prev = [j for j in free_prev if j not in taken_prev]

    run_stage(
        lambda ns, ps: cosine_matrix(
            np.array([t.feature for t in ns]), np.array([t.feature for t in ps])
        ),
        gamma_reassign,
    )
    run_stage(
        lambda ns, ps: np.array([[iou(n.box, p.box) for p in ps] for n in ns]),
        IOU_GATE,
    )
    return matched, free_new, free_prev


def update(matched_new: list, matched_old: list, now: int) -> list:
    """Carry old identities onto the new detections; reactivate if needed."""
    if len(matched_new) != len(matched_old):
        raise ValueError(f"update: {len(matched_new)} new vs {len(matched_old)} old")
    out = []
    for fresh, old in zip(matched_new, matched_old):
        out.append(
            replace(
                old,
                box=fresh.box,
                conf=fresh.conf,
                feature=fresh.feature,
                assigned_token_indices=fresh.assigned_token_indices,
                state="active",
                last_seen=now,
            )
        )
    return out


def remove_deprecation(inactive: list, t_tlr: int, now: int) -> list:
    """Drop inactive tracklets unseen for more than ``t_tlr`` frames.

    The boundary is inclusive: ``now - last_seen == t_tlr`` is retained.
    """
    return [t for t in inactive if now - t.last_seen <= t_tlr]


class TrackerSession:
    """Mutable state of one prompt-driven tracking run."""

    def __init__(self, decoder, schedule: PromptSchedule, params: TrackerParams = TrackerParams()):
        self.decoder = decoder
        self.schedule = schedule
        self.params = params
        self.active: list = []
        self.inactive: list = []
        self.next_id = 1
        self.frame = 0
        self.current_prompt: PromptText = schedule.entries[0][1]
        self.prev_image = None

    def initialize(self, candidates, img) -> list:
        """Mint active tracklets from candidates, ids ascending."""
        fresh = []
        values = img.values
        for c in candidates:
            fresh.append(
                Tracklet(
                    id=self.next_id,
                    box=tuple(c.box),
                    conf=c.conf,
                    feature=values[c.token_index].copy(),
                    last_seen=self.frame,
                    assigned_token_indices=(c.token_index,),
                )
            )
            self.next_id += 1
        return fresh

    def step(self, frame) -> FrameResult:
        """Advance one frame; frames must arrive in order."""
        if frame.index != self.frame:
            raise SequencingError(f"expected frame {self.frame}, got {frame.index}")
        swapped = self.schedule.entry_at(frame.index)
        if swapped is not None:
            self.current_prompt = swapped
        prm = self.decoder.prompt_tokens(self.current_prompt)
        img = self.decoder.image_tokens(frame)

        if not self.active and not self.inactive:
            candidates = self.decoder.ground(frame, img, prm, self.current_prompt, self.params.gamma)
            self.active = self.initialize(candidates, img)
        else:
            t_prev = self.active + self.inactive
            trk = extract_tracklets(t_prev, self.prev_image)
            candidates = self.decoder.track(frame, img, trk, prm, self.current_prompt, self.params.gamma)
            fresh = candidates_to_tracklets(candidates, img, frame.index)
            matched, unm_new, unm_old = cascade_matching(fresh, t_prev, self.params.gamma_reassign)
            self.active = update(
                [fresh[i] for i, _ in matched], [t_prev[j] for _, j in matched], frame.index
            ) + self.initialize([candidates[i] for i in unm_new], img)
            stale = [t_prev[j] for j in unm_old if not t_prev[j].is_active]
            dropped_now = [
                replace(t_prev[j], state="inactive", last_seen=frame.index)
                for j in unm_old
                if t_prev[j].is_active
            ]
            self.inactive = remove_deprecation(stale, self.params.t_tlr, frame.index) + dropped_now

        self.prev_image = img
        self.frame += 1
        return FrameResult(
            frame=frame.index,
            prompt=self.current_prompt.text,
            tracklets=tuple(
                TrackletRecord(t.id, t.box, t.conf) for t in sorted(self.active, key=lambda t: t.id)
            ),
        )


def run_session(decoder, frames, schedule: PromptSchedule, params: TrackerParams = TrackerParams()):
    """Drive a full session over an iterable of frames; returns FrameResults."""
    session = TrackerSession(decoder, schedule, params)
    return [session.step(frame) for frame in frames]
