"""Deterministic synthetic tracking world with exact ground truth.

Objects are attributed (category, color, action) with per-category box
sizes; they bounce around the scene on periodically re-drawn linear
velocities with bounded jitter, and their box centers snap to grid-cell
centers so that a cell token determines its object's box exactly.  The
world provides everything the rest of the package needs to be tested
without real video: scene frames for the encoder, ground-truth track
records for the metrics, captions for prompt construction, annotation
export, and a perfect decoder oracle for isolating tracker-lifecycle
behaviour from learning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import catalog
from .errors import ConfigError
from .model import Candidate
from .tokens import PromptKind, PromptText

DEFAULT_IMAGE_SIZE = (960, 720)


@dataclass(frozen=True)
class SceneObject:
    """Snapshot of one object in one frame."""

    track_id: int
    category: str
    color: str
    action: str
    box: tuple  # (cx, cy, w, h) normalized


@dataclass(frozen=True)
class SceneFrame:
    index: int
    objects: tuple


@dataclass
class WorldObject:
    track_id: int
    category: str
    color: str
    action: str
    spawn: int
    despawn: int  # exclusive
    boxes: list  # per-frame (cx, cy, w, h) or None when absent
    occlusions: tuple = ()  # (start, end) half-open windows

    def __post_init__(self):
        if self.spawn >= self.despawn:
            raise ConfigError(f"track {self.track_id}: spawn {self.spawn} must precede despawn {self.despawn}")
        for box in self.boxes:
            if box is None:
                continue
            cx, cy, w, h = box
            if not (0.0 <= cx - w / 2 and cx + w / 2 <= 1.0 and 0.0 <= cy - h / 2 and cy + h / 2 <= 1.0):
                raise ConfigError(f"track {self.track_id}: box {box} leaves the unit scene")

    def visible(self, t: int) -> bool:
        if not (self.spawn <= t < self.despawn) or self.boxes[t] is None:
            return False
        return not any(a <= t < b for a, b in self.occlusions)

    @property
    def captions(self) -> tuple:
        return (f"a {self.color} {self.category}", f"{self.category} {self.action}")


@dataclass
class Scenario:
    frames: int
    grid: tuple
    objects: list
    schedule: tuple  # ((frame, PromptText), ...)
    seed: int = 0

    def frame(self, t: int) -> SceneFrame:
        if not 0 <= t < self.frames:
            raise IndexError(f"frame {t} outside 0..{self.frames - 1}")
        present = tuple(
            SceneObject(o.track_id, o.category, o.color, o.action, o.boxes[t])
            for o in self.objects
            if o.visible(t)
        )
        return SceneFrame(index=t, objects=present)

    def iter_frames(self):
        return (self.frame(t) for t in range(self.frames))

    def categories_present(self) -> tuple:
        return tuple(dict.fromkeys(o.category for o in self.objects))


# Color and action are tied to the category so that different seeds of one
# world config produce objects with identical appearance vectors; seeds vary
# the trajectories and speeds, which is what generalization is about here.
DEFAULT_COLOR_OF = {
    "person": "red",
    "car": "blue",
    "dog": "yellow",
    "ball": "green",
    "bus": "white",
    "bicycle": "black",
}
DEFAULT_ACTION_OF = {
    "person": "running",
    "car": "moving",
    "dog": "running",
    "ball": "rolling",
    "bus": "moving",
    "bicycle": "moving",
}


@dataclass(frozen=True)
class WorldConfig:
    frames: int = 320
    grid: tuple = (10, 10)
    n_objects: int = 4
    speed_cells: tuple = (0.3, 0.9)  # horizontal cells per frame, magnitude range
    drift_cells: tuple = (0.2, 0.5)  # vertical cells per frame; (0, 0) for lane motion
    noise_cells: float = 0.15  # per-frame position jitter, in cells
    redraw_every: int = 24  # frames between fresh velocity draws; 0 disables
    categories: tuple = ("person", "car", "dog", "ball")

    def validate(self) -> None:
        gw, gh = self.grid
        if self.n_objects > len(self.categories):
            raise ConfigError("need at least one category per object (distinct features)")
        if self.n_objects > gh:
            raise ConfigError("more objects than grid lanes")
        if not (0 < self.speed_cells[0] <= self.speed_cells[1] <= 1.0):
            raise ConfigError("speeds must lie in (0, 1] cells per frame")
        if not (0 <= self.drift_cells[0] <= self.drift_cells[1] <= 1.0):
            raise ConfigError("drift must lie in [0, 1] cells per frame")


def _snap(x: float, cells: int, lo: int, hi: int) -> float:
    col = min(max(int(x * cells), lo), hi)
    return (col + 0.5) / cells


def _bounce(x: float, v: float, lo: float, hi: float) -> tuple:
    x += v
    if x < lo or x > hi:
        v = -v
        x = min(max(x, lo), hi)
    return x, v


class _Mover:
    """Continuous state of one simulated object."""

    def __init__(self, rng, cfg: WorldConfig, size: tuple):
        gw, gh = cfg.grid
        self.w, self.h = size
        self.col_lo = int(np.ceil(gw * self.w / 2 - 0.5))
        self.col_hi = gw - 1 - self.col_lo
        self.row_lo = int(np.ceil(gh * self.h / 2 - 0.5))
        self.row_hi = gh - 1 - self.row_lo
        self.x = rng.uniform((self.col_lo + 0.5) / gw, (self.col_hi + 0.5) / gw)
        self.y = rng.uniform((self.row_lo + 0.5) / gh, (self.row_hi + 0.5) / gh)
        self.draw_velocity(rng, cfg)

    def draw_velocity(self, rng, cfg: WorldConfig) -> None:
        gw, gh = cfg.grid
        self.vx = rng.uniform(*cfg.speed_cells) / gw * (1 if rng.random() < 0.5 else -1)
        self.vy = rng.uniform(*cfg.drift_cells) / gh * (1 if rng.random() < 0.5 else -1)

    def box(self, grid) -> tuple:
        gw, gh = grid
        return (
            _snap(self.x, gw, self.col_lo, self.col_hi),
            _snap(self.y, gh, self.row_lo, self.row_hi),
            self.w,
            self.h,
        )

    def proposed(self, rng, cfg: WorldConfig) -> tuple:
        """Next continuous state: one velocity step plus bounded position jitter."""
        gw, gh = cfg.grid
        jx = jy = 0.0
        if cfg.noise_cells > 0:
            jx = float(np.clip(rng.normal() * cfg.noise_cells, -2 * cfg.noise_cells, 2 * cfg.noise_cells)) / gw
            jy = float(np.clip(rng.normal() * cfg.noise_cells, -2 * cfg.noise_cells, 2 * cfg.noise_cells)) / gh
        x, vx = _bounce(self.x, self.vx, self.col_lo / gw, (self.col_hi + 1) / gw)
        y, vy = _bounce(self.y, self.vy, self.row_lo / gh, (self.row_hi + 1) / gh)
        x = min(max(x + jx, self.col_lo / gw), (self.col_hi + 1) / gw)
        y = min(max(y + jy, self.row_lo / gh), (self.row_hi + 1) / gh)
        return x, y, vx, vy


def generate(seed: int, cfg: WorldConfig = WorldConfig()) -> Scenario:
    """Seeded world: bounced linear motion, distinct attributes per object.

    Box centers snap to grid-cell centers and no two objects ever share a
    cell: objects move jointly, and one that would step into an occupied
    cell holds its position for that frame and reverses direction instead.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    cats = [str(c) for c in rng.permutation(np.array(cfg.categories))[: cfg.n_objects]]
    colors = [DEFAULT_COLOR_OF[c] for c in cats]
    actions = [DEFAULT_ACTION_OF[c] for c in cats]
    sizes = [catalog.CATEGORY_BY_NAME[c].size for c in cats]

    movers = None
    for attempt in range(256):
        draw = np.random.default_rng([seed, attempt])
        candidate = [_Mover(draw, cfg, size) for size in sizes]
        cells = [grid_cell(m.box(cfg.grid), cfg.grid) for m in candidate]
        if len(set(cells)) == len(cells):
            movers, motion_rng = candidate, draw
            break
    if movers is None:
        raise ConfigError(f"could not place {cfg.n_objects} objects in distinct cells")

    def cell_at(m, x, y):
        gw, gh = cfg.grid
        col = min(max(int(x * gw), m.col_lo), m.col_hi)
        row = min(max(int(y * gh), m.row_lo), m.row_hi)
        return row * gw + col

    trajectories = [[] for _ in movers]
    for t in range(cfg.frames):
        for i, m in enumerate(movers):
            trajectories[i].append(m.box(cfg.grid))
        if cfg.redraw_every and t > 0 and t % cfg.redraw_every == 0:
            for m in movers:
                m.draw_velocity(motion_rng, cfg)
        for i, m in enumerate(movers):
            here = cell_at(m, m.x, m.y)
            x, y, vx, vy = m.proposed(motion_rng, cfg)
            target = cell_at(m, x, y)
            others = {cell_at(o, o.x, o.y) for j, o in enumerate(movers) if j != i}
            if target != here and target in others:
                m.vx, m.vy = -m.vx, -m.vy  # deflect; stay put this frame
            else:
                m.x, m.y, m.vx, m.vy = x, y, vx, vy

    objects = [
        WorldObject(
            track_id=i + 1,
            category=cats[i],
            color=colors[i % len(colors)],
            action=actions[i],
            spawn=0,
            despawn=cfg.frames,
            boxes=trajectories[i],
        )
        for i in range(len(cats))
    ]
    prompt = PromptText(PromptKind.NM, tuple(dict.fromkeys(cats)))
    return Scenario(frames=cfg.frames, grid=cfg.grid, objects=objects, schedule=((0, prompt),), seed=seed)


def prompt_matches(prompt: PromptText, obj) -> bool:
    """Conjunction over mentioned attribute types; unmentioned ones are free.

    Words are bucketed into categories (names or synonyms), colors, and
    actions; the object must satisfy every bucket that is non-empty.  A
    prompt containing no recognizable attribute word matches nothing.
    """
    cats, cols, acts = set(), set(), set()
    for w in prompt.words():
        resolved = catalog.resolve_category(w)
        if resolved:
            cats.add(resolved)
        elif w in catalog.COLORS:
            cols.add(w)
        elif w in catalog.ACTIONS:
            acts.add(w)
    if not (cats or cols or acts):
        return False
    return (
        (not cats or obj.category in cats)
        and (not cols or obj.color in cols)
        and (not acts or obj.action in acts)
    )


def grid_cell(box, grid) -> int:
    gw, gh = grid
    col = min(int(box[0] * gw), gw - 1)
    row = min(int(box[1] * gh), gh - 1)
    return row * gw + col


def oracle_decode(scenario: Scenario, frame_index: int, prompt: PromptText) -> list:
    """Perfect decoder: ground-truth boxes of prompt-matching objects, conf 1."""
    frame = scenario.frame(frame_index)
    return [
        Candidate(box=o.box, conf=1.0, token_index=grid_cell(o.box, scenario.grid))
        for o in frame.objects
        if prompt_matches(prompt, o)
    ]


class OracleDecoder:
    """Decode-provider that answers from ground truth.

    Image tokens still come from a real encoder so the matching cascade sees
    genuine features; only the box decoder is replaced by the oracle.
    """

    def __init__(self, scenario: Scenario, encoder, vocab):
        self.scenario = scenario
        self.encoder = encoder
        self.vocab = vocab

    def image_tokens(self, frame):
        return self.encoder.encode(frame)

    def prompt_tokens(self, prompt: PromptText):
        from .tokens import embed_prompt

        return embed_prompt(prompt, self.vocab)

    def ground(self, frame, img, prm, prompt, gamma):
        return oracle_decode(self.scenario, frame.index, prompt)

    def track(self, frame, img, trk, prm, prompt, gamma):
        return oracle_decode(self.scenario, frame.index, prompt)


def gt_records(scenario: Scenario, schedule=None) -> list:
    """Ground-truth track records, filtered by the active prompt per frame.

    With no schedule the scenario's own schedule applies; objects that do
    not match the active prompt are not part of the ground truth for that
    frame (they are not targets).
    """
    from .metrics import TrackRecord

    entries = list(schedule if schedule is not None else scenario.schedule)
    out = []
    current = None
    for t in range(scenario.frames):
        for f, p in entries:
            if f == t:
                current = p
        for o in scenario.frame(t).objects:
            if current is not None and prompt_matches(current, o):
                out.append(TrackRecord(frame=t, id=o.track_id, box=o.box, conf=1.0, label=o.category))
    return out


def export_annotations(scenario: Scenario, video_id: int = 1, video_name: str = None, image_size=DEFAULT_IMAGE_SIZE):
    """Export a scenario as an annotation document.

    Categories come from the attribute catalog with their synonyms and
    definitions; every visible (object, frame) pair becomes one annotation
    with appearance and action captions; images carry per-frame retrieval
    prompts.  When the scenario's schedule has more than one entry the
    scheduled prompt text is written (carrying forward between changes),
    otherwise the two-step retrieval prompt is generated from the
    annotations themselves.
    """
    from .data_io import AnnotationSet, generate_retrieval_prompt, parse_annotations

    if video_name is None:
        video_name = f"world-{scenario.seed:04d}"
    width, height = image_size
    cat_ids = {c.name: i + 1 for i, c in enumerate(catalog.CATEGORIES)}
    seen_images = {}
    seen_instances = {}
    annotations = []
    images = []
    ann_id = 1
    for t in range(scenario.frames):
        image_id = t + 1
        images.append(
            {
                "id": image_id,
                "frame_index": t,
                "video_id": video_id,
                "file_name": f"{video_name}/{t:06d}.jpg",
                "width": width,
                "height": height,
                "video": video_name,
            }
        )
        for o in scenario.objects:
            if not o.visible(t):
                continue
            cx, cy, w, h = o.boxes[t]
            bbox = [(cx - w / 2) * width, (cy - h / 2) * height, w * width, h * height]
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": image_id,
                    "category_id": cat_ids[o.category],
                    "scale_category": "moving-object",
                    "track_id": o.track_id,
                    "video_id": video_id,
                    "segmentation": [],
                    "area": bbox[2] * bbox[3],
                    "bbox": bbox,
                    "iscrowd": 0,
                    "captions": list(o.captions),
                }
            )
            ann_id += 1
            seen_images.setdefault(o.category, set()).add(image_id)
            seen_instances.setdefault(o.category, set()).add(o.track_id)
    categories = [
        {
            "frequency": "c",
            "id": cat_ids[c.name],
            "synset": f"{c.name}.n.01",
            "image_count": len(seen_images.get(c.name, ())),
            "instance_count": len(seen_instances.get(c.name, ())),
            "name": c.name,
            "synonyms": list(c.synonyms),
            "def": c.definition,
        }
        for c in catalog.CATEGORIES
    ]
    ann_set = AnnotationSet(categories, annotations, images)
    if len(scenario.schedule) > 1:
        current = None
        by_frame = dict(scenario.schedule)
        for img in images:
            if img["frame_index"] in by_frame:
                current = by_frame[img["frame_index"]].text
            if current is not None:
                img["prompt"] = current
    else:
        retrieval, _ = generate_retrieval_prompt(ann_set, video_id)
        for img in images:
            img["prompt"] = retrieval.text
    # Re-validate so exports and external documents satisfy the same contract.
    return parse_annotations({"categories": categories, "annotations": annotations, "images": images})


def save_scenario(scenario: Scenario, path) -> None:
    doc = {
        "format": "promptrack-scenario",
        "version": 1,
        "frames": scenario.frames,
        "grid": list(scenario.grid),
        "seed": scenario.seed,
        "schedule": [[f, p.kind.value, list(p.parts)] for f, p in scenario.schedule],
        "objects": [
            {
                "track_id": o.track_id,
                "category": o.category,
                "color": o.color,
                "action": o.action,
                "spawn": o.spawn,
                "despawn": o.despawn,
                "occlusions": [list(w) for w in o.occlusions],
                "boxes": [list(b) if b is not None else None for b in o.boxes],
            }
            for o in scenario.objects
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "promptrack-scenario" or doc.get("version") != 1:
        raise ConfigError(f"{path}: not a version-1 scenario file")
    objects = [
        WorldObject(
            track_id=o["track_id"],
            category=o["category"],
            color=o["color"],
            action=o["action"],
            spawn=o["spawn"],
            despawn=o["despawn"],
            occlusions=tuple(tuple(w) for w in o["occlusions"]),
            boxes=[tuple(b) if b is not None else None for b in o["boxes"]],
        )
        for o in doc["objects"]
    ]
    schedule = tuple(
        (f, PromptText(PromptKind(kind), tuple(parts))) for f, kind, parts in doc["schedule"]
    )
    return Scenario(
        frames=doc["frames"],
        grid=tuple(doc["grid"]),
        objects=objects,
        schedule=schedule,
        seed=doc["seed"],
    )
