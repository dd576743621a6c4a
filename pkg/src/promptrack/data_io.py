"""Annotation documents and track-record files.

The annotation format is COCO-shaped with three arrays: ``categories``
(name, synonyms, definition and bookkeeping counts), ``annotations`` (one
record per object instance per image, including a ``captions`` list whose
first entry describes appearance and second describes action), and
``images`` (per-frame entries that may carry a ``prompt`` string for the
retrieval scenario).  Parsing validates required keys and referential
integrity but preserves unknown keys so documents round-trip.

Prompt construction joins names, synonyms, definitions or captions with
duplicates removed (first occurrence wins); the retrieval scenario reads
the per-image prompt field, carrying the last seen value forward.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import numpy as np

from .errors import IntegrityError, SchemaError, ScenarioUnavailableError
from .metrics import TrackRecord
from .tokens import PromptKind, PromptText

_CATEGORY_KEYS = {
    "frequency": str,
    "id": int,
    "synset": str,
    "image_count": int,
    "instance_count": int,
    "name": str,
    "synonyms": list,
    "def": str,
}
_ANNOTATION_KEYS = {
    "id": int,
    "image_id": int,
    "category_id": int,
    "scale_category": str,
    "track_id": int,
    "video_id": int,
    "segmentation": list,
    "area": (int, float),
    "bbox": list,
    "iscrowd": int,
    "captions": list,
}
_IMAGE_KEYS = {
    "id": int,
    "frame_index": int,
    "video_id": int,
    "file_name": str,
    "width": int,
    "height": int,
    "video": str,
}


@dataclass
class AnnotationSet:
    """Validated annotation document; entries keep their original dicts."""

    categories: list
    annotations: list
    images: list

    def category_by_id(self, cid: int) -> dict:
        return self._cat_index[cid]

    def videos(self) -> list:
        return sorted({img["video_id"] for img in self.images})

    def images_for_video(self, video_id: int) -> list:
        return sorted(
            (img for img in self.images if img["video_id"] == video_id),
            key=lambda img: img["frame_index"],
        )

    def annotations_for_video(self, video_id: int) -> list:
        frame_of = {img["id"]: img["frame_index"] for img in self.images}
        return sorted(
            (a for a in self.annotations if a["video_id"] == video_id),
            key=lambda a: (frame_of[a["image_id"]], a["id"]),
        )

    def __post_init__(self):
        self._cat_index = {c["id"]: c for c in self.categories}


def _check_keys(entry: dict, required: dict, path: str) -> None:
    for key, types in required.items():
        if key not in entry:
            raise SchemaError(f"{path}: missing required key {key!r}")
        if types is int and isinstance(entry[key], bool):
            raise SchemaError(f"{path}.{key}: expected an integer, got a bool")
        if not isinstance(entry[key], types):
            raise SchemaError(f"{path}.{key}: expected {types}, got {type(entry[key]).__name__}")


def parse_annotations(document) -> AnnotationSet:
    """Parse and validate a document (JSON text or an already-loaded dict)."""
    if isinstance(document, (str, bytes)):
        doc = json.loads(document)
    else:
        doc = copy.deepcopy(document)
    for section in ("categories", "annotations", "images"):
        if section not in doc or not isinstance(doc[section], list):
            raise SchemaError(f"document: missing array {section!r}")
    for i, c in enumerate(doc["categories"]):
        _check_keys(c, _CATEGORY_KEYS, f"categories[{i}]")
        if not all(isinstance(s, str) for s in c["synonyms"]):
            raise SchemaError(f"categories[{i}].synonyms: entries must be strings")
    for i, img in enumerate(doc["images"]):
        _check_keys(img, _IMAGE_KEYS, f"images[{i}]")
        if "prompt" in img and not isinstance(img["prompt"], str):
            raise SchemaError(f"images[{i}].prompt: expected a string")
    cat_ids = {c["id"] for c in doc["categories"]}
    img_ids = {img["id"]: img for img in doc["images"]}
    for i, a in enumerate(doc["annotations"]):
        _check_keys(a, _ANNOTATION_KEYS, f"annotations[{i}]")
        if len(a["bbox"]) != 4:
            raise SchemaError(f"annotations[{i}].bbox: expected 4 values")
        if a["bbox"][2] < 0 or a["bbox"][3] < 0:
            raise SchemaError(f"annotations[{i}].bbox: width/height must be non-negative")
        if a["iscrowd"] not in (0, 1):
            raise SchemaError(f"annotations[{i}].iscrowd: must be 0 or 1")
        if not all(isinstance(s, str) for s in a["captions"]):
            raise SchemaError(f"annotations[{i}].captions: entries must be strings")
        if a["category_id"] not in cat_ids:
            raise IntegrityError(f"annotations[{i}]: dangling category_id {a['category_id']}")
        if a["image_id"] not in img_ids:
            raise IntegrityError(f"annotations[{i}]: dangling image_id {a['image_id']}")
        if a["video_id"] != img_ids[a["image_id"]]["video_id"]:
            raise IntegrityError(
                f"annotations[{i}]: video_id {a['video_id']} disagrees with its image"
            )
    return AnnotationSet(doc["categories"], doc["annotations"], doc["images"])


def write_annotations(ann: AnnotationSet) -> str:
    """Canonical JSON text (sorted keys) so equal sets serialize equally."""
    doc = {
        "categories": ann.categories,
        "annotations": ann.annotations,
        "images": ann.images,
    }
    return json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=1)


def _video_categories(ann: AnnotationSet, video_id: int) -> list:
    """Categories referenced by a video, in first-occurrence order."""
    seen = []
    for a in ann.annotations_for_video(video_id):
        if a["category_id"] not in seen:
            seen.append(a["category_id"])
    return [ann.category_by_id(cid) for cid in seen]


def _dedup(parts) -> tuple:
    return tuple(dict.fromkeys(parts))


def build_prompt(
    kind: PromptKind,
    ann: AnnotationSet,
    video_id: int,
    frame: int = None,
    seed: int = 0,
    synonyms_per_category: int = 1,
) -> PromptText:
    """Construct the request prompt for one scenario.

    Names, definitions and captions join in first-occurrence order with
    duplicates dropped.  The synonym scenario draws ``synonyms_per_category``
    seeded samples from each category's synonym list.  The retrieval
    scenario reads the per-image prompt at ``frame``, carrying the last
    non-empty value forward.
    """
    kind = PromptKind(kind)
    cats = _video_categories(ann, video_id)
    if kind == PromptKind.NM:
        return PromptText(kind, _dedup(c["name"] for c in cats))
    if kind == PromptKind.SYN:
        rng = np.random.default_rng(seed)
        words = []
        for c in cats:
            syns = list(c["synonyms"])
            if not syns:
                words.append(c["name"])
                continue
            k = min(synonyms_per_category, len(syns))
            words.extend(str(w) for w in rng.choice(syns, size=k, replace=False))
        return PromptText(kind, _dedup(words))
    if kind == PromptKind.DEF:
        return PromptText(kind, _dedup(c["def"] for c in cats))
    if kind == PromptKind.CAP:
        captions = []
        for a in ann.annotations_for_video(video_id):
            captions.extend(a["captions"])
        if not captions:
            raise ScenarioUnavailableError(f"video {video_id} has no captions")
        return PromptText(kind, _dedup(captions))
    if kind == PromptKind.RETR:
        if frame is None:
            raise ScenarioUnavailableError("retrieval prompts are frame-indexed; pass a frame")
        current = None
        for img in ann.images_for_video(video_id):
            if img["frame_index"] > frame:
                break
            if img.get("prompt"):
                current = img["prompt"]
        if current is None:
            raise ScenarioUnavailableError(
                f"video {video_id} has no prompt field at or before frame {frame}"
            )
        return PromptText(kind, (current,))
    raise ScenarioUnavailableError(f"unknown scenario {kind!r}")


def generate_retrieval_prompt(ann: AnnotationSet, video_id: int):
    """Two-step retrieval prompt: modal category, then its longest track.

    Step one picks the category with the most annotation records in the
    video; step two keeps the track of that category spanning the most
    frames.  Ties break toward the lowest id.  Returns the templated prompt
    and the selected ground-truth track ids.
    """
    anns = ann.annotations_for_video(video_id)
    if not anns:
        raise ScenarioUnavailableError(f"video {video_id} has no annotations")
    per_category = {}
    for a in anns:
        per_category[a["category_id"]] = per_category.get(a["category_id"], 0) + 1
    best_count = max(per_category.values())
    category_id = min(cid for cid, n in per_category.items() if n == best_count)
    category = ann.category_by_id(category_id)["name"]
    frame_of = {img["id"]: img["frame_index"] for img in ann.images}
    span = {}
    for a in anns:
        if a["category_id"] != category_id:
            continue
        span.setdefault(a["track_id"], set()).add(frame_of[a["image_id"]])
    best_span = max(len(frames) for frames in span.values())
    track_id = min(tid for tid, frames in span.items() if len(frames) == best_span)
    text = f"the {category} appearing longest in the scene"
    return PromptText(PromptKind.RETR, (text,)), (track_id,)


def tracks_from_annotations(ann: AnnotationSet, video_id: int) -> list:
    """Ground-truth track records from an annotation document.

    Boxes convert from pixel (x, y, width, height) to normalized
    (cx, cy, w, h) using each image's recorded dimensions.
    """
    images = {img["id"]: img for img in ann.images}
    records = []
    for a in ann.annotations_for_video(video_id):
        img = images[a["image_id"]]
        x, y, w, h = a["bbox"]
        width, height = img["width"], img["height"]
        records.append(
            TrackRecord(
                frame=img["frame_index"],
                id=a["track_id"],
                box=((x + w / 2) / width, (y + h / 2) / height, w / width, h / height),
                conf=1.0,
                label=ann.category_by_id(a["category_id"])["name"],
            )
        )
    return records


def write_tracks(records, path=None) -> str:
    """Track records as newline-delimited JSON, one record per line."""
    lines = [
        json.dumps(
            {
                "frame": r.frame,
                "id": r.id,
                "box": list(r.box),
                "conf": r.conf,
                "label": r.label,
            },
            ensure_ascii=False,
        )
        for r in records
    ]
    text = "\n".join(lines) + ("\n" if lines else "")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def read_tracks(source) -> list:
    """Inverse of :func:`write_tracks`; accepts text or a file path."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except (OSError, ValueError):
            text = source
    records = []
    for line in text.splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        records.append(
            TrackRecord(
                frame=raw["frame"],
                id=raw["id"],
                box=tuple(raw["box"]),
                conf=raw["conf"],
                label=raw.get("label", ""),
            )
        )
    return records
