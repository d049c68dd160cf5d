"""Per-gesture representative images built by frame selection and averaging.

A template is the mean of the most mutually consistent frames recorded
while the gesture was held. Templates persist as PGM files next to a
JSON manifest so they can be inspected with any image viewer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .frame import Frame, FrameError, load_pgm, save_pgm
from .gestures import ALL_GESTURES, GestureLabel

MANIFEST_NAME = "manifest.json"


class TemplateStoreError(ValueError):
    """Incomplete or inconsistent template set."""


@dataclass(frozen=True)
class GestureTemplate:
    label: GestureLabel
    image: Frame
    n_frames: int
    source_ids: tuple[int, ...]

    def __post_init__(self):
        if self.n_frames < 1:
            raise TemplateStoreError("template must average at least one frame")
        if self.n_frames != len(self.source_ids):
            raise TemplateStoreError(
                f"n_frames={self.n_frames} but {len(self.source_ids)} source ids")


class TemplateStore:
    """Exactly one template per gesture, all with identical dimensions."""

    def __init__(self, templates):
        templates = list(templates)
        by_label = {t.label: t for t in templates}
        missing = [l.wire_name for l in ALL_GESTURES if l not in by_label]
        if missing:
            raise TemplateStoreError(f"missing templates: {', '.join(missing)}")
        if len(by_label) != len(templates):
            raise TemplateStoreError("duplicate template label")
        dims = {t.image.dims for t in by_label.values()}
        if len(dims) != 1:
            raise TemplateStoreError(f"template dims differ: {sorted(dims)}")
        self._by_label = by_label
        self.dims = dims.pop()

    def __getitem__(self, label: GestureLabel) -> GestureTemplate:
        return self._by_label[label]

    def __iter__(self):
        return (self._by_label[l] for l in ALL_GESTURES)


def mean_image(frames) -> Frame:
    """Per-pixel arithmetic mean. Timestamp and seq come from the last frame."""
    frames = list(frames)
    if not frames:
        raise FrameError("mean_image requires at least one frame")
    dims = frames[0].dims
    for f in frames:
        if f.dims != dims:
            raise FrameError(f"frame dims differ: {f.dims} vs {dims}")
    acc = np.zeros_like(frames[0].pixels)
    for f in frames:
        acc += f.pixels
    acc /= len(frames)
    np.clip(acc, 0.0, 1.0, out=acc)
    last = frames[-1]
    return Frame(acc, timestamp_us=last.timestamp_us, seq=last.seq)


def select_stable_frames(frames, n: int):
    """Pick the n frames most consistent with the rest of the recording.

    Stability score for a frame is its mean Pearson correlation against
    every other candidate; constant frames are excluded outright. Ties
    break toward lower seq and the selection is returned in seq order.
    """
    frames = list(frames)
    if n < 1:
        raise ValueError("n must be >= 1")
    if not frames:
        raise FrameError("no frames to select from")
    dims = frames[0].dims
    for f in frames:
        if f.dims != dims:
            raise FrameError(f"frame dims differ: {f.dims} vs {dims}")

    flat = np.stack([f.pixels.ravel() for f in frames])
    centered = flat - flat.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(centered * centered, axis=1))
    usable = norms > 0.0
    if not usable.any():
        raise FrameError("all candidate frames have zero pixel variance")
    kept = [f for f, ok in zip(frames, usable) if ok]
    if len(kept) <= n:
        return kept

    unit = centered[usable] / norms[usable, None]
    gram = unit @ unit.T
    m = len(kept)
    scores = (gram.sum(axis=1) - 1.0) / (m - 1)
    order = sorted(range(m), key=lambda i: (-scores[i], kept[i].seq))
    chosen = sorted(order[:n], key=lambda i: kept[i].seq)
    return [kept[i] for i in chosen]


def build_template(frames, label: GestureLabel, n: int) -> GestureTemplate:
    """Average the n most stable frames into the gesture's representative image."""
    selected = select_stable_frames(frames, n)
    image = mean_image(selected)
    return GestureTemplate(
        label=label,
        image=image,
        n_frames=len(selected),
        source_ids=tuple(f.seq for f in selected),
    )


def save_store(store: TemplateStore, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"dims": list(store.dims), "templates": {}}
    for template in store:
        filename = f"{template.label.wire_name}.pgm"
        save_pgm(template.image, directory / filename)
        manifest["templates"][template.label.wire_name] = {
            "file": filename,
            "n_frames": template.n_frames,
            "source_ids": list(template.source_ids),
        }
    (directory / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_store(directory) -> TemplateStore:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise TemplateStoreError(f"missing {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    try:
        dims = tuple(manifest["dims"])
        entries = manifest["templates"]
    except (KeyError, TypeError) as exc:
        raise TemplateStoreError(f"malformed manifest: {exc}") from exc

    templates = []
    for label in ALL_GESTURES:
        entry = entries.get(label.wire_name)
        if entry is None:
            raise TemplateStoreError(f"manifest missing template {label.wire_name!r}")
        image = load_pgm(directory / entry["file"])
        if image.dims != dims:
            raise TemplateStoreError(
                f"{entry['file']}: dims {image.dims} disagree with manifest {dims}")
        templates.append(GestureTemplate(
            label=label,
            image=image,
            n_frames=int(entry["n_frames"]),
            source_ids=tuple(int(s) for s in entry["source_ids"]),
        ))
    return TemplateStore(templates)
