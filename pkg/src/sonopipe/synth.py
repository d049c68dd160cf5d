"""Deterministic synthetic frame generator with gesture-dependent deformation.

The phantom is a stack of horizontal tissue-like bands with sinusoidal
edges, multiplied by exponentially distributed speckle. Each gesture
deforms the bands vertically (per-band shift and compression), mimicking
how distinct hand motions displace distinct muscle compartments; additive
Gaussian noise is the SNR knob.

Every output is a pure function of (spec, label, phase, draw index): all
randomness comes from tagged Philox streams (see rng.py), so datasets
regenerate bit-identically from their seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .frame import Frame, load_pgm, save_pgm
from .gestures import ALL_GESTURES, GestureLabel

MANIFEST_NAME = "manifest.json"

# Reference deformation patterns at a height of 128 px, resampled to the
# configured band count and scaled with frame height. POINT deliberately
# shadows POWER_GRIP (same sign pattern, smaller magnitude): they are the
# confusable pair, the one that breaks first as noise grows.
# Per-band (shift px, compression) at the 128-px reference height.
# PowerGrip and Point are deliberately close (gross flexor motion differing
# only in fine detail) and WristPronation barely leaves rest (wrist rotation
# moves the flexors little), so those two pairs are the first to blur as
# noise rises while everything stays cleanly separable at low noise.
_REF_SHIFTS = {
    GestureLabel.REST: (0.0, 0.0, 0.0, 0.0),
    GestureLabel.POWER_GRIP: (7.0, 5.0, -4.0, -3.0),
    GestureLabel.WRIST_PRONATION: (0.35, -0.28, 0.245, -0.21),
    GestureLabel.POINT: (6.34, 4.56, -3.67, -2.78),
}
_REF_COMPRESSIONS = {
    GestureLabel.REST: (1.0, 1.0, 1.0, 1.0),
    GestureLabel.POWER_GRIP: (1.10, 0.94, 1.06, 0.92),
    GestureLabel.WRIST_PRONATION: (1.0028, 0.9979, 1.0021, 0.9972),
    GestureLabel.POINT: (1.0912, 0.9444, 1.0556, 0.9244),
}
_REF_HEIGHT = 128.0


class PhantomError(ValueError):
    """Invalid phantom parameters."""


@dataclass(frozen=True)
class PhantomSpec:
    seed: int = 42
    dims: tuple[int, int] = (48, 48)
    n_bands: int = 4
    speckle_strength: float = 0.35
    noise_sigma: float = 0.0

    def __post_init__(self):
        w, h = self.dims
        if w < 32 or h < 32:
            raise PhantomError(f"dims must be at least 32x32, got {w}x{h}")
        if self.n_bands < 1:
            raise PhantomError("n_bands must be >= 1")
        if self.speckle_strength < 0 or self.noise_sigma < 0:
            raise PhantomError("speckle_strength and noise_sigma must be >= 0")
        object.__setattr__(self, "dims", (int(w), int(h)))


@dataclass(frozen=True)
class GestureDeformation:
    """Per-band vertical shift (pixels, downward positive) and compression."""

    shifts_px: tuple
    compressions: tuple

    def __post_init__(self):
        if len(self.shifts_px) != len(self.compressions):
            raise PhantomError("shift and compression tuples must align")
        object.__setattr__(self, "shifts_px", tuple(float(v) for v in self.shifts_px))
        object.__setattr__(self, "compressions",
                           tuple(float(v) for v in self.compressions))

    @property
    def is_identity(self) -> bool:
        return all(s == 0.0 for s in self.shifts_px) and \
            all(c == 1.0 for c in self.compressions)


def default_deformations(spec: PhantomSpec) -> dict:
    """The shipped deformation table, resampled to spec.n_bands and scaled to height."""
    h = spec.dims[1]
    scale = h / _REF_HEIGHT
    xs = np.linspace(0.0, 1.0, spec.n_bands) if spec.n_bands > 1 else np.array([0.0])
    ref_xs = np.linspace(0.0, 1.0, 4)
    out = {}
    for label in ALL_GESTURES:
        shifts = np.interp(xs, ref_xs, _REF_SHIFTS[label]) * scale
        comps = np.interp(xs, ref_xs, _REF_COMPRESSIONS[label])
        out[label] = GestureDeformation(tuple(shifts), tuple(comps))
    return out


def _band_edges(spec: PhantomSpec) -> np.ndarray:
    """Internal edge height per column, shape (n_bands-1, w)."""
    w, h = spec.dims
    if spec.n_bands < 2:
        return np.empty((0, w))
    s = rng.stream(spec.seed, "edges")
    n_edges = spec.n_bands - 1
    u = s.uniforms(3 * n_edges).reshape(3, n_edges)
    amplitude = (0.25 + 0.5 * u[0]) * (0.35 * h / spec.n_bands)
    cycles = np.floor(u[1] * 3.0) + 1.0
    phase = 2.0 * np.pi * u[2]
    x = np.arange(w)
    edges = np.empty((n_edges, w))
    for e in range(n_edges):
        base_y = (e + 1) * h / spec.n_bands
        edges[e] = base_y + amplitude[e] * np.sin(
            2.0 * np.pi * cycles[e] * x / w + phase[e])
    return edges


def make_phantom(spec: PhantomSpec) -> Frame:
    """Speckled band image in [0, 1]; identical specs give identical frames."""
    w, h = spec.dims
    brightness = 0.30 + 0.60 * rng.stream(spec.seed, "bands").uniforms(spec.n_bands)
    edges = _band_edges(spec)
    y = np.arange(h, dtype=np.float64)[:, None]
    softness = 2.0  # edge transition width in px
    base = np.full((h, w), brightness[0])
    for e in range(spec.n_bands - 1):
        step = 1.0 / (1.0 + np.exp(-(y - edges[e][None, :]) / softness))
        base += (brightness[e + 1] - brightness[e]) * step

    if spec.speckle_strength > 0.0:
        grains = rng.stream(spec.seed, "speckle").exponentials(w * h).reshape(h, w)
        np.clip(grains, 0.0, 4.0, out=grains)
        multiplier = np.maximum(0.0, 1.0 + spec.speckle_strength * (grains - 1.0))
        base = base * multiplier

    lo, hi = base.min(), base.max()
    if hi - lo < 1e-12:
        base = np.full((h, w), 0.5)
    else:
        base = (base - lo) / (hi - lo)
    return Frame(base)


def _displacement(spec: PhantomSpec, deformation: GestureDeformation) -> np.ndarray:
    """Vertical displacement per output row from per-band shift/compression."""
    h = spec.dims[1]
    y = np.arange(h, dtype=np.float64)
    band_h = h / spec.n_bands
    sigma = 0.55 * band_h
    disp = np.zeros(h)
    for b in range(spec.n_bands):
        center = (b + 0.5) * band_h
        weight = np.exp(-(((y - center) / sigma) ** 2))
        disp += weight * (deformation.shifts_px[b]
                          + (deformation.compressions[b] - 1.0) * (y - center))
    return disp


def render_gesture(base: Frame, label: GestureLabel, phase: float,
                   spec: PhantomSpec, draw: int = 0,
                   deformations: dict | None = None,
                   timestamp_us: int = 0, seq: int = 0) -> Frame:
    """Deform the phantom toward the gesture's configuration and add noise.

    phase 0 is the rest configuration, phase 1 the fully held gesture.
    The draw index seeds the per-frame noise, so (label, phase, draw)
    fully determines the output.
    """
    if not 0.0 <= phase <= 1.0:
        raise PhantomError(f"phase must lie in [0, 1], got {phase}")
    if base.dims != spec.dims:
        raise PhantomError(f"base dims {base.dims} do not match spec {spec.dims}")
    deformation = (deformations or default_deformations(spec))[GestureLabel(label)]

    if phase == 0.0 or deformation.is_identity:
        out = base.pixels.copy()
    else:
        w, h = spec.dims
        y_src = np.arange(h, dtype=np.float64) + phase * _displacement(spec, deformation)
        np.clip(y_src, 0.0, h - 1.0, out=y_src)
        y0 = np.minimum(np.floor(y_src).astype(np.intp), h - 2)
        frac = (y_src - y0)[:, None]
        out = base.pixels[y0, :] * (1.0 - frac) + base.pixels[y0 + 1, :] * frac

    if spec.noise_sigma > 0.0:
        w, h = spec.dims
        noise = rng.stream(spec.seed, "noise", int(label), int(draw)) \
            .gaussians(w * h).reshape(h, w)
        out = out + spec.noise_sigma * noise
    np.clip(out, 0.0, 1.0, out=out)
    return Frame(out, timestamp_us=timestamp_us, seq=seq)


def generate_dataset(spec: PhantomSpec, per_class: int, out_dir) -> dict:
    """Write per_class held-gesture frames per label plus a JSON manifest.

    Regenerating with the same spec reproduces every byte: frames are
    deterministic and quantized to 8-bit PGM, and the manifest is written
    with sorted keys.
    """
    if per_class < 1:
        raise PhantomError("per_class must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = make_phantom(spec)
    files = {}
    for label in ALL_GESTURES:
        for i in range(per_class):
            frame = render_gesture(base, label, 1.0, spec, draw=i)
            name = f"{label.wire_name}_{i:03d}.pgm"
            save_pgm(frame, out_dir / name)
            files[name] = label.wire_name
    manifest = {
        "seed": spec.seed,
        "dims": list(spec.dims),
        "n_bands": spec.n_bands,
        "speckle_strength": spec.speckle_strength,
        "noise_sigma": spec.noise_sigma,
        "per_class": per_class,
        "files": files,
    }
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def load_dataset(directory):
    """Read a generated dataset back as (Frame, GestureLabel) pairs.

    Frames are ordered by filename and get sequential seq numbers.
    """
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST_NAME).read_text(encoding="utf-8"))
    pairs = []
    for i, (name, label_name) in enumerate(sorted(manifest["files"].items())):
        frame = load_pgm(directory / name, seq=i)
        pairs.append((frame, GestureLabel.from_wire(label_name)))
    return pairs
