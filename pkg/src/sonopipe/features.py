"""Pixel-wise Pearson correlation features against gesture templates.

The feature vector for a live frame is its correlation coefficient with
each of the four gesture templates,

    r = sum((x - mean(x)) * (y - mean(y)))
        / sqrt(sum((x - mean(x))^2) * sum((y - mean(y))^2))

computed over corresponding pixels. Means and moments use a two-pass
evaluation in float64, which is numerically robust at 480x480 and keeps
the result within 1e-12 of a naive scalar implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frame import Frame, FrameError
from .gestures import ALL_GESTURES, GestureLabel
from .templates import TemplateStore


class ZeroVarianceError(FrameError):
    """A frame with constant pixels cannot be correlated; the caller must
    treat it as invalid input rather than as zero correlation."""


@dataclass(frozen=True)
class CorrelationVector:
    """Per-gesture correlation of one live frame, indexed by gesture ordinal."""

    r: np.ndarray
    frame_seq: int = 0
    timestamp_us: int = 0

    def __post_init__(self):
        r = np.ascontiguousarray(self.r, dtype=np.float64)
        if r.shape != (4,):
            raise ValueError(f"expected 4 correlation values, got shape {r.shape}")
        if not np.all(np.isfinite(r)) or r.min() < -1.0 or r.max() > 1.0:
            raise ValueError(f"correlation values must lie in [-1, 1], got {r}")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)


def pearson(a: Frame, b: Frame) -> float:
    """Pearson correlation of two frames' pixel values, in [-1, 1].

    Raises ZeroVarianceError if either frame is constant (blank frames
    must not silently score 0 against every template).
    """
    if a.pixels.shape != b.pixels.shape:
        raise FrameError(
            f"frame dims differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    da = a.pixels - a.pixels.mean()
    db = b.pixels - b.pixels.mean()
    ssa = float(np.sum(da * da))
    ssb = float(np.sum(db * db))
    if ssa == 0.0 or ssb == 0.0:
        raise ZeroVarianceError("zero pixel variance (constant frame)")
    r = float(np.sum(da * db)) / np.sqrt(ssa * ssb)
    return min(1.0, max(-1.0, r))


class TemplateMatcher:
    """Correlator with the per-template means and moments precomputed.

    TemplateStore is immutable, so centering and normalizing each template
    once lets a live frame be scored against all four with one pass over
    the frame plus four dot products. Required to stay inside the
    real-time budget; matches pearson() to float64 rounding.
    """

    def __init__(self, store: TemplateStore):
        self.store = store
        self.dims = store.dims
        self._centered = []
        for label in ALL_GESTURES:
            t = store[label].image.pixels
            dt = t - t.mean()
            norm = np.sqrt(float(np.sum(dt * dt)))
            if norm == 0.0:
                raise ZeroVarianceError(
                    f"template {label.wire_name} has zero pixel variance")
            self._centered.append(dt / norm)

    def correlate(self, f: Frame) -> CorrelationVector:
        if f.dims != self.dims:
            raise FrameError(
                f"frame dims {f.dims} do not match template dims {self.dims}")
        df = f.pixels - f.pixels.mean()
        ssf = float(np.sum(df * df))
        if ssf == 0.0:
            raise ZeroVarianceError("zero pixel variance (constant frame)")
        scale = 1.0 / np.sqrt(ssf)
        r = np.array([float(np.sum(df * ct)) * scale for ct in self._centered])
        np.clip(r, -1.0, 1.0, out=r)
        return CorrelationVector(r, frame_seq=f.seq, timestamp_us=f.timestamp_us)


def extract_features(f: Frame, store: TemplateStore) -> CorrelationVector:
    """Correlate f against every template in the store, ordered by gesture ordinal."""
    return TemplateMatcher(store).correlate(f)


def argmax_classify(v: CorrelationVector) -> tuple[GestureLabel, float]:
    """Baseline classifier: the gesture whose template correlates highest.

    Ties go to the lowest ordinal, which biases toward the rest state.
    """
    best = int(np.argmax(v.r))
    return GestureLabel(best), float(v.r[best])
