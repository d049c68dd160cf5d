"""Grayscale frame container, preprocessing ops and PGM persistence.

Pixels are stored as float64 in [0, 1], shape (height, width), row-major.
Frames are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

GRAY_R, GRAY_G, GRAY_B = 0.299, 0.587, 0.114


class FrameError(ValueError):
    """Invalid frame content or incompatible frame arguments."""


class PgmFormatError(FrameError):
    """Malformed PGM file."""


@dataclass(frozen=True, eq=False)
class Frame:
    """One grayscale image plus its position in the source stream.

    timestamp_us counts microseconds since the pipeline epoch and must be
    non-decreasing within a stream; seq strictly increases.
    """

    pixels: np.ndarray
    timestamp_us: int = 0
    seq: int = 0

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise FrameError(f"pixels must be a non-empty 2-D array, got shape {px.shape}")
        lo, hi = px.min(), px.max()
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo < 0.0 or hi > 1.0:
            raise FrameError(f"pixel values must lie in [0, 1], got range [{lo}, {hi}]")
        if self.timestamp_us < 0:
            raise FrameError("timestamp_us must be non-negative")
        if self.seq < 0:
            raise FrameError("seq must be non-negative")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        """(width, height)"""
        return self.width, self.height


@dataclass(frozen=True)
class Roi:
    """Rectangular crop region, top-left corner plus extent, in pixels."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise FrameError(f"roi extent must be >= 1, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise FrameError("roi corner must be non-negative")

    def fits(self, frame: Frame) -> bool:
        return self.x + self.w <= frame.width and self.y + self.h <= frame.height


def to_grayscale(r: np.ndarray, g: np.ndarray, b: np.ndarray,
                 timestamp_us: int = 0, seq: int = 0) -> Frame:
    """Combine RGB channel planes into a luma frame (BT.601 weights)."""
    r = np.asarray(r, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not (r.shape == g.shape == b.shape) or r.ndim != 2:
        raise FrameError(f"channel shapes differ: {r.shape}, {g.shape}, {b.shape}")
    for name, chan in (("r", r), ("g", g), ("b", b)):
        if chan.size == 0 or chan.min() < 0.0 or chan.max() > 1.0:
            raise FrameError(f"channel {name} values must lie in [0, 1]")
    luma = GRAY_R * r + GRAY_G * g + GRAY_B * b
    np.clip(luma, 0.0, 1.0, out=luma)
    return Frame(luma, timestamp_us=timestamp_us, seq=seq)


def crop(f: Frame, roi: Roi) -> Frame:
    """Extract roi from f. Pixel values are copied untouched."""
    if not roi.fits(f):
        raise FrameError(
            f"roi {roi} does not fit inside {f.width}x{f.height} frame")
    window = f.pixels[roi.y:roi.y + roi.h, roi.x:roi.x + roi.w].copy()
    return Frame(window, timestamp_us=f.timestamp_us, seq=f.seq)


def resize(f: Frame, out_w: int, out_h: int) -> Frame:
    """Bilinear resize with corner-aligned sampling.

    Corner alignment maps output pixel j to source coordinate
    j * (in - 1) / (out - 1), so identity dimensions reproduce the input
    exactly and constant images stay constant at any size.
    """
    if out_w < 1 or out_h < 1:
        raise FrameError(f"target dims must be >= 1, got {out_w}x{out_h}")
    if (out_w, out_h) == (f.width, f.height):
        return Frame(f.pixels.copy(), timestamp_us=f.timestamp_us, seq=f.seq)
    xs = _corner_coords(f.width, out_w)
    ys = _corner_coords(f.height, out_h)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.minimum(x0, f.width - 2) if f.width > 1 else np.zeros_like(x0)
    y0 = np.minimum(y0, f.height - 2) if f.height > 1 else np.zeros_like(y0)
    fx = xs - x0
    fy = ys - y0
    x1 = np.minimum(x0 + 1, f.width - 1)
    y1 = np.minimum(y0 + 1, f.height - 1)
    p = f.pixels
    top = p[np.ix_(y0, x0)] * (1.0 - fx) + p[np.ix_(y0, x1)] * fx
    bot = p[np.ix_(y1, x0)] * (1.0 - fx) + p[np.ix_(y1, x1)] * fx
    out = top * (1.0 - fy)[:, None] + bot * fy[:, None]
    np.clip(out, 0.0, 1.0, out=out)
    return Frame(out, timestamp_us=f.timestamp_us, seq=f.seq)


def _corner_coords(n_in: int, n_out: int) -> np.ndarray:
    if n_out == 1 or n_in == 1:
        return np.zeros(n_out)
    return np.arange(n_out) * ((n_in - 1) / (n_out - 1))


def save_pgm(f: Frame, path) -> None:
    """Write a binary PGM (P5, maxval 255). [0,1] maps to 0..255 by rounding."""
    data = np.rint(f.pixels * 255.0).astype(np.uint8)
    header = f"P5\n{f.width} {f.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def load_pgm(path, timestamp_us: int = 0, seq: int = 0) -> Frame:
    """Read a binary PGM (P5, maxval 255) written by save_pgm or compatible tools."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(b"P5"):
        raise PgmFormatError(f"{path}: not a binary PGM (missing P5 magic)")
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with optional '#' comment lines, then one whitespace byte before payload.
    pos = 2
    fields = []
    while len(fields) < 3:
        match = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\d+)").match(blob, pos)
        if match is None:
            raise PgmFormatError(f"{path}: malformed PGM header")
        fields.append(int(match.group(1)))
        pos = match.end()
    if pos >= len(blob) or blob[pos:pos + 1] not in b" \t\r\n":
        raise PgmFormatError(f"{path}: malformed PGM header")
    pos += 1
    width, height, maxval = fields
    if maxval != 255:
        raise PgmFormatError(f"{path}: unsupported maxval {maxval} (expected 255)")
    if width < 1 or height < 1:
        raise PgmFormatError(f"{path}: invalid dimensions {width}x{height}")
    payload = blob[pos:pos + width * height]
    if len(payload) != width * height:
        raise PgmFormatError(
            f"{path}: truncated payload ({len(payload)} of {width * height} bytes)")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width) / 255.0
    return Frame(pixels, timestamp_us=timestamp_us, seq=seq)
