"""Frame sources: directory replay, synthetic generation, TCP ingestion.

A source is a single-consumer iterator of Frames. next_frame() returns
None at end of stream (and never a Frame afterwards) and raises
SourceError on faults. Within one source, seq strictly increases and
timestamps never go backwards.

Frame wire format (TcpFrameSource): each message is a 16-byte
little-endian header (u32 width, u32 height, u64 timestamp_us) followed
by width*height bytes of 8-bit pixels, messages back-to-back on the
stream.
"""

from __future__ import annotations

import socket
import struct
import threading
import time
from pathlib import Path

import numpy as np

from .frame import Frame, load_pgm
from .gestures import GestureLabel
from .synth import GestureDeformation, PhantomSpec, default_deformations, make_phantom, render_gesture

FRAME_HEADER = struct.Struct("<IIQ")
MAX_WIRE_DIM = 1 << 14


class SourceError(RuntimeError):
    """A frame source failed to produce the next frame."""


class FrameSource:
    """Iterator contract shared by all sources."""

    def next_frame(self):
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __iter__(self):
        return self

    def __next__(self) -> Frame:
        frame = self.next_frame()
        if frame is None:
            raise StopIteration
        return frame

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class _Pacer:
    """Wall-clock pacing and timestamping shared by replay and synth sources.

    When paced, frame i is released no earlier than epoch + i/rate and
    stamped with the actual wall-clock offset; unpaced sources get
    synthetic timestamps at the nominal rate.
    """

    def __init__(self, rate_hz: float, paced: bool):
        if rate_hz <= 0:
            raise SourceError(f"rate_hz must be positive, got {rate_hz}")
        self.rate_hz = rate_hz
        self.paced = paced
        self.epoch_monotonic = None

    def stamp(self, index: int) -> int:
        if self.epoch_monotonic is None:
            self.epoch_monotonic = time.monotonic()
        if not self.paced:
            return round(index * 1_000_000 / self.rate_hz)
        due = self.epoch_monotonic + index / self.rate_hz
        delay = due - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        return max(0, round((time.monotonic() - self.epoch_monotonic) * 1e6))


class DirectoryReplaySource(FrameSource):
    """Replays PGM files from a directory in lexicographic order."""

    def __init__(self, directory, rate_hz: float = 35.0, paced: bool = False):
        directory = Path(directory)
        if not directory.is_dir():
            raise SourceError(f"not a directory: {directory}")
        self.paths = sorted(directory.glob("*.pgm"))
        if not self.paths:
            raise SourceError(f"no .pgm files in {directory}")
        self._pacer = _Pacer(rate_hz, paced)
        self._index = 0

    @property
    def epoch_monotonic(self):
        return self._pacer.epoch_monotonic

    def next_frame(self):
        if self._index >= len(self.paths):
            return None
        i = self._index
        self._index += 1
        ts = self._pacer.stamp(i)
        try:
            return load_pgm(self.paths[i], timestamp_us=ts, seq=i)
        except (OSError, ValueError) as exc:
            raise SourceError(f"failed to load {self.paths[i]}: {exc}") from exc


class SyntheticSource(FrameSource):
    """Generates gesture frames from the phantom, live-drivable.

    The target gesture can follow a fixed schedule of (label, n_frames)
    segments or be switched at runtime with set_target(); either way the
    deformation morphs linearly from the previous configuration over
    ramp_s seconds of frame time, and each frame takes a fresh noise draw.
    """

    def __init__(self, spec: PhantomSpec, rate_hz: float = 35.0, paced: bool = False,
                 schedule=None, ramp_s: float = 0.5, max_frames=None):
        self.spec = spec
        self.base = make_phantom(spec)
        self.deformations = default_deformations(spec)
        self.ramp_s = ramp_s
        self.max_frames = max_frames
        self._pacer = _Pacer(rate_hz, paced)
        self._index = 0
        self._lock = threading.Lock()
        self._target = GestureLabel.REST
        self._previous = GestureLabel.REST
        self._switch_ts_us = 0
        self._last_ts = 0
        self._schedule = None
        if schedule is not None:
            self._schedule = []
            at = 0
            for label, count in schedule:
                if count < 1:
                    raise SourceError("schedule segment must cover >= 1 frame")
                self._schedule.append((at, GestureLabel(label)))
                at += count
            self.max_frames = at if max_frames is None else max_frames

    @property
    def epoch_monotonic(self):
        return self._pacer.epoch_monotonic

    def set_target(self, label: GestureLabel, at_timestamp_us=None) -> None:
        """Switch the driven gesture; the deformation ramps from its current state."""
        label = GestureLabel(label)
        with self._lock:
            if label == self._target:
                return
            ts = self._last_ts if at_timestamp_us is None else at_timestamp_us
            self._previous = self._target
            self._target = label
            self._switch_ts_us = ts

    def _blend(self, ts_us: int) -> GestureDeformation:
        with self._lock:
            target, previous, switch_ts = self._target, self._previous, self._switch_ts_us
        if self.ramp_s <= 0:
            t = 1.0
        else:
            t = min(1.0, max(0.0, (ts_us - switch_ts) / (self.ramp_s * 1e6)))
        if t >= 1.0 or previous == target:
            return self.deformations[target]
        d_from = self.deformations[previous]
        d_to = self.deformations[target]
        shifts = tuple((1 - t) * a + t * b
                       for a, b in zip(d_from.shifts_px, d_to.shifts_px))
        comps = tuple(1.0 + (1 - t) * (a - 1.0) + t * (b - 1.0)
                      for a, b in zip(d_from.compressions, d_to.compressions))
        return GestureDeformation(shifts, comps)

    def next_frame(self):
        if self.max_frames is not None and self._index >= self.max_frames:
            return None
        i = self._index
        self._index += 1
        ts = self._pacer.stamp(i)
        self._last_ts = ts
        if self._schedule is not None:
            for at, label in self._schedule:
                if i >= at:
                    scheduled = label
            self.set_target(scheduled, at_timestamp_us=self._switch_start_for(i))
        blended = self._blend(ts)
        with self._lock:
            target = self._target
        return render_gesture(
            self.base, target, 1.0, self.spec, draw=i,
            deformations={target: blended}, timestamp_us=ts, seq=i)

    def _switch_start_for(self, index: int) -> int:
        # Scheduled switches ramp from the segment boundary's nominal time.
        return round(index * 1_000_000 / self._pacer.rate_hz)


class TcpFrameSource(FrameSource):
    """Receives frames over TCP using the 16-byte-header wire format."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise SourceError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._buffer = b""
        self._seq = 0
        self._last_ts = -1
        self._eof = False

    def _read_exact(self, n: int):
        while len(self._buffer) < n:
            try:
                chunk = self.sock.recv(65536)
            except OSError as exc:
                raise SourceError(f"receive failed: {exc}") from exc
            if not chunk:
                if self._buffer:
                    raise SourceError("stream truncated mid-message")
                return None
            self._buffer += chunk
        data, self._buffer = self._buffer[:n], self._buffer[n:]
        return data

    def next_frame(self):
        if self._eof:
            return None
        header = self._read_exact(FRAME_HEADER.size)
        if header is None:
            self._eof = True
            return None
        width, height, ts = FRAME_HEADER.unpack(header)
        if not (1 <= width <= MAX_WIRE_DIM and 1 <= height <= MAX_WIRE_DIM):
            raise SourceError(f"implausible frame dims {width}x{height}")
        if ts < self._last_ts:
            raise SourceError(f"timestamp went backwards: {ts} < {self._last_ts}")
        payload = self._read_exact(width * height)
        if payload is None:
            raise SourceError("stream truncated mid-message")
        pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width) / 255.0
        frame = Frame(pixels, timestamp_us=ts, seq=self._seq)
        self._seq += 1
        self._last_ts = ts
        return frame

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def encode_frame_wire(frame: Frame) -> bytes:
    """Encode one frame for the TCP frame wire (8-bit quantized)."""
    header = FRAME_HEADER.pack(frame.width, frame.height, frame.timestamp_us)
    data = np.rint(frame.pixels * 255.0).astype(np.uint8)
    return header + data.tobytes()
