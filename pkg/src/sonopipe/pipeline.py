"""Real-time pipeline: source -> features -> classify -> debounce -> publish.

The engine runs two threads: a reader that pulls frames from the source
into a bounded drop-oldest queue, and a worker that turns each frame
into a pose message. Every published message carries the gesture that
survived debouncing, its correlation as confidence, and joint angles
interpolated toward that gesture's pose preset.
"""

from __future__ import annotations

import collections
import json
import threading
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .classifier import (
    KnnModel,
    LabeledSample,
    cross_validate,
    exclude_class,
    knn_fit,
    knn_predict,
)
from .features import TemplateMatcher, ZeroVarianceError
from .frame import Frame, Roi, crop, resize
from .gestures import ALL_GESTURES, GestureLabel
from .kinematics import N_JOINTS, interpolate, load_presets, pose_for
from .streamwire import PoseMessage, StreamServer, ws_read_frame, ws_server_handshake
from .synth import PhantomSpec
from .templates import TemplateStore, build_template


class ConfigError(ValueError):
    """Invalid pipeline configuration."""


@dataclass
class PipelineConfig:
    """Everything the CLI and engine need, JSON-loadable and overridable."""

    source: str = "synth"
    source_dir: str | None = None
    source_host: str = "127.0.0.1"
    source_port: int = 7070
    rate_hz: float = 35.0
    paced: bool = True
    roi: tuple[int, int, int, int] | None = None
    seed: int = 42
    dims: tuple[int, int] = (480, 480)
    n_bands: int = 4
    speckle_strength: float = 0.35
    noise_sigma: float = 0.01
    per_class: int = 20
    template_n: int = 10
    k: int = 3
    folds: int = 5
    debounce_m: int = 5
    transition_s: float = 0.6
    ramp_s: float = 0.5
    queue_capacity: int = 4
    tcp_port: int = 7071
    ws_port: int = 7072
    cmd_port: int = 7073
    allow_commands: bool = False
    max_frames: int | None = None
    metrics_out: str | None = None

    def __post_init__(self):
        if self.source not in ("synth", "dir", "tcp"):
            raise ConfigError(f"unknown source kind: {self.source!r}")
        if self.source == "dir" and not self.source_dir:
            raise ConfigError("source 'dir' requires source_dir")
        if self.rate_hz <= 0:
            raise ConfigError("rate_hz must be positive")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.debounce_m < 1:
            raise ConfigError("debounce_m must be >= 1")
        if self.transition_s < 0:
            raise ConfigError("transition_s must be >= 0")
        if self.queue_capacity < 1:
            raise ConfigError("queue_capacity must be >= 1")
        if self.per_class < 1:
            raise ConfigError("per_class must be >= 1")
        if self.template_n < 1:
            raise ConfigError("template_n must be >= 1")
        if self.roi is not None:
            self.roi = tuple(int(v) for v in self.roi)
            if len(self.roi) != 4:
                raise ConfigError("roi must be [x, y, width, height]")
        self.dims = tuple(int(v) for v in self.dims)
        if len(self.dims) != 2 or min(self.dims) < 1:
            raise ConfigError("dims must be [width, height] of positive ints")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(data)

    def override(self, **kwargs) -> "PipelineConfig":
        updates = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **updates) if updates else self

    def phantom_spec(self) -> PhantomSpec:
        return PhantomSpec(seed=self.seed, dims=self.dims, n_bands=self.n_bands,
                           speckle_strength=self.speckle_strength,
                           noise_sigma=self.noise_sigma)


class DropOldestQueue:
    """Bounded FIFO that evicts the oldest entry instead of blocking producers."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items = collections.deque()
        self._cond = threading.Condition()
        self._closed = False
        self.dropped = 0

    def put(self, item) -> int:
        """Enqueue; returns the number of entries evicted (0 or 1)."""
        with self._cond:
            evicted = 0
            if len(self._items) >= self.capacity:
                self._items.popleft()
                evicted = 1
                self.dropped += 1
            self._items.append(item)
            self._cond.notify()
            return evicted

    def get(self, timeout: float = 0.5):
        """Dequeue one item, or None on timeout / closed-and-empty."""
        with self._cond:
            if not self._items:
                self._cond.wait(timeout)
            if self._items:
                return self._items.popleft()
            return None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        with self._cond:
            return self._closed

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)


class Debouncer:
    """Majority vote over the last `window` predictions.

    The reported state flips only when a strict majority of the window
    (count * 2 > window) agrees on a label different from the current
    one, so a lone outlier frame can never cause a transition.
    """

    def __init__(self, window: int, initial: GestureLabel = GestureLabel.REST):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self.state = GestureLabel(initial)
        self.transitions = 0
        self._recent = collections.deque(maxlen=window)

    def update(self, prediction: GestureLabel) -> bool:
        """Feed one raw prediction; returns True when the state changed."""
        self._recent.append(GestureLabel(prediction))
        counts = collections.Counter(self._recent)
        for label, count in counts.items():
            if label != self.state and count * 2 > self.window:
                self.state = label
                self.transitions += 1
                return True
        return False


_HIST_STAGES = ("preprocess", "features", "classify", "publish", "total", "e2e")


class Metrics:
    """Counters and per-stage latency samples for one engine run."""

    def __init__(self):
        self.frames_in = 0
        self.processed = 0
        self.dropped = 0
        self.errors = 0
        self.transitions = 0
        self.stream = None
        self.started_monotonic = None
        self.finished_monotonic = None
        self._samples = {name: [] for name in _HIST_STAGES}

    def record(self, stage: str, micros: float) -> None:
        self._samples[stage].append(micros)

    def samples(self, stage: str) -> list:
        return self._samples[stage]

    @property
    def duration_s(self) -> float:
        if self.started_monotonic is None or self.finished_monotonic is None:
            return 0.0
        return max(0.0, self.finished_monotonic - self.started_monotonic)

    @property
    def achieved_fps(self) -> float:
        dur = self.duration_s
        return self.processed / dur if dur > 0 else 0.0

    @staticmethod
    def _histogram(values) -> dict:
        """Power-of-two microsecond buckets plus summary percentiles."""
        if not values:
            return {"count": 0, "buckets": {}, "mean_us": 0.0,
                    "p50_us": 0.0, "p90_us": 0.0, "p99_us": 0.0, "max_us": 0.0}
        arr = np.asarray(values, dtype=np.float64)
        buckets: dict[str, int] = {}
        for v in arr:
            exp = 0 if v < 1 else int(v).bit_length()
            lo = 0 if exp == 0 else 1 << (exp - 1)
            hi = 1 << exp
            key = f"[{lo},{hi})"
            buckets[key] = buckets.get(key, 0) + 1
        ordered = dict(sorted(buckets.items(), key=lambda kv: int(kv[0][1:].split(",")[0])))
        return {
            "count": int(arr.size),
            "buckets": ordered,
            "mean_us": float(arr.mean()),
            "p50_us": float(np.percentile(arr, 50)),
            "p90_us": float(np.percentile(arr, 90)),
            "p99_us": float(np.percentile(arr, 99)),
            "max_us": float(arr.max()),
        }

    def snapshot(self) -> dict:
        return {
            "frames_in": self.frames_in,
            "processed": self.processed,
            "dropped": self.dropped,
            "errors": self.errors,
            "transitions": self.transitions,
            "duration_s": self.duration_s,
            "achieved_fps": self.achieved_fps,
            "stream": self.stream,
            "stages": {name: self._histogram(vals) for name, vals in self._samples.items()},
        }

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.snapshot(), indent=2) + "\n")


class _TransitionState:
    """Interpolates joint angles toward the active gesture's preset pose."""

    def __init__(self, presets, duration_s: float, initial: GestureLabel):
        self.presets = presets
        self.duration_us = duration_s * 1e6
        self.pose_from = pose_for(initial, presets)
        self.pose_to = self.pose_from
        self.start_us = 0

    def joints_at(self, ts_us: int):
        if self.duration_us <= 0 or ts_us >= self.start_us + self.duration_us:
            return self.pose_to
        t = max(0.0, (ts_us - self.start_us) / self.duration_us)
        return interpolate(self.pose_from, self.pose_to, t)

    def retarget(self, label: GestureLabel, ts_us: int) -> None:
        self.pose_from = self.joints_at(ts_us)
        self.pose_to = pose_for(label, self.presets)
        self.start_us = ts_us


class PipelineEngine:
    """Drives frames from a source through classification to the stream server."""

    def __init__(self, config: PipelineConfig, store: TemplateStore, model: KnnModel,
                 presets=None, server: StreamServer | None = None, source=None):
        self.config = config
        self.matcher = TemplateMatcher(store)
        self.model = model
        self.presets = presets if presets is not None else load_presets()
        self.server = server
        self.source = source
        self.metrics = Metrics()
        self.debouncer = Debouncer(config.debounce_m)
        self._queue = DropOldestQueue(config.queue_capacity)
        self._stop = threading.Event()
        self._reader_error = None

    def stop(self) -> None:
        self._stop.set()

    def _reader(self) -> None:
        try:
            while not self._stop.is_set():
                frame = self.source.next_frame()
                if frame is None:
                    break
                self.metrics.frames_in += 1
                self._queue.put(frame)
        except Exception as exc:
            self._reader_error = exc
        finally:
            self._queue.close()

    def _preprocess(self, frame: Frame) -> Frame:
        if self.config.roi is not None:
            x, y, w, h = self.config.roi
            frame = crop(frame, Roi(x, y, w, h))
        want_w, want_h = self.matcher.store.dims
        if frame.dims != (want_w, want_h):
            frame = resize(frame, want_w, want_h)
        return frame

    def _epoch_monotonic(self) -> float:
        epoch = getattr(self.source, "epoch_monotonic", None)
        if epoch is None:
            epoch = self.metrics.started_monotonic
        return epoch

    def run(self) -> Metrics:
        """Process frames until the source ends, max_frames, or stop()."""
        cfg = self.config
        self.metrics.started_monotonic = time.monotonic()
        reader = threading.Thread(target=self._reader, name="sonopipe-reader", daemon=True)
        reader.start()
        msg_seq = 0
        transition = _TransitionState(self.presets, cfg.transition_s, self.debouncer.state)
        try:
            while not self._stop.is_set():
                if cfg.max_frames is not None and self.metrics.processed >= cfg.max_frames:
                    break
                frame = self._queue.get(timeout=0.2)
                if frame is None:
                    if self._queue.closed and len(self._queue) == 0:
                        break
                    continue
                t0 = time.perf_counter()
                frame = self._preprocess(frame)
                t1 = time.perf_counter()
                try:
                    vector = self.matcher.correlate(frame)
                except ZeroVarianceError:
                    self.metrics.errors += 1
                    continue
                t2 = time.perf_counter()
                predicted = knn_predict(self.model, vector.r)
                if self.debouncer.update(predicted):
                    transition.retarget(self.debouncer.state, frame.timestamp_us)
                    self.metrics.transitions += 1
                state = self.debouncer.state
                joints = transition.joints_at(frame.timestamp_us)
                t3 = time.perf_counter()
                message = PoseMessage(
                    seq=msg_seq,
                    timestamp_us=frame.timestamp_us,
                    gesture=state,
                    confidence=float(vector.r[int(state)]),
                    features=tuple(float(v) for v in vector.r),
                    joints=tuple(float(a) for a in joints.angles),
                )
                if self.server is not None:
                    self.server.publish(message)
                t4 = time.perf_counter()
                msg_seq += 1
                self.metrics.processed += 1
                self.metrics.record("preprocess", (t1 - t0) * 1e6)
                self.metrics.record("features", (t2 - t1) * 1e6)
                self.metrics.record("classify", (t3 - t2) * 1e6)
                self.metrics.record("publish", (t4 - t3) * 1e6)
                self.metrics.record("total", (t4 - t0) * 1e6)
                epoch = self._epoch_monotonic()
                if epoch is not None:
                    e2e = (time.monotonic() - epoch) * 1e6 - frame.timestamp_us
                    self.metrics.record("e2e", max(0.0, e2e))
        finally:
            self._stop.set()
            reader.join(timeout=2.0)
            self.metrics.finished_monotonic = time.monotonic()
            self.metrics.dropped = self._queue.dropped
        if self._reader_error is not None:
            raise self._reader_error
        if self.server is not None:
            self.metrics.stream = self.server.stats()
        if cfg.metrics_out:
            self.metrics.save_json(cfg.metrics_out)
        return self.metrics


class CommandServer:
    """WebSocket command channel: {"cmd": "set_gesture", "gesture": <name>}.

    Each accepted command invokes the callback with the parsed label and
    gets {"ok": true} back; malformed or unknown commands get
    {"ok": false, "error": ...} and the connection stays open.
    """

    def __init__(self, callback, host: str = "127.0.0.1", port: int = 7073):
        import socket as _socket

        self.callback = callback
        self._sock = _socket.socket(_socket.AF_INET, _socket.SOCK_STREAM)
        self._sock.setsockopt(_socket.SOL_SOCKET, _socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(8)
        self.host, self.port = self._sock.getsockname()
        self._stopping = threading.Event()
        self._threads = []
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="sonopipe-cmd-accept", daemon=True)
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            t = threading.Thread(target=self._serve, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _reply(self, conn, payload: dict) -> None:
        from .streamwire import ws_encode_frame

        conn.sendall(ws_encode_frame(json.dumps(payload).encode(), opcode=0x1))

    def _serve(self, conn) -> None:
        try:
            conn.settimeout(10.0)
            ws_server_handshake(conn)
            conn.settimeout(None)
            while not self._stopping.is_set():
                opcode, payload = ws_read_frame(conn)
                if opcode == 0x8:
                    return
                if opcode != 0x1:
                    continue
                self._handle(conn, payload)
        except (OSError, ValueError):
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def _handle(self, conn, payload: bytes) -> None:
        try:
            data = json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            self._reply(conn, {"ok": False, "error": "not valid JSON"})
            return
        if not isinstance(data, dict) or data.get("cmd") != "set_gesture":
            self._reply(conn, {"ok": False, "error": "unknown command"})
            return
        try:
            label = GestureLabel.from_wire(data.get("gesture"))
        except (ValueError, TypeError):
            self._reply(conn, {"ok": False, "error": f"unknown gesture: {data.get('gesture')!r}"})
            return
        self.callback(label)
        self._reply(conn, {"ok": True, "gesture": label.wire_name})

    def stop(self) -> None:
        self._stopping.set()
        try:
            self._sock.close()
        except OSError:
            pass
        for t in self._threads:
            t.join(timeout=1.0)


def train_from_frames(frames_by_label, k: int, template_n: int,
                      subject_id: str = "synth"):
    """Build gesture templates and fit the classifier from labeled frames.

    frames_by_label maps GestureLabel -> list[Frame]. Templates come from
    the most self-consistent template_n frames per gesture; every frame
    then contributes one labeled feature vector to the k-NN model.
    """
    store_templates = []
    for label in ALL_GESTURES:
        frames = frames_by_label.get(label)
        if not frames:
            raise ConfigError(f"no frames for gesture {label.wire_name}")
        store_templates.append(build_template(frames, label, template_n))
    store = TemplateStore(store_templates)
    matcher = TemplateMatcher(store)
    samples = []
    for label in ALL_GESTURES:
        for frame in frames_by_label[label]:
            vector = matcher.correlate(frame)
            samples.append(LabeledSample(
                features=tuple(float(v) for v in vector.r),
                label=label,
                subject_id=subject_id,
                trial_id=f"seq{frame.seq}",
            ))
    model = knn_fit(samples, k)
    return store, model, samples


def evaluate_samples(samples, k: int, folds: int, seed: int) -> dict:
    """Cross-validate on all four gestures and again with rest excluded."""
    full = cross_validate(samples, k=k, folds=folds, seed=seed)
    no_rest = cross_validate(exclude_class(samples, GestureLabel.REST),
                             k=k, folds=folds, seed=seed)
    return {
        "full": full.to_dict(),
        "rest_excluded": no_rest.to_dict(),
    }
