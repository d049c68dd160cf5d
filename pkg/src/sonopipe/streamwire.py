"""Joint-state telemetry: NDJSON wire codec and fan-out streaming server.

Wire format: one UTF-8 JSON object per message, keys exactly
(seq, timestamp_us, gesture, confidence, features, joints) in that order,
reals printed with at most 9 significant digits, terminated by a single
LF. The same payloads are offered on two listeners:

  - a plain TCP port (newline-delimited stream), and
  - a WebSocket port for browsers, one JSON object per text frame
    (the LF framing byte is replaced by the WebSocket frame boundary).

Each subscriber owns a bounded queue drained by its own writer thread.
Publishing never blocks on a subscriber: when a queue is full the oldest
undelivered message is dropped and counted, so a stalled consumer only
loses history, never stalls the pipeline.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import select
import socket
import struct
import threading
from collections import deque
from dataclasses import dataclass

import numpy as np

from .gestures import GestureLabel
from .kinematics import N_JOINTS

logger = logging.getLogger(__name__)

DEFAULT_TCP_PORT = 7071
DEFAULT_WS_PORT = 7072

# Per-subscriber kernel send buffer. Left to autotune, the kernel will happily
# hold megabytes of poses for a consumer that stopped reading, all of them
# stale by the time it wakes up; capping it keeps the drop-oldest policy (and
# its drop counters) authoritative over how much history a slow consumer sees.
# Telemetry lines are a few hundred bytes at a few hundred per second, so a
# small buffer costs a healthy subscriber nothing.
SUBSCRIBER_SNDBUF = 16 * 1024

MESSAGE_KEYS = ("seq", "timestamp_us", "gesture", "confidence", "features", "joints")


class WireError(ValueError):
    """Message violates the wire schema."""


@dataclass(frozen=True)
class PoseMessage:
    seq: int
    timestamp_us: int
    gesture: GestureLabel
    confidence: float
    features: tuple
    joints: tuple

    def __post_init__(self):
        if self.seq < 0 or self.timestamp_us < 0:
            raise WireError("seq and timestamp_us must be non-negative")
        object.__setattr__(self, "gesture", GestureLabel(self.gesture))
        features = tuple(float(v) for v in self.features)
        joints = tuple(float(v) for v in self.joints)
        if len(features) != 4:
            raise WireError(f"features must have length 4, got {len(features)}")
        if len(joints) != N_JOINTS:
            raise WireError(f"joints must have length {N_JOINTS}, got {len(joints)}")
        for v in features:
            if not np.isfinite(v) or abs(v) > 1.0:
                raise WireError(f"feature {v} outside [-1, 1]")
        if not all(np.isfinite(v) for v in joints):
            raise WireError("joints must be finite")
        if not np.isfinite(self.confidence) or abs(self.confidence) > 1.0:
            raise WireError(f"confidence {self.confidence} outside [-1, 1]")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "joints", joints)


def _round9(x: float) -> float:
    # Rounding through a 9-significant-digit decimal guarantees json.dumps
    # (shortest round-trip repr) never prints more than 9 digits.
    return float(f"{x:.9g}")


def encode_message(m: PoseMessage) -> bytes:
    obj = {
        "seq": m.seq,
        "timestamp_us": m.timestamp_us,
        "gesture": m.gesture.wire_name,
        "confidence": _round9(m.confidence),
        "features": [_round9(v) for v in m.features],
        "joints": [_round9(v) for v in m.joints],
    }
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")


def decode_message(data) -> PoseMessage:
    if isinstance(data, (bytes, bytearray)):
        data = bytes(data).decode("utf-8", errors="strict")
    line = data.rstrip("\n")
    if "\n" in line:
        raise WireError("expected a single newline-terminated message")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise WireError(f"malformed JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise WireError("message must be a JSON object")
    if set(obj) != set(MESSAGE_KEYS):
        raise WireError(
            f"unexpected key set {sorted(obj)}, want {sorted(MESSAGE_KEYS)}")
    seq, ts = obj["seq"], obj["timestamp_us"]
    if not isinstance(seq, int) or isinstance(seq, bool):
        raise WireError("seq must be an integer")
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise WireError("timestamp_us must be an integer")
    if not isinstance(obj["gesture"], str):
        raise WireError("gesture must be a string")
    try:
        gesture = GestureLabel.from_wire(obj["gesture"])
    except ValueError as exc:
        raise WireError(str(exc)) from exc
    for key in ("features", "joints"):
        if not isinstance(obj[key], list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool)
                for v in obj[key]):
            raise WireError(f"{key} must be an array of numbers")
    if not isinstance(obj["confidence"], (int, float)) or isinstance(obj["confidence"], bool):
        raise WireError("confidence must be a number")
    return PoseMessage(
        seq=seq,
        timestamp_us=ts,
        gesture=gesture,
        confidence=float(obj["confidence"]),
        features=tuple(obj["features"]),
        joints=tuple(obj["joints"]),
    )


# --- WebSocket framing (RFC 6455, text frames only) ---

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
OP_TEXT, OP_CLOSE, OP_PING, OP_PONG = 0x1, 0x8, 0x9, 0xA


def ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def ws_server_handshake(sock: socket.socket) -> None:
    """Read the HTTP upgrade request and reply 101, or raise WireError."""
    request = b""
    while b"\r\n\r\n" not in request:
        chunk = sock.recv(4096)
        if not chunk:
            raise WireError("connection closed during WebSocket handshake")
        request += chunk
        if len(request) > 65536:
            raise WireError("oversized WebSocket handshake request")
    head = request.split(b"\r\n\r\n", 1)[0].decode("latin-1")
    lines = head.split("\r\n")
    if not lines[0].startswith("GET "):
        raise WireError(f"not a WebSocket GET request: {lines[0]!r}")
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            name, value = line.split(":", 1)
            headers[name.strip().lower()] = value.strip()
    key = headers.get("sec-websocket-key")
    if key is None or "websocket" not in headers.get("upgrade", "").lower():
        raise WireError("missing WebSocket upgrade headers")
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {ws_accept_key(key)}\r\n"
        "\r\n"
    )
    sock.sendall(response.encode("ascii"))


def ws_client_handshake(sock: socket.socket, host: str, port: int, path: str = "/") -> None:
    key = base64.b64encode(os.urandom(16)).decode("ascii")
    request = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}:{port}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n"
        "\r\n"
    )
    sock.sendall(request.encode("ascii"))
    response = b""
    while b"\r\n\r\n" not in response:
        chunk = sock.recv(4096)
        if not chunk:
            raise WireError("connection closed during WebSocket handshake")
        response += chunk
    status = response.split(b"\r\n", 1)[0]
    if b"101" not in status:
        raise WireError(f"WebSocket handshake rejected: {status!r}")
    expected = ws_accept_key(key).encode("ascii")
    if expected not in response:
        raise WireError("bad Sec-WebSocket-Accept in handshake response")


def ws_encode_frame(payload: bytes, opcode: int = OP_TEXT, mask: bool = False) -> bytes:
    header = bytearray([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0x00
    if n < 126:
        header.append(mask_bit | n)
    elif n < 1 << 16:
        header.append(mask_bit | 126)
        header += struct.pack(">H", n)
    else:
        header.append(mask_bit | 127)
        header += struct.pack(">Q", n)
    if mask:
        mask_key = os.urandom(4)
        header += mask_key
        payload = bytes(b ^ mask_key[i % 4] for i, b in enumerate(payload))
    return bytes(header) + payload


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise WireError("connection closed mid-frame")
        buf += chunk
    return buf


def ws_read_frame(sock: socket.socket) -> tuple[int, bytes]:
    """Read one frame; unmasks client payloads. Returns (opcode, payload)."""
    b0, b1 = _recv_exact(sock, 2)
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    length = b1 & 0x7F
    if length == 126:
        (length,) = struct.unpack(">H", _recv_exact(sock, 2))
    elif length == 127:
        (length,) = struct.unpack(">Q", _recv_exact(sock, 8))
    mask_key = _recv_exact(sock, 4) if masked else None
    payload = _recv_exact(sock, length) if length else b""
    if mask_key:
        payload = bytes(b ^ mask_key[i % 4] for i, b in enumerate(payload))
    return opcode, payload


# --- fan-out server ---


class _Subscription:
    """One subscriber connection with its bounded delivery queue."""

    def __init__(self, sock: socket.socket, capacity: int, websocket: bool):
        self.sock = sock
        self.capacity = capacity
        self.websocket = websocket
        self.queue: deque[bytes] = deque()
        self.cond = threading.Condition()
        self.drops = 0
        self.delivered = 0
        self.closed = False

    def offer(self, line: bytes) -> None:
        with self.cond:
            if self.closed:
                return
            if len(self.queue) >= self.capacity:
                self.queue.popleft()
                self.drops += 1
            self.queue.append(line)
            self.cond.notify()

    def close(self) -> None:
        with self.cond:
            self.closed = True
            self.cond.notify()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class StreamServer:
    """Fan-out publisher for pose messages over TCP and WebSocket.

    publish() is wait-free with respect to subscribers: it only touches
    in-memory queues. Start and stop are idempotent.
    """

    def __init__(self, host: str = "127.0.0.1",
                 tcp_port: int = DEFAULT_TCP_PORT,
                 ws_port: int = DEFAULT_WS_PORT,
                 queue_capacity: int = 64):
        if queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")
        self.host = host
        self.tcp_port = tcp_port
        self.ws_port = ws_port
        self.queue_capacity = queue_capacity
        self.published = 0
        self._subs: list[_Subscription] = []
        self._lock = threading.Lock()
        self._listeners: list[socket.socket] = []
        self._threads: list[threading.Thread] = []
        self._running = False
        self._closed_drops = 0

    def start(self) -> None:
        with self._lock:
            if self._running:
                return
            self._running = True
        try:
            tcp = self._bind(self.tcp_port)
            self.tcp_port = tcp.getsockname()[1]
            ws = self._bind(self.ws_port)
            self.ws_port = ws.getsockname()[1]
        except OSError:
            with self._lock:
                self._running = False
            for sock in self._listeners:
                sock.close()
            self._listeners.clear()
            raise
        self._listeners = [tcp, ws]
        for sock, is_ws in ((tcp, False), (ws, True)):
            thread = threading.Thread(
                target=self._accept_loop, args=(sock, is_ws),
                name=f"stream-accept-{'ws' if is_ws else 'tcp'}", daemon=True)
            thread.start()
            self._threads.append(thread)
        logger.info("stream server on tcp:%d ws:%d", self.tcp_port, self.ws_port)

    def _bind(self, port: int) -> socket.socket:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.host, port))
        sock.listen(16)
        return sock

    def _accept_loop(self, listener: socket.socket, websocket: bool) -> None:
        while True:
            try:
                conn, addr = listener.accept()
            except OSError:
                return
            if not self._running:
                conn.close()
                return
            threading.Thread(
                target=self._start_subscription, args=(conn, addr, websocket),
                daemon=True).start()

    def _start_subscription(self, conn: socket.socket, addr, websocket: bool) -> None:
        try:
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, SUBSCRIBER_SNDBUF)
            if websocket:
                ws_server_handshake(conn)
        except (WireError, OSError) as exc:
            logger.warning("subscriber %s rejected: %s", addr, exc)
            conn.close()
            return
        sub = _Subscription(conn, self.queue_capacity, websocket)
        with self._lock:
            if not self._running:
                sub.close()
                return
            self._subs.append(sub)
        threading.Thread(target=self._writer_loop, args=(sub,),
                         name="stream-writer", daemon=True).start()
        logger.info("subscriber %s connected (%s)", addr, "ws" if websocket else "tcp")

    def _writer_loop(self, sub: _Subscription) -> None:
        try:
            while True:
                with sub.cond:
                    while not sub.queue and not sub.closed:
                        sub.cond.wait(timeout=0.5)
                    if sub.closed and not sub.queue:
                        return
                    line = sub.queue.popleft() if sub.queue else None
                if line is None:
                    continue
                if sub.websocket:
                    self._drain_ws_input(sub)
                    sub.sock.sendall(ws_encode_frame(line.rstrip(b"\n")))
                else:
                    sub.sock.sendall(line)
                sub.delivered += 1
        except (OSError, WireError):
            pass
        finally:
            self._remove(sub)

    def _drain_ws_input(self, sub: _Subscription) -> None:
        # Consume any client frames so close/ping do not rot in the buffer.
        while True:
            readable, _, _ = select.select([sub.sock], [], [], 0)
            if not readable:
                return
            opcode, payload = ws_read_frame(sub.sock)
            if opcode == OP_CLOSE:
                raise WireError("client sent close frame")
            if opcode == OP_PING:
                sub.sock.sendall(ws_encode_frame(payload, opcode=OP_PONG))

    def _remove(self, sub: _Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)
            self._closed_drops += sub.drops
        sub.close()

    def publish(self, message) -> bytes:
        """Queue a message (PoseMessage or pre-encoded line) for every subscriber."""
        line = message if isinstance(message, bytes) else encode_message(message)
        with self._lock:
            subs = list(self._subs)
            self.published += 1
        for sub in subs:
            sub.offer(line)
        return line

    def stats(self) -> dict:
        with self._lock:
            active = list(self._subs)
            closed_drops = self._closed_drops
        return {
            "published": self.published,
            "subscribers": len(active),
            "dropped": closed_drops + sum(s.drops for s in active),
            "delivered": sum(s.delivered for s in active),
        }

    def stop(self) -> None:
        with self._lock:
            if not self._running:
                return
            self._running = False
            subs = list(self._subs)
            self._subs.clear()
        for listener in self._listeners:
            try:
                listener.close()
            except OSError:
                pass
        self._listeners.clear()
        for sub in subs:
            self._closed_drops += sub.drops
            sub.close()
        for thread in self._threads:
            thread.join(timeout=1.0)
        self._threads.clear()


class TcpSubscriber:
    """Line-oriented client for the plain TCP telemetry port."""

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self._buffer = b""

    def read_line(self):
        """Next raw line (with trailing LF), or None when the server closes."""
        while b"\n" not in self._buffer:
            chunk = self.sock.recv(65536)
            if not chunk:
                return None
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line + b"\n"

    def read_message(self):
        line = self.read_line()
        return None if line is None else decode_message(line)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class WsSubscriber:
    """WebSocket client for the browser-facing telemetry port."""

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        ws_client_handshake(self.sock, host, port)

    def read_text(self):
        """Next text payload, or None when the server closes."""
        while True:
            try:
                opcode, payload = ws_read_frame(self.sock)
            except WireError:
                return None
            if opcode == OP_TEXT:
                return payload.decode("utf-8")
            if opcode == OP_CLOSE:
                return None
            if opcode == OP_PING:
                self.sock.sendall(ws_encode_frame(payload, opcode=OP_PONG, mask=True))

    def read_message(self):
        text = self.read_text()
        return None if text is None else decode_message(text)

    def send_text(self, text: str) -> None:
        self.sock.sendall(ws_encode_frame(text.encode("utf-8"), mask=True))

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
