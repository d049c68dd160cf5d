"""End-to-end acceptance checks for the full pipeline.

Each test covers one release criterion and prints a single PASS/FAIL
verdict line (with the measured numbers) to the real stderr so the
summary survives pytest's output capture.
"""

from __future__ import annotations

import json
import socket
import sys
import time
from pathlib import Path

import numpy as np
from conftest import ACCEPTANCE_VERDICTS
from oracles import confusion_counts_scalar, knn_brute, pearson_scalar

from sonopipe import (
    ALL_GESTURES,
    ConfusionMatrix,
    Debouncer,
    Frame,
    GestureLabel,
    LabeledSample,
    PhantomSpec,
    PipelineConfig,
    PipelineEngine,
    PoseMessage,
    StreamServer,
    SyntheticSource,
    TcpSubscriber,
    aggregate_confusion,
    cross_validate,
    decode_message,
    encode_message,
    exclude_class,
    knn_fit,
    knn_predict,
    make_phantom,
    pearson,
    render_gesture,
    train_from_frames,
)
from sonopipe.classifier import stratified_folds
from sonopipe.pipeline import Metrics

GOLDEN_PATH = Path(__file__).resolve().parents[1] / "docs" / "wire" / "golden.ndjson"


def _verdict(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} [{name}] {detail}"
    ACCEPTANCE_VERDICTS.append(line)
    print(line, file=sys.__stderr__, flush=True)
    assert ok, line


def _render_classes(spec: PhantomSpec, per_class: int):
    base = make_phantom(spec)
    return {
        label: [
            render_gesture(base, label, 1.0, spec, draw=i, timestamp_us=i, seq=i)
            for i in range(per_class)
        ]
        for label in ALL_GESTURES
    }


# Heavier experiments are shared between criteria through these caches
# so each one still works standalone under -k selection.
_noisy_cache: dict = {}
_desk480_cache: dict = {}


def _noisy_experiment():
    if not _noisy_cache:
        spec = PhantomSpec(seed=42, dims=(48, 48), noise_sigma=0.15)
        frames = _render_classes(spec, 20)
        _, _, samples = train_from_frames(frames, k=3, template_n=10)
        _noisy_cache["samples"] = samples
        _noisy_cache["report"] = cross_validate(samples, k=3, folds=5, seed=42)
    return _noisy_cache


def _desk480_model():
    if not _desk480_cache:
        spec = PhantomSpec(seed=42, dims=(480, 480), noise_sigma=0.01)
        frames = _render_classes(spec, 5)
        store, model, _ = train_from_frames(frames, k=3, template_n=5)
        _desk480_cache["spec"] = spec
        _desk480_cache["store"] = store
        _desk480_cache["model"] = model
    return _desk480_cache


def test_correlation_matches_scalar_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(1000):
        w, h = (int(v) for v in rng.integers(2, 65, 2))
        a = rng.uniform(0.0, 1.0, (h, w))
        b = rng.uniform(0.0, 1.0, (h, w))
        r_lib = pearson(Frame(a, timestamp_us=0, seq=0),
                        Frame(b, timestamp_us=0, seq=1))
        r_ref = pearson_scalar(a, b)
        worst = max(worst, abs(r_lib - r_ref))
    elapsed = time.perf_counter() - t0
    _verdict(
        "correlation-oracle",
        worst <= 1e-12 and elapsed < 10.0,
        f"max |r_lib - r_ref| = {worst:.3e} over 1000 random frame pairs "
        f"(2x2..64x64) in {elapsed:.1f}s (limits 1e-12, 10s)")


def test_correlation_invariance_properties():
    rng = np.random.default_rng(102)
    failures = []
    cases = 0

    def frame(arr, seq=0):
        return Frame(arr, timestamp_us=0, seq=seq)

    for i in range(300):  # symmetry, bit-exact
        w, h = (int(v) for v in rng.integers(2, 33, 2))
        a, b = rng.uniform(0, 1, (h, w)), rng.uniform(0, 1, (h, w))
        cases += 1
        if pearson(frame(a), frame(b, 1)) != pearson(frame(b), frame(a, 1)):
            failures.append(f"symmetry case {i}")

    for i in range(300):  # self-correlation exactly 1.0
        w, h = (int(v) for v in rng.integers(2, 33, 2))
        a = rng.uniform(0, 1, (h, w))
        cases += 1
        if pearson(frame(a), frame(a, 1)) != 1.0:
            failures.append(f"self case {i}")

    for i in range(250):  # positive affine invariance within 1e-9
        w, h = (int(v) for v in rng.integers(2, 33, 2))
        a = rng.uniform(0, 1, (h, w))
        s = float(rng.uniform(0.2, 0.8))
        t = float(rng.uniform(0.0, 1.0 - s))
        cases += 1
        if abs(pearson(frame(a), frame(a * s + t, 1)) - 1.0) > 1e-9:
            failures.append(f"affine case {i}")

    done = 0
    while done < 250:  # exact anti-image on dyadic pixel grids
        size = int(2 ** rng.integers(1, 7))
        a = rng.integers(0, 257, (size, size)).astype(np.float64) / 256.0
        if a.min() == a.max():
            continue
        done += 1
        cases += 1
        if pearson(frame(a), frame(1.0 - a, 1)) != -1.0:
            failures.append(f"anti-image case {done}")

    _verdict(
        "correlation-invariances",
        not failures and cases >= 1000,
        f"{cases} property cases (symmetry/self/affine/anti-image), "
        f"{len(failures)} violations" + (f": {failures[:3]}" if failures else ""))


def test_knn_matches_brute_force_oracle():
    rng = np.random.default_rng(103)
    t0 = time.perf_counter()
    mismatches = 0

    def check(train_x, train_y, query, k):
        model = knn_fit(
            [LabeledSample(tuple(x), GestureLabel(int(y)))
             for x, y in zip(train_x, train_y)], k)
        lib = knn_predict(model, tuple(query))
        ref = knn_brute(train_x, train_y, query, k)
        return lib == ref

    for i in range(8000):  # generic random instances
        n = int(rng.integers(5, 101))
        k = int(rng.choice([1, 3, 5]))
        train_x = rng.uniform(-1, 1, (n, 4))
        train_y = rng.integers(0, 4, n)
        query = rng.uniform(-1, 1, 4)
        mismatches += not check(train_x, train_y, query, k)

    for i in range(2000):  # engineered ties on a coarse dyadic grid
        n = int(rng.integers(6, 25))
        k = int(rng.choice([1, 3, 5]))
        train_x = rng.integers(-8, 9, (n, 4)).astype(np.float64) / 8.0
        train_y = rng.integers(0, 4, n)
        query = rng.integers(-8, 9, 4).astype(np.float64) / 8.0
        mismatches += not check(train_x, train_y, query, k)

    elapsed = time.perf_counter() - t0
    _verdict(
        "knn-oracle",
        mismatches == 0 and elapsed < 30.0,
        f"{mismatches} label disagreements over 10000 instances "
        f"(8000 random + 2000 engineered ties, n<=100, k in 1/3/5) "
        f"in {elapsed:.1f}s (limit 30s)")


def test_clean_synthetic_cross_validation_is_perfect():
    t0 = time.perf_counter()
    spec = PhantomSpec(seed=42, dims=(48, 48), noise_sigma=0.01)
    frames = _render_classes(spec, 20)
    _, _, samples = train_from_frames(frames, k=3, template_n=10)
    report = cross_validate(samples, k=3, folds=5, seed=42)
    elapsed = time.perf_counter() - t0
    ok = (report.accuracy == 1.0
          and all(acc == 1.0 for acc in report.per_fold_accuracy)
          and elapsed < 60.0)
    _verdict(
        "clean-cv-perfect",
        ok,
        f"accuracy = {report.accuracy} (per fold: "
        f"{list(report.per_fold_accuracy)}) at sigma=0.01, seed=42, "
        f"20/class, k=3, 5 folds in {elapsed:.1f}s (need exactly 1.0, <60s)")


def test_noisy_cross_validation_beats_90_percent():
    t0 = time.perf_counter()
    report = _noisy_experiment()["report"]
    elapsed = time.perf_counter() - t0
    # 0.9375 is the frozen fixed-seed result; any drift is a regression.
    ok = report.accuracy > 0.90 and report.accuracy == 0.9375 and elapsed < 60.0
    _verdict(
        "noisy-cv-above-90",
        ok,
        f"accuracy = {report.accuracy} at sigma=0.15 "
        f"(need > 0.90, frozen regression value 0.9375) in {elapsed:.1f}s")


def test_excluding_rest_never_hurts_noisy_accuracy():
    data = _noisy_experiment()
    full = data["report"].accuracy
    no_rest = cross_validate(
        exclude_class(data["samples"], GestureLabel.REST),
        k=3, folds=5, seed=42)
    ok = no_rest.accuracy >= full and no_rest.accuracy == 0.95
    _verdict(
        "rest-exclusion",
        ok,
        f"rest-excluded accuracy = {no_rest.accuracy} >= full {full} "
        f"at sigma=0.15 (frozen values 0.95 / 0.9375)")


def test_throughput_sustains_35_fps_at_full_resolution(tmp_path):
    desk = _desk480_model()
    metrics_path = tmp_path / "throughput.json"
    cfg = PipelineConfig(dims=(480, 480), paced=False, queue_capacity=8,
                         max_frames=500, metrics_out=str(metrics_path))
    source = SyntheticSource(desk["spec"], rate_hz=35.0, paced=False,
                             max_frames=500)
    engine = PipelineEngine(cfg, desk["store"], desk["model"], source=source)
    metrics = engine.run()
    source.close()

    stage_us = sum(metrics.samples("preprocess")) \
        + sum(metrics.samples("features")) + sum(metrics.samples("classify"))
    stage_fps = metrics.processed / (stage_us / 1e6)
    reported = json.loads(metrics_path.read_text())
    ok = (metrics.processed == 500 and metrics.dropped == 0
          and stage_fps >= 35.0 and reported["achieved_fps"] >= 35.0)
    _verdict(
        "throughput",
        ok,
        f"500 consecutive 480x480 frames: {reported['achieved_fps']:.0f} fps "
        f"end to end, {stage_fps:.0f} fps over preprocess+features+classify, "
        f"{metrics.dropped} drops (need >=35 fps, fps in metrics JSON)")


def test_latency_budget_under_live_pacing():
    desk = _desk480_model()
    cfg = PipelineConfig(dims=(480, 480), rate_hz=35.0, paced=True)
    source = SyntheticSource(desk["spec"], rate_hz=35.0, paced=True,
                             max_frames=500)
    server = StreamServer(tcp_port=0, ws_port=0, queue_capacity=64)
    server.start()
    drained = []
    sub = TcpSubscriber("127.0.0.1", server.tcp_port, timeout=10.0)
    try:
        deadline = time.monotonic() + 2.0
        while server.stats()["subscribers"] < 1:
            assert time.monotonic() < deadline
            time.sleep(0.01)

        import threading

        def drain():
            while True:
                line = sub.read_line()
                if line is None:
                    return
                drained.append(line)

        drainer = threading.Thread(target=drain, daemon=True)
        drainer.start()
        engine = PipelineEngine(cfg, desk["store"], desk["model"],
                                server=server, source=source)
        metrics = engine.run()
    finally:
        # Stopping the server closes the connection, which lets the
        # drainer see EOF and exit before we tear the socket down.
        server.stop()
        source.close()
        drainer.join(timeout=5.0)
        sub.close()

    hist = Metrics._histogram(metrics.samples("e2e"))
    p50_ms = hist["p50_us"] / 1000.0
    p99_ms = hist["p99_us"] / 1000.0
    ok = (metrics.processed == 500 and p99_ms < 600.0 and p50_ms < 50.0
          and len(drained) >= 1)
    _verdict(
        "latency",
        ok,
        f"paced 35 fps run over {metrics.processed} frames: frame->publication "
        f"median {p50_ms:.1f} ms, p99 {p99_ms:.1f} ms "
        f"(budgets 50 ms / 600 ms), {len(drained)} messages delivered")


def test_confusion_accounting_is_exact():
    data = _noisy_experiment()
    samples, report = data["samples"], data["report"]
    labels = report.confusion.labels

    problems = []
    if report.confusion.row_sums() != {label: 20 for label in labels}:
        problems.append(f"row sums {report.confusion.row_sums()} != 20/class")

    # Re-run each fold standalone and compare the bookkeeping end to end.
    partition = stratified_folds(samples, folds=5, seed=42)
    fold_matrices = []
    manual = np.zeros((4, 4), dtype=int)
    for fold in partition:
        held = set(fold)
        model = knn_fit([s for i, s in enumerate(samples) if i not in held], 3)
        true = [samples[i].label for i in fold]
        pred = [knn_predict(model, samples[i].features) for i in fold]
        counts = confusion_counts_scalar(true, pred, labels)
        fold_matrices.append(ConfusionMatrix(labels, counts))
        manual += np.asarray(counts)
        if fold_matrices[-1].row_sums() != {label: 4 for label in labels}:
            problems.append("per-fold row sums != held-out class counts")

    aggregate = aggregate_confusion(fold_matrices)
    if not np.array_equal(aggregate.counts, manual):
        problems.append("aggregate != elementwise sum of fold matrices")
    if not np.array_equal(aggregate.counts, report.confusion.counts):
        problems.append("cross-validation confusion != aggregated folds")

    _verdict(
        "confusion-accounting",
        not problems,
        "row sums match per-class counts; aggregate equals exact elementwise "
        "sum of 5 fold matrices" if not problems else "; ".join(problems))


def test_wire_golden_and_slow_subscriber():
    problems = []

    golden = PoseMessage(seq=0, timestamp_us=0, gesture=GestureLabel.REST,
                         confidence=1.0, features=(1.0, 0.0, 0.0, 0.0),
                         joints=tuple(0.0 for _ in range(14)))
    if encode_message(golden) != GOLDEN_PATH.read_bytes():
        problems.append("encoded canonical rest message != golden bytes")
    if decode_message(GOLDEN_PATH.read_bytes()) != golden:
        problems.append("golden line does not decode to the canonical message")

    rng = np.random.default_rng(104)
    worst_rel = 0.0
    for seq in range(200):
        m = PoseMessage(seq=seq, timestamp_us=int(rng.integers(0, 10**12)),
                        gesture=GestureLabel(int(rng.integers(0, 4))),
                        confidence=float(rng.uniform(-1, 1)),
                        features=tuple(rng.uniform(-1, 1, 4)),
                        joints=tuple(rng.uniform(-3, 3, 14)))
        back = decode_message(encode_message(m))
        for a, b in zip((m.confidence, *m.features, *m.joints),
                        (back.confidence, *back.features, *back.joints)):
            rel = abs(a - b) / max(abs(a), 1e-12)
            worst_rel = max(worst_rel, rel)
    if worst_rel > 1e-7:
        problems.append(f"round-trip relative error {worst_rel:.2e} > 1e-7")

    # Slow subscriber: a wedged reader must only lose the oldest entries.
    server = StreamServer(tcp_port=0, ws_port=0, queue_capacity=8)
    server.start()
    try:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 4096)
        sock.connect(("127.0.0.1", server.tcp_port))
        deadline = time.monotonic() + 2.0
        while server.stats()["subscribers"] < 1:
            assert time.monotonic() < deadline
            time.sleep(0.01)
        for seq in range(3000):
            server.publish(PoseMessage(
                seq=seq, timestamp_us=seq, gesture=GestureLabel.REST,
                confidence=0.0, features=(0.0,) * 4, joints=(0.0,) * 14))
        time.sleep(0.3)
        stats = server.stats()
        sock.settimeout(2.0)
        buffer = b""
        while b"2999" not in buffer:
            try:
                chunk = sock.recv(65536)
            except socket.timeout:
                break
            if not chunk:
                break
            buffer += chunk
        sock.close()
        seqs = [json.loads(line)["seq"] for line in buffer.split(b"\n") if line]
        if stats["dropped"] <= 0:
            problems.append("no drops counted for a wedged subscriber")
        if not all(b > a for a, b in zip(seqs, seqs[1:])):
            problems.append("delivered seq not strictly increasing")
        if len(seqs) >= 3000:
            problems.append("wedged subscriber impossibly received everything")
    finally:
        server.stop()

    _verdict(
        "wire-golden",
        not problems,
        f"golden bytes exact; round-trip rel err {worst_rel:.1e} <= 1e-7; "
        f"wedged subscriber: {len(seqs)} delivered strictly increasing, "
        f"{stats['dropped']} drops counted"
        if not problems else "; ".join(problems))


def test_debounce_swallows_isolated_flips():
    debouncer = Debouncer(5)
    for i in range(1000):
        label = GestureLabel.POINT if i % 20 == 19 else GestureLabel.REST
        debouncer.update(label)
    ok = debouncer.transitions == 0 and debouncer.state == GestureLabel.REST
    _verdict(
        "debounce",
        ok,
        f"1000 frames with a single-frame flip every 20: "
        f"{debouncer.transitions} transitions with window 5 (need 0)")
