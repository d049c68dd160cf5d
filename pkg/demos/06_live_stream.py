#!/usr/bin/env python3
"""Run the full live loop and watch the pose stream from a TCP subscriber."""

import threading

from sonopipe import (
    ALL_GESTURES,
    GestureLabel,
    PhantomSpec,
    PipelineConfig,
    PipelineEngine,
    StreamServer,
    SyntheticSource,
    TcpSubscriber,
    make_phantom,
    render_gesture,
    train_from_frames,
)

# Train a small model up front, exactly like `sonopipe train` would.
spec = PhantomSpec(seed=42, dims=(48, 48), noise_sigma=0.01)
base = make_phantom(spec)
frames = {label: [render_gesture(base, label, 1.0, spec, draw=i, seq=i)
                  for i in range(10)]
          for label in ALL_GESTURES}
store, model, _ = train_from_frames(frames, k=3, template_n=5)

# The scripted source rests for 40 frames, then morphs into a power grip.
schedule = [(GestureLabel.REST, 40), (GestureLabel.POWER_GRIP, 60)]
source = SyntheticSource(spec, rate_hz=200.0, paced=False,
                         schedule=schedule, ramp_s=0.05)

config = PipelineConfig(dims=(48, 48), noise_sigma=0.01, paced=False,
                        rate_hz=200.0, queue_capacity=256, debounce_m=5)
server = StreamServer(tcp_port=0, ws_port=0, queue_capacity=256)
server.start()
print(f"streaming on tcp://127.0.0.1:{server.tcp_port}")

engine = PipelineEngine(config, store, model, server=server, source=source)
sub = TcpSubscriber("127.0.0.1", server.tcp_port)

worker = threading.Thread(target=engine.run)
worker.start()

# Print every 10th pose message plus every gesture change. While the
# tissue morphs, blended frames can briefly resemble other gestures; the
# debouncer rides the majority and settles on power_grip.
for i in range(100):
    message = sub.read_message()
    if message is None:
        break
    if i % 10 == 0 or (i and message.gesture != last.gesture):
        print(f"seq={message.seq:3d} t={message.timestamp_us / 1e6:7.3f}s "
              f"gesture={message.gesture.wire_name:12s} "
              f"confidence={message.confidence:+.3f} "
              f"index_mcp={message.joints[3]:+.3f} rad")
    last = message

worker.join()
sub.close()
server.stop()

snap = engine.metrics.snapshot()
print(f"processed {snap['processed']} frames at {snap['achieved_fps']:.0f} fps, "
      f"{snap['transitions']} gesture transition(s), "
      f"{snap['dropped']} dropped")
