#!/usr/bin/env python3
"""Joint-space trajectories between gesture pose presets."""

import math

from sonopipe import GestureLabel, load_presets, pose_for, trajectory
from sonopipe.kinematics import JOINT_NAMES

presets = load_presets()
rest = pose_for(GestureLabel.REST, presets)
grip = pose_for(GestureLabel.POWER_GRIP, presets)

# A 0.6 s transition sampled at the 35 Hz frame rate gives 22 setpoints.
samples = trajectory(rest, grip, duration_s=0.6, rate_hz=35.0)
print(f"rest -> power_grip: {len(samples)} setpoints over 0.6 s")

watch = ("index_mcp_flexion", "middle_mcp_flexion", "thumb_ip_flexion")
cols = [JOINT_NAMES.index(name) for name in watch]
print(f"{'t (s)':>6s} " + " ".join(f"{name:>20s}" for name in watch))
for t, state in samples[:-1:7] + [samples[-1]]:
    degs = [math.degrees(state.angles[c]) for c in cols]
    print(f"{t:6.3f} " + " ".join(f"{d:19.1f}°" for d in degs))

# Every preset respects the mechanical joint limits, so any interpolated
# point between presets does too (the path is a straight line per joint).
for label in GestureLabel:
    pose = pose_for(label, presets)
    inside = all(lo <= a <= hi for a, (lo, hi)
                 in zip(pose.angles, zip(presets.limits.lower,
                                         presets.limits.upper)))
    print(f"{label.wire_name:16s} within limits: {inside}")
