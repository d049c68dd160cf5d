"""14-DOF hand poses: gesture presets, limits and linear trajectories.

Joint ordering is frozen (it is part of the wire protocol):

    0  thumb_abduction      1  thumb_mcp_flexion   2  thumb_ip_flexion
    3  index_mcp_flexion    4  index_pip_flexion
    5  middle_mcp_flexion   6  middle_pip_flexion
    7  ring_mcp_flexion     8  ring_pip_flexion
    9  little_mcp_flexion  10  little_pip_flexion
   11  wrist_pronation     12  wrist_flexion      13  base_roll

Config files carry degrees for readability; everything internal is radians.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .gestures import ALL_GESTURES, GestureLabel

JOINT_NAMES = (
    "thumb_abduction",
    "thumb_mcp_flexion",
    "thumb_ip_flexion",
    "index_mcp_flexion",
    "index_pip_flexion",
    "middle_mcp_flexion",
    "middle_pip_flexion",
    "ring_mcp_flexion",
    "ring_pip_flexion",
    "little_mcp_flexion",
    "little_pip_flexion",
    "wrist_pronation",
    "wrist_flexion",
    "base_roll",
)

N_JOINTS = len(JOINT_NAMES)


class PoseConfigError(ValueError):
    """Malformed pose preset configuration."""


@dataclass(frozen=True)
class JointState:
    angles: np.ndarray

    def __post_init__(self):
        angles = np.ascontiguousarray(self.angles, dtype=np.float64)
        if angles.shape != (N_JOINTS,):
            raise PoseConfigError(
                f"expected {N_JOINTS} joint angles, got shape {angles.shape}")
        if not np.all(np.isfinite(angles)):
            raise PoseConfigError("joint angles must be finite")
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)


@dataclass(frozen=True)
class JointLimits:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.ascontiguousarray(self.lower, dtype=np.float64)
        upper = np.ascontiguousarray(self.upper, dtype=np.float64)
        if lower.shape != (N_JOINTS,) or upper.shape != (N_JOINTS,):
            raise PoseConfigError("limits must cover all joints")
        if not np.all(lower < upper):
            raise PoseConfigError("each joint needs lower < upper limit")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)


@dataclass(frozen=True)
class PosePreset:
    """One target JointState per gesture, validated against the limits."""

    poses: dict
    limits: JointLimits

    def __post_init__(self):
        missing = [l.wire_name for l in ALL_GESTURES if l not in self.poses]
        if missing:
            raise PoseConfigError(f"missing pose presets: {', '.join(missing)}")
        for label, state in self.poses.items():
            violations = validate_limits(state, self.limits)
            if violations:
                raise PoseConfigError(
                    f"preset {GestureLabel(label).wire_name} violates limits: {violations}")


def pose_for(label: GestureLabel, presets: PosePreset) -> JointState:
    return presets.poses[label]


def interpolate(start: JointState, end: JointState, t: float) -> JointState:
    """Componentwise linear blend; t=0 and t=1 return the endpoints exactly."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return JointState(start.angles.copy())
    if t == 1.0:
        return JointState(end.angles.copy())
    return JointState(start.angles + t * (end.angles - start.angles))


def trajectory(start: JointState, end: JointState,
               duration_s: float, rate_hz: float):
    """Uniformly sampled linear path from start to end.

    Returns ceil(duration*rate)+1 (offset_seconds, JointState) pairs; the
    first sample is exactly start and the last exactly end.
    """
    if duration_s <= 0.0 or rate_hz <= 0.0:
        raise ValueError("duration and rate must be positive")
    steps = math.ceil(duration_s * rate_hz)
    samples = []
    for i in range(steps + 1):
        t = i / steps
        samples.append((t * duration_s, interpolate(start, end, t)))
    return samples


def validate_limits(state: JointState, limits: JointLimits):
    """Indices (with bounds) of every joint outside its limit range."""
    low = state.angles < limits.lower
    high = state.angles > limits.upper
    return [
        (i, float(state.angles[i]), float(limits.lower[i]), float(limits.upper[i]))
        for i in range(N_JOINTS)
        if low[i] or high[i]
    ]


def load_presets(path=None) -> PosePreset:
    """Load gesture presets and limits from JSON (degrees), or the shipped defaults."""
    if path is None:
        text = resources.files("sonopipe.data").joinpath("poses.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
        limits_deg = payload["limits"]
        poses_deg = payload["poses"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise PoseConfigError(f"malformed pose config: {exc}") from exc

    lower = np.empty(N_JOINTS)
    upper = np.empty(N_JOINTS)
    for i, name in enumerate(JOINT_NAMES):
        if name not in limits_deg:
            raise PoseConfigError(f"limits missing joint {name!r}")
        lo, hi = limits_deg[name]
        lower[i], upper[i] = math.radians(lo), math.radians(hi)
    limits = JointLimits(lower, upper)

    poses = {}
    for label in ALL_GESTURES:
        entry = poses_deg.get(label.wire_name)
        if entry is None:
            raise PoseConfigError(f"poses missing gesture {label.wire_name!r}")
        angles = np.empty(N_JOINTS)
        for i, name in enumerate(JOINT_NAMES):
            if name not in entry:
                raise PoseConfigError(f"pose {label.wire_name!r} missing joint {name!r}")
            angles[i] = math.radians(entry[name])
        poses[label] = JointState(angles)
    return PosePreset(poses=poses, limits=limits)
