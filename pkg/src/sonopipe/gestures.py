"""The four hand gestures the pipeline discriminates between.

Ordinals are frozen: they index feature vectors, confusion-matrix rows
and the wire protocol, so they must never be reordered.
"""

from __future__ import annotations

import enum


class GestureLabel(enum.IntEnum):
    REST = 0
    POWER_GRIP = 1
    WRIST_PRONATION = 2
    POINT = 3

    @property
    def wire_name(self) -> str:
        return _WIRE_NAMES[self]

    @classmethod
    def from_wire(cls, name: str) -> "GestureLabel":
        try:
            return _FROM_WIRE[name]
        except KeyError:
            raise ValueError(f"unknown gesture name: {name!r}") from None


_WIRE_NAMES = {
    GestureLabel.REST: "rest",
    GestureLabel.POWER_GRIP: "power_grip",
    GestureLabel.WRIST_PRONATION: "wrist_pronation",
    GestureLabel.POINT: "point",
}

_FROM_WIRE = {name: label for label, name in _WIRE_NAMES.items()}

ALL_GESTURES = tuple(GestureLabel)
