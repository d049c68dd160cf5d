"""Seedable, portable random streams for the synthetic generator.

All randomness is drawn from the Philox 4x64 counter-based generator so
that every draw is a pure function of (seed, stream tag, position). The
transforms from raw 64-bit words to floats are spelled out here rather
than delegated to library distributions, which keeps the byte streams
reproducible and easy to reimplement elsewhere:

  uniform      u = (word >> 11) * 2**-53            in [0, 1)
  exponential  e = -ln(1 - u)                       rate 1
  gaussian     Box-Muller on uniform pairs:
               z0 = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)
               z1 = sqrt(-2 ln(1 - u1)) * sin(2 pi u2)

A stream is keyed by the 2x64-bit Philox key: key[0] is the user seed,
key[1] is a 64-bit FNV-1a hash of the tag tuple, so distinct tags give
independent, non-overlapping streams.
"""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _tag_hash(tags: tuple) -> int:
    h = _FNV_OFFSET
    for tag in tags:
        data = str(tag).encode("utf-8") + b"\x1f"
        for byte in data:
            h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


class Stream:
    """One independent random stream identified by (seed, *tags)."""

    def __init__(self, seed: int, *tags):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed)
        self.tags = tags
        key = np.array([self.seed & _MASK64, _tag_hash(tags)], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)

    def raw(self, n: int) -> np.ndarray:
        return self._bitgen.random_raw(n)

    def uniforms(self, n: int) -> np.ndarray:
        return (self.raw(n) >> np.uint64(11)) * (2.0**-53)

    def exponentials(self, n: int) -> np.ndarray:
        return -np.log1p(-self.uniforms(n))

    def gaussians(self, n: int) -> np.ndarray:
        m = (n + 1) // 2
        u1 = self.uniforms(m)
        u2 = self.uniforms(m)
        radius = np.sqrt(-2.0 * np.log1p(-u1))
        angle = 2.0 * np.pi * u2
        z = np.empty(2 * m)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return z[:n]


def stream(seed: int, *tags) -> Stream:
    return Stream(seed, *tags)
