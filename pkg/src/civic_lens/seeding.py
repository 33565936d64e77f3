"""Seed derivation.

Every random stream is derived from one root seed and a path of labels
(target name, seed slot, purpose, fold, ...), so any sub-run can be replayed
without re-running the rest.  Mixing uses the splitmix64 finalizer; string
labels are folded in through their CRC-32.
"""
from __future__ import annotations

import zlib

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _label(part) -> int:
    if isinstance(part, bool) or not isinstance(part, int):
        return zlib.crc32(str(part).encode("utf-8"))
    return part & _MASK


def derive_seed(root: int, *parts) -> int:
    """64-bit seed for the stream addressed by ``parts`` under ``root``."""
    state = splitmix64(root & _MASK)
    for part in parts:
        state = splitmix64(state ^ _label(part))
    return state
