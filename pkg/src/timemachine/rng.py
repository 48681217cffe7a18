"""Counter-based random streams.

Every replicate owns a 64-bit key derived from the master seed and its
coordinates (mu index, stopping level index, repeat, replicate). Draw
number ``c`` of a stream is ``splitmix64(key + (c + 1) * GOLDEN)``, so any
draw can be computed without touching the others. The scalar
:class:`CounterStream` and the vectorised :func:`uniforms` produce the
same bits.
"""

from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_SCALE = 2.0**-53


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * _M1) & MASK
    z = ((z ^ (z >> 27)) * _M2) & MASK
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    # wraparound is the intended mod-2^64 arithmetic
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def derive_key(master: int, *coords: int) -> int:
    """Fold integer coordinates into a stream key."""
    key = mix64(master & MASK)
    for c in coords:
        key = mix64(key ^ mix64((c + 1) * GOLDEN))
    return key


def derive_keys(base: int, indices: np.ndarray) -> np.ndarray:
    """Vectorised ``derive_key(..., index)`` for one trailing coordinate.

    ``derive_keys(derive_key(m, a, b), r)[k] == derive_key(m, a, b, r[k])``.
    """
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        inner = mix64_array((idx + np.uint64(1)) * np.uint64(GOLDEN))
        return mix64_array(np.uint64(base) ^ inner)


def uniforms(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Draw ``counters[k]`` of stream ``keys[k]`` as a double in [0, 1)."""
    keys = np.asarray(keys, dtype=np.uint64)
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = mix64_array(keys + (c + np.uint64(1)) * np.uint64(GOLDEN))
    return (z >> np.uint64(11)).astype(np.float64) * _SCALE


class CounterStream:
    """Sequential view of one counter-based stream.

    Exposes ``random()`` like :class:`numpy.random.Generator`, so it can be
    passed wherever the simulator expects a random stream.
    """

    def __init__(self, key: int, counter: int = 0):
        self.key = key & MASK
        self.counter = counter

    @classmethod
    def from_seed(cls, master: int, *coords: int) -> "CounterStream":
        return cls(derive_key(master, *coords))

    def random(self) -> float:
        z = mix64((self.key + (self.counter + 1) * GOLDEN) & MASK)
        self.counter += 1
        return (z >> 11) * _SCALE

    def __repr__(self):
        return f"CounterStream(key={self.key:#018x}, counter={self.counter})"
