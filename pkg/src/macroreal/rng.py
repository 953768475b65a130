"""Counter-based random streams.

Every uniform variate is a pure function of (seed, stream, row, column): the Philox
counter for row ``r`` starts at ``r * ceil(per_row / 4)`` under key ``(seed, stream)``.
Any partition of rows into chunks or workers therefore reproduces the same numbers.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

STREAM_QUANTUM = 0
STREAM_PHOTON = 1
STREAM_CLASSICAL = 2
STREAM_BOOTSTRAP = 3

_WORDS_PER_COUNTER = 4  # Philox4x64 emits four 64-bit words per counter value


def _key(seed: int, stream: int) -> int:
    if not (0 <= int(seed) < 2**64):
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return (int(stream) << 64) | int(seed)


def uniform_rows(seed: int, stream: int, start: int, count: int, per_row: int) -> np.ndarray:
    """Uniforms on [0, 1) for rows ``start .. start+count-1``, shape (count, per_row)."""
    steps = -(-per_row // _WORDS_PER_COUNTER)
    bitgen = np.random.Philox(key=_key(seed, stream))
    if start:
        bitgen.advance(start * steps)
    draws = np.random.Generator(bitgen).random((count, steps * _WORDS_PER_COUNTER))
    return draws[:, :per_row]


def generator(seed: int, stream: int) -> np.random.Generator:
    """Ordinary sequential generator keyed on (seed, stream)."""
    return np.random.Generator(np.random.Philox(key=_key(seed, stream)))


def chunk_bounds(total: int, chunk: int):
    """Consecutive (start, stop) row ranges covering ``total`` rows."""
    for start in range(0, total, chunk):
        yield start, min(total, start + chunk)
