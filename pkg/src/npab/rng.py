"""Named, reproducible random streams derived from a single 64-bit seed.

Every consumer of randomness asks for a stream by a path of names, e.g.
``stream(seed, "session", 3, "alice")``. Paths are hashed with CRC-32 into a
``SeedSequence`` spawn key, so the same (seed, path) pair yields the same
PCG64 stream on every platform and in every process.
"""

from __future__ import annotations

import zlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def _key_part(part: str | int) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream path integers must be non-negative, got {part}")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed: int, *path: str | int) -> np.random.Generator:
    """Return the generator for ``path`` under ``seed``.

    String components are hashed, integer components (session indices) are
    used verbatim. Two different paths never share state.
    """
    spawn_key = tuple(_key_part(p) for p in path)
    seq = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=spawn_key)
    return np.random.Generator(np.random.PCG64(seq))


def session_streams(seed: int, session_index: int) -> dict[str, np.random.Generator]:
    """The four per-session streams: alice, bob, eve and sampler."""
    return {
        name: stream(seed, "session", session_index, name)
        for name in ("alice", "bob", "eve", "sampler")
    }
