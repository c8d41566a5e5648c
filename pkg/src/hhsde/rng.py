"""Reproducible random streams: PCG64 plus a splitmix-style path mixer.

Every path gets its own generator seeded as mix(root_seed, path_index), so
Monte Carlo results do not depend on block sizes or thread counts.  Normal
variates come from an explicit Box-Muller transform over uniforms, which
pins the exact byte stream independently of library internals.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """One step of the splitmix64 mixer; returns a well-mixed 64-bit word."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def stream_seed(root_seed: int, path_index: int) -> int:
    """Derive the seed of one path's stream from the root seed and index."""
    mixed = splitmix64((root_seed & _MASK) ^ splitmix64(path_index & _MASK))
    return mixed


class NormalStream:
    """Box-Muller normals drawn from a per-path PCG64 generator.

    Pairs are generated together and the spare half carried over, so the
    emitted sequence is independent of how requests are chunked.
    """

    def __init__(self, root_seed: int, path_index: int = 0):
        self.seed = stream_seed(root_seed, path_index)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self._spare: float | None = None

    def draw(self, n: int) -> np.ndarray:
        out = np.empty(n)
        k = 0
        if self._spare is not None and n > 0:
            out[0] = self._spare
            self._spare = None
            k = 1
        pairs = (n - k + 1) // 2
        if pairs:
            u1 = self._gen.random(pairs)
            u2 = self._gen.random(pairs)
            r = np.sqrt(-2.0 * np.log1p(-u1))
            z1 = r * np.cos(2.0 * math.pi * u2)
            z2 = r * np.sin(2.0 * math.pi * u2)
            inter = np.empty(2 * pairs)
            inter[0::2] = z1
            inter[1::2] = z2
            take = n - k
            out[k:] = inter[:take]
            if take < 2 * pairs:
                self._spare = float(inter[take])
        return out
