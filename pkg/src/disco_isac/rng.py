"""Seeded random streams.

Every Monte Carlo trial owns an independent Philox stream keyed by
``(seed, trial, purpose)``.  The axis point is deliberately *not* part of the
key so that sweeps use common random numbers across axis values.
"""

import zlib

import numpy as np

_PURPOSES = ("geometry", "fading", "dris", "symbols", "noise", "aux")


def _purpose_key(purpose):
    if purpose in _PURPOSES:
        return _PURPOSES.index(purpose)
    return 1000 + zlib.crc32(purpose.encode())


def stream(seed, trial=0, purpose="aux"):
    """Return an independent generator for one (seed, trial, purpose) cell."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(trial), _purpose_key(purpose)])
    return np.random.Generator(np.random.Philox(ss))


class TrialStreams:
    """Lazily created per-purpose generators for a single trial."""

    def __init__(self, seed, trial=0):
        self.seed = int(seed)
        self.trial = int(trial)
        self._cache = {}

    def __getitem__(self, purpose):
        if purpose not in self._cache:
            self._cache[purpose] = stream(self.seed, self.trial, purpose)
        return self._cache[purpose]


def crandn(rng, shape, var=1.0):
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
