"""Counter-based random streams.

Every variate is a pure function of ``(seed, stream, iteration, t, particle, purpose, lane)``
via the Philox4x64-10 block cipher, so a particle's randomness does not depend on
how work is scheduled across threads or how many other particles exist.
"""
from enum import IntEnum

import numpy as np
from scipy.special import ndtri

from . import kernels

_MASK64 = (1 << 64) - 1
_TWO_M52 = 2.0**-52


class Purpose(IntEnum):
    INIT = 0
    RESAMPLE = 1
    PROPOSE = 2
    SELECT = 3
    STATE = 4
    OBSERVE = 5
    AUX = 6


def to_unit(raw):
    """Map uint64 words to doubles strictly inside (0, 1) (52-bit midpoints, so 1 is never hit)."""
    return ((raw >> np.uint64(12)).astype(np.float64) + 0.5) * _TWO_M52


class Streams:
    """A family of keyed streams, one per batch row.

    ``seed`` keys the whole run; ``stream_ids`` (one per batch row, e.g. one per chain)
    and ``iteration`` select independent sub-streams.
    """

    def __init__(self, seed, stream_ids=(0,), iteration=0):
        self.seed = int(seed) & _MASK64
        self.stream_ids = np.atleast_1d(np.asarray(stream_ids, dtype=np.uint64))
        self.iteration = int(iteration) & _MASK64

    @property
    def batch(self):
        return self.stream_ids.shape[0]

    def at_iteration(self, iteration):
        return Streams(self.seed, self.stream_ids, iteration)

    def subset(self, rows):
        return Streams(self.seed, self.stream_ids[rows], self.iteration)

    def raw(self, t, purpose, idx, block):
        """Four uint64 words per (row, particle): shape ``(4, B, len(idx))``."""
        idx = np.asarray(idx, dtype=np.uint64)[None, :]
        k1 = self.stream_ids[:, None]
        c3 = (int(purpose) << 32) | (int(block) & 0xFFFFFFFF)
        return kernels.philox4x64(self.iteration, int(t), idx, c3, self.seed, k1)

    def draws(self, t, purpose, idx):
        return Draws(self, t, purpose, idx)

    def uniforms(self, t, purpose, idx, lane=0):
        return self.draws(t, purpose, idx).skip(lane).uniform()


class Draws:
    """Successive per-particle variates for one (t, purpose) slot.

    Each call to :meth:`uniform` or :meth:`normal` consumes one lane and returns an
    array of shape ``(B, n)``.
    """

    def __init__(self, streams, t, purpose, idx):
        self._streams = streams
        self._t = t
        self._purpose = purpose
        self._idx = np.asarray(idx)
        self._lane = 0
        self._block = -1
        self._words = None

    @property
    def shape(self):
        return (self._streams.batch, self._idx.shape[0])

    def skip(self, n):
        self._lane += n
        return self

    def _next_words(self):
        block, lane = divmod(self._lane, 4)
        if block != self._block:
            self._words = self._streams.raw(self._t, self._purpose, self._idx, block)
            self._block = block
        self._lane += 1
        return self._words[lane]

    def uniform(self):
        return to_unit(self._next_words())

    def normal(self):
        return ndtri(self.uniform())

    def categorical(self, probs):
        """Inverse-CDF draw from per-particle probability rows ``probs[..., K]``."""
        u = self.uniform()
        cum = np.cumsum(probs, axis=-1)
        k = (u[..., None] * cum[..., -1:] >= cum).sum(axis=-1)
        return np.minimum(k, probs.shape[-1] - 1)
