"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` must reproduce them bit for bit.
"""
import numpy as np

PHILOX_M0 = np.uint64(0xD2E7470EE14C6C93)
PHILOX_M1 = np.uint64(0xCA5A826395121157)
PHILOX_W0 = np.uint64(0x9E3779B97F4A7C15)
PHILOX_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def _mulhilo(a, b):
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _LO32) + (hl & _LO32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return hi, a * b


def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64-10 block function on broadcastable uint64 arrays.

    Returns the four output words as a ``(4, ...)`` uint64 array.
    """
    c0, c1, c2, c3, k0, k1 = np.broadcast_arrays(
        *(np.asarray(v, dtype=np.uint64) for v in (c0, c1, c2, c3, k0, k1))
    )
    c0, c1, c2, c3 = (np.array(v, dtype=np.uint64) for v in (c0, c1, c2, c3))
    k0 = np.array(k0, dtype=np.uint64)
    k1 = np.array(k1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for _ in range(10):
            hi0, lo0 = _mulhilo(PHILOX_M0, c0)
            hi1, lo1 = _mulhilo(PHILOX_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
            k0 = k0 + PHILOX_W0
            k1 = k1 + PHILOX_W1
    return np.stack([c0, c1, c2, c3])


def resample_search(weights, u):
    """Inverse-CDF lookup, row by row.

    ``weights`` is ``(B, N)`` nonnegative (unnormalized), ``u`` is ``(B, M)`` in (0, 1).
    Returns 0-based indices ``(B, M)``; never selects a zero-weight slot.
    """
    weights = np.asarray(weights, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    B, N = weights.shape
    out = np.empty(u.shape, dtype=np.int64)
    for b in range(B):
        cum = np.cumsum(weights[b])
        idx = np.searchsorted(cum, u[b] * cum[-1], side="right")
        over = idx >= N
        if over.any():
            idx[over] = np.flatnonzero(weights[b] > 0)[-1]
        out[b] = idx
    return out


def trace_ancestry(ancestors, final):
    """Backward ancestor tracing.

    ``ancestors`` is ``(T+1, B, N)`` with 0-based parents (row 0 unused),
    ``final`` is ``(B,)``. Returns ``(T+1, B)`` particle indices of the lineage.
    """
    ancestors = np.asarray(ancestors, dtype=np.int64)
    T1, B, _ = ancestors.shape
    out = np.empty((T1, B), dtype=np.int64)
    cur = np.asarray(final, dtype=np.int64).copy()
    rows = np.arange(B)
    for t in range(T1 - 1, -1, -1):
        out[t] = cur
        if t > 0:
            cur = ancestors[t, rows, cur]
    return out
