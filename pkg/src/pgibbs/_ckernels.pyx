# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; outputs are bit-identical."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t M0 = 0xD2E7470EE14C6C93ULL
cdef uint64_t M1 = 0xCA5A826395121157ULL
cdef uint64_t W0 = 0x9E3779B97F4A7C15ULL
cdef uint64_t W1 = 0xBB67AE8584CAA73BULL
cdef uint64_t LO32 = 0xFFFFFFFFULL


cdef inline void mulhilo(uint64_t a, uint64_t b, uint64_t* hi, uint64_t* lo) noexcept nogil:
    cdef uint64_t a_lo = a & LO32, a_hi = a >> 32
    cdef uint64_t b_lo = b & LO32, b_hi = b >> 32
    cdef uint64_t ll = a_lo * b_lo, lh = a_lo * b_hi, hl = a_hi * b_lo, hh = a_hi * b_hi
    cdef uint64_t mid = (ll >> 32) + (lh & LO32) + (hl & LO32)
    hi[0] = hh + (lh >> 32) + (hl >> 32) + (mid >> 32)
    lo[0] = a * b


def philox4x64(c0, c1, c2, c3, k0, k1):
    arrs = np.broadcast_arrays(*(np.asarray(v, dtype=np.uint64) for v in (c0, c1, c2, c3, k0, k1)))
    shape = arrs[0].shape
    flat = [np.ascontiguousarray(a).ravel() for a in arrs]
    cdef const uint64_t[::1] x0 = flat[0], x1 = flat[1], x2 = flat[2], x3 = flat[3]
    cdef const uint64_t[::1] y0 = flat[4], y1 = flat[5]
    cdef Py_ssize_t n = x0.shape[0], j
    cdef int r
    out = np.empty((4, n), dtype=np.uint64)
    cdef uint64_t[:, ::1] o = out
    cdef uint64_t a0, a1, a2, a3, ka, kb, hi0, lo0, hi1, lo1
    with nogil:
        for j in range(n):
            a0 = x0[j]; a1 = x1[j]; a2 = x2[j]; a3 = x3[j]
            ka = y0[j]; kb = y1[j]
            for r in range(10):
                mulhilo(M0, a0, &hi0, &lo0)
                mulhilo(M1, a2, &hi1, &lo1)
                a0 = hi1 ^ a1 ^ ka
                a1 = lo1
                a2 = hi0 ^ a3 ^ kb
                a3 = lo0
                ka = ka + W0
                kb = kb + W1
            o[0, j] = a0; o[1, j] = a1; o[2, j] = a2; o[3, j] = a3
    return out.reshape((4,) + shape)


def resample_search(weights, u):
    cdef double[:, ::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t B = w.shape[0], N = w.shape[1], M = uu.shape[1]
    out = np.empty((B, M), dtype=np.int64)
    cdef int64_t[:, ::1] o = out
    cum_arr = np.empty(N, dtype=np.float64)
    cdef double[::1] cum = cum_arr
    cdef Py_ssize_t b, i, m, lo, hi, mid, last
    cdef double acc, target
    with nogil:
        for b in range(B):
            acc = 0.0
            last = 0
            for i in range(N):
                acc = acc + w[b, i]
                cum[i] = acc
                if w[b, i] > 0:
                    last = i
            for m in range(M):
                target = uu[b, m] * cum[N - 1]
                # first index with cum > target (searchsorted side='right')
                lo = 0
                hi = N
                while lo < hi:
                    mid = (lo + hi) >> 1
                    if cum[mid] <= target:
                        lo = mid + 1
                    else:
                        hi = mid
                if lo >= N:
                    lo = last
                o[b, m] = lo
    return out


def trace_ancestry(ancestors, final):
    cdef int64_t[:, :, ::1] a = np.ascontiguousarray(ancestors, dtype=np.int64)
    cdef int64_t[::1] f = np.ascontiguousarray(final, dtype=np.int64)
    cdef Py_ssize_t T1 = a.shape[0], B = a.shape[1], t, b
    out = np.empty((T1, B), dtype=np.int64)
    cdef int64_t[:, ::1] o = out
    cdef int64_t cur
    with nogil:
        for b in range(B):
            cur = f[b]
            t = T1 - 1
            while t >= 0:
                o[t, b] = cur
                if t > 0:
                    cur = a[t, b, cur]
                t -= 1
    return out
