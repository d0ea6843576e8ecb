# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the set kernels in :mod:`cellkit._kernels_py`."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def sumset(a, b):
    cdef cnp.uint8_t[::1] av = np.ascontiguousarray(a, dtype=np.uint8)
    cdef cnp.uint8_t[::1] bv = np.ascontiguousarray(b, dtype=np.uint8)
    cdef Py_ssize_t m = av.shape[0]
    out = np.zeros(m, dtype=np.uint8)
    cdef cnp.uint8_t[::1] ov = out
    cdef cnp.int64_t[::1] ia = np.flatnonzero(av).astype(np.int64)
    cdef cnp.int64_t[::1] ib = np.flatnonzero(bv).astype(np.int64)
    cdef Py_ssize_t i, j, na = ia.shape[0], nb = ib.shape[0]
    cdef Py_ssize_t x, s, filled = 0
    for i in range(na):
        x = ia[i]
        for j in range(nb):
            s = x + ib[j]
            if s >= m:
                s -= m
            if not ov[s]:
                ov[s] = 1
                filled += 1
        if filled == m:
            break
    return out


def periods(mask):
    cdef cnp.uint8_t[::1] mv = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t m = mv.shape[0]
    out = np.zeros(m, dtype=np.uint8)
    cdef cnp.uint8_t[::1] ov = out
    cdef Py_ssize_t e, x, y
    cdef bint ok
    for e in range(m):
        ok = True
        for x in range(m):
            y = x - e
            if y < 0:
                y += m
            if mv[x] != mv[y]:
                ok = False
                break
        if ok:
            ov[e] = 1
    return out


def translate(mask, shift):
    return np.roll(np.asarray(mask, dtype=np.uint8), int(shift))
