"""Pure numpy implementations of the hot set kernels.

Masks are ``uint8`` arrays of length ``M`` indexed by coset code; a code ``r``
stands for the coset ``p**lo * r + p**N Z_p``.  Addition of cosets is addition
of codes modulo ``M``.
"""
import numpy as np


def sumset(a, b):
    """Minkowski sum ``{x + y mod M : a[x], b[y]}`` of two masks."""
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    out = np.zeros(a.shape[0], dtype=np.uint8)
    ia = np.flatnonzero(a)
    ib = np.flatnonzero(b)
    if ia.size == 0 or ib.size == 0:
        return out
    if ia.size < ib.size:
        a, ib = b, ia
    for y in ib:
        out |= np.roll(a, int(y))
    return out


def periods(mask):
    """Mask of all shifts ``e`` with ``mask[x - e] == mask[x]`` for every ``x``."""
    mask = np.asarray(mask, dtype=np.uint8)
    m = mask.shape[0]
    out = np.zeros(m, dtype=np.uint8)
    for e in range(m):
        if np.array_equal(np.roll(mask, e), mask):
            out[e] = 1
    return out


def translate(mask, shift):
    """``{x + shift mod M : mask[x]}``."""
    return np.roll(np.asarray(mask, dtype=np.uint8), int(shift))
