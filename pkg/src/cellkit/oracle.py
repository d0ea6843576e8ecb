"""Brute-force engine over finite quotients of ``p**lo Z_p``.

A :class:`QuotientWindow` fixes a prime ``p``, a lowest valuation ``lo``, a
valuation bound ``hi`` and a precision ``N``.  Points are the cosets of
``p**N Z_p`` inside ``p**lo Z_p``; the coset of ``x`` is identified with the
integer code ``r = x / p**lo mod p**(N - lo)``.  Every set computed by the
other modules is a boolean mask over these codes, so set identities reduce to
array comparisons.

The *region* of a window is the enumerated set: cosets with valuation in
``[lo, hi)`` together with the zero class ``p**N Z_p``.  With ``hi == N`` the
region is the whole universe.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import BudgetExceeded, InsufficientPrecision, WindowMismatch, WindowTooSmall
from .padic import PadicNumber, vp

DEFAULT_BUDGET = 10**6
MAX_WITNESSES = 10


def budget() -> int:
    env = os.environ.get("CELLKIT_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


@dataclass
class Verdict:
    """Boolean outcome with an optional witness; truthy iff ``ok``."""

    ok: bool
    witness: object = None
    detail: str = ""

    def __bool__(self):
        return bool(self.ok)


@dataclass(frozen=True)
class QuotientWindow:
    p: int
    lo: int
    hi: int
    N: int

    def __post_init__(self):
        if self.p < 2 or any(self.p % q == 0 for q in range(2, int(self.p**0.5) + 1)):
            raise ValueError(f"{self.p} is not prime")
        if not self.lo <= self.hi <= self.N:
            raise ValueError(f"need lo <= hi <= N, got {self.lo}, {self.hi}, {self.N}")

    @property
    def modulus(self) -> int:
        return self.p ** (self.N - self.lo)

    def size(self) -> int:
        """Number of enumerated cosets (region), by the closed form."""
        p, N = self.p, self.N
        return sum((p - 1) * p ** (N - v - 1) for v in range(self.lo, self.hi)) + 1

    def check_budget(self, limit: Optional[int] = None):
        limit = budget() if limit is None else limit
        n = max(self.size(), self.modulus)
        if n > limit:
            raise BudgetExceeded(n, limit)

    def with_precision(self, N: int) -> "QuotientWindow":
        hi = N if self.hi == self.N else min(self.hi, N)
        return QuotientWindow(self.p, self.lo, hi, N)

    def shifted(self, v: int) -> "QuotientWindow":
        """The window for ``p**-v`` times this universe (same modulus)."""
        return QuotientWindow(self.p, self.lo - v, self.hi - v, self.N - v)

    # code arithmetic --------------------------------------------------------
    def codes(self) -> np.ndarray:
        return np.arange(self.modulus, dtype=np.int64)

    def code_valuations(self) -> np.ndarray:
        """Valuation of each coset; ``N`` stands for the zero class."""
        m = self.modulus
        r = self.codes()
        out = np.full(m, self.N, dtype=np.int64)
        nz = r != 0
        v = np.zeros(m, dtype=np.int64)
        rr = r.copy()
        for k in range(self.N - self.lo):
            step = nz & (rr % self.p == 0)
            v[step] += 1
            rr[step] //= self.p
        out[nz] = self.lo + v[nz]
        return out

    def unit_parts(self) -> np.ndarray:
        """``r / p**vp(r)`` for each nonzero code (0 for the zero code)."""
        r = self.codes()
        rr = r.copy()
        nz = r != 0
        for _ in range(self.N - self.lo):
            step = nz & (rr % self.p == 0)
            rr[step] //= self.p
        rr[~nz] = 0
        return rr

    def code_of(self, x) -> int:
        """Code of the coset containing ``x`` (PadicNumber or rational)."""
        if isinstance(x, PadicNumber):
            if x.is_zero():
                return 0
            if x.absprec < self.N:
                raise InsufficientPrecision(
                    f"{x} is known to absolute precision {x.absprec} < N={self.N}")
            f = x.to_fraction()
        else:
            f = Fraction(x)
        if f == 0:
            return 0
        v = vp(f, self.p)
        if v < self.lo:
            raise WindowTooSmall(f"element of valuation {v} below lo={self.lo}")
        y = f / Fraction(self.p) ** self.lo
        return y.numerator * pow(y.denominator, -1, self.modulus) % self.modulus

    def element(self, code: int) -> PadicNumber:
        """Canonical representative of a coset at absolute precision ``N``."""
        code = int(code) % self.modulus
        if code == 0:
            return PadicNumber.zero(self.p)
        return PadicNumber.from_absolute(self.p, Fraction(self.p) ** self.lo * code, self.N)

    def text(self, code: int) -> str:
        """Canonical text: digits up to position ``N`` with trailing zeros."""
        code = int(code) % self.modulus
        if code == 0:
            return "0"
        v = 0
        while code % self.p == 0:
            code //= self.p
            v += 1
        digits = []
        for _ in range(self.N - self.lo - v):
            code, d = divmod(code, self.p)
            digits.append(d)
        return f"p^{self.lo + v} * ({','.join(map(str, digits))})"

    def ball_mask(self, center, radius: int) -> np.ndarray:
        """Mask of the ball ``{x : ord(x - center) >= radius}``."""
        if radius < self.lo:
            raise WindowTooSmall(f"ball of radius {radius} exceeds p^{self.lo} Z_p")
        if radius > self.N:
            raise InsufficientPrecision(f"ball radius {radius} finer than N={self.N}")
        if isinstance(center, PadicNumber) and not center.is_zero():
            if center.absprec < radius:
                raise InsufficientPrecision(f"center {center} unknown at radius {radius}")
            center = center.to_fraction()
        c = self.code_of(center) if center != 0 else 0
        step = self.p ** (radius - self.lo)
        mask = np.zeros(self.modulus, dtype=np.uint8)
        mask[c % step::step] = 1
        return mask

    def region_mask(self) -> np.ndarray:
        vals = self.code_valuations()
        return ((vals < self.hi) | (vals >= self.N)).astype(np.uint8)


class QuotientSet:
    """Immutable set of cosets of a window."""

    __slots__ = ("window", "_mask")

    def __init__(self, window: QuotientWindow, mask):
        mask = np.ascontiguousarray(mask, dtype=np.uint8)
        if mask.shape != (window.modulus,):
            raise ValueError("mask length does not match window")
        mask.flags.writeable = False
        self.window = window
        self._mask = mask

    @classmethod
    def empty(cls, window):
        return cls(window, np.zeros(window.modulus, dtype=np.uint8))

    @classmethod
    def from_codes(cls, window, codes):
        mask = np.zeros(window.modulus, dtype=np.uint8)
        mask[np.asarray(list(codes), dtype=np.int64) % window.modulus] = 1
        return cls(window, mask)

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    def codes(self) -> np.ndarray:
        return np.flatnonzero(self._mask)

    def __len__(self):
        return int(self._mask.sum())

    def __bool__(self):
        return bool(self._mask.any())

    def __contains__(self, code):
        return bool(self._mask[int(code) % self.window.modulus])

    def _same(self, other):
        if not isinstance(other, QuotientSet):
            raise TypeError("expected QuotientSet")
        if other.window != self.window:
            raise WindowMismatch(f"{self.window} vs {other.window}")

    def __or__(self, other):
        self._same(other)
        return QuotientSet(self.window, self._mask | other._mask)

    def __and__(self, other):
        self._same(other)
        return QuotientSet(self.window, self._mask & other._mask)

    def __sub__(self, other):
        self._same(other)
        return QuotientSet(self.window, self._mask & (1 - other._mask))

    def __eq__(self, other):
        if not isinstance(other, QuotientSet):
            return NotImplemented
        return self.window == other.window and np.array_equal(self._mask, other._mask)

    def __hash__(self):
        return hash((self.window, self._mask.tobytes()))

    def issubset(self, other) -> bool:
        self._same(other)
        return not (self._mask & (1 - other._mask)).any()

    def isdisjoint(self, other) -> bool:
        self._same(other)
        return not (self._mask & other._mask).any()

    def texts(self) -> list:
        return [self.window.text(c) for c in self.codes()]

    def in_region(self) -> bool:
        return not (self._mask & (1 - self.window.region_mask())).any()

    def require_in_region(self):
        if not self.in_region():
            bad = np.flatnonzero(self._mask & (1 - self.window.region_mask()))
            raise WindowTooSmall(
                f"set reaches valuation >= hi={self.window.hi}, e.g. {self.window.text(bad[0])}")

    def lift(self, N: int) -> "QuotientSet":
        """Preimage under reduction from precision ``N`` to this precision."""
        w2 = self.window.with_precision(N)
        reps = w2.modulus // self.window.modulus
        return QuotientSet(w2, np.tile(self._mask, reps))

    def project(self, N: int) -> "QuotientSet":
        """Image under reduction to the coarser precision ``N``."""
        w2 = self.window.with_precision(N)
        m2 = w2.modulus
        return QuotientSet(w2, self._mask.reshape(-1, m2).any(axis=0))

    def balls(self):
        """Coarsest decomposition into disjoint balls: list of ``(radius, code)``."""
        w = self.window
        remaining = self._mask.copy()
        out = []
        for radius in range(w.lo, w.N + 1):
            step = w.p ** (radius - w.lo)
            full = remaining.reshape(-1, step).all(axis=0)
            for c in np.flatnonzero(full):
                out.append((radius, int(c)))
                remaining[c::step] = 0
        return out

    def ball_texts(self) -> list:
        return [{"center": self.window.text(c), "radius": r} for r, c in self.balls()]

    def __repr__(self):
        return f"QuotientSet({self.window}, {len(self)} cosets)"


def enumerate_window(window: QuotientWindow, limit: Optional[int] = None) -> QuotientSet:
    """All cosets with valuation in ``[lo, hi)`` plus the zero class."""
    window.check_budget(limit)
    return QuotientSet(window, window.region_mask())


def set_equal(a: QuotientSet, b: QuotientSet) -> Verdict:
    """Equality with up to ten symmetric-difference witnesses."""
    a._same(b)
    diff = np.flatnonzero(a.mask ^ b.mask)
    if diff.size == 0:
        return Verdict(True)
    wit = [(a.window.text(c), "left" if a.mask[c] else "right") for c in diff[:MAX_WITNESSES]]
    return Verdict(False, wit, f"{diff.size} cosets differ")


def stability_check(evaluator: Callable[[QuotientWindow], QuotientSet],
                    window: QuotientWindow) -> Verdict:
    """Recompute at ``N + 1`` and compare with the lift of the ``N`` result.

    Agreement means membership is constant on cosets mod ``p**N``; it implies
    that the projection of the finer set equals the coarser one.
    """
    coarse = evaluator(window)
    fine = evaluator(window.with_precision(window.N + 1))
    lifted = coarse.lift(window.N + 1)
    v = set_equal(fine, lifted)
    if v:
        if not set_equal(fine.project(window.N), coarse):
            return Verdict(False, None, "projection mismatch")
        return Verdict(True)
    return Verdict(False, v.witness, f"unstable between N={window.N} and N={window.N + 1}: " + v.detail)


def select(window: QuotientWindow, predicate: Callable[[PadicNumber], bool]) -> QuotientSet:
    """Cosets whose canonical representative satisfies ``predicate``.

    Canonical representatives pad unknown digits with zeros, so this is the
    naive evaluator that :func:`stability_check` is meant to audit.
    """
    window.check_budget()
    mask = np.zeros(window.modulus, dtype=np.uint8)
    for c in range(window.modulus):
        x = window.element(c)
        if not x.is_zero():
            x = PadicNumber.from_rational(window.p, x.to_fraction(), window.N - x.val + 8)
        if predicate(x):
            mask[c] = 1
    return QuotientSet(window, mask)
