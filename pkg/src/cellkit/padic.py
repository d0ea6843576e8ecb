"""Precision-tracked p-adic numbers.

A nonzero :class:`PadicNumber` is ``p**val * u`` where ``u`` is a unit known
modulo ``p**prec``.  The absolute precision ``val + prec`` is the position of
the first unknown digit.  Arithmetic never reports digits it cannot prove.

Two kinds of zero exist: the exact zero (``val = INFINITY``) and a value that
cancelled down to ``O(p^A)``, i.e. only known to lie in ``p^A Z_p``.  The
latter has no valuation and asking for one raises
:class:`~cellkit.errors.InsufficientPrecision`.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Union

from .errors import DivisionByZero, InsufficientPrecision, ZeroArgument

INFINITY = math.inf
DEFAULT_PREC = 20

Rational = Union[int, Fraction]


def vp(x: Rational, p: int) -> float:
    """p-adic valuation of an exact rational; ``INFINITY`` for zero."""
    if x == 0:
        return INFINITY
    x = Fraction(x)
    num, den = x.numerator, x.denominator
    v = 0
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def _split(x: Fraction, p: int):
    """Return ``(v, num, den)`` with ``x = p**v * num / den`` and p ∤ num·den."""
    num, den = x.numerator, x.denominator
    v = 0
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v, num, den


class PadicNumber:
    __slots__ = ("_p", "_val", "_unit", "_prec")

    def __init__(self, p: int, val, unit: int, prec: int):
        if prec < 0:
            raise ValueError("negative precision")
        if val == INFINITY:
            if unit != 0 or prec != 0:
                raise ValueError("exact zero carries no digits")
        elif prec == 0:
            if unit != 0:
                raise ValueError("O(p^A) carries no digits")
            val = int(val)
        else:
            val = int(val)
            unit %= p**prec
            if unit % p == 0:
                raise ValueError("leading digit must be nonzero")
        self._p = p
        self._val = val
        self._unit = unit
        self._prec = prec

    # construction -----------------------------------------------------------
    @classmethod
    def zero(cls, p: int) -> "PadicNumber":
        return cls(p, INFINITY, 0, 0)

    @classmethod
    def from_rational(cls, p: int, x: Rational, prec: int = DEFAULT_PREC) -> "PadicNumber":
        """Embed an exact rational keeping ``prec`` significant digits."""
        x = Fraction(x)
        if x == 0:
            return cls.zero(p)
        if prec < 1:
            raise ValueError("prec must be >= 1 for a nonzero value")
        v, num, den = _split(x, p)
        mod = p**prec
        return cls(p, v, num * pow(den, -1, mod) % mod, prec)

    @classmethod
    def from_digits(cls, p: int, val: int, digits) -> "PadicNumber":
        digits = list(digits)
        if not digits:
            raise ValueError("empty digit word; use zero() for zero")
        if digits[0] == 0:
            raise ValueError("leading digit must be nonzero")
        if any(not 0 <= d < p for d in digits):
            raise ValueError(f"digits must lie in 0..{p - 1}")
        unit = sum(d * p**i for i, d in enumerate(digits))
        return cls(p, val, unit, len(digits))

    @classmethod
    def from_absolute(cls, p: int, x: Rational, absprec: int) -> "PadicNumber":
        """Embed ``x`` known modulo ``p**absprec`` (O(p^absprec) if it vanishes)."""
        x = Fraction(x)
        v = vp(x, p)
        if v >= absprec:
            return cls(p, absprec, 0, 0)
        return cls.from_rational(p, x, absprec - v)

    @classmethod
    def uniformizer(cls, p: int, power: int = 1) -> "PadicNumber":
        """The fixed element of valuation ``power`` with digit word ``[1]``."""
        return cls(p, power, 1, 1)

    # accessors --------------------------------------------------------------
    @property
    def p(self) -> int:
        return self._p

    @property
    def val(self):
        return self._val

    @property
    def prec(self) -> int:
        return self._prec

    @property
    def unit(self) -> int:
        return self._unit

    @property
    def digits(self) -> tuple:
        out = []
        u = self._unit
        for _ in range(self._prec):
            u, d = divmod(u, self._p)
            out.append(d)
        return tuple(out)

    @property
    def absprec(self):
        """Absolute precision: the first digit position that is unknown."""
        if self.is_zero():
            return INFINITY
        return self._val + self._prec

    def is_zero(self) -> bool:
        return self._val == INFINITY

    def is_inexact_zero(self) -> bool:
        return self._prec == 0 and self._val != INFINITY

    def to_fraction(self) -> Fraction:
        """The rational with exactly the known digits (zero for both zeros)."""
        if self._prec == 0:
            return Fraction(0)
        return Fraction(self._p) ** self._val * self._unit

    def truncate(self, absprec: int) -> "PadicNumber":
        """Forget every digit at absolute position ``>= absprec``."""
        if self.is_zero():
            return PadicNumber(self._p, absprec, 0, 0)
        if absprec >= self.absprec:
            return self
        return PadicNumber.from_absolute(self._p, self.to_fraction(), absprec)

    # arithmetic -------------------------------------------------------------
    def _check(self, other, absolute=False):
        if isinstance(other, (int, Fraction)):
            if absolute:
                a = self.absprec if self.absprec != INFINITY else DEFAULT_PREC
                other = PadicNumber.from_absolute(self._p, other, a)
            else:
                other = PadicNumber.from_rational(self._p, other, max(self._prec, 1))
        if not isinstance(other, PadicNumber):
            return NotImplemented
        if other._p != self._p:
            raise ValueError(f"mixed primes {self._p} and {other._p}")
        return other

    def __neg__(self) -> "PadicNumber":
        if self._prec == 0:
            return self
        return PadicNumber(self._p, self._val, -self._unit, self._prec)

    def __add__(self, other):
        other = self._check(other, absolute=True)
        if other is NotImplemented:
            return other
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        p = self._p
        absprec = min(self.absprec, other.absprec)
        total = self.to_fraction() + other.to_fraction()
        return PadicNumber.from_absolute(p, total, absprec)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._check(other, absolute=True)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._check(other, absolute=True)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        p = self._p
        if self.is_zero() or other.is_zero():
            return PadicNumber.zero(p)
        if self.is_inexact_zero() or other.is_inexact_zero():
            # p^a Z_p * (p^v u) is only known to lie in p^(a+v) Z_p
            return PadicNumber(p, self._val + other._val, 0, 0)
        prec = min(self._prec, other._prec)
        return PadicNumber(p, self._val + other._val, self._unit * other._unit, prec)

    __rmul__ = __mul__

    def inverse(self) -> "PadicNumber":
        if self.is_zero():
            raise DivisionByZero("inverse of zero")
        if self.is_inexact_zero():
            raise InsufficientPrecision(f"cannot invert {self}")
        mod = self._p**self._prec
        return PadicNumber(self._p, -self._val, pow(self._unit, -1, mod), self._prec)

    def __truediv__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def div_by_integer(self, r: int) -> "PadicNumber":
        """Exact quotient by a nonzero integer.

        The valuation drops by ``ord_p(r)``; the relative precision is kept, so
        the absolute precision drops by the same amount.
        """
        if r == 0:
            raise DivisionByZero("division by the integer 0")
        if self.is_zero():
            return self
        v, u, _ = _split(Fraction(r), self._p)
        if self.is_inexact_zero():
            return PadicNumber(self._p, self._val - v, 0, 0)
        mod = self._p**self._prec
        return PadicNumber(self._p, self._val - v, self._unit * pow(u, -1, mod), self._prec)

    # comparison / hashing ---------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, PadicNumber):
            return NotImplemented
        return (self._p, self._val, self._unit, self._prec) == (
            other._p, other._val, other._unit, other._prec)

    def __hash__(self):
        return hash((self._p, self._val, self._unit, self._prec))

    def agrees_with(self, other: "PadicNumber") -> bool:
        """True if both values coincide up to the smaller absolute precision."""
        a = min(self.absprec, other.absprec)
        if a == INFINITY:
            return True
        x = self.to_fraction() - other.to_fraction()
        return vp(x, self._p) >= a

    # text form --------------------------------------------------------------
    def __str__(self):
        if self.is_zero():
            return "0"
        if self.is_inexact_zero():
            return f"O(p^{self._val})"
        return f"p^{self._val} * ({','.join(map(str, self.digits))})"

    def __repr__(self):
        return f"PadicNumber(p={self._p}, {self})"


_TEXT = re.compile(r"^\s*p\s*\^\s*(-?\d+)\s*\*\s*\(\s*([\d\s,]*)\)\s*$")
_OTEXT = re.compile(r"^\s*O\s*\(\s*p\s*\^\s*(-?\d+)\s*\)\s*$")


def parse_padic(text: str, p: int, prec: int = DEFAULT_PREC) -> PadicNumber:
    """Parse ``p^<val> * (d0,d1,...)``, ``0``, ``O(p^A)`` or a rational ``a/b``.

    Rationals are embedded with ``prec`` significant digits.
    """
    text = str(text).strip()
    if text == "0":
        return PadicNumber.zero(p)
    m = _TEXT.match(text)
    if m:
        digits = [int(d) for d in m.group(2).replace(" ", "").split(",") if d != ""]
        return PadicNumber.from_digits(p, int(m.group(1)), digits)
    m = _OTEXT.match(text)
    if m:
        return PadicNumber(p, int(m.group(1)), 0, 0)
    try:
        x = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a p-adic number: {text!r}") from None
    return PadicNumber.from_rational(p, x, prec)


def ord_(x: PadicNumber):
    """Valuation; ``INFINITY`` for the exact zero."""
    if x.is_inexact_zero():
        raise InsufficientPrecision(f"valuation of {x} is only bounded below")
    return x.val


def ac(x: PadicNumber, m: int) -> int:
    """Angular component: the first ``m`` digits of the unit part as an integer."""
    if x.is_zero():
        raise ZeroArgument("ac of zero")
    if x.prec < m:
        raise InsufficientPrecision(f"ac_{m} needs {m} digits, {x} has {x.prec}")
    return x.unit % x.p**m


def in_lambda_Qnm(x: PadicNumber, lam: PadicNumber, n: int, m: int) -> bool:
    """Membership ``x in lam * Q_{n,m}``.

    ``Q_{n,m}`` is the subgroup of elements with valuation in ``nZ`` and
    ``ac_m = 1``.
    """
    if x.is_zero() or lam.is_zero():
        raise ZeroArgument("Q_{n,m} membership of zero")
    y = x / lam
    return ord_(y) % n == 0 and ac(y, m) == 1
