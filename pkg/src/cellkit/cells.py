"""Cell conditions, classical and clustered cells, and their fibers.

A condition only ever looks at ``t - c``.  On a quotient window the set of
admissible differences ``D(s)`` is a mask, the fiber of a clustered cell is
the Minkowski sum ``Sigma_s + D(s)`` and the fiber of a classical cell is the
translate ``c(s) + D(s)``.  Two centers are equivalent exactly when they give
the same fiber, i.e. when their difference is a period of ``D(s)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from . import kernels
from .errors import (
    ClassesNotBalls,
    InsufficientPrecision,
    NonUniformOrder,
    NotASection,
    WindowTooSmall,
)
from .oracle import QuotientSet, QuotientWindow, Verdict
from .padic import INFINITY, PadicNumber, ac, in_lambda_Qnm, ord_
from .trees import Ball, MultiBall, build_tree, maximal_balls, tree_shape

LARGE = "large"
SMALL = "small"


@dataclass(frozen=True)
class CellCondition:
    """``alpha(s) < ord(t-c) < beta(s)`` (large) or ``ord(t-c) = gamma(s)``
    (small), conjoined with ``t - c in lam * Q_{n,m}``.

    A missing ``alpha`` or ``beta`` table means that side has no condition.
    """

    kind: str
    n: int
    m: int
    lam: PadicNumber
    alpha: Optional[Dict[str, int]] = None
    beta: Optional[Dict[str, int]] = None
    gamma: Optional[Dict[str, int]] = None

    def __post_init__(self):
        if self.kind not in (LARGE, SMALL):
            raise ValueError(f"unknown cell kind {self.kind!r}")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if self.lam.is_zero() or self.lam.is_inexact_zero():
            raise ValueError("lambda must be nonzero")
        if self.lam.prec < self.m:
            raise InsufficientPrecision(f"lambda needs {self.m} digits for ac_{self.m}")
        if self.kind == SMALL and self.gamma is None:
            raise ValueError("small condition needs a gamma table")

    @property
    def is_small(self) -> bool:
        return self.kind == SMALL

    def restrict(self, names) -> "CellCondition":
        def sub(t):
            return None if t is None else {s: t[s] for s in names}
        return replace(self, alpha=sub(self.alpha), beta=sub(self.beta), gamma=sub(self.gamma))

    def valuation_bounds(self, s):
        """Admissible ``ord(t - c)`` as an open interval ``(lo, hi)``."""
        if self.is_small:
            g = self.gamma[s]
            return g - 1, g + 1
        a = -INFINITY if self.alpha is None else self.alpha[s]
        b = INFINITY if self.beta is None else self.beta[s]
        return a, b

    def admits_valuation(self, s, v) -> bool:
        a, b = self.valuation_bounds(s)
        return a < v < b and (v - self.lam.val) % self.n == 0

    def to_json(self):
        d = {"kind": self.kind, "n": self.n, "m": self.m, "lambda": str(self.lam)}
        for name in ("alpha", "beta", "gamma"):
            t = getattr(self, name)
            if t is not None:
                d[name] = dict(t)
        return d


def eval_condition(C: CellCondition, s, c: PadicNumber, t: PadicNumber) -> bool:
    """Truth of ``C(s, c, t)`` from exact p-adic data."""
    d = t - c
    if d.is_zero():
        return False
    if d.is_inexact_zero():
        a, b = C.valuation_bounds(s)
        if b != INFINITY and b <= d.val:
            return False
        raise InsufficientPrecision(f"t - c is only known to be {d}")
    v = ord_(d)
    if not C.admits_valuation(s, v):
        return False
    return in_lambda_Qnm(d, C.lam, C.n, C.m)


def difference_mask(C: CellCondition, s, window: QuotientWindow) -> np.ndarray:
    """Mask of the admissible differences ``D(s)`` on ``window``.

    Raises WindowTooSmall if some admissible difference lies below ``lo`` and
    InsufficientPrecision if membership is not constant on cosets mod p^N.
    """
    lo_b, hi_b = C.valuation_bounds(s)
    if lo_b < window.lo - 1:
        # differences of valuation < lo are admissible unless no such v passes n
        below = [v for v in range(int(max(lo_b + 1, window.lo - C.n)), window.lo)
                 if C.admits_valuation(s, v)]
        if below or lo_b == -INFINITY:
            raise WindowTooSmall(f"condition at {s} admits valuations below lo={window.lo}")
    top = [v for v in range(window.lo, window.N + C.n + 1) if C.admits_valuation(s, v)]
    if hi_b == INFINITY:
        raise InsufficientPrecision(
            f"condition at {s} has no upper valuation bound; the zero class is undecided")
    if top and max(top) + C.m > window.N:
        raise InsufficientPrecision(
            f"condition at {s} needs precision {max(top) + C.m} > N={window.N}")
    vals = window.code_valuations()
    units = window.unit_parts()
    target = C.lam.unit % window.p**C.m
    nz = np.arange(window.modulus) != 0
    ok_val = np.zeros(window.modulus, dtype=bool)
    for v in top:
        ok_val |= vals == v
    ok = nz & ok_val & (units % window.p**C.m == target)
    return ok.astype(np.uint8)


def _centers_mask(balls, window) -> np.ndarray:
    mask = np.zeros(window.modulus, dtype=np.uint8)
    for b in balls:
        mask |= b.mask(window)
    return mask


@dataclass
class ClusteredCell:
    condition: CellCondition
    centers: MultiBall

    @property
    def p(self):
        return self.centers.p

    @property
    def base(self):
        return self.centers.base.names

    def restrict(self, names) -> "ClusteredCell":
        return ClusteredCell(self.condition.restrict(names), self.centers.restrict(names))

    def with_centers(self, sigma: MultiBall) -> "ClusteredCell":
        return ClusteredCell(self.condition.restrict(sigma.base.names), sigma)

    def to_json(self):
        return {"cell": self.condition.to_json(), "sigma": self.centers.to_json()}


@dataclass
class ClassicalCell:
    condition: CellCondition
    center: Dict[str, PadicNumber]

    @property
    def p(self):
        return self.condition.lam.p

    @property
    def base(self):
        return tuple(self.center)

    def to_json(self):
        return {"cell": self.condition.to_json(),
                "center": {s: str(c) for s, c in self.center.items()}}


def fiber(X, s, window: QuotientWindow) -> QuotientSet:
    """The fiber of ``X`` over ``s`` as an exact subset of the quotient."""
    window.check_budget()
    D = difference_mask(X.condition, s, window)
    if isinstance(X, ClassicalCell):
        out = kernels.translate(D, window.code_of(X.center[s]))
    else:
        balls = X.centers[s]
        if not balls:
            return QuotientSet.empty(window)
        out = kernels.sumset(_centers_mask(balls, window), D)
    res = QuotientSet(window, out)
    res.require_in_region()
    return res


def single_center_fiber(C: CellCondition, s, c, window) -> QuotientSet:
    D = difference_mask(C, s, window)
    return QuotientSet(window, kernels.translate(D, window.code_of(c)))


def period_radius(mask: np.ndarray, window: QuotientWindow) -> int:
    """Radius of the ball ``P`` with ``mask + P = mask`` (brute-force periods)."""
    per = kernels.periods(mask)
    idx = np.flatnonzero(per)
    # the period set is a subgroup of Z/p^a, hence p^j Z/p^a
    g = 0
    for e in idx:
        g = int(np.gcd(g, int(e)))
    if g == 0:
        return window.N
    j = 0
    while g % window.p == 0:
        g //= window.p
        j += 1
    step = window.p**j
    expected = np.zeros(window.modulus, dtype=np.uint8)
    expected[::step] = 1
    if not np.array_equal(per, expected):  # pragma: no cover - group theory
        raise ClassesNotBalls("period set is not a subgroup of the form p^j")
    return window.lo + j


def equivalence_classes(C: CellCondition, sigma: MultiBall, s, window: QuotientWindow) -> List[Ball]:
    """Partition of ``Sigma_s`` into classes of centers with equal fibers.

    Centers are equivalent iff they differ by a period of ``D(s)``, so each
    class is ``Sigma_s`` cut by one coset of the period ball.  That is a ball
    when the coset lies inside ``Sigma_s`` or meets a single listed ball.
    """
    balls = sigma[s]
    if not balls:
        return []
    D = difference_mask(C, s, window)
    rho = period_radius(D, window)
    if C.is_small and D.any() and rho != C.gamma[s] + C.m:
        raise ClassesNotBalls(
            f"oracle class radius {rho} disagrees with gamma+m={C.gamma[s] + C.m} at {s}")
    cmask = _centers_mask(balls, window)
    step = window.p ** (rho - window.lo)
    full = cmask.reshape(-1, step).all(axis=0)
    classes = [Ball(window.element(int(r)).to_fraction(), rho, window.p)
               for r in np.flatnonzero(full)]
    partial: Dict[int, List[Ball]] = {}
    for b in balls:
        if b.radius > rho:
            partial.setdefault(window.code_of(b.key) % step, []).append(b)
    for r, group in partial.items():
        if full[r]:
            continue
        merged = maximal_balls(group)
        if len(merged) > 1:
            raise ClassesNotBalls(
                f"class of {window.text(r)} at {s} joins {len(group)} balls without filling a ball")
        classes.append(merged[0])
    return sorted(classes)


def class_counts(X: ClusteredCell, window) -> Dict[str, int]:
    return {s: len(equivalence_classes(X.condition, X.centers, s, window)) for s in X.base}


def order_of(X: ClusteredCell, window) -> int:
    counts = class_counts(X, window)
    values = set(counts.values())
    if len(values) > 1:
        by = sorted(counts.items(), key=lambda kv: kv[1])
        raise NonUniformOrder(f"class counts differ: {by[0]} vs {by[-1]}")
    return values.pop() if values else 0


def is_regular(X: ClusteredCell) -> Verdict:
    """Uniform tree structure over the base and, for large conditions, every
    branching height strictly below ``alpha(s)``."""
    shape_seen = None
    for s in X.base:
        balls = X.centers[s]
        if not balls:
            continue
        tree = build_tree(balls)
        shape = tree_shape(tree)
        if shape_seen is None:
            shape_seen = (s, shape)
        elif shape != shape_seen[1]:
            return Verdict(False, (shape_seen[0], s), "tree structure differs between fibers")
        if X.condition.kind == LARGE:
            heights = tree.heights()
            alpha = -INFINITY if X.condition.alpha is None else X.condition.alpha[s]
            bad = [h for h in heights if not h < alpha]
            if bad:
                return Verdict(False, (s, bad[0]), f"branching height {bad[0]} not below alpha={alpha}")
    return Verdict(True)


def split_by_section(C: CellCondition, sigma: MultiBall, H: Dict[str, Ball]):
    """Split ``C^Sigma`` into ``C^H`` and ``C^(Sigma minus H)``."""
    keep, rest = {}, {}
    for s in sigma.base:
        balls = sigma[s]
        h = H.get(s)
        if h is None or h not in balls:
            raise NotASection(f"H({s}) is not one of the balls of Sigma_{s}")
        if h not in maximal_balls(balls):
            raise NotASection(f"H({s}) = {h} is not maximal in Sigma_{s}")
        keep[s] = [h]
        rest[s] = [b for b in balls if b != h]
    p = sigma.p
    return (ClusteredCell(C, MultiBall(p, keep)), ClusteredCell(C, MultiBall(p, rest)))
