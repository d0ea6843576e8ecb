"""Seeded random instances for tests and benchmarks.

Every generator takes a :class:`random.Random` and returns the cell together
with a window wide and precise enough for it, sized to stay far below the
default coset budget.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional

from .cells import LARGE, SMALL, CellCondition, ClassicalCell, ClusteredCell
from .oracle import QuotientWindow
from .padic import PadicNumber
from .trees import Ball, MultiBall, maximal_balls

Q = Fraction


def _unit(rng: random.Random, p: int, digits: int) -> int:
    while True:
        u = rng.randrange(1, p**digits)
        if u % p:
            return u


def _one(p: int, m: int = 1) -> PadicNumber:
    return PadicNumber.from_rational(p, 1, m)


def _names(count: int) -> List[str]:
    return [f"s{i}" for i in range(count)]


def distinct_balls(rng, p: int, lo: int, radius: int, count: int, maximal: bool = True,
                   avoid_zero: bool = False, tries: int = 200) -> List[Ball]:
    """``count`` distinct radius-``radius`` balls inside ``p**lo O``.

    With ``maximal`` no ``p`` siblings are all chosen, so the list is
    subset-maximal."""
    slots = p ** (radius - lo)
    for _ in range(tries):
        codes = rng.sample(range(slots), count)
        balls = [Ball(Q(p) ** lo * c, radius, p) for c in codes]
        if avoid_zero and any(b.contains_zero() for b in balls):
            continue
        if maximal and maximal_balls(balls) != sorted(balls):
            continue
        return sorted(balls)
    raise RuntimeError("could not draw a subset-maximal ball family")


def tile(ball: Ball, radius: int) -> List[Ball]:
    """The sub-balls of ``ball`` of a finer radius."""
    out = [ball]
    while out[0].radius < radius:
        out = [c for b in out for c in b.children()]
    return out


# rewriting ------------------------------------------------------------------
@dataclass
class RewriteInstance:
    cell: ClusteredCell
    window: QuotientWindow
    ell: int
    maximal_count: int

    @property
    def expected_classes(self) -> int:
        return self.maximal_count * self.cell.p ** (self.cell.condition.m - self.ell)


def rewrite_instance(rng, p: int, branch: str) -> RewriteInstance:
    """Small cell whose maximal center balls sit at ``gamma + ell``.

    ``branch`` is ``"l<=0"`` or ``"0<l<m"``.  The listed balls may be a finer
    tiling of the maximal ones.
    """
    n = rng.choice([1, 2])
    if branch == "l<=0":
        m = rng.choice([1, 2]) if p < 5 else 1
        ell = rng.choice([0, -1])
    else:
        m = rng.choice([2, 3]) if p == 2 else 2
        ell = rng.randrange(1, m)
    names = _names(rng.choice([1, 2, 3]))
    g0 = rng.choice([0, 1])
    gamma = {s: g0 + n * rng.choice([0, 0, 1]) for s in names}
    e = g0 % n
    lam = PadicNumber.from_rational(p, Q(p) ** e * _unit(rng, p, m), m)
    rad_max = {s: gamma[s] + ell for s in names}
    lo = min(min(rad_max.values()) - 1, min(gamma.values()))
    N = max(gamma[s] + m for s in names)
    # keep between 1 and 3 maximal balls, never all p^(r - lo) slots
    slots = p ** (min(rad_max.values()) - lo)
    count = rng.randrange(1, min(3, slots - 1) + 1)
    finer = rng.choice([0, 0, 1]) if gamma and max(rad_max.values()) < N else 0
    while True:
        try:
            fibers = {}
            for s in names:
                mb = distinct_balls(rng, p, lo, rad_max[s], count)
                fibers[s] = [b for B in mb for b in tile(B, rad_max[s] + finer)]
            break
        except RuntimeError:
            # too many balls for a subset-maximal family in so few slots
            count -= 1
    cond = CellCondition(SMALL, n, m, lam, gamma=gamma)
    return RewriteInstance(ClusteredCell(cond, MultiBall(p, fibers)),
                           QuotientWindow(p, lo, N, N), ell, count)


# regular cells over a transported pattern -----------------------------------
def pattern(rng, p: int, radius: int, count: int, spread: Optional[int] = None,
            avoid_zero: bool = True) -> List[Fraction]:
    """Centers of ``count`` radius-``radius`` balls in ``O``; with ``spread``
    the balls already differ below radius ``spread``."""
    spread = radius if spread is None else spread
    top = distinct_balls(rng, p, 0, spread, count, maximal=False, avoid_zero=avoid_zero)
    out = []
    for b in top:
        extra = rng.randrange(p ** (radius - spread))
        out.append(b.key + Q(p) ** spread * extra)
    return out


def transport(p: int, centers, radius: int, v: int, w: int, shift: Fraction = Q(0)) -> List[Ball]:
    """Image of the pattern under ``x -> shift + p**v * w * x`` (same tree shape)."""
    return [Ball(shift + Q(p) ** v * w * c, radius + v, p) for c in centers]


@dataclass
class CellInstance:
    cell: ClusteredCell
    window: QuotientWindow


def regular_cell(rng, p: int, kind: Optional[str] = None) -> CellInstance:
    """Regular clustered cell whose classes are exactly the listed balls.

    Fibers are affine images of one pattern, so the tree structure is uniform
    in ``s`` while ``ac_1`` sets and signatures vary freely within fibers.
    """
    kind = kind or rng.choice([SMALL, SMALL, LARGE])
    names = _names(rng.choice([1, 2, 3]))
    max_r = {2: 4, 3: 3, 5: 2}.get(p, 2)
    if kind == SMALL:
        r0 = rng.randrange(2 if p == 2 else 1, max_r + 1)
        spread = r0
    else:
        r0 = max_r + 1 if p != 2 else 4
        spread = r0 - 2
    slots = p**spread - 1
    count = rng.randrange(2, min(5, slots) + 1)
    pat = pattern(rng, p, r0, count, spread)
    vs = {s: rng.choice([0, 0, 1]) if kind == SMALL else 0 for s in names}
    fibers = {s: transport(p, pat, r0, vs[s], _unit(rng, p, r0 + 1)) for s in names}
    if kind == SMALL:
        cond = CellCondition(SMALL, 1, 1, _one(p), gamma={s: r0 + vs[s] - 1 for s in names})
        lo = min(0, min(r0 + vs[s] - 1 for s in names))
        N = max(r0 + vs[s] for s in names)
    else:
        # class radius beta - 1 + m equals the listed radius r0
        cond = CellCondition(LARGE, 1, 1, _one(p), alpha={s: r0 - 2 for s in names},
                             beta={s: r0 for s in names})
        lo, N = 0, r0
    return CellInstance(ClusteredCell(cond, MultiBall(p, fibers)), QuotientWindow(p, lo, N, N))


# separation -----------------------------------------------------------------
def _grow(rng, p, center: Fraction, heights: List[int], ks: List[int], radius: int) -> List[Fraction]:
    """Leaves of a tree with branching ``ks[i]`` at ``heights[i]`` (root first)."""
    if not heights:
        return [center]
    h, k = heights[0], ks[0]
    nxt = heights[1] if len(heights) > 1 else radius
    out = []
    for digit in rng.sample(range(p), k):
        c = center + Q(p) ** h * digit
        # random digits strictly between this height and the next one
        for pos in range(h + 1, nxt):
            c += Q(p) ** pos * rng.randrange(p)
        out.extend(_grow(rng, p, c, heights[1:], ks[1:], radius))
    return out


@dataclass
class SeparationInstance:
    cell: ClusteredCell
    window: QuotientWindow
    k_d: int


def separation_instance(rng, p: int) -> SeparationInstance:
    """Uniform tree type, root branching prime to ``p``, constant ``ac_1``."""
    if p < 3:
        raise ValueError("root branching prime to 2 needs at least two children of 3")
    k_d = rng.choice([k for k in range(2, p) if k % p])
    d = rng.choice([1, 1, 2])
    ks = [k_d] + [rng.randrange(2, p + 1) for _ in range(d - 1)]  # root first
    names = _names(rng.choice([1, 2, 3]))
    lo = rng.choice([-1, 0])
    budget_width = {3: 6, 5: 4}.get(p, 3)
    fibers = {}
    radii = {}
    for s in names:
        va = lo
        root_h = va + 1
        heights = [root_h + i for i in range(d)]
        radius = heights[-1] + 1 + rng.choice([0, 1] if heights[-1] + 2 - lo <= budget_width else [0])
        a = Q(p) ** va * _unit(rng, p, 1) + sum(Q(p) ** pos * rng.randrange(p)
                                                  for pos in range(va + 1, root_h))
        leaves = _grow(rng, p, a, heights, ks, radius)
        fibers[s] = [Ball(c, radius, p) for c in leaves]
        radii[s] = radius
    N = max(radii.values())
    cond = CellCondition(SMALL, 1, 1, _one(p), gamma={s: radii[s] - 1 for s in names})
    return SeparationInstance(ClusteredCell(cond, MultiBall(p, fibers)),
                              QuotientWindow(p, lo, N, N), k_d)


def random_shift(rng, window: QuotientWindow) -> Fraction:
    """A random element of ``p**lo O`` known to precision ``N``."""
    return Q(window.p) ** window.lo * rng.randrange(window.modulus)


# finite Skolem functions ----------------------------------------------------
def classical_center(ball: Ball, absprec: int) -> PadicNumber:
    """Center ``c`` for which ``ord(t - c) = r - 1, ac_1(t - c) = 1`` is exactly ``ball``."""
    p, r = ball.p, ball.radius
    return PadicNumber.from_absolute(p, ball.key - Q(p) ** (r - 1), absprec)


def balls_as_clustered(p: int, choice: Dict[str, List[Ball]]) -> ClusteredCell:
    """A small clustered cell whose fiber over ``s`` is exactly ``choice[s]``."""
    fibers = {s: [Ball(b.key - Q(p) ** (b.radius - 1), b.radius, p) for b in bs]
              for s, bs in choice.items()}
    gamma = {s: bs[0].radius - 1 for s, bs in choice.items()}
    return ClusteredCell(CellCondition(SMALL, 1, 1, _one(p), gamma=gamma), MultiBall(p, fibers))


@dataclass
class SkolemInstance:
    sigma: MultiBall
    parts: list
    window: QuotientWindow
    expected: Dict[str, Ball]


def skolem_instance(rng, p: int, classical: Optional[bool] = None) -> SkolemInstance:
    """Subset-maximal multi-ball plus a covering by one anchor part and the rest."""
    names = _names(rng.choice([1, 2, 3]))
    k = rng.randrange(1, 4)
    r = {s: rng.choice([1, 2]) for s in names}
    lo = -2 if p == 2 else -1
    N = max(r.values()) + 1
    fibers = {}
    for s in names:
        fibers[s] = distinct_balls(rng, p, lo, r[s], k)
    sigma = MultiBall(p, fibers)
    window = QuotientWindow(p, lo, N, N)
    pick = {s: rng.choice(sigma[s]) for s in names}
    if classical is None:
        classical = rng.random() < 0.5
    rest = {s: [b for b in sigma[s] if b != pick[s]] for s in names}
    parts = []
    if classical:
        centers = {s: classical_center(pick[s], N + 1) for s in names}
        cond = CellCondition(LARGE, 1, 1, _one(p), alpha={s: r[s] - 2 for s in names},
                             beta={s: r[s] for s in names})
        anchor = ClassicalCell(cond, centers)
    else:
        anchor = balls_as_clustered(p, {s: [pick[s]] for s in names})
    if k > 1:
        parts.append(balls_as_clustered(p, rest))
    # the anchor rule must find the anchor wherever it sits in the list
    at = rng.randrange(len(parts) + 1)
    parts.insert(at, anchor)
    expected = pick
    if not classical and k == 2 and at == 1:
        # the remainder is an order-1 clustered part listed first, so it anchors
        expected = {s: rest[s][0] for s in names}
    return SkolemInstance(sigma, parts, window, expected)
