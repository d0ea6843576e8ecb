"""Balls, multi-balls and the ball trees of their fibers.

Ball centers are kept canonical: the rational whose digits are the center's
digits below the radius, so two balls are equal exactly when their keys are.
Tree computations are symbolic (exact rationals); the quotient oracle is only
used by the tests to certify them.

Signatures are indexed over the branching heights of the whole fiber, index 1
at the highest (leaf-most) height and index ``d`` at the root.  An element
whose path does not branch at some height gets multiplicity 1 there.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import (
    EmptyFiber,
    InsufficientPrecision,
    NotInFiber,
    SignatureDepthExceeded,
)
from .oracle import QuotientSet, QuotientWindow, Verdict
from .padic import INFINITY, PadicNumber, parse_padic, vp


def truncate_rational(x: Fraction, p: int, absprec: int) -> Fraction:
    """The digits of ``x`` below ``absprec``, as a rational in ``[0, p**absprec)``."""
    x = Fraction(x)
    if x == 0:
        return Fraction(0)
    v = vp(x, p)
    if v >= absprec:
        return Fraction(0)
    y = x / Fraction(p) ** v
    mod = p ** (absprec - v)
    u = y.numerator * pow(y.denominator, -1, mod) % mod
    return Fraction(p) ** v * u


class Ball:
    """The closed ball ``{x : ord(x - center) >= radius}``."""

    __slots__ = ("p", "radius", "key")

    def __init__(self, center, radius: int, p: Optional[int] = None):
        if isinstance(center, PadicNumber):
            p = center.p
            if not center.is_zero() and center.absprec < radius:
                raise InsufficientPrecision(f"center {center} not known up to radius {radius}")
            center = center.to_fraction()
        if p is None:
            raise ValueError("p is required for a rational center")
        self.p = p
        self.radius = int(radius)
        self.key = truncate_rational(Fraction(center), p, self.radius)

    @classmethod
    def parse(cls, text, radius: int, p: int) -> "Ball":
        """Center text is read as an exact finite digit expansion."""
        x = parse_padic(text, p, prec=max(radius + 40, 40))
        return cls(x.to_fraction(), radius, p)

    @property
    def center(self) -> PadicNumber:
        if self.key == 0:
            return PadicNumber.zero(self.p)
        return PadicNumber.from_absolute(self.p, self.key, self.radius)

    def center_text(self) -> str:
        """Canonical digit word up to the radius, trailing zeros included."""
        if self.key == 0:
            return "0"
        v = vp(self.key, self.p)
        y = int(self.key / Fraction(self.p) ** v)
        digits = []
        for _ in range(self.radius - v):
            y, d = divmod(y, self.p)
            digits.append(d)
        return f"p^{v} * ({','.join(map(str, digits))})"

    def contains(self, x) -> bool:
        if isinstance(x, Ball):
            return x.radius >= self.radius and truncate_rational(x.key, self.p, self.radius) == self.key
        if isinstance(x, PadicNumber):
            if not x.is_zero() and x.absprec < self.radius:
                raise InsufficientPrecision(f"{x} unknown at radius {self.radius}")
            x = x.to_fraction()
        return vp(Fraction(x) - self.key, self.p) >= self.radius

    def contains_zero(self) -> bool:
        return self.key == 0

    def parent(self, levels: int = 1) -> "Ball":
        return Ball(self.key, self.radius - levels, self.p)

    def children(self) -> List["Ball"]:
        step = Fraction(self.p) ** self.radius
        return [Ball(self.key + i * step, self.radius + 1, self.p) for i in range(self.p)]

    def translate(self, a) -> "Ball":
        if isinstance(a, PadicNumber):
            if not a.is_zero() and a.absprec < self.radius:
                raise InsufficientPrecision(f"shift {a} unknown at radius {self.radius}")
            a = a.to_fraction()
        return Ball(self.key + Fraction(a), self.radius, self.p)

    def mask(self, window: QuotientWindow):
        return window.ball_mask(self.key, self.radius)

    def ac1(self) -> int:
        """Common first digit of all elements; requires ``0`` not in the ball."""
        if self.contains_zero():
            raise ValueError(f"ac_1 is not constant on {self}")
        v = vp(self.key, self.p)
        y = self.key / Fraction(self.p) ** v
        return y.numerator * pow(y.denominator, -1, self.p) % self.p

    def _sort_key(self):
        return (self.radius, self.center_text())

    def __lt__(self, other):
        return self._sort_key() < other._sort_key()

    def __eq__(self, other):
        if not isinstance(other, Ball):
            return NotImplemented
        return (self.p, self.radius, self.key) == (other.p, other.radius, other.key)

    def __hash__(self):
        return hash((self.p, self.radius, self.key))

    def __repr__(self):
        return f"Ball({self.center_text()}, r={self.radius})"

    def to_json(self):
        return {"center": self.center_text(), "radius": self.radius}


def _check_fiber(fiber: Sequence[Ball]) -> List[Ball]:
    fiber = list(fiber)
    if not fiber:
        raise EmptyFiber("fiber has no balls")
    radii = {b.radius for b in fiber}
    if len(radii) != 1:
        raise ValueError(f"fiber balls have differing radii {sorted(radii)}")
    if len(set(fiber)) != len(fiber):
        raise ValueError("fiber balls are not pairwise disjoint")
    return sorted(fiber)


# trees ----------------------------------------------------------------------
@dataclass
class TreeNode:
    ball: Ball
    height: Optional[int] = None
    children: List["TreeNode"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self) -> List[Ball]:
        if self.is_leaf:
            return [self.ball]
        return [b for c in self.children for b in c.leaves()]

    def internal_nodes(self):
        if self.is_leaf:
            return
        yield self
        for c in self.children:
            yield from c.internal_nodes()

    def heights(self) -> List[int]:
        return sorted({n.height for n in self.internal_nodes()})

    def path_to(self, leaf: Ball) -> List["TreeNode"]:
        node, path = self, []
        while not node.is_leaf:
            path.append(node)
            for c in node.children:
                if c.ball.contains(leaf):
                    node = c
                    break
            else:  # pragma: no cover - guarded by callers
                raise NotInFiber(str(leaf))
        return path


BallTree = TreeNode


def _lowest_split(balls: List[Ball]) -> int:
    first = balls[0].key
    return int(min(vp(b.key - first, b.p) for b in balls[1:]))


def _build(balls: List[Ball]) -> TreeNode:
    if len(balls) == 1:
        return TreeNode(balls[0])
    h = _lowest_split(balls)
    groups: Dict[Fraction, List[Ball]] = {}
    for b in balls:
        groups.setdefault(truncate_rational(b.key, b.p, h + 1), []).append(b)
    kids = sorted((_build(g) for g in groups.values()), key=lambda n: n.ball.center_text())
    return TreeNode(Ball(balls[0].key, h, balls[0].p), h, kids)


def build_tree(fiber: Sequence[Ball]) -> TreeNode:
    return _build(_check_fiber(fiber))


def branching_heights(fiber: Sequence[Ball]) -> List[int]:
    return build_tree(fiber).heights()


def _leaf_of(tree: TreeNode, x) -> Ball:
    for leaf in tree.leaves():
        if leaf.contains(x):
            return leaf
    raise NotInFiber(f"{x} lies in no leaf")


def full_signature(tree: TreeNode, leaf: Ball) -> Tuple[int, ...]:
    heights = tree.heights()[::-1]
    at = {n.height: len(n.children) for n in tree.path_to(leaf)}
    return tuple(at.get(h, 1) for h in heights)


def signature(tree: TreeNode, x, l: int) -> Tuple[int, ...]:
    """``(k_1(x), ..., k_l(x))``; ``x`` is an element or a leaf ball."""
    leaf = _leaf_of(tree, x)
    sig = full_signature(tree, leaf)
    if l > len(sig):
        raise SignatureDepthExceeded(f"l={l} exceeds {len(sig)} branching heights")
    return sig[:l]


def tree_shape(tree: TreeNode):
    """Isomorphism class of the tree with heights replaced by their rank."""
    rank = {h: i for i, h in enumerate(tree.heights())}

    def shape(node):
        if node.is_leaf:
            return ()
        return (rank[node.height], tuple(sorted(shape(c) for c in node.children)))

    return shape(tree)


@dataclass(frozen=True)
class TreeType:
    d: int
    ks: Tuple[int, ...]

    @property
    def root_branching(self) -> int:
        return self.ks[-1] if self.ks else 1


@dataclass(frozen=True)
class NonUniform:
    reason: str
    witness: tuple


# multi-balls ----------------------------------------------------------------
@dataclass(frozen=True)
class BaseSet:
    names: Tuple[str, ...]
    tables: Dict[str, Dict[str, object]] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("base point names must be unique")

    def __iter__(self):
        return iter(self.names)

    def __len__(self):
        return len(self.names)

    def __contains__(self, s):
        return s in self.names


class MultiBall:
    """Per base point, ``k`` disjoint balls of a common radius ``gamma(s)``."""

    def __init__(self, p: int, fibers: Dict[str, Iterable[Ball]]):
        self.p = p
        fib = {}
        for s, balls in fibers.items():
            balls = list(balls)
            if balls:
                balls = _check_fiber(balls)
            if any(b.p != p for b in balls):
                raise ValueError("ball over a different prime")
            fib[s] = tuple(balls)
        counts = {len(b) for b in fib.values()}
        if len(counts) > 1:
            raise ValueError(f"fibers have differing ball counts {sorted(counts)}")
        self.fibers: Dict[str, Tuple[Ball, ...]] = fib
        self.base = BaseSet(tuple(fib))
        self.k = counts.pop() if counts else 0

    def __getitem__(self, s) -> Tuple[Ball, ...]:
        return self.fibers[s]

    def radius(self, s) -> Optional[int]:
        f = self.fibers[s]
        return f[0].radius if f else None

    def restrict(self, names) -> "MultiBall":
        return MultiBall(self.p, {s: self.fibers[s] for s in names})

    def translate(self, shifts: Dict[str, object]) -> "MultiBall":
        return MultiBall(self.p, {s: [b.translate(shifts[s]) for b in f]
                                  for s, f in self.fibers.items()})

    def point_set(self, s, window: QuotientWindow) -> QuotientSet:
        import numpy as np
        mask = np.zeros(window.modulus, dtype=np.uint8)
        for b in self.fibers[s]:
            mask |= b.mask(window)
        return QuotientSet(window, mask)

    def tree(self, s) -> TreeNode:
        return build_tree(self.fibers[s])

    def __eq__(self, other):
        return isinstance(other, MultiBall) and self.p == other.p and self.fibers == other.fibers

    def __repr__(self):
        return f"MultiBall(p={self.p}, k={self.k}, base={list(self.base.names)})"

    def to_json(self):
        return {s: [b.to_json() for b in f] for s, f in self.fibers.items()}


def tree_type(sigma: MultiBall):
    """Common tree type of all fibers, or a :class:`NonUniform` report."""
    seen: Optional[Tuple[str, Tuple[int, ...]]] = None
    for s, fiber in sigma.fibers.items():
        if not fiber:
            continue
        tree = build_tree(fiber)
        sigs = [(leaf, full_signature(tree, leaf)) for leaf in tree.leaves()]
        first_leaf, first = sigs[0]
        for leaf, sg in sigs[1:]:
            if sg != first:
                return NonUniform("signature differs within a fiber", (s, first_leaf, leaf))
        if seen is None:
            seen = (s, first)
        elif seen[1] != first:
            return NonUniform("tree type differs between fibers", (seen[0], s))
    ks = seen[1] if seen else ()
    return TreeType(len(ks), ks)


def maximal_balls(fiber: Sequence[Ball]) -> List[Ball]:
    """Maximal balls of the union of ``fiber``: merge full sibling tilings."""
    current = set(fiber)
    changed = True
    while changed:
        changed = False
        groups: Dict[Ball, List[Ball]] = {}
        for b in current:
            groups.setdefault(b.parent(), []).append(b)
        for parent, kids in groups.items():
            if len(kids) == parent.p and all(k.radius == parent.radius + 1 for k in kids):
                current.difference_update(kids)
                current.add(parent)
                changed = True
        # a merged parent may swallow smaller balls lying inside it
        for b in list(current):
            if any(o is not b and o.radius < b.radius and o.contains(b) for o in current):
                current.discard(b)
    return sorted(current)


def is_subset_maximal(sigma: MultiBall) -> Verdict:
    """False iff some listed ball's parent is entirely covered by its fiber."""
    for s, fiber in sigma.fibers.items():
        present = set(fiber)
        for b in fiber:
            parent = b.parent()
            if all(c in present for c in parent.children()):
                return Verdict(False, (s, parent), f"{parent} is tiled in fiber {s}")
    return Verdict(True)


@dataclass
class CanonicalizeResult:
    multiball: MultiBall
    changed: bool
    diagnostic: Optional[str] = None


def canonicalize_maximal(sigma: MultiBall) -> CanonicalizeResult:
    merged = {s: maximal_balls(f) for s, f in sigma.fibers.items()}
    for s, balls in merged.items():
        if len({b.radius for b in balls}) > 1:
            return CanonicalizeResult(sigma, False, f"merging fiber {s} gives heterogeneous radii")
    if len({len(b) for b in merged.values()}) > 1:
        return CanonicalizeResult(sigma, False, "merging gives differing ball counts")
    out = MultiBall(sigma.p, merged)
    return CanonicalizeResult(out, out != sigma)


# DOT ------------------------------------------------------------------------
def _dot_quote(s: str) -> str:
    return '"' + s.replace('"', '\\"') + '"'


def tree_to_dot(tree: TreeNode, name: str) -> str:
    lines = [f"digraph {_dot_quote(name)} {{"]
    counter = [0]

    def visit(node):
        nid = f"n{counter[0]}"
        counter[0] += 1
        if node.is_leaf:
            lines.append(f'  {nid} [shape=box, label="h={node.ball.radius} ball={node.ball.center_text()}"];')
        else:
            lines.append(f'  {nid} [label="h={node.height} ball={node.ball.center_text()}"];')
            for c in sorted(node.children, key=lambda n: n.ball.center_text()):
                cid = visit(c)
                lines.append(f"  {nid} -> {cid};")
        return nid

    visit(tree)
    lines.append("}")
    return "\n".join(lines) + "\n"


def multiball_to_dot(sigma: MultiBall, names: Optional[Iterable[str]] = None) -> str:
    names = list(sigma.base.names if names is None else names)
    parts = []
    for s in names:
        fiber = sigma.fibers[s]
        if fiber:
            parts.append(tree_to_dot(build_tree(fiber), str(s)))
        else:
            parts.append(f"digraph {_dot_quote(str(s))} {{\n}}\n")
    return "".join(parts)
