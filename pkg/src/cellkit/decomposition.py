"""Refinement procedures for regular clustered cells.

Each procedure either returns cells of strictly smaller order describing the
same set, or reports why it does not apply.  :func:`minimality_audit` runs all
of them on one cell and :func:`decompose` iterates the audit to a fixpoint.
A cell that survives every check has *no implemented obstruction*; that is
not a proof of minimal order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Union

import numpy as np

from . import kernels
from .cells import (
    LARGE,
    SMALL,
    CellCondition,
    ClassicalCell,
    ClusteredCell,
    _centers_mask,
    class_counts,
    difference_mask,
    equivalence_classes,
    fiber,
    is_regular,
    order_of,
)
from .errors import (
    AmbiguousChoice,
    CellkitError,
    InsufficientPrecision,
    NonConstantAc1,
    NonUniformTreeType,
    NotCovering,
    NotSmall,
    NotSubsetMaximal,
    PreconditionError,
    PreconditionUnmet,
)
from .oracle import QuotientSet, QuotientWindow, Verdict, set_equal
from .padic import PadicNumber, vp
from .trees import (
    Ball,
    MultiBall,
    NonUniform,
    TreeType,
    build_tree,
    full_signature,
    is_subset_maximal,
    maximal_balls,
    tree_shape,
    tree_type,
)

DEFAULT_MAX_ITER = 32


class OracleMismatch(CellkitError):
    """A refinement failed its own oracle certificate (a bug, never expected)."""

    code = "OracleMismatch"


@dataclass
class PartitionResult:
    parts: List[ClusteredCell]
    provenance: str
    labels: list


def _regularize(p, pieces, provenance):
    """Split each ``(label, {s: balls})`` piece by tree structure over the base."""
    parts, labels = [], []
    for label, fibers in pieces:
        groups: Dict[object, Dict[str, list]] = {}
        for s, balls in fibers.items():
            if not balls:
                continue
            groups.setdefault(tree_shape(build_tree(balls)), {})[s] = balls
        for _, sub in sorted(groups.items(), key=lambda kv: sorted(kv[1])):
            parts.append(MultiBall(p, sub))
            labels.append(label)
    return parts, labels


def partition_ac1(X: ClusteredCell) -> PartitionResult:
    """Split centers so that ``ac_1`` is constant on every fiber."""
    constant, varying = [], {}
    for s in X.base:
        balls = X.centers[s]
        if any(b.contains_zero() for b in balls):
            raise PreconditionError(f"a center ball of Sigma_{s} contains 0; ac_1 is not constant on it")
        values = tuple(sorted({b.ac1() for b in balls}))
        if len(values) <= 1:
            constant.append(s)
        else:
            varying.setdefault(values, []).append(s)
    pieces = []
    if constant:
        pieces.append(("constant", {s: list(X.centers[s]) for s in constant}))
    for values, names in sorted(varying.items()):
        for b in values:
            pieces.append((b, {s: [ball for ball in X.centers[s] if ball.ac1() == b] for s in names}))
    sigmas, labels = _regularize(X.p, pieces, "ac1")
    return PartitionResult([X.with_centers(sg) for sg in sigmas], "ac1", labels)


def partition_by_signature(X: ClusteredCell) -> PartitionResult:
    """Split each fiber by full signature, re-reading signatures in every part's
    own tree until all parts are uniform."""
    per_s = {}
    for s in X.base:
        groups = [((), list(X.centers[s]))] if X.centers[s] else []
        changed = True
        while changed:
            changed = False
            nxt = []
            for label, balls in groups:
                tree = build_tree(balls)
                by_sig: Dict[tuple, list] = {}
                for leaf in tree.leaves():
                    by_sig.setdefault(full_signature(tree, leaf), []).append(leaf)
                if len(by_sig) > 1:
                    changed = True
                    for sig in sorted(by_sig):
                        nxt.append((label + (sig,), by_sig[sig]))
                else:
                    nxt.append((label, balls))
            groups = nxt
        per_s[s] = groups
    pieces: Dict[tuple, Dict[str, list]] = {}
    for s, groups in per_s.items():
        for label, balls in groups:
            pieces.setdefault(label, {})[s] = balls
    sigmas, labels = _regularize(X.p, sorted(pieces.items()), "signature")
    return PartitionResult([X.with_centers(sg) for sg in sigmas], "signature", labels)


# maximal balls versus classes ----------------------------------------------
@dataclass
class RewriteResult:
    cell: ClusteredCell
    branch: str
    ell: int


def rewrite_maximal_small(X: ClusteredCell) -> RewriteResult:
    """Rewrite a small cell whose maximal center balls hold several classes.

    With maximal balls of radius ``gamma + ell``: for ``ell <= 0`` each maximal
    ball is its own fiber, and the new cell puts those balls at the leaves of a
    small condition one level up; for ``0 < ell < m`` the angular-component
    condition is weakened from ``ac_m`` to ``ac_ell``.
    """
    C = X.condition
    if not C.is_small:
        raise NotSmall("rewrite applies to small cell conditions only")
    p = X.p
    ells, maxi = set(), {}
    for s in X.base:
        mb = maximal_balls(X.centers[s])
        if not mb:
            continue
        radii = {b.radius for b in mb}
        if len(radii) > 1:
            raise PreconditionUnmet(f"maximal balls of Sigma_{s} have radii {sorted(radii)}")
        if not C.admits_valuation(s, C.gamma[s]):
            raise PreconditionUnmet(f"condition is empty at {s}")
        ells.add(radii.pop() - C.gamma[s])
        maxi[s] = mb
    if len(ells) != 1:
        raise PreconditionUnmet(f"offset ell is not uniform over the base: {sorted(ells)}")
    ell = ells.pop()
    if ell >= C.m:
        raise PreconditionUnmet("maximal balls already coincide with the equivalence classes")
    if ell <= 0:
        fibers = {}
        for s, mb in maxi.items():
            rho = C.gamma[s] + ell
            shift = Fraction(p) ** (rho - 1)
            fibers[s] = [Ball(b.key - shift, rho, p) for b in mb]
        gamma = {s: C.gamma[s] + ell - 1 for s in maxi}
        cond = CellCondition(SMALL, 1, 1, PadicNumber.from_rational(p, 1, 1), gamma=gamma)
        return RewriteResult(ClusteredCell(cond, MultiBall(p, fibers)), "l<=0", ell)
    cond = CellCondition(SMALL, C.n, ell, C.lam, gamma={s: C.gamma[s] for s in maxi})
    return RewriteResult(ClusteredCell(cond, MultiBall(p, maxi)), "0<l<m", ell)


# separation of root subtrees -----------------------------------------------
@dataclass
class FiberTrace:
    gamma_d: int
    root: Ball
    subtrees: List[List[Ball]]
    tuple_count: int
    working: QuotientWindow
    G: QuotientSet
    sigma_tilde: QuotientSet
    sigma_hat: QuotientSet
    sigma_hat_inv: QuotientSet
    sigma_prime: QuotientSet
    pick: Optional[int]
    min_order: int
    averages_in_root: bool
    fixed: bool
    separated: bool
    prime_balls: List[Ball]

    def to_json(self):
        return {
            "gamma_d": self.gamma_d,
            "root": self.root.to_json(),
            "sep": {"subtrees": [[b.to_json() for b in t] for t in self.subtrees],
                    "ordered_tuple_count": self.tuple_count},
            "working_window": {"lo": self.working.lo, "N": self.working.N},
            "G": self.G.ball_texts(),
            "sigma_tilde": self.sigma_tilde.ball_texts(),
            "min_order": self.min_order,
            "ac1_pick": self.pick,
            "sigma_hat": self.sigma_hat.ball_texts(),
            "sigma_hat_inv": self.sigma_hat_inv.ball_texts(),
            "sigma_prime": self.sigma_prime.ball_texts(),
            "averages_in_root_ball": self.averages_in_root,
            "fixed": self.fixed,
            "separated": self.separated,
        }


@dataclass
class SeparationTrace:
    k_d: int
    outcome: str
    fibers: Dict[str, FiberTrace]
    ac1_constant: bool
    sigma_prime: Optional[MultiBall] = None

    def to_json(self):
        return {
            "k_d": self.k_d,
            "outcome": self.outcome,
            "ac1_constant": self.ac1_constant,
            "fibers": {s: t.to_json() for s, t in self.fibers.items()},
            "sigma_prime": None if self.sigma_prime is None else self.sigma_prime.to_json(),
        }


def _ac1_constant(sigma: MultiBall) -> bool:
    for balls in sigma.fibers.values():
        if any(b.contains_zero() for b in balls):
            return False
        if len({b.ac1() for b in balls}) > 1:
            return False
    return True


def _negate(mask):
    m = mask.shape[0]
    return mask[(-np.arange(m)) % m]


def _separate_fiber(balls, k, window: QuotientWindow, pick) -> FiberTrace:
    p = window.p
    v = int(vp(k, p))
    unit = k // p**v
    work = window.shifted(v)
    M = window.modulus
    radius = balls[0].radius
    if radius > work.N:
        raise InsufficientPrecision(
            f"dividing by k_d={k} leaves precision {work.N} < ball radius {radius}; raise N")
    tree = build_tree(balls)
    gamma_d = tree.height
    subtrees = [child.leaves() for child in tree.children]
    root = tree.ball
    # every separated k-tuple takes one point from each subtree
    assert all(root.contains(b) for b in balls)
    tmasks = [_centers_mask(t, window) for t in subtrees]
    counts = [int(t.sum()) for t in tmasks]
    tuple_count = math.factorial(k) * math.prod(counts)
    sums = tmasks[0]
    for t in tmasks[1:]:
        sums = kernels.sumset(sums, t)
    uinv = pow(unit, -1, M)
    # a sum of codes s means p^lo * s; dividing by k = p^v u gives code s * u^-1 in `work`
    g = np.zeros(M, dtype=np.uint8)
    g[(np.flatnonzero(sums) * uinv) % M] = 1
    sig_w = _centers_mask(balls, work)
    tilde = kernels.sumset(sig_w, _negate(g))
    vals = work.code_valuations()
    units = work.unit_parts()
    nz = np.flatnonzero(tilde)
    nz = nz[nz != 0]
    if nz.size == 0:
        raise InsufficientPrecision("Sigma - G collapsed to the zero class; raise N")
    v0 = int(vals[nz].min())
    at_min = nz[vals[nz] == v0]
    residues = sorted({int(x) for x in units[at_min] % p})
    j = residues[0] if pick in (None, "smallest") else int(pick)
    hat = np.zeros(M, dtype=np.uint8)
    hat[at_min[(units[at_min] % p) == j]] = 1
    inv_w = sig_w & kernels.sumset(hat, g)
    sig_u = _centers_mask(balls, window)
    # code r of the fine universe is code r * p^v of the working one
    inv_u = sig_u & inv_w[(np.arange(M) * p**v) % M]
    step = p ** (gamma_d + 1 - window.lo)
    near = np.tile(inv_u.reshape(-1, step).any(axis=0), M // step).astype(np.uint8)
    prime = sig_u & near
    prime_balls = []
    union_of_balls = True
    for b in balls:
        bm = b.mask(window)
        inside = bool((bm & prime).any())
        if inside and not np.array_equal(bm & prime, bm):
            union_of_balls = False
        if inside:
            prime_balls.append(b)
    nonempty = bool(prime.any())
    proper = nonempty and not np.array_equal(prime, sig_u)
    root_w = root.mask(work)
    return FiberTrace(
        gamma_d=gamma_d,
        root=root,
        subtrees=subtrees,
        tuple_count=tuple_count,
        working=work,
        G=QuotientSet(work, g),
        sigma_tilde=QuotientSet(work, tilde),
        sigma_hat=QuotientSet(work, hat),
        sigma_hat_inv=QuotientSet(window, inv_u),
        sigma_prime=QuotientSet(window, prime),
        pick=j,
        min_order=v0,
        averages_in_root=not (g & (1 - root_w)).any(),
        fixed=bool(np.array_equal(inv_u, sig_u)),
        separated=proper and union_of_balls,
        prime_balls=prime_balls,
    )


def separate_subtrees(X: Union[ClusteredCell, MultiBall], window: QuotientWindow,
                      ac1_pick="smallest", strict_ac1: bool = False) -> SeparationTrace:
    """Run the averaging construction that isolates one root subtree.

    ``ac1_pick`` is ``"smallest"`` or a residue; with ``strict_ac1`` the
    constant-``ac_1`` normalization is enforced instead of just recorded.
    """
    sigma = X.centers if isinstance(X, ClusteredCell) else X
    window.check_budget()
    tt = tree_type(sigma)
    if isinstance(tt, NonUniform):
        raise NonUniformTreeType(f"{tt.reason}: {tt.witness}")
    if tt.d == 0 or tt.root_branching < 2:
        raise PreconditionError("no root branching: the multi-ball has order 1")
    constant = _ac1_constant(sigma)
    if strict_ac1 and not constant:
        raise NonConstantAc1("ac_1 is not constant on every fiber; run partition_ac1 first")
    k = tt.root_branching
    traces = {s: _separate_fiber(list(sigma[s]), k, window, ac1_pick)
              for s in sigma.base if sigma[s]}
    if traces and all(t.separated for t in traces.values()):
        outcome = "Separated"
        prime = MultiBall(sigma.p, {s: t.prime_balls for s, t in traces.items()})
    elif traces and all(t.fixed for t in traces.values()):
        outcome, prime = "FixedPoint", None
    else:
        outcome, prime = "Inconclusive", None
    return SeparationTrace(k, outcome, traces, constant, prime)


# finite Skolem functions --------------------------------------------------
def largest_contained_balls(s_set: QuotientSet):
    """``(radius, mask)`` of the union of the largest balls inside the set."""
    w = s_set.window
    mask = s_set.mask
    for radius in range(w.lo, w.N + 1):
        step = w.p ** (radius - w.lo)
        full = mask.reshape(-1, step).all(axis=0)
        if full.any():
            return radius, np.tile(full, w.modulus // step).astype(np.uint8)
    return None, np.zeros_like(mask)


def skolem_from_parts(sigma: MultiBall, parts, window: QuotientWindow) -> Dict[str, Ball]:
    """Choose one maximal ball per fiber from a covering decomposition.

    The first classical part is used if there is one, otherwise the first
    order-1 clustered part; ``f(s)`` is the maximal ball of ``Sigma_s`` meeting
    that part's largest balls.
    """
    ok = is_subset_maximal(sigma)
    if not ok:
        raise NotSubsetMaximal(ok.detail)
    for s in sigma.base:
        union = QuotientSet.empty(window)
        for part in parts:
            if s in part.base:
                union = union | fiber(part, s, window)
        v = set_equal(union, sigma.point_set(s, window))
        if not v:
            raise NotCovering(f"parts do not cover Sigma_{s} exactly: {v.detail}, e.g. {v.witness[:3]}")
    chosen = next((q for q in parts if isinstance(q, ClassicalCell)), None)
    if chosen is None:
        chosen = next((q for q in parts if isinstance(q, ClusteredCell)
                       and order_of(q, window) == 1), None)
    if chosen is None:
        raise PreconditionUnmet("no classical or order-1 clustered part to anchor the choice")
    f = {}
    for s in sigma.base:
        if s not in chosen.base:
            raise PreconditionUnmet(f"anchor part is not defined over {s}")
        _, top = largest_contained_balls(fiber(chosen, s, window))
        hits = [b for b in sigma[s] if (b.mask(window) & top).any()]
        if len(hits) != 1:
            raise AmbiguousChoice(f"{len(hits)} maximal balls of Sigma_{s} meet the anchor's largest balls")
        f[s] = hits[0]
    return f


# audit ----------------------------------------------------------------------
PASS, FAIL, NOT_APPLICABLE = "pass", "fail", "not_applicable"


@dataclass
class CheckVerdict:
    check: str
    status: str
    detail: str = ""
    refinement: Optional[List[ClusteredCell]] = None

    def to_json(self):
        d = {"check": self.check, "status": self.status, "detail": self.detail}
        if self.refinement is not None:
            d["refinement"] = [c.to_json() for c in self.refinement]
        return d


@dataclass
class MinimalityReport:
    order: int
    verdicts: List[CheckVerdict]

    @property
    def failures(self):
        return [v for v in self.verdicts if v.status == FAIL]

    @property
    def summary(self) -> str:
        return "refinable" if self.failures else "no implemented obstruction"

    def to_json(self):
        return {"order": self.order, "summary": self.summary,
                "verdicts": [v.to_json() for v in self.verdicts]}


def union_fiber(cells, s, window) -> QuotientSet:
    out = QuotientSet.empty(window)
    for c in cells:
        if s in c.base:
            out = out | fiber(c, s, window)
    return out


def verify_refinement(X: ClusteredCell, cells: List[ClusteredCell], window,
                      same_set_only: bool = False) -> Verdict:
    """Oracle certificate: regular parts with the same fibers, each of smaller
    order or of equal order over a strictly smaller base."""
    k = order_of(X, window)
    for c in cells:
        r = is_regular(c)
        if not r:
            return Verdict(False, r.witness, "refinement part not regular: " + r.detail)
        kc = order_of(c, window)
        smaller_base = set(c.base) < set(X.base)
        if kc > k or (kc == k and not smaller_base):
            return Verdict(False, kc, f"part order {kc} not below {k} on the same base")
    for s in X.base:
        v = set_equal(union_fiber(cells, s, window), fiber(X, s, window))
        if not v:
            return Verdict(False, (s, v.witness), "fibers differ: " + v.detail)
    return Verdict(True)


def _certified(X, name, cells, window, detail):
    v = verify_refinement(X, cells, window)
    if not v:
        raise OracleMismatch(f"{name} refinement failed certification: {v.detail}")
    return CheckVerdict(name, FAIL, detail, cells)


def minimality_audit(X: ClusteredCell, window: QuotientWindow, ac1_pick="smallest") -> MinimalityReport:
    window.check_budget()
    k = order_of(X, window)
    verdicts = []

    name = "maximal-balls-are-classes"
    if X.condition.kind == LARGE:
        verdicts.append(CheckVerdict(name, PASS, "large condition: the leaf rewrite applies to small cells only"))
    else:
        try:
            rw = rewrite_maximal_small(X)
        except PreconditionUnmet as e:
            verdicts.append(CheckVerdict(name, PASS, str(e)))
        else:
            verdicts.append(_certified(X, name, [rw.cell], window,
                                       f"rewrite branch {rw.branch} with ell={rw.ell}"))

    name = "uniform-signature"
    tt = tree_type(X.centers)
    if isinstance(tt, TreeType):
        verdicts.append(CheckVerdict(name, PASS, f"tree type {list(tt.ks)}"))
    else:
        parts = partition_by_signature(X).parts
        verdicts.append(_certified(X, name, parts, window, tt.reason))

    name = "constant-ac1"
    if any(b.contains_zero() for f in X.centers.fibers.values() for b in f):
        verdicts.append(CheckVerdict(name, NOT_APPLICABLE, "a center ball contains 0"))
    elif _ac1_constant(X.centers):
        verdicts.append(CheckVerdict(name, PASS, "ac_1 constant on every fiber"))
    else:
        parts = partition_ac1(X).parts
        verdicts.append(_certified(X, name, parts, window, "ac_1 varies within a fiber"))

    name = "p-divides-k_d"
    if isinstance(tt, NonUniform):
        verdicts.append(CheckVerdict(name, NOT_APPLICABLE, "tree type not uniform"))
    elif tt.d == 0:
        verdicts.append(CheckVerdict(name, PASS, "no branching"))
    else:
        kd = tt.root_branching
        try:
            trace = separate_subtrees(X, window, ac1_pick)
            outcome = trace.outcome
        except InsufficientPrecision as e:
            trace, outcome = None, f"separation not computable: {e}"
        if kd % X.p == 0:
            verdicts.append(CheckVerdict(name, PASS, f"p | k_d={kd}; separation outcome {outcome}"))
        elif trace is not None and outcome == "Separated":
            prime = trace.sigma_prime
            rest = MultiBall(X.p, {s: [b for b in X.centers[s] if b not in prime[s]]
                                   for s in X.base})
            cells = [X.with_centers(prime), X.with_centers(rest)]
            verdicts.append(_certified(X, name, cells, window, f"p does not divide k_d={kd}"))
        else:
            verdicts.append(CheckVerdict(name, NOT_APPLICABLE, f"p does not divide k_d={kd}; {outcome}"))
    return MinimalityReport(k, verdicts)


@dataclass
class DecompositionResult:
    cells: List[ClusteredCell]
    iterations: int
    capped: bool
    diagnostic: str = ""


def decompose(X: ClusteredCell, window: QuotientWindow, max_iter: int = DEFAULT_MAX_ITER,
              ac1_pick="smallest") -> DecompositionResult:
    """Apply audit refinements until no cell has an implemented obstruction."""
    work, done = [X], []
    it = 0
    while work:
        if it >= max_iter:
            return DecompositionResult(done + work, it, True,
                                       f"iteration cap {max_iter} hit with {len(work)} open cells")
        it += 1
        nxt = []
        for cell in work:
            rep = minimality_audit(cell, window, ac1_pick)
            if rep.failures:
                nxt.extend(rep.failures[0].refinement)
            else:
                done.append(cell)
        work = nxt
    return DecompositionResult(done, it, False)


def counterexample_cell(p: int, f: Dict[str, PadicNumber]) -> ClusteredCell:
    """``Sigma_s = f(s) + O`` listed as its ``p`` sub-balls ``f(s) + i + pO``.

    The large condition ``1 < ord(t - c) < 3`` keeps the cell regular (the only
    branching height is 0).
    """
    fibers = {}
    for s, fs in f.items():
        if fs.val >= 0:
            raise ValueError(f"need ord f({s}) < 0, got {fs.val}")
        base = fs.to_fraction()
        fibers[s] = [Ball(base + i, 1, p) for i in range(p)]
    sigma = MultiBall(p, fibers)
    names = list(f)
    cond = CellCondition(LARGE, 1, 1, PadicNumber.from_rational(p, 1, 1),
                         alpha={s: 1 for s in names}, beta={s: 3 for s in names})
    return ClusteredCell(cond, sigma)
