import random
from fractions import Fraction as Q

import pytest

from cellkit.cells import (
    LARGE,
    SMALL,
    CellCondition,
    ClusteredCell,
    fiber,
    order_of,
)
from cellkit.decomposition import (
    FAIL,
    NOT_APPLICABLE,
    PASS,
    counterexample_cell,
    decompose,
    minimality_audit,
    partition_ac1,
    partition_by_signature,
    rewrite_maximal_small,
    separate_subtrees,
    skolem_from_parts,
    union_fiber,
    verify_refinement,
)
from cellkit.errors import (
    NonConstantAc1,
    NonUniformTreeType,
    NotCovering,
    NotSmall,
    NotSubsetMaximal,
    PreconditionError,
    PreconditionUnmet,
)
from cellkit.instances import separation_instance
from cellkit.oracle import QuotientWindow, set_equal
from cellkit.padic import PadicNumber
from cellkit.scenario import load_scenario, shipped_scenarios
from cellkit.trees import Ball, MultiBall, TreeType, tree_type

import oracles

P = PadicNumber.from_rational
SCN = shipped_scenarios()


def scenario(name):
    return load_scenario(SCN[name])


def one(p):
    return P(p, 1, 3)


def small(p, gamma, n=1, m=1):
    return CellCondition(SMALL, n, m, one(p), gamma=gamma)


def codes(qset):
    return set(qset.codes().tolist())


def is_union_of(qset, balls):
    w = qset.window
    return codes(qset) == oracles.balls_codes(balls, w.p, w.lo, w.N)


# separation ------------------------------------------------------------------
def test_twoballs_trace_frozen():
    w = QuotientWindow(3, 0, 4, 4)
    sigma = MultiBall(3, {"s": [Ball(0, 1, 3), Ball(1, 1, 3)]})
    tr = separate_subtrees(sigma, w)
    assert tr.k_d == 2 and tr.outcome == "Separated"
    f = tr.fibers["s"]
    assert f.gamma_d == 0 and f.root == Ball(0, 0, 3)
    # 2 * 27 * 27 ordered pairs, one point from each subtree
    assert f.tuple_count == 1458
    assert is_union_of(f.G, [Ball(2, 1, 3)])
    assert is_union_of(f.sigma_tilde, [Ball(1, 1, 3), Ball(2, 1, 3)])
    assert f.min_order == 0 and f.pick == 1
    assert is_union_of(f.sigma_hat, [Ball(1, 1, 3)])
    assert is_union_of(f.sigma_hat_inv, [Ball(0, 1, 3)])
    assert tr.sigma_prime["s"] == (Ball(0, 1, 3),)
    assert f.averages_in_root and not f.fixed


def test_twoballs_other_pick_selects_other_subtree():
    w = QuotientWindow(3, 0, 4, 4)
    sigma = MultiBall(3, {"s": [Ball(0, 1, 3), Ball(1, 1, 3)]})
    tr = separate_subtrees(sigma, w, ac1_pick=2)
    assert tr.outcome == "Separated" and tr.sigma_prime["s"] == (Ball(1, 1, 3),)


@pytest.mark.parametrize("N", [2, 3])
def test_twoballs_averages_match_brute_force(N):
    w = QuotientWindow(3, 0, N, N)
    sigma = MultiBall(3, {"s": [Ball(0, 1, 3), Ball(1, 1, 3)]})
    f = separate_subtrees(sigma, w).fibers["s"]
    pts = [oracles.balls_codes(t, 3, 0, N) for t in f.subtrees]
    assert codes(f.G) == oracles.averages(pts, f.gamma_d, 2, 3, 0, N)
    assert codes(f.G) == oracles.ball_codes(Q(1, 2), 1, 3, 0, N)


@pytest.mark.parametrize("seed", range(12))
def test_random_averages_match_brute_force(seed):
    rng = random.Random(seed)
    inst = separation_instance(rng, rng.choice([3, 5]))
    w = inst.window
    small_w = QuotientWindow(w.p, w.lo, w.N, w.N)
    tr = separate_subtrees(inst.cell, small_w)
    for s, f in tr.fibers.items():
        pts = [oracles.balls_codes(t, w.p, w.lo, w.N) for t in f.subtrees]
        if sum(map(len, pts)) ** inst.k_d > 40000:
            continue
        expect = oracles.averages(pts, f.gamma_d, inst.k_d, w.p, w.lo, w.N)
        assert codes(f.G) == expect


def test_separation_preconditions():
    w = QuotientWindow(2, 0, 3, 3)
    with pytest.raises(NonUniformTreeType):
        separate_subtrees(MultiBall(2, {"s": [Ball(0, 2, 2), Ball(1, 2, 2), Ball(2, 2, 2)]}), w)
    with pytest.raises(PreconditionError):
        separate_subtrees(MultiBall(2, {"s": [Ball(0, 2, 2)]}), w)
    w3 = QuotientWindow(3, 0, 3, 3)
    sigma = MultiBall(3, {"s": [Ball(1, 1, 3), Ball(2, 1, 3)]})
    assert not separate_subtrees(sigma, w3).ac1_constant
    with pytest.raises(NonConstantAc1):
        separate_subtrees(sigma, w3, strict_ac1=True)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_counterexample_fixed_point_every_pick(p):
    f = {"a": P(p, Q(1, p), 4), "b": P(p, Q(1, p) + 1, 4)}
    X = counterexample_cell(p, f)
    w = QuotientWindow(p, -2, 3, 3)
    for j in range(1, p):
        tr = separate_subtrees(X, w, ac1_pick=j)
        assert tr.outcome == "FixedPoint"
        for s, t in tr.fibers.items():
            assert set_equal(t.sigma_hat_inv, X.centers.point_set(s, w))


def test_counterexample_average_is_f_plus_half_at_two():
    f = P(2, Q(1, 2), 4)
    X = counterexample_cell(2, {"s": f})
    w = QuotientWindow(2, -2, 3, 3)
    t = separate_subtrees(X, w).fibers["s"]
    assert is_union_of(t.G, [Ball(Q(1, 2) + Q(1, 2), 0, 2)])
    pts = [oracles.balls_codes(sub, 2, -2, 3) for sub in t.subtrees]
    assert codes(t.G) == oracles.averages(pts, t.gamma_d, 2, 2, -2, 3)


def test_counterexample_rejects_integral_shift():
    with pytest.raises(ValueError):
        counterexample_cell(3, {"s": P(3, 1, 4)})


# partitions ------------------------------------------------------------------
def _check_partition(X, res, w):
    for s in X.base:
        assert set_equal(union_fiber(res.parts, s, w), fiber(X, s, w))
        seen = set()
        for c in res.parts:
            if s in c.base:
                here = set(c.centers[s])
                assert not (here & seen)
                seen |= here
        assert seen == set(X.centers[s])


def test_partition_ac1_splits_by_residue():
    scn = scenario("ac1-split-p3")
    res = partition_ac1(scn.cell)
    _check_partition(scn.cell, res, scn.window)
    for c in res.parts:
        for s in c.base:
            assert len({b.ac1() for b in c.centers[s]}) == 1


def test_partition_ac1_constant_is_identity():
    scn = scenario("ac1-constant-p3")
    res = partition_ac1(scn.cell)
    assert len(res.parts) == 1 and res.labels == ["constant"]
    assert res.parts[0].centers == scn.cell.centers


def test_partition_ac1_rejects_zero_ball():
    X = ClusteredCell(small(3, {"s": 0}), MultiBall(3, {"s": [Ball(0, 1, 3), Ball(1, 1, 3)]}))
    with pytest.raises(PreconditionError):
        partition_ac1(X)


def test_partition_signature_skewed_fiber():
    w = QuotientWindow(2, 0, 3, 3)
    X = ClusteredCell(small(2, {"s": 1}), MultiBall(2, {"s": [Ball(0, 2, 2), Ball(1, 2, 2), Ball(2, 2, 2)]}))
    res = partition_by_signature(X)
    got = sorted(tuple(c.centers["s"]) for c in res.parts)
    assert got == sorted([(Ball(0, 2, 2), Ball(2, 2, 2)), (Ball(1, 2, 2),)])
    _check_partition(X, res, w)
    assert all(isinstance(tree_type(c.centers), TreeType) for c in res.parts)
    assert sum(order_of(c, w) for c in res.parts) == order_of(X, w)


def test_partition_signature_iterates_inside_parts():
    # depth-3 skewed tree: each signature part is skewed again until leaves separate
    balls = [Ball(0, 3, 2), Ball(4, 3, 2), Ball(2, 3, 2), Ball(1, 3, 2)]
    X = ClusteredCell(small(2, {"s": 2}), MultiBall(2, {"s": balls}))
    res = partition_by_signature(X)
    assert all(isinstance(tree_type(c.centers), TreeType) for c in res.parts)
    _check_partition(X, res, QuotientWindow(2, 0, 3, 3))


# rewrite ---------------------------------------------------------------------
def test_rewrite_tiled_maximal_ball():
    scn = scenario("rewrite-l0-p2")
    rw = rewrite_maximal_small(scn.cell)
    assert rw.branch == "l<=0"
    for s in scn.cell.base:
        assert set_equal(fiber(rw.cell, s, scn.window), fiber(scn.cell, s, scn.window))


def test_rewrite_weakens_ac():
    scn = scenario("rewrite-weaken-p2")
    rw = rewrite_maximal_small(scn.cell)
    assert rw.branch == "0<l<m" and 0 < rw.ell < scn.cell.condition.m
    assert rw.cell.condition.m == rw.ell
    assert order_of(rw.cell, scn.window) < order_of(scn.cell, scn.window)


def test_rewrite_preconditions():
    w = QuotientWindow(3, 0, 3, 3)
    L = CellCondition(LARGE, 1, 1, one(3), alpha={"s": 0}, beta={"s": 3})
    with pytest.raises(NotSmall):
        rewrite_maximal_small(ClusteredCell(L, MultiBall(3, {"s": [Ball(0, 1, 3)]})))
    # maximal balls already at gamma + m
    X = ClusteredCell(small(3, {"s": 0}), MultiBall(3, {"s": [Ball(0, 1, 3)]}))
    with pytest.raises(PreconditionUnmet):
        rewrite_maximal_small(X)
    # offsets 0 and 1 over two base points
    Y = ClusteredCell(small(3, {"s": 0, "t": 0}, m=2),
                      MultiBall(3, {"s": [Ball(0, 0, 3)], "t": [Ball(0, 1, 3)]}))
    with pytest.raises(PreconditionUnmet):
        rewrite_maximal_small(Y)
    assert order_of(X, w) == 1


# skolem ----------------------------------------------------------------------
def test_skolem_scenarios():
    scn = scenario("skolem-section-p3")
    f = skolem_from_parts(scn.sigma, scn.parts, scn.window)
    for s, b in f.items():
        assert b in scn.sigma[s]
    scn = scenario("skolem-classical-p3")
    f = skolem_from_parts(scn.sigma, scn.parts, scn.window)
    assert all(b in scn.sigma[s] for s, b in f.items())


def test_skolem_preconditions():
    w = QuotientWindow(2, 0, 3, 3)
    tiled = MultiBall(2, {"s": [Ball(0, 1, 2), Ball(1, 1, 2)]})
    with pytest.raises(NotSubsetMaximal):
        skolem_from_parts(tiled, [], w)
    w3 = QuotientWindow(3, -1, 2, 2)
    sigma = MultiBall(3, {"s": [Ball(0, 1, 3), Ball(1, 1, 3)]})
    only_first = ClusteredCell(small(3, {"s": 0}), MultiBall(3, {"s": [Ball(Q(-1), 1, 3)]}))
    with pytest.raises(NotCovering):
        skolem_from_parts(sigma, [only_first], w3)
    both = ClusteredCell(small(3, {"s": 0}), MultiBall(3, {"s": [Ball(Q(-1), 1, 3), Ball(0, 1, 3)]}))
    # an order-2 part cannot anchor the choice
    with pytest.raises(PreconditionUnmet):
        skolem_from_parts(sigma, [both], w3)


# audit and decompose ---------------------------------------------------------
def test_audit_twoballs_separates():
    scn = scenario("twoballs-p3")
    rep = minimality_audit(scn.cell, scn.window)
    by = {v.check: v for v in rep.verdicts}
    assert by["constant-ac1"].status == NOT_APPLICABLE
    assert by["p-divides-k_d"].status == FAIL
    assert verify_refinement(scn.cell, by["p-divides-k_d"].refinement, scn.window)
    assert rep.summary == "refinable"


@pytest.mark.parametrize("p", [2, 3, 5])
def test_audit_counterexample_has_no_obstruction(p):
    scn = scenario(f"counterexample-p{p}")
    rep = minimality_audit(scn.cell, scn.window)
    assert rep.summary == "no implemented obstruction"
    by = {v.check: v for v in rep.verdicts}
    assert by["p-divides-k_d"].status == PASS and "FixedPoint" in by["p-divides-k_d"].detail


def test_decompose_reaches_order_one_and_respects_cap():
    scn = scenario("threeballs-p2")
    res = decompose(scn.cell, scn.window)
    assert not res.capped
    for s in scn.cell.base:
        assert set_equal(union_fiber(res.cells, s, scn.window), fiber(scn.cell, s, scn.window))
    capped = decompose(scn.cell, scn.window, max_iter=1)
    if res.iterations > 1:
        assert capped.capped and "cap" in capped.diagnostic


def test_verify_refinement_rejects_bad_parts():
    scn = scenario("twoballs-p3")
    X = scn.cell
    assert not verify_refinement(X, [X], scn.window)
    half = X.with_centers(MultiBall(3, {"s": [Ball(0, 1, 3)]}))
    assert not verify_refinement(X, [half], scn.window)
