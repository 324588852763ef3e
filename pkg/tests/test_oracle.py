"""Exact enumeration, BK chain and oracle/Monte Carlo cross-checks."""

import math

import pytest

from percolab.events import E1, E2, Connect, Not, OneArm, Sure
from percolab.lattice import LatticeSpec, build_ball_region, build_box_region, build_rectangle_region
from percolab.oracle import (EDGE_CAP, EventPolynomial, OracleCapError, exact, exact_event_polynomial,
                             exact_probability, oracle_mc_crosscheck, verify_bk_chain)

import reference as ref

SQ = LatticeSpec.hypercubic(2)
O = (0, 0)
SQUARE_VERTS = [(0, 0), (0, 1), (1, 0), (1, 1)]


def square():
    return build_rectangle_region(SQ, (0, 0), (1, 1))


def corner():
    return Connect([(0, 0)], [(1, 1)], "all")


def test_sure_and_impossible():
    r = build_ball_region(SQ, O, 2)
    sure = exact_event_polynomial(r, Sure())
    assert sure.coefficients == [math.comb(r.ne, k) for k in range(r.ne + 1)]
    assert exact_event_polynomial(r, Not(Sure())).coefficients == [0] * (r.ne + 1)


def test_unit_square_polynomial():
    # [DERIVED] reference enumeration gives N = (0, 0, 2, 4, 1)
    edges = ref.induced_edges(SQUARE_VERTS)
    expect = ref.enumerate_counts(edges, lambda oe: ref.connected(SQUARE_VERTS, oe, [(0, 0)], [(1, 1)]))
    assert expect == [0, 0, 2, 4, 1]
    poly = exact_event_polynomial(square(), corner())
    assert poly.coefficients == expect
    assert poly.power_coefficients() == [0, 0, 2, 0, -1]  # 2p^2 - p^4
    assert exact_probability(poly, 0.5) == 0.4375
    assert exact_probability(poly, 0.0) == 0.0 and exact_probability(poly, 1.0) == 1.0
    back = EventPolynomial.from_dict(poly.to_dict())
    assert back.coefficients == poly.coefficients


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_closed_forms(p):
    assert abs(exact(square(), corner(), p) - (2 * p ** 2 - p ** 4)) <= 1e-12
    assert abs(exact(build_ball_region(SQ, O, 2), E1(O, 1, 2), p) - (1 - (1 - p) ** 12)) <= 1e-12


def test_e2_and_one_arm_against_reference():
    # [DERIVED] Fraction-exact enumeration on the 16-edge ball B(0,2)
    verts = ref.diamond(2)
    edges = ref.induced_edges(verts)
    ann = [v for v in verts if ref.l1(v) >= 1]
    s1 = [v for v in verts if ref.l1(v) == 1]
    s2 = [v for v in verts if ref.l1(v) == 2]
    r = build_ball_region(SQ, O, 2)
    for p in (0.2, 0.5, 0.8):
        e2 = ref.enumerate_probability(edges, lambda oe: ref.crossing_count(ann, oe, s1, s2) >= 2, p)
        arm = ref.enumerate_probability(edges, lambda oe: ref.connected(verts, oe, [O], s2), p)
        assert abs(exact(r, E2(O, 1, 2), p) - float(e2)) <= 1e-12
        assert abs(exact(r, OneArm(O, 2), p) - float(arm)) <= 1e-12


def test_edge_cap():
    r = build_box_region(LatticeSpec.slab(2, 0), 3)
    assert r.ne > EDGE_CAP
    with pytest.raises(OracleCapError):
        exact_event_polynomial(r, Sure())


def test_bk_chain():
    r = build_ball_region(SQ, O, 2)
    pts = verify_bk_chain(r, O, 1, 2, [0.0, 0.5, 0.999999, 1.0])
    assert pts[0].holds is None  # conditioning on a null event
    mid = pts[1]
    assert mid.holds and mid.lower_margin > 0 and mid.upper_margin > 0
    top = pts[-1]
    assert top.p_e2 == 0.0 and top.p_e2_given_e1 == 0.0 and top.holds


def test_crosscheck_deterministic_events():
    r = square()
    assert oracle_mc_crosscheck(r, 0.0, corner(), 1000, 1).z == 0.0
    assert oracle_mc_crosscheck(r, 1.0, corner(), 1000, 1).z == 0.0


def test_crosscheck_many_seeds():
    # [DERIVED] normal tails: |z| <= 5 per seed, at most one |z| > 3 expected
    zs = [oracle_mc_crosscheck(square(), 0.5, corner(), 100_000, s).z for s in range(20)]
    assert all(abs(z) <= 5 for z in zs)
    assert abs(zs[0]) <= 4
    print("z-scores:", [round(z, 2) for z in zs])
