"""Crossing, cylinder, one-arm and circuit events."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percolab.circuits import circuit_exists, minimal_open_circuit, validate_circuit
from percolab.estimators import estimate_event_probability
from percolab.events import (E1, E2, And, Batch, Circuit, Connect, CrossingCount, Cylinder, Not, OneArm, Sure,
                             UniqueCrossing, event_cylinder, event_E1, event_E2, event_from_dict,
                             event_unique_crossing, origin_star)
from percolab.lattice import LatticeError, LatticeSpec, build_ball_region, build_box_region
from percolab.percolation import Configuration, sample_block, sample_configuration

import reference as ref

SQ = LatticeSpec.hypercubic(2)
O = (0, 0)


def ball(n):
    return build_ball_region(SQ, O, n)


def test_e1_trivial_cases():
    r = ball(3)
    closed = sample_configuration(r, 0.0, 0, 0)
    assert event_E1(closed, O, 2, 2)
    assert not event_E1(closed, O, 1, 3)
    with pytest.raises(LatticeError):
        E1(O, 3, 1)


def test_e1_closed_form_by_reference_enumeration():
    # [DERIVED] 2^12 enumeration of the annulus edges (reference module)
    verts = [v for v in ref.diamond(2) if ref.l1(v) >= 1]
    edges = ref.induced_edges(verts)
    assert len(edges) == 12
    s1 = [v for v in verts if ref.l1(v) == 1]
    s2 = [v for v in verts if ref.l1(v) == 2]
    val = ref.enumerate_probability(edges, lambda oe: ref.connected(verts, oe, s1, s2), 0.5)
    assert val == 1 - 2 ** -12 and float(val) == 1 - (1 - 0.5) ** 12


def test_e2_examples():
    r = ball(2)
    assert not event_E2(sample_configuration(r, 1.0, 0, 0), O, 1, 2)
    bits = np.zeros(r.ne, dtype=np.uint8)
    bits[r.edge_between((1, 0), (2, 0))] = 1
    bits[r.edge_between((-1, 0), (-2, 0))] = 1
    assert event_E2(Configuration(r, bits), O, 1, 2)


def test_unique_crossing():
    r = ball(4)
    ann, inner, outer = {"annulus": [2, 4]}, {"shell": 2}, {"shell": 4}
    assert event_unique_crossing(sample_configuration(r, 1.0, 0, 0), ann, inner, outer)
    assert not event_unique_crossing(sample_configuration(r, 0.0, 0, 0), ann, inner, outer)
    # [TRIVIAL] F = E1 and not E2 on every sample
    b = Batch(r, sample_block(r, 0.5, 3, 0, 2000))
    f = UniqueCrossing(O, 2, 4).evaluate(r, b)
    assert np.array_equal(f, E1(O, 2, 4).evaluate(r, b) & ~E2(O, 2, 4).evaluate(r, b))


def test_cylinder():
    r = ball(2)
    assert event_cylinder(sample_configuration(r, 0.0, 0, 0), [])
    edges = [(O, (1, 0)), (O, (0, 1)), (O, (-1, 0)), (O, (0, -1))]
    assert event_cylinder(sample_configuration(r, 1.0, 0, 0), edges)
    assert not event_cylinder(sample_configuration(r, 1.0, 0, 0), edges, [1, 1, 1, 0])
    with pytest.raises(LatticeError):
        Cylinder([(O, (5, 5))]).evaluate(r, Batch(r, sample_block(r, 0.5, 0, 0, 1)))
    # [DERIVED] independence: P = p^4 = 1/16
    est = estimate_event_probability(r, 0.5, Cylinder(edges), 100_000, 11)
    assert abs(est.mean - 1 / 16) <= 4 * math.sqrt((1 / 16) * (15 / 16) / 100_000)


def test_origin_star_slab_edges():
    assert len(origin_star(SQ).edges) == 4
    assert len(origin_star(LatticeSpec.slab(3, 1)).edges) == 5


@settings(max_examples=20, deadline=None)
@given(n=st.integers(4, 12), p=st.floats(0.3, 0.7), seed=st.integers(0, 10 ** 6))
def test_lazy_one_arm_matches_labeling(n, p, seed):
    # lazy exploration agrees with full cluster labeling on the same samples
    r = ball(n)
    ev = OneArm(O, n)
    lazy = ev.evaluate_stream(r, p, seed, 0, 200)
    generic = Connect([O], {"shell": n}, {"ball": n}).evaluate(r, Batch(r, sample_block(r, p, seed, 0, 200)))
    assert np.array_equal(lazy, generic)


def test_combinators_and_serialization():
    r = ball(3)
    b = Batch(r, sample_block(r, 0.5, 2, 0, 500))
    e1, e2 = E1(O, 1, 3), E2(O, 1, 3)
    assert np.array_equal((e1 & e2).evaluate(r, b), e1.evaluate(r, b) & e2.evaluate(r, b))
    assert np.array_equal(Not(e1).evaluate(r, b), ~e1.evaluate(r, b))
    assert Sure().evaluate(r, b).all()
    for ev in (e1, e2, UniqueCrossing(O, 1, 3), OneArm(O, 3), Cylinder([(O, (1, 0))]), And(e1, Sure()),
               CrossingCount({"annulus": [1, 3]}, {"shell": 1}, {"shell": 3}, "==", 2), Circuit(2),
               Connect([O], {"shell": 2}, "all")):
        back = event_from_dict(ev.to_dict())
        assert back.to_dict() == ev.to_dict()
        if not isinstance(ev, Circuit):
            assert np.array_equal(back.evaluate(r, b), ev.evaluate(r, b))


# ------------------------------------------------------------------ circuits

def test_circuit_fully_open_ring():
    r = build_box_region(LatticeSpec.slab(2, 0), 3)
    full = sample_configuration(r, 1.0, 0, 0)
    c = minimal_open_circuit(full, 1)
    # [TRIVIAL] the ring on dQ(2) has 16 vertices
    assert len(c) == 16
    assert {max(abs(x), abs(y)) for x, y in c.coords(r)} == {2}
    assert abs(c.winding) == 1
    assert validate_circuit(full, c) == []
    assert minimal_open_circuit(sample_configuration(r, 0.0, 0, 0), 1) is None


def test_handcrafted_ring_is_returned():
    spec = LatticeSpec.slab(3, 1)
    r = build_box_region(spec, 6)
    bits = np.zeros(r.ne, dtype=np.uint8)
    ring = ([(i, -4) for i in range(-4, 4)] + [(4, j) for j in range(-4, 4)]
            + [(i, 4) for i in range(4, -4, -1)] + [(-4, j) for j in range(4, -4, -1)] + [(-4, -4)])
    ids = []
    for a, b in zip(ring, ring[1:]):
        e = r.edge_between(a + (1,), b + (1,))
        bits[e] = 1
        ids.append(e)
    c = minimal_open_circuit(Configuration(r, bits), 2)
    assert sorted(c.edges) == sorted(ids)


def test_circuit_requires_slab():
    with pytest.raises(LatticeError):
        circuit_exists(sample_configuration(ball(3), 1.0, 0, 0), 1)


@settings(max_examples=25, deadline=None)
@given(p=st.floats(0.4, 0.9), seed=st.integers(0, 10 ** 6), idx=st.integers(0, 10 ** 4))
def test_minimal_circuit_is_valid(p, seed, idx):
    r = build_box_region(LatticeSpec.slab(3, 1), 3)
    cfg = sample_configuration(r, p, seed, idx)
    c = minimal_open_circuit(cfg, 1)
    assert (c is not None) == circuit_exists(cfg, 1)
    if c is not None:
        assert validate_circuit(cfg, c) == []
