"""Regions, metric sets, slab boxes and columns."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percolab.lattice import (LatticeError, LatticeSpec, build_ball_region, build_box_region, build_explicit_region,
                              build_rectangle_region, build_slab_box_sets, column_projection, induced_restriction,
                              metric_sets)

import reference as ref

SQ = LatticeSpec.hypercubic(2)
SL31 = LatticeSpec.slab(3, 1)


def edge_coords(region):
    return {tuple(sorted((region.coord(int(a)), region.coord(int(b))))) for a, b in region.edges}


# [DERIVED] vertex and edge counts from brute-force enumeration of the L1 diamond
@pytest.mark.parametrize("n", [1, 2, 3])
def test_ball_counts_match_reference(n):
    r = build_ball_region(SQ, (0, 0), n)
    verts = ref.diamond(n)
    assert r.nv == len(verts)
    assert edge_coords(r) == {tuple(sorted(e)) for e in ref.induced_edges(verts)}


def test_ball_small_values():
    # [DERIVED] 5/4 and 13/16 from the reference enumeration above
    assert (build_ball_region(SQ, (0, 0), 1).nv, build_ball_region(SQ, (0, 0), 1).ne) == (5, 4)
    assert (build_ball_region(SQ, (0, 0), 2).nv, build_ball_region(SQ, (0, 0), 2).ne) == (13, 16)


def test_slab_ball_radius_one():
    # [DERIVED] four planar neighbours plus one vertical neighbour
    r = build_ball_region(SL31, (0, 0, 0), 1)
    assert r.nv == 6


@pytest.mark.parametrize("spec", [SQ, SL31, LatticeSpec.hypercubic(3)])
def test_zero_radius(spec):
    # [TRIVIAL]
    r = build_ball_region(spec, spec.origin(), 0)
    assert (r.nv, r.ne) == (1, 0)


def test_metric_sets_diamond_shells():
    r = build_ball_region(SQ, (0, 0), 2)
    b, s1, s2, a = metric_sets(r, (0, 0), 1, 2)
    # [DERIVED] shell counts of the diamond: 4 and 8
    assert (len(s1), len(s2), len(a), len(b)) == (4, 8, 12, 13)
    # [TRIVIAL] degenerate annulus and m = 0
    _, sm, sn, amm = metric_sets(r, (0, 0), 2, 2)
    assert amm == sm == sn
    assert metric_sets(r, (0, 0), 0, 2)[3] == b


def test_metric_sets_rejects_inverted_radii():
    r = build_ball_region(SQ, (0, 0), 2)
    with pytest.raises(LatticeError):
        metric_sets(r, (0, 0), 2, 1)


def test_slab_box_sets():
    q, bd, an = build_slab_box_sets(SL31, 1, 1)
    # [DERIVED] 9 planar sites times 2 layers; boundary 8 sites times 2
    assert q.nv == len(ref.slab_box(1, 3, 1)) == 18
    assert len(bd) == 16
    # [TRIVIAL] An(n, n) is the boundary
    assert an == bd
    q2, _, _ = build_slab_box_sets(LatticeSpec.slab(2, 0), 2, 2)
    assert q2.nv == 25


def test_slab_box_sets_errors():
    with pytest.raises(LatticeError):
        build_slab_box_sets(SQ, 1, 2)
    with pytest.raises(LatticeError):
        build_slab_box_sets(SL31, 3, 2)


def test_slab_edges_match_reference():
    r = build_box_region(LatticeSpec.slab(3, 2), 2)
    verts = ref.slab_box(2, 3, 2)
    assert edge_coords(r) == {tuple(sorted(e)) for e in ref.induced_edges(verts)}


def test_slab20_is_square_lattice():
    # [TRIVIAL] Z^2 x {0} is Z^2
    a = build_box_region(LatticeSpec.slab(2, 0), 3)
    b = build_rectangle_region(SQ, (-3, -3), (3, 3))
    assert edge_coords(a) == edge_coords(b)


def test_column_projection():
    r = build_box_region(SL31, 3)
    w = r.vertex_set([(2, 3, 0)])
    col = column_projection(r, w)
    assert sorted(col.coords()) == [(2, 3, 0), (2, 3, 1)]
    assert len(column_projection(r, r.empty())) == 0
    assert column_projection(r, col) == col


def test_induced_restriction():
    r = build_ball_region(SQ, (0, 0), 2)
    full = induced_restriction(r, r.all())
    assert np.array_equal(full.coords, r.coords) and np.array_equal(full.edges, r.edges)
    assert induced_restriction(r, r.empty()).nv == 0
    ann = induced_restriction(r, metric_sets(r, (0, 0), 1, 2)[3])
    # [DERIVED] twelve shell-1 to shell-2 edges, no intra-shell edges
    assert (ann.nv, ann.ne) == (12, 12)
    assert all(abs(ref.l1(ann.coord(int(a))) - ref.l1(ann.coord(int(b)))) == 1 for a, b in ann.edges)


def test_invalid_inputs():
    with pytest.raises(LatticeError):
        SL31.check_coord((0, 0, 2))
    with pytest.raises(LatticeError):
        LatticeSpec("triangular", 2)
    with pytest.raises(LatticeError):
        build_ball_region(SQ, (0, 0), -1)


def test_explicit_region():
    r = build_explicit_region([(0,), (1,), (2,)], [((0,), (1,)), ((1,), (2,))])
    assert (r.nv, r.ne) == (3, 2)


@settings(max_examples=40, deadline=None)
@given(family=st.sampled_from(["hypercubic", "slab"]), d=st.integers(2, 4), k=st.integers(0, 2),
       n=st.integers(0, 3))
def test_region_invariants(family, d, k, n):
    spec = LatticeSpec(family, d, k)
    r = build_ball_region(spec, spec.origin(), n)
    # deterministic construction
    r2 = build_ball_region(spec, spec.origin(), n)
    assert np.array_equal(r.coords, r2.coords) and np.array_equal(r.edges, r2.edges)
    # edges valid, unique, sorted, unit length
    e = r.edges
    assert ((e >= 0) & (e < r.nv)).all()
    assert len({tuple(x) for x in e.tolist()}) == r.ne
    assert (e[:, 0] < e[:, 1]).all()
    assert (np.abs(r.coords[e[:, 0]] - r.coords[e[:, 1]]).sum(axis=1) == 1).all()
    # lexicographic vertex order
    keys = [tuple(c) for c in r.coords.tolist()]
    assert keys == sorted(keys)
    # degree bound and adjacency consistency
    deg = r.degrees()
    assert (deg <= spec.degree_bound()).all()
    assert deg.sum() == 2 * r.ne
