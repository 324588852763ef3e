"""Slab modification map and quasi-multiplicativity constants."""

import numpy as np
import pytest

from percolab.estimators import ConditioningStarvation, qm_ratio_events
from percolab.events import Connect
from percolab.lattice import LatticeError, LatticeSpec, build_box_region, build_rectangle_region
from percolab.percolation import sample_configuration
from percolab.slabqm import (SlabSetup, apply_modification, classify_case, d_bound, d_bound_alt, d_bound_single,
                             handcrafted_instance, qm_constant_report, reconstruct_columns, verify_instance,
                             verify_modification)

import reference as ref

SL31 = LatticeSpec.slab(3, 1)
GEOM = {"z": {"box_annulus": [2, 4]}, "x": [[2, 0, 1]], "y": [[4, 0, 1]]}


def test_bounds():
    # [PAPER] 4d(k+1)^(d-2) = 24 and 2d(k+1)^(d-2) = 12 for d = 3, k = 1
    assert d_bound(SL31) == 24
    assert d_bound_single(SL31) == 12
    assert d_bound_alt(SL31) == 24  # 4d(k+1)k^(d-2) coincides at k = 1
    assert d_bound_alt(LatticeSpec.slab(3, 2)) == 72 and d_bound(LatticeSpec.slab(3, 2)) == 36


def test_classify_extremes():
    region = build_box_region(SL31, 4)
    s = SlabSetup(region, 1)
    assert classify_case(sample_configuration(region, 1.0, 0, 0), setup=s) is None
    assert classify_case(sample_configuration(region, 0.0, 0, 0), setup=s) is None


def test_setup_geometry_checks():
    region = build_box_region(SL31, 4)
    with pytest.raises(LatticeError):
        SlabSetup(region, 1, z={"box_annulus": [3, 4]})  # misses An(2, 3)
    with pytest.raises(LatticeError):
        SlabSetup(region, 1, y=[[3, 0, 0]])  # Y inside Q(3)
    with pytest.raises(LatticeError):
        SlabSetup(build_box_region(LatticeSpec.hypercubic(3), 4), 1)


def test_handcrafted_case_a2():
    # [DERIVED] the constructed instance: ring in layer 0, two attachment paths in layer 1
    cfg, s = handcrafted_instance(SL31)
    data = classify_case(cfg, setup=s)
    assert data.case == "a2"
    fc = apply_modification(cfg, data, setup=s)
    diff = np.flatnonzero(fc.bits != cfg.bits)
    assert 0 < diff.size <= 24
    cmask = s.column_mask(data.columns)
    region = s.region
    assert (cmask[region.eu[diff]] | cmask[region.ev[diff]]).all()
    assert s.connected(s.labels(fc.bits, s.zmask), s.x, s.y)
    gamma, cols = reconstruct_columns(fc, data.case, s)
    assert gamma.edges == data.gamma.edges and cols == tuple(sorted(data.columns))
    assert verify_instance(cfg, s).passed


def test_handcrafted_case_a1():
    # a shared column needs at least three layers
    spec = LatticeSpec.slab(3, 2)
    cfg, s = handcrafted_instance(spec, shared_column=True)
    rep = verify_instance(cfg, s)
    assert rep.case == "a1" and rep.passed
    assert rep.edit_distance <= d_bound_single(spec)
    with pytest.raises(LatticeError):
        handcrafted_instance(SL31, shared_column=True)


@pytest.mark.parametrize("spec", [LatticeSpec.slab(3, 2), LatticeSpec.slab(4, 1)])
def test_handcrafted_other_slabs(spec):
    cfg, s = handcrafted_instance(spec)
    rep = verify_instance(cfg, s)
    assert rep.passed and rep.edit_distance <= d_bound(spec)


def test_verify_modification_sampled():
    # any failure is a bug; a short run must be clean
    s = verify_modification(SL31, 1, GEOM["z"], GEOM["x"], GEOM["y"], 0.45, budget=40_000, seed=5)
    assert s.n_hits > 0 and s.n_failures == 0 and s.all_passed
    assert s.max_edits <= 24
    assert sum(s.case_counts.values()) == s.n_hits


def test_verify_modification_starves_at_p_one():
    with pytest.raises(ConditioningStarvation):
        verify_modification(SL31, 1, p=1.0, budget=200)


def test_qm_constant_report_at_p_one():
    rep = qm_constant_report(SL31, 1.0, 1, budget=200)
    assert all(e.mean == 1.0 for e in rep.estimates) and rep.c_star == 1.0


def test_ratio_against_enumeration():
    # [DERIVED] exact a / (b c) from the reference brute force on a 3x2 grid
    verts = [(x, y) for x in range(3) for y in range(2)]
    edges = ref.induced_edges(verts)
    x, y, mid = [(0, 0)], [(2, 1)], [(1, 0), (1, 1)]
    a = ref.enumerate_probability(edges, lambda oe: ref.connected(verts, oe, x, y), 0.5)
    b = ref.enumerate_probability(edges, lambda oe: ref.connected(verts, oe, x, mid), 0.5)
    c = ref.enumerate_probability(edges, lambda oe: ref.connected(verts, oe, y, mid), 0.5)
    exact = float(a / (b * c))
    region = build_rectangle_region(LatticeSpec.hypercubic(2), (0, 0), (2, 1))
    est = qm_ratio_events(region, 0.5, Connect(x, y, "all"), Connect(x, mid, "all"), Connect(y, mid, "all"),
                          100_000, 6)
    assert abs(est.mean - exact) <= 4 * est.stderr
