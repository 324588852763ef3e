"""Explorations, scale search, exact factorization and transfer matrices."""

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percolab.decoupling import (LatticeError, ScaleSearchError, TransferMatrix, choose_scales,
                                 cross_ratio_and_contraction, estimate_transfer_matrix, explore_inner, explore_outer,
                                 strip_instance, verify_factorization_exact)
from percolab.events import Cylinder, Sure
from percolab.lattice import LatticeSpec, build_ball_region, metric_sets
from percolab.percolation import Configuration, sample_configuration

SQ = LatticeSpec.hypercubic(2)
O = (0, 0)


def idx(vs):
    return tuple(sorted(vs.indices.tolist()))


def test_explore_inner_extremes():
    r = build_ball_region(SQ, O, 5)
    rec0 = explore_inner(sample_configuration(r, 0.0, 0, 0), O, 2, 4)
    assert rec0.U == idx(metric_sets(r, O, 0, 2)[0]) and rec0.R == ()
    rec1 = explore_inner(sample_configuration(r, 1.0, 0, 0), O, 2, 4)
    assert rec1.U == idx(metric_sets(r, O, 0, 4)[0])
    assert rec1.R == idx(metric_sets(r, O, 5, 5)[1])
    # [TRIVIAL] same configuration, same record hash
    cfg = sample_configuration(r, 0.5, 3, 7)
    assert explore_inner(cfg, O, 2, 4).key == explore_inner(cfg, O, 2, 4).key


def test_explore_outer_extremes():
    r = build_ball_region(SQ, O, 6)
    rec0 = explore_outer(sample_configuration(r, 0.0, 0, 0), O, 2, 6)
    assert rec0.first == idx(metric_sets(r, O, 6, 6)[1]) and rec0.second == ()
    rec1 = explore_outer(sample_configuration(r, 1.0, 0, 0), O, 2, 6)
    assert rec1.first == idx(metric_sets(r, O, 2, 6)[3])
    assert rec1.second == idx(metric_sets(r, O, 1, 1)[1])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), idx_=st.integers(0, 10 ** 4), p=st.floats(0.3, 0.8))
def test_outer_record_is_local(seed, idx_, p):
    # re-randomizing edges not touching X leaves the record unchanged
    r = build_ball_region(SQ, O, 6)
    cfg = sample_configuration(r, p, seed, idx_)
    rec = explore_outer(cfg, O, 2, 6)
    xmask = np.zeros(r.nv, dtype=bool)
    xmask[list(rec.first)] = True
    touch = xmask[r.eu] | xmask[r.ev]
    other = sample_configuration(r, 0.5, seed + 1, idx_).bits
    bits = np.where(touch, cfg.bits, other).astype(np.uint8)
    assert explore_outer(Configuration(r, bits), O, 2, 6).key == rec.key


def test_choose_scales_trivial_and_skipped(caplog):
    s = choose_scales(SQ, None, 2, 1.0)
    assert s.scales == [2, 9]
    with caplog.at_level(logging.WARNING):
        with pytest.raises(ScaleSearchError):
            choose_scales(SQ, None, 1, 0.2, p_grid=(0.0,), budget=400, max_n=8)
    assert "skipped" in caplog.text


def test_choose_scales_reports_some_n():
    # the chosen n is recorded, not asserted beyond the search range
    s = choose_scales(SQ, None, 4, 0.2, (0.5,), budget=100_000, seed=1)
    assert s.scales[0] == 4 and s.scales[1] <= 64 and s.eps_hat[0] < 0.2


def test_factorization_extremes():
    region, c = strip_instance()
    rep = verify_factorization_exact(region, c, c, 1, 2, 3, Sure(), (0.0, 1.0))
    assert rep.lhs[0.0] == rep.rhs[0.0] == 0.0
    assert rep.lhs[1.0] == rep.rhs[1.0] and rep.lhs[1.0] in (0.0, 1.0)


def test_factorization_one_edge_cylinder():
    # [DERIVED] both sides enumerated independently over 2^22 configurations
    region, c = strip_instance()
    assert region.ne == 22
    rep = verify_factorization_exact(region, c, c, 1, 2, 3, Cylinder([(c, (c[0] + 1, c[1]))]))
    assert rep.max_abs_deviation <= 1e-9


def test_factorization_edge_cap():
    with pytest.raises(LatticeError):
        verify_factorization_exact(build_ball_region(SQ, O, 4), O, O, 1, 2, 3)


# [TRIVIAL] arithmetic of cross ratios
def test_cross_ratio_examples():
    a, b = np.array([1.0, 2.0, 3.0]), np.array([0.5, 4.0])
    rank_one = cross_ratio_and_contraction(np.outer(a, b))
    assert abs(rank_one.kappa_sq - 1) < 1e-12 and abs(rank_one.contraction) < 1e-12
    r = cross_ratio_and_contraction(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert abs(r.kappa_sq - 4) < 1e-12 and abs(r.kappa - 2) < 1e-12 and abs(r.contraction - 1 / 3) < 1e-12
    assert abs(cross_ratio_and_contraction(np.ones((2, 2))).kappa_sq - 1) < 1e-12
    with pytest.raises(LatticeError):
        cross_ratio_and_contraction(np.array([[1.0, 0.0], [1.0, 1.0]]))


def test_transfer_matrix_small_run():
    M = estimate_transfer_matrix(SQ, None, (2, 4, 5, 16, 64), 0, 3, 0.5, 6000, 2, 3)
    assert isinstance(M, TransferMatrix)
    # u' counts the intersection with E, so it never exceeds u''
    assert (M.u_prime <= M.u_second).all()
    assert M.entries.shape == (len(M.rows), len(M.cols))
    assert set(M.to_dict()) >= {"entries", "stderr", "hits", "zero_entries"}
    for r, c in M.zero_entries:
        assert M.hits[r, c] == 0


def test_transfer_matrix_gap_requirement():
    with pytest.raises(LatticeError):
        estimate_transfer_matrix(SQ, None, (2, 4, 5, 16, 64), 0, 2, 0.5, 100, 0, 2)
