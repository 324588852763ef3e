"""Configurations, cluster labeling and connectivity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percolab.lattice import LatticeError, LatticeSpec, build_ball_region, build_box_region, build_rectangle_region
from percolab.percolation import (Configuration, check_probability, connected_in, crossing_cluster_count,
                                  label_clusters, sample_block, sample_configuration)

import reference as ref

SQ = LatticeSpec.hypercubic(2)


def square():
    return build_rectangle_region(SQ, (0, 0), (1, 1))


def open_coord_edges(cfg):
    r = cfg.region
    return [(r.coord(int(r.eu[e])), r.coord(int(r.ev[e]))) for e in np.flatnonzero(cfg.bits)]


def test_extreme_p():
    r = build_ball_region(SQ, (0, 0), 3)
    assert sample_configuration(r, 0.0, 1, 0).n_open == 0
    assert sample_configuration(r, 1.0, 1, 0).n_open == r.ne


def test_open_fraction():
    # [DERIVED] binomial standard error sqrt(0.25 / (16 * 1e5))
    r = build_ball_region(SQ, (0, 0), 2)
    bits = sample_block(r, 0.5, 123, 0, 100_000)
    sigma = math.sqrt(0.25 / (16 * 100_000))
    assert abs(bits.mean() - 0.5) <= 4 * sigma


def test_probability_validation():
    with pytest.raises(LatticeError):
        check_probability(1.5)
    with pytest.raises(LatticeError):
        check_probability(float("nan"))


def test_unit_square_clusters():
    r = square()
    bits = np.zeros(r.ne, dtype=np.uint8)
    bits[r.edge_between((0, 0), (1, 0))] = 1
    lab = label_clusters(Configuration(r, bits))
    groups = {frozenset(r.coord(int(v)) for v in lab.cluster_of(i)) for i in range(r.nv)}
    assert groups == {frozenset({(0, 0), (1, 0)}), frozenset({(0, 1)}), frozenset({(1, 1)})}


def test_labeling_extremes():
    r = build_ball_region(SQ, (0, 0), 3)
    assert label_clusters(sample_configuration(r, 1.0, 0, 0)).n_clusters == 1
    assert label_clusters(sample_configuration(r, 0.0, 0, 0)).n_clusters == r.nv


def test_connected_in_trivial_cases():
    r = square()
    closed = sample_configuration(r, 0.0, 0, 0)
    assert connected_in(closed, [(0, 0)], [(0, 0)])
    assert not connected_in(closed, [(0, 0)], [(1, 1)])


def test_unit_square_connection_probability():
    # [DERIVED] exact enumeration over 2^4 configurations (reference module)
    verts = [(0, 0), (0, 1), (1, 0), (1, 1)]
    edges = ref.induced_edges(verts)
    exact = ref.enumerate_probability(edges, lambda oe: ref.connected(verts, oe, [(0, 0)], [(1, 1)]), 0.5)
    assert float(exact) == 0.4375
    r = square()
    bits = sample_block(r, 0.5, 7, 0, 100_000)
    hits = [connected_in(Configuration(r, b), [(0, 0)], [(1, 1)]) for b in bits[:20_000]]
    mean = np.mean(hits)
    assert abs(mean - 0.4375) <= 4 * math.sqrt(0.4375 * 0.5625 / len(hits))


def test_crossing_count_extremes_and_exact():
    r = build_ball_region(SQ, (0, 0), 2)
    ann = {"annulus": [1, 2]}
    assert crossing_cluster_count(sample_configuration(r, 1.0, 0, 0), ann, {"shell": 1}, {"shell": 2}) == 1
    assert crossing_cluster_count(sample_configuration(r, 0.0, 0, 0), ann, {"shell": 1}, {"shell": 2}) == 0
    # one open annulus edge gives at most one crossing cluster
    bits = np.zeros(r.ne, dtype=np.uint8)
    bits[r.edge_between((1, 0), (2, 0))] = 1
    assert crossing_cluster_count(Configuration(r, bits), ann, {"shell": 1}, {"shell": 2}) == 1


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 4), p=st.floats(0.05, 0.95), seed=st.integers(0, 10 ** 6), idx=st.integers(0, 1000))
def test_labeling_matches_reference_bfs(n, p, seed, idx):
    r = build_box_region(LatticeSpec.slab(3, 1), n)
    cfg = sample_configuration(r, p, seed, idx)
    lab = label_clusters(cfg)
    verts = [r.coord(i) for i in range(r.nv)]
    comps = ref.components(verts, open_coord_edges(cfg))
    mine = {frozenset(r.coord(int(v)) for v in lab.cluster_of(i)) for i in range(r.nv)}
    assert mine == set(comps)
    inner = [v for v in verts if max(abs(v[0]), abs(v[1])) == 0]
    outer = [v for v in verts if max(abs(v[0]), abs(v[1])) == n]
    assert connected_in(cfg, inner, outer) == ref.connected(verts, open_coord_edges(cfg), inner, outer)


def test_configuration_text_round_trip():
    r = build_ball_region(SQ, (0, 0), 2)
    cfg = sample_configuration(r, 0.4, 3, 9)
    back = Configuration.from_text(cfg.to_text(), r)
    assert np.array_equal(back.bits, cfg.bits)
