"""Open circuits around the slab box Q(2m) inside An(2m, 3m).

A circuit is a closed walk of open edges whose in-plane projection winds
once around the origin column.  Winding is counted by crossings of the ray
``{x1 > 0, x2 = 1/2}``: an edge ``(x1, 0, *) -> (x1, 1, *)`` with ``x1 > 0``
carries weight +1 in that direction, every other edge weight 0.  Because
lattice points never lie on the ray the count is exact.

Existence is decided per component with a weighted union-find that keeps the
gcd of the windings of its cycles.  The minimal circuit is the shortest
winding-one walk, ties broken colexicographically on edge indices (compare
the largest index first), found by greedy deletion from the largest index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .lattice import LatticeError, Region, box_sets


@dataclass(frozen=True)
class CircuitData:
    vertices: tuple  # vertex indices, first == last
    edges: tuple  # edge indices in walk order
    m: int
    winding: int

    def __len__(self):
        return len(self.edges)

    def coords(self, region: Region) -> list:
        return [region.coord(v) for v in self.vertices]

    def to_dict(self, region: Region | None = None) -> dict:
        d = {"m": self.m, "winding": self.winding, "edges": list(self.edges),
             "vertices": list(self.vertices)}
        if region is not None:
            d["coords"] = [list(c) for c in self.coords(region)]
        return d


class CircuitGeometry:
    """Annulus masks, ray weights and covering-graph adjacency for one region."""

    def __init__(self, region: Region, m: int):
        if region.spec is None or not region.spec.is_slab:
            raise LatticeError("circuits are defined on slab regions")
        if m < 1:
            raise LatticeError("m must be >= 1")
        self.region = region
        self.m = int(m)
        _, _, an = box_sets(region, 2 * m, 3 * m)
        self.amask = an.mask
        c = region.coords
        eu, ev = region.eu, region.ev
        cu, cv = c[eu], c[ev]
        crossing = (cu[:, 0] > 0) & (cu[:, 0] == cv[:, 0]) & (cu[:, 1] == 0) & (cv[:, 1] == 1)
        self.ewt = crossing.astype(np.int64)
        inside = self.amask[eu] & self.amask[ev]
        self.edge_mask = inside
        self.cut_edges = np.flatnonzero(crossing & inside).astype(np.int64)
        self.cut_tail = eu[self.cut_edges].astype(np.int64)
        self.cut_head = ev[self.cut_edges].astype(np.int64)
        indptr, nbr, nbr_edge = region.csr()
        sign = np.where(eu[nbr_edge] == np.repeat(np.arange(region.nv), np.diff(indptr)), 1, -1)
        self.nbr_wt = self.ewt[nbr_edge] * sign
        # in-plane perimeter of the inner box bounds the length of any circuit from below
        self.min_length = 16 * self.m

    def exists_batch(self, bits: np.ndarray) -> np.ndarray:
        return K.winding_exists_batch(bits, self.region.eu, self.region.ev, self.amask, self.ewt)

    def _shortest(self, alive: np.ndarray, limit: int):
        indptr, nbr, nbr_edge = self.region.csr()
        sheet = max(2, limit // self.min_length + 2)
        while True:
            length, edges = K.shortest_winding_cycle(
                self.region.nv, indptr, nbr, nbr_edge, self.nbr_wt, alive,
                self.cut_edges, self.cut_tail, self.cut_head, sheet, limit)
            if length != -2:
                return length, edges
            sheet *= 2

    def minimal(self, bits_row: np.ndarray):
        region = self.region
        open_in = (bits_row.astype(bool)) & self.edge_mask
        gcd = K.winding_gcd_row(bits_row, region.eu, region.ev, self.amask, self.ewt)
        alive = open_in & (gcd[region.eu] == 1)
        if not alive.any():
            return None
        limit = int(alive.sum())
        length, cyc = self._shortest(alive, limit)
        if length < 0:
            raise RuntimeError("winding component found but no circuit recovered")
        in_cyc = np.zeros(region.ne, dtype=bool)
        in_cyc[cyc] = True
        for e in np.flatnonzero(alive)[::-1]:
            alive[e] = False
            if not in_cyc[e]:
                continue
            l2, c2 = self._shortest(alive, length)
            if l2 == length:
                cyc = c2
                in_cyc[:] = False
                in_cyc[cyc] = True
            else:
                alive[e] = True
        return self._walk(cyc)

    def _walk(self, cyc: np.ndarray) -> CircuitData:
        region = self.region
        eu, ev = region.eu, region.ev
        # cyc[0] is a cut edge traversed tail -> head; rotate to the smallest cut edge
        verts = [int(eu[cyc[0]])]
        for e in cyc:
            a, b = int(eu[e]), int(ev[e])
            verts.append(b if verts[-1] == a else a)
        cuts = set(self.cut_edges.tolist())
        steps = [(int(e), verts[i], verts[i + 1]) for i, e in enumerate(cyc)]
        starts = [i for i, (e, a, b) in enumerate(steps) if e in cuts and a == int(eu[e])]
        i0 = min(starts, key=lambda i: steps[i][0])
        steps = steps[i0:] + steps[:i0]
        vs = tuple([steps[0][1]] + [b for _, _, b in steps])
        wind = sum(self.ewt[e] if a == eu[e] else -self.ewt[e] for e, a, _ in steps)
        return CircuitData(vs, tuple(e for e, _, _ in steps), self.m, int(wind))


def circuit_exists(config, m: int, geometry: CircuitGeometry | None = None) -> bool:
    g = geometry or CircuitGeometry(config.region, m)
    return bool(g.exists_batch(config.bits[None, :])[0])


def minimal_open_circuit(config, m: int, geometry: CircuitGeometry | None = None):
    """Minimal open circuit around Q(2m) in An(2m, 3m), or ``None``."""
    g = geometry or CircuitGeometry(config.region, m)
    return g.minimal(config.bits)


def validate_circuit(config, data: CircuitData, geometry: CircuitGeometry | None = None) -> list:
    """Return a list of violated properties (empty when valid)."""
    region = config.region
    g = geometry or CircuitGeometry(region, data.m)
    problems = []
    vs, es = data.vertices, data.edges
    if len(vs) != len(es) + 1 or vs[0] != vs[-1]:
        problems.append("walk is not closed")
    wind = 0
    for i, e in enumerate(es):
        a, b = vs[i], vs[i + 1]
        u, v = int(region.eu[e]), int(region.ev[e])
        if {a, b} != {u, v}:
            problems.append(f"edge {e} does not join consecutive vertices")
            continue
        if not config.bits[e]:
            problems.append(f"edge {e} is closed")
        wind += g.ewt[e] if a == u else -g.ewt[e]
    if not all(g.amask[v] for v in vs):
        problems.append("walk leaves the annulus")
    if abs(wind) != 1 or wind != data.winding:
        problems.append(f"winding {wind} is not +-1")
    return problems
