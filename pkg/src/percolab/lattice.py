"""Finite regions of hypercubic lattices and slabs Z^2 x {0..k}^(d-2).

Regions are induced subgraphs with a deterministic layout: vertices sorted
lexicographically on coordinates, edges sorted by endpoint index pair.  Both
families use the graph metric, which on these lattices is the L1 distance.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class LatticeError(ValueError):
    """Invalid geometry request (bad coordinate, radius or family)."""


@dataclass(frozen=True)
class LatticeSpec:
    family: str
    d: int
    k: int = 0

    def __post_init__(self):
        if self.family not in ("hypercubic", "slab"):
            raise LatticeError(f"unknown lattice family {self.family!r}")
        if self.d < 2:
            raise LatticeError("dimension must be >= 2")
        if self.k < 0:
            raise LatticeError("slab thickness must be >= 0")
        if self.family == "hypercubic" and self.k != 0:
            object.__setattr__(self, "k", 0)

    @classmethod
    def hypercubic(cls, d: int) -> "LatticeSpec":
        return cls("hypercubic", d, 0)

    @classmethod
    def slab(cls, d: int, k: int) -> "LatticeSpec":
        return cls("slab", d, k)

    @property
    def is_slab(self) -> bool:
        return self.family == "slab"

    def degree_bound(self) -> int:
        if self.family == "hypercubic":
            return 2 * self.d
        return 4 + (self.d - 2) * min(2, self.k)

    def check_coord(self, v: Sequence[int]) -> tuple:
        v = tuple(int(x) for x in v)
        if len(v) != self.d:
            raise LatticeError(f"coordinate {v} has wrong length for d={self.d}")
        if self.is_slab and any(not 0 <= x <= self.k for x in v[2:]):
            raise LatticeError(f"slab layer out of range in {v} (k={self.k})")
        return v

    def origin(self) -> tuple:
        return (0,) * self.d

    def to_dict(self) -> dict:
        return {"family": self.family, "d": self.d, "k": self.k}

    @classmethod
    def from_dict(cls, d: dict) -> "LatticeSpec":
        return cls(d["family"], int(d["d"]), int(d.get("k", 0)))

    @classmethod
    def parse(cls, graph: str, d: int = 2, k: int = 0) -> "LatticeSpec":
        if graph in ("hypercubic", "zd", "Zd"):
            return cls.hypercubic(d)
        if graph == "slab":
            return cls.slab(d, k)
        raise LatticeError(f"unknown graph {graph!r}")


def _lex_order(coords: np.ndarray) -> np.ndarray:
    if coords.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return np.lexsort(coords.T[::-1])


class Region:
    """Induced finite subgraph with dense vertex/edge indexing.

    Attributes
    ----------
    spec : LatticeSpec or None
        ``None`` for explicit edge-list graphs.
    coords : (nv, d) int64 array, lexicographically sorted
    edges : (ne, 2) int32 array with ``u < v``, sorted by ``(u, v)``
    descriptor : dict
        Structured description of how the region was built.
    """

    def __init__(self, spec, coords, edges, descriptor):
        self.spec = spec
        self.coords = np.ascontiguousarray(coords, dtype=np.int64)
        self.edges = np.ascontiguousarray(edges, dtype=np.int32).reshape(-1, 2)
        self.descriptor = dict(descriptor)
        self.coords.setflags(write=False)
        self.edges.setflags(write=False)
        self._index = None
        self._csr = None
        self._edge_index = None

    # -- basic shape
    @property
    def nv(self) -> int:
        return self.coords.shape[0]

    @property
    def ne(self) -> int:
        return self.edges.shape[0]

    @property
    def eu(self) -> np.ndarray:
        return np.ascontiguousarray(self.edges[:, 0])

    @property
    def ev(self) -> np.ndarray:
        return np.ascontiguousarray(self.edges[:, 1])

    def __repr__(self):
        return f"Region({self.descriptor.get('construction')}, nv={self.nv}, ne={self.ne})"

    # -- lookups
    def index_map(self) -> dict:
        if self._index is None:
            self._index = {tuple(c): i for i, c in enumerate(self.coords.tolist())}
        return self._index

    def index_of(self, coord) -> int:
        try:
            return self.index_map()[tuple(int(x) for x in coord)]
        except KeyError:
            raise LatticeError(f"{tuple(coord)} is not a vertex of {self!r}") from None

    def coord(self, i: int) -> tuple:
        return tuple(int(x) for x in self.coords[i])

    def edge_id(self, a: int, b: int) -> int:
        if self._edge_index is None:
            self._edge_index = {(int(u), int(v)): i for i, (u, v) in enumerate(self.edges.tolist())}
        if a > b:
            a, b = b, a
        try:
            return self._edge_index[(a, b)]
        except KeyError:
            raise LatticeError(f"no edge between vertices {a} and {b}") from None

    def edge_between(self, x, y) -> int:
        return self.edge_id(self.index_of(x), self.index_of(y))

    def csr(self):
        """``(indptr, nbr, nbr_edge)`` adjacency; neighbours in ascending order."""
        if self._csr is None:
            u, v = self.eu.astype(np.int64), self.ev.astype(np.int64)
            src = np.concatenate([u, v])
            dst = np.concatenate([v, u])
            eid = np.concatenate([np.arange(self.ne), np.arange(self.ne)])
            order = np.lexsort((dst, src))
            src, dst, eid = src[order], dst[order], eid[order]
            indptr = np.zeros(self.nv + 1, dtype=np.int64)
            np.add.at(indptr, src + 1, 1)
            indptr = np.cumsum(indptr)
            self._csr = (indptr, dst.astype(np.int64), eid.astype(np.int64))
        return self._csr

    def incident_edges(self, i: int) -> np.ndarray:
        indptr, _, nbr_edge = self.csr()
        return nbr_edge[indptr[i]:indptr[i + 1]]

    def neighbors(self, i: int) -> np.ndarray:
        indptr, nbr, _ = self.csr()
        return nbr[indptr[i]:indptr[i + 1]]

    def degrees(self) -> np.ndarray:
        indptr, _, _ = self.csr()
        return np.diff(indptr)

    # -- vertex sets
    def vertex_set(self, items=None, *, mask=None) -> "VertexSet":
        if mask is not None:
            m = np.asarray(mask, dtype=bool).copy()
            if m.shape != (self.nv,):
                raise LatticeError("mask length does not match region")
            return VertexSet(self, m)
        m = np.zeros(self.nv, dtype=bool)
        if items is None:
            return VertexSet(self, m)
        items = list(items)
        if items and isinstance(items[0], (tuple, list, np.ndarray)):
            idx = [self.index_of(c) for c in items]
        else:
            idx = [int(i) for i in items]
        m[idx] = True
        return VertexSet(self, m)

    def all(self) -> "VertexSet":
        return VertexSet(self, np.ones(self.nv, dtype=bool))

    def empty(self) -> "VertexSet":
        return VertexSet(self, np.zeros(self.nv, dtype=bool))

    def same_layout(self, other: "Region") -> bool:
        return (self.nv == other.nv and self.ne == other.ne
                and np.array_equal(self.coords, other.coords)
                and np.array_equal(self.edges, other.edges))

    def to_json(self) -> str:
        return json.dumps(self.descriptor, sort_keys=True)


@dataclass(frozen=True, eq=False)
class VertexSet:
    region: Region
    mask: np.ndarray = field(repr=False)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask).astype(np.int64)

    def coords(self) -> list:
        return [self.region.coord(i) for i in self.indices]

    def __len__(self):
        return int(self.mask.sum())

    def __bool__(self):
        return bool(self.mask.any())

    def _check(self, other):
        if other.region is not self.region:
            raise LatticeError("vertex sets belong to different regions")

    def __or__(self, other):
        self._check(other)
        return VertexSet(self.region, self.mask | other.mask)

    def __and__(self, other):
        self._check(other)
        return VertexSet(self.region, self.mask & other.mask)

    def __sub__(self, other):
        self._check(other)
        return VertexSet(self.region, self.mask & ~other.mask)

    def __eq__(self, other):
        if not isinstance(other, VertexSet):
            return NotImplemented
        return other.region is self.region and bool(np.array_equal(self.mask, other.mask))

    def __hash__(self):
        return hash((id(self.region), self.mask.tobytes()))

    def __contains__(self, coord):
        try:
            return bool(self.mask[self.region.index_of(coord)])
        except LatticeError:
            return False

    def issubset(self, other) -> bool:
        self._check(other)
        return not (self.mask & ~other.mask).any()


# ------------------------------------------------------------- constructors

def _region_from_coords(spec, coords: np.ndarray, descriptor: dict) -> Region:
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, spec.d)
    coords = coords[_lex_order(coords)]
    if coords.shape[0] == 0:
        return Region(spec, coords, np.zeros((0, 2), dtype=np.int32), descriptor)
    lo = coords.min(axis=0)
    ext = coords.max(axis=0) - lo + 2  # +2 leaves room for the +1 shift
    def keys(c):
        kk = np.zeros(c.shape[0], dtype=np.int64)
        for a in range(spec.d):
            kk = kk * ext[a] + (c[:, a] - lo[a])
        return kk
    base = keys(coords)  # sorted because coords are lexicographic
    us, vs = [], []
    for a in range(spec.d):
        shifted = coords.copy()
        shifted[:, a] += 1
        sk = keys(shifted)
        pos = np.searchsorted(base, sk)
        pos_c = np.minimum(pos, base.size - 1)
        hit = base[pos_c] == sk
        us.append(np.flatnonzero(hit))
        vs.append(pos_c[hit])
    u = np.concatenate(us)
    v = np.concatenate(vs)
    order = np.lexsort((v, u))
    edges = np.stack([u[order], v[order]], axis=1)
    return Region(spec, coords, edges, descriptor)


def _ball_coords(spec: LatticeSpec, v: tuple, n: int) -> np.ndarray:
    axes = []
    for a in range(spec.d):
        lo, hi = v[a] - n, v[a] + n
        if spec.is_slab and a >= 2:
            lo, hi = max(lo, 0), min(hi, spec.k)
        axes.append(np.arange(lo, hi + 1, dtype=np.int64))
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.d)
    dist = np.abs(grid - np.asarray(v, dtype=np.int64)).sum(axis=1)
    return grid[dist <= n]


def build_ball_region(spec: LatticeSpec, v=None, n: int = 0) -> Region:
    """Induced subgraph on the graph-metric ball B(v, n)."""
    v = spec.check_coord(spec.origin() if v is None else v)
    if n < 0:
        raise LatticeError("radius must be >= 0")
    desc = {**spec.to_dict(), "construction": "ball", "center": list(v), "radii": [int(n)]}
    return _region_from_coords(spec, _ball_coords(spec, v, n), desc)


def build_box_region(spec: LatticeSpec, n: int) -> Region:
    """Slab box Q(n) = [-n, n]^2 x {0..k}^(d-2) centred at the origin."""
    if not spec.is_slab:
        raise LatticeError("boxes Q(n) are defined for slab specs")
    if n < 0:
        raise LatticeError("box side must be >= 0")
    axes = [np.arange(-n, n + 1)] * 2 + [np.arange(0, spec.k + 1)] * (spec.d - 2)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.d)
    desc = {**spec.to_dict(), "construction": "box", "center": list(spec.origin()), "radii": [int(n)]}
    return _region_from_coords(spec, grid, desc)


def build_rectangle_region(spec: LatticeSpec, lo: Sequence[int], hi: Sequence[int]) -> Region:
    """In-plane rectangle [lo0, hi0] x [lo1, hi1] (all layers for slabs)."""
    axes = [np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1)]
    for a in range(2, spec.d):
        axes.append(np.arange(0, spec.k + 1) if spec.is_slab else np.arange(0, 1))
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.d)
    desc = {**spec.to_dict(), "construction": "rectangle", "center": [int(lo[0]), int(lo[1])],
            "radii": [int(hi[0] - lo[0]), int(hi[1] - lo[1])]}
    return _region_from_coords(spec, grid, desc)


def build_explicit_region(vertices: Sequence, edges: Iterable) -> Region:
    """Arbitrary small graph; vertices are labels (ints or tuples)."""
    labels = [tuple(v) if isinstance(v, (tuple, list)) else (int(v),) for v in vertices]
    dim = len(labels[0]) if labels else 1
    coords = np.asarray(labels, dtype=np.int64).reshape(-1, dim)
    order = _lex_order(coords)
    coords = coords[order]
    index = {tuple(c): i for i, c in enumerate(coords.tolist())}
    pairs = set()
    for a, b in edges:
        a = tuple(a) if isinstance(a, (tuple, list)) else (int(a),)
        b = tuple(b) if isinstance(b, (tuple, list)) else (int(b),)
        i, j = index[a], index[b]
        if i == j:
            raise LatticeError("self-loops are not allowed")
        pairs.add((min(i, j), max(i, j)))
    e = np.array(sorted(pairs), dtype=np.int32).reshape(-1, 2)
    desc = {"family": "explicit", "construction": "explicit", "n_vertices": len(labels),
            "edges": e.tolist()}
    return Region(None, coords, e, desc)


def region_from_descriptor(desc: dict) -> Region:
    c = desc["construction"]
    if c == "explicit":
        raise LatticeError("explicit regions cannot be rebuilt from a descriptor alone")
    spec = LatticeSpec.from_dict(desc)
    if c == "ball":
        return build_ball_region(spec, desc["center"], desc["radii"][0])
    if c == "box":
        return build_box_region(spec, desc["radii"][0])
    if c == "rectangle":
        lo = desc["center"]
        return build_rectangle_region(spec, lo, [lo[0] + desc["radii"][0], lo[1] + desc["radii"][1]])
    raise LatticeError(f"unknown construction {c!r}")


# --------------------------------------------------------------- metric sets

def region_distances(region: Region, v, restrict: bool = False) -> np.ndarray:
    """Graph distance from ``v`` to every region vertex.

    By default the ambient lattice metric (L1) is used; ``restrict=True``
    (always the case for explicit graphs) measures paths inside the region,
    with unreachable vertices at distance ``-1``.
    """
    if region.spec is not None and not restrict:
        v = region.spec.check_coord(v)
        return np.abs(region.coords - np.asarray(v, dtype=np.int64)).sum(axis=1)
    src = region.index_of(v)
    dist = np.full(region.nv, -1, dtype=np.int64)
    dist[src] = 0
    indptr, nbr, _ = region.csr()
    q = deque([src])
    while q:
        x = q.popleft()
        for y in nbr[indptr[x]:indptr[x + 1]]:
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                q.append(y)
    return dist


def metric_sets(region: Region, v, m: int, n: int, restrict: bool = False):
    """Return ``(B_n, S_m, S_n, A_mn)`` around ``v`` as vertex sets.

    ``A_mn = B_n minus B_{m-1}`` with ``B_{-1}`` empty.  With the ambient
    metric the ball ``B(v, n)`` must lie inside the region.
    """
    if m > n:
        raise LatticeError(f"inner radius {m} exceeds outer radius {n}")
    if m < 0:
        raise LatticeError("radii must be >= 0")
    dist = region_distances(region, v, restrict)
    if region.spec is not None and not restrict:
        expected = _ball_coords(region.spec, region.spec.check_coord(v), n).shape[0]
        if int(((dist >= 0) & (dist <= n)).sum()) != expected:
            raise LatticeError(f"B(v,{n}) is not contained in {region!r}")
    reach = dist >= 0
    b_n = reach & (dist <= n)
    s_m = dist == m
    s_n = dist == n
    a_mn = b_n & (dist >= m)
    return (region.vertex_set(mask=b_n), region.vertex_set(mask=s_m),
            region.vertex_set(mask=s_n), region.vertex_set(mask=a_mn))


def shell(region: Region, v, r: int, restrict: bool = False) -> VertexSet:
    dist = region_distances(region, v, restrict)
    return region.vertex_set(mask=dist == r)


def ball(region: Region, v, r: int, restrict: bool = False) -> VertexSet:
    dist = region_distances(region, v, restrict)
    return region.vertex_set(mask=(dist >= 0) & (dist <= r))


def box_sets(region: Region, m: int, n: int):
    """``(Q_n, dQ_n, An_mn)`` as vertex sets of a slab region."""
    if region.spec is None or not region.spec.is_slab:
        raise LatticeError("slab boxes need a slab region")
    if not 1 <= m <= n:
        raise LatticeError("need 1 <= m <= n")
    linf = np.abs(region.coords[:, :2]).max(axis=1)
    q_n = linf <= n
    expected = (2 * n + 1) ** 2 * (region.spec.k + 1) ** (region.spec.d - 2)
    if int(q_n.sum()) != expected:
        raise LatticeError(f"Q({n}) is not contained in {region!r}")
    return (region.vertex_set(mask=q_n), region.vertex_set(mask=linf == n),
            region.vertex_set(mask=(linf <= n) & (linf >= m)))


def build_slab_box_sets(spec: LatticeSpec, m: int, n: int):
    """Q(n) as a region plus its boundary dQ(n) and annulus An(m, n)."""
    if not spec.is_slab:
        raise LatticeError("build_slab_box_sets needs a slab spec")
    if not 1 <= m <= n:
        raise LatticeError("need 1 <= m <= n")
    region = build_box_region(spec, n)
    q_n, dq_n, an = box_sets(region, m, n)
    return region, dq_n, an


def column_key(coord) -> tuple:
    return (int(coord[0]), int(coord[1]))


def column_projection(region: Region, w: VertexSet) -> VertexSet:
    """All region vertices sharing in-plane coordinates with a vertex of W."""
    if region.spec is None or not region.spec.is_slab:
        raise LatticeError("column projection needs a slab region")
    if not w:
        return region.empty()
    planar = region.coords[:, :2]
    cols = np.unique(planar[w.mask], axis=0)
    ext = planar.max(axis=0) - planar.min(axis=0) + 1
    lo = planar.min(axis=0)
    key = (planar[:, 0] - lo[0]) * ext[1] + (planar[:, 1] - lo[1])
    ckey = (cols[:, 0] - lo[0]) * ext[1] + (cols[:, 1] - lo[1])
    return region.vertex_set(mask=np.isin(key, ckey))


def induced_restriction(region: Region, z: VertexSet) -> Region:
    """Induced subgraph on Z keeping ambient coordinates and ordering."""
    if z.region is not region:
        raise LatticeError("Z must be a vertex set of the region")
    keep = z.mask
    new_index = np.full(region.nv, -1, dtype=np.int64)
    new_index[keep] = np.arange(int(keep.sum()))
    e = region.edges
    ok = keep[e[:, 0]] & keep[e[:, 1]]
    edges = new_index[e[ok]]
    desc = {**region.descriptor, "restricted_to": int(keep.sum())}
    return Region(region.spec, region.coords[keep], edges, desc)
