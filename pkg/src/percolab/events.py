"""Named events evaluated on batches of configurations.

An event is a small region-agnostic object (serializable with ``to_dict``)
that is resolved against a region when evaluated.  ``evaluate(region, bits)``
maps a ``(n, ne)`` bit array to a boolean vector; the Monte Carlo engine and
the exact oracle both go through this method.  ``evaluate_stream`` gives the
same answers straight from the counter RNG, which lets cheap events (edge
cylinders, one-arm connections) avoid drawing every edge of the region.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .circuits import CircuitGeometry
from .lattice import (LatticeError, Region, VertexSet, ball, box_sets, metric_sets,
                      region_distances, shell)
from .percolation import check_probability, sample_block
from .rng import seed_to_uint64


# ----------------------------------------------------------------- set specs

def resolve_set(region: Region, spec) -> VertexSet:
    """Turn a set specifier into a vertex set of ``region``.

    Accepted forms: ``"all"``, ``"none"``, a list of coordinates, or a dict
    with one of the keys ``shell``, ``ball``, ``annulus`` (graph metric,
    optional ``center``) or ``box``, ``box_boundary``, ``box_annulus``
    (in-plane slab boxes).  Dicts may carry ``"and"``/``"minus"`` entries
    holding further specs.
    """
    if isinstance(spec, VertexSet):
        return spec
    if spec == "all" or spec is None:
        return region.all()
    if spec == "none":
        return region.empty()
    if isinstance(spec, dict):
        center = spec.get("center")
        if center is None and region.spec is not None:
            center = region.spec.origin()
        restrict = bool(spec.get("restrict", False))
        if "shell" in spec:
            out = shell(region, center, int(spec["shell"]), restrict)
        elif "ball" in spec:
            out = ball(region, center, int(spec["ball"]), restrict)
        elif "annulus" in spec:
            m, n = spec["annulus"]
            out = metric_sets(region, center, int(m), int(n), restrict)[3]
        elif "box" in spec:
            n = int(spec["box"])
            out = box_sets(region, 1 if n >= 1 else 0, n)[0] if n >= 1 else _box0(region)
        elif "box_boundary" in spec:
            n = int(spec["box_boundary"])
            out = box_sets(region, n, n)[1]
        elif "box_annulus" in spec:
            m, n = spec["box_annulus"]
            out = box_sets(region, int(m), int(n))[2]
        elif "vertices" in spec:
            out = region.vertex_set([tuple(c) for c in spec["vertices"]])
        else:
            raise LatticeError(f"unknown set specifier {spec!r}")
        if "and" in spec:
            out = out & resolve_set(region, spec["and"])
        if "minus" in spec:
            out = out - resolve_set(region, spec["minus"])
        return out
    return region.vertex_set([tuple(c) if isinstance(c, (list, tuple)) else c for c in spec])


def _box0(region):
    return region.vertex_set(mask=np.abs(region.coords[:, :2]).max(axis=1) == 0)


def _plain(spec):
    if isinstance(spec, VertexSet):
        return {"vertices": [list(c) for c in spec.coords()]}
    if isinstance(spec, (list, tuple)) and spec and isinstance(spec[0], (list, tuple)):
        return [list(c) for c in spec]
    return spec


# ------------------------------------------------------------------ batches

class Batch:
    """Bits of several configurations plus cached cluster labels per Z."""

    def __init__(self, region: Region, bits: np.ndarray):
        bits = np.ascontiguousarray(bits, dtype=np.uint8)
        if bits.ndim == 1:
            bits = bits[None, :]
        if bits.shape[1] != region.ne:
            raise LatticeError("bit array does not match the region's edge count")
        self.region = region
        self.bits = bits
        self._labels = {}

    def __len__(self):
        return self.bits.shape[0]

    def labels(self, zmask: np.ndarray) -> np.ndarray:
        key = zmask.tobytes()
        lab = self._labels.get(key)
        if lab is None:
            lab = K.label_batch(self.bits, self.region.eu, self.region.ev, zmask)
            self._labels[key] = lab
        return lab


class Event:
    kind = "event"
    lazy = False  # True when evaluate_stream avoids drawing full configurations

    def __init__(self):
        self._resolved = {}

    def _resolve(self, region):
        key = id(region)
        hit = self._resolved.get(key)
        if hit is None or hit[0] is not region:
            hit = (region, self.bind(region))
            self._resolved[key] = hit
        return hit[1]

    def bind(self, region):
        return None

    def evaluate(self, region: Region, bits: np.ndarray) -> np.ndarray:
        batch = bits if isinstance(bits, Batch) else Batch(region, bits)
        return self._eval(batch)

    def _eval(self, batch: Batch) -> np.ndarray:
        raise NotImplementedError

    def holds(self, config) -> bool:
        return bool(self.evaluate(config.region, config.bits[None, :])[0])

    def evaluate_stream(self, region, p, seed, first, count) -> np.ndarray:
        return self.evaluate(region, sample_block(region, p, seed, first, count))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __and__(self, other):
        return And(self, other)

    def __invert__(self):
        return Not(self)

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class Sure(Event):
    kind = "sure"
    lazy = True

    def _eval(self, batch):
        return np.ones(len(batch), dtype=bool)

    def evaluate_stream(self, region, p, seed, first, count):
        return np.ones(count, dtype=bool)

    def to_dict(self):
        return {"kind": "sure"}


class And(Event):
    kind = "and"

    def __init__(self, *events):
        super().__init__()
        self.events = events
        self.lazy = all(e.lazy for e in events)

    def _eval(self, batch):
        out = np.ones(len(batch), dtype=bool)
        for e in self.events:
            out &= e._eval(batch)
        return out

    def evaluate_stream(self, region, p, seed, first, count):
        if not self.lazy:
            return super().evaluate_stream(region, p, seed, first, count)
        out = np.ones(count, dtype=bool)
        for e in self.events:
            out &= e.evaluate_stream(region, p, seed, first, count)
        return out

    def to_dict(self):
        return {"kind": "and", "events": [e.to_dict() for e in self.events]}


class Not(Event):
    kind = "not"

    def __init__(self, event):
        super().__init__()
        self.event = event
        self.lazy = event.lazy

    def _eval(self, batch):
        return ~self.event._eval(batch)

    def evaluate_stream(self, region, p, seed, first, count):
        return ~self.event.evaluate_stream(region, p, seed, first, count)

    def to_dict(self):
        return {"kind": "not", "event": self.event.to_dict()}


class Cylinder(Event):
    """Every listed edge is in its required state (open by default).

    Edges are given as coordinate pairs, or as edge indices for explicit
    graphs.
    """

    kind = "cylinder"
    lazy = True

    def __init__(self, edges=(), states=None):
        super().__init__()
        self.edges = [tuple(tuple(x) for x in e) if isinstance(e, (list, tuple)) else int(e)
                      for e in edges]
        self.states = [1] * len(self.edges) if states is None else [int(bool(s)) for s in states]
        if len(self.states) != len(self.edges):
            raise LatticeError("one required state per cylinder edge")

    def bind(self, region):
        ids = [e if isinstance(e, int) else region.edge_between(*e) for e in self.edges]
        for e in ids:
            if not 0 <= e < region.ne:
                raise LatticeError(f"unknown edge {e}")
        return np.asarray(ids, dtype=np.int64), np.asarray(self.states, dtype=np.uint8)

    def edge_ids(self, region):
        return self._resolve(region)[0]

    def _eval(self, batch):
        ids, st = self._resolve(batch.region)
        if ids.size == 0:
            return np.ones(len(batch), dtype=bool)
        return (batch.bits[:, ids] == st).all(axis=1)

    def evaluate_stream(self, region, p, seed, first, count):
        ids, st = self._resolve(region)
        if ids.size == 0:
            return np.ones(count, dtype=bool)
        p = check_probability(p)
        sub = K.sample_edge_subset(np.uint64(seed_to_uint64(seed)), np.uint64(first), int(count), ids, p)
        return (sub == st).all(axis=1)

    def to_dict(self):
        edges = [[list(e[0]), list(e[1])] if isinstance(e, tuple) else e for e in self.edges]
        return {"kind": "cylinder", "edges": edges, "states": self.states}


class Connect(Event):
    """``X <-> Y in Z`` (X and Y are intersected with Z)."""

    kind = "connect"

    def __init__(self, x, y, z="all"):
        super().__init__()
        self.x, self.y, self.z = _plain(x), _plain(y), _plain(z)

    def bind(self, region):
        z = resolve_set(region, self.z)
        return (resolve_set(region, self.x).indices, resolve_set(region, self.y).indices, z.mask)

    def _eval(self, batch):
        xs, ys, zm = self._resolve(batch.region)
        return K.connected_batch(batch.labels(zm), xs, ys)

    def to_dict(self):
        return {"kind": "connect", "x": self.x, "y": self.y, "z": self.z}


class OneArm(Connect):
    """``w <-> S(w, n) in B(w, n)``, with a lazy exploration fast path."""

    kind = "onearm"
    lazy = True

    def __init__(self, w=None, n=1, restrict=False):
        self.w = None if w is None else tuple(int(c) for c in w)
        self.n = int(n)
        self.restrict = bool(restrict)
        c = {} if self.w is None else {"center": list(self.w)}
        if restrict:
            c["restrict"] = True
        super().__init__({"ball": 0, **c}, {"shell": self.n, **c}, {"ball": self.n, **c})

    def bind(self, region):
        xs, ys, zm = super().bind(region)
        w = region.spec.origin() if self.w is None else self.w
        dist = region_distances(region, w, self.restrict)
        dist = np.where(zm, dist, 0).astype(np.int64)
        return xs, ys, zm, dist

    def _eval(self, batch):
        xs, ys, zm, _ = self._resolve(batch.region)
        return K.connected_batch(batch.labels(zm), xs, ys)

    def reach_stream(self, region, p, seed, first, count, target=None):
        xs, _, zm, dist = self._resolve(region)
        indptr, nbr, nbr_edge = region.csr()
        p = check_probability(p)
        t = self.n if target is None else int(target)
        return K.cluster_reach_batch(np.uint64(seed_to_uint64(seed)), np.uint64(first), int(count),
                                     p, xs, zm, indptr, nbr, nbr_edge, dist, t)

    def evaluate_stream(self, region, p, seed, first, count):
        return self.reach_stream(region, p, seed, first, count) >= self.n

    def to_dict(self):
        return {"kind": "onearm", "w": None if self.w is None else list(self.w), "n": self.n,
                "restrict": self.restrict}


class CrossingCount(Event):
    """Compare the number of crossing clusters of an annulus with a bound.

    ``op`` is one of ``">="`` or ``"=="``.
    """

    kind = "crossing"

    def __init__(self, annulus, inner, outer, op=">=", count=1):
        super().__init__()
        self.annulus, self.inner, self.outer = _plain(annulus), _plain(inner), _plain(outer)
        if op not in (">=", "=="):
            raise LatticeError(f"unsupported comparison {op!r}")
        self.op, self.count = op, int(count)

    def bind(self, region):
        return (resolve_set(region, self.annulus).mask, resolve_set(region, self.inner).indices,
                resolve_set(region, self.outer).indices)

    def counts(self, batch):
        zm, inner, outer = self._resolve(batch.region)
        return K.crossing_count_batch(batch.labels(zm), inner, outer)

    def _eval(self, batch):
        c = self.counts(batch)
        return c >= self.count if self.op == ">=" else c == self.count

    def to_dict(self):
        return {"kind": "crossing", "annulus": self.annulus, "inner": self.inner,
                "outer": self.outer, "op": self.op, "count": self.count}


def _annulus_specs(v, m, n, z):
    if m > n:
        raise LatticeError(f"inner radius {m} exceeds outer radius {n}")
    c = {} if v is None else {"center": list(v)}
    zz = {"annulus": [m, n], **c} if z is None else z
    return zz, {"shell": m, **c}, {"shell": n, **c}


class E1(Connect):
    """``S(v,m) <-> S(v,n) in Z``; Z defaults to A(v,m,n)."""

    kind = "E1"

    def __init__(self, v=None, m=1, n=2, z=None):
        self.v, self.m, self.n, self.zspec = v, int(m), int(n), _plain(z)
        zz, inner, outer = _annulus_specs(v, self.m, self.n, z)
        super().__init__(inner, outer, zz)

    def to_dict(self):
        return {"kind": "E1", "v": None if self.v is None else list(self.v), "m": self.m,
                "n": self.n, "z": self.zspec}


class E2(CrossingCount):
    """At least two distinct crossing clusters of A(v,m,n)."""

    kind = "E2"

    def __init__(self, v=None, m=1, n=2, z=None):
        self.v, self.m, self.n, self.zspec = v, int(m), int(n), _plain(z)
        zz, inner, outer = _annulus_specs(v, self.m, self.n, z)
        super().__init__(zz, inner, outer, ">=", 2)

    def to_dict(self):
        return {"kind": "E2", "v": None if self.v is None else list(self.v), "m": self.m,
                "n": self.n, "z": self.zspec}


class UniqueCrossing(CrossingCount):
    """Exactly one crossing cluster of A(v,m,n)."""

    kind = "F"

    def __init__(self, v=None, m=1, n=2, z=None):
        self.v, self.m, self.n, self.zspec = v, int(m), int(n), _plain(z)
        zz, inner, outer = _annulus_specs(v, self.m, self.n, z)
        super().__init__(zz, inner, outer, "==", 1)

    def to_dict(self):
        return {"kind": "F", "v": None if self.v is None else list(self.v), "m": self.m,
                "n": self.n, "z": self.zspec}


class Circuit(Event):
    """Open circuit around Q(2m) inside An(2m, 3m) (slab regions)."""

    kind = "circuit"

    def __init__(self, m=1):
        super().__init__()
        self.m = int(m)

    def bind(self, region):
        return CircuitGeometry(region, self.m)

    def geometry(self, region):
        return self._resolve(region)

    def _eval(self, batch):
        return self._resolve(batch.region).exists_batch(batch.bits)

    def to_dict(self):
        return {"kind": "circuit", "m": self.m}


# ---------------------------------------------------------- event functions

def event_E1(config, v=None, m=1, n=2, z=None) -> bool:
    return E1(v, m, n, z).holds(config)


def event_E2(config, v=None, m=1, n=2, z=None) -> bool:
    return E2(v, m, n, z).holds(config)


def event_unique_crossing(config, annulus, inner, outer) -> bool:
    return CrossingCount(annulus, inner, outer, "==", 1).holds(config)


def event_cylinder(config, edge_list, required_states=None) -> bool:
    return Cylinder(edge_list, required_states).holds(config)


# ------------------------------------------------------------ serialization

def event_from_dict(d: dict) -> Event:
    kind = d["kind"]
    if kind == "sure":
        return Sure()
    if kind == "and":
        return And(*[event_from_dict(e) for e in d["events"]])
    if kind == "not":
        return Not(event_from_dict(d["event"]))
    if kind == "cylinder":
        return Cylinder([tuple(map(tuple, e)) if isinstance(e, list) else e for e in d["edges"]],
                        d.get("states"))
    if kind == "connect":
        return Connect(d["x"], d["y"], d.get("z", "all"))
    if kind == "onearm":
        return OneArm(d.get("w"), d["n"], d.get("restrict", False))
    if kind == "crossing":
        return CrossingCount(d["annulus"], d["inner"], d["outer"], d.get("op", ">="), d.get("count", 1))
    if kind in ("E1", "E2", "F"):
        cls = {"E1": E1, "E2": E2, "F": UniqueCrossing}[kind]
        return cls(d.get("v"), d["m"], d["n"], d.get("z"))
    if kind == "circuit":
        return Circuit(d["m"])
    raise LatticeError(f"unknown event kind {kind!r}")


def origin_star(spec_or_d, w=None) -> Cylinder:
    """Cylinder requiring the 2d edges at ``w`` (default origin) to be open.

    For slabs only the edges present in the slab are listed.
    """
    from .lattice import LatticeSpec
    spec = spec_or_d if isinstance(spec_or_d, LatticeSpec) else LatticeSpec.hypercubic(int(spec_or_d))
    w = spec.origin() if w is None else tuple(w)
    edges = []
    for a in range(spec.d):
        for s in (-1, 1):
            x = list(w)
            x[a] += s
            if spec.is_slab and a >= 2 and not 0 <= x[a] <= spec.k:
                continue
            edges.append((tuple(w), tuple(x)))
    return Cylinder(edges)
