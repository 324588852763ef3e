"""Local modification maps on slabs and box-geometry quasi-multiplicativity.

Setting: a slab region, ``m >= 1``, a vertex set Z containing An(2m, 3m),
X inside Z and Q(2m), Y inside Z outside Q(3m).  Gamma is the minimal open
circuit around Q(2m) in An(2m, 3m) (see :mod:`percolab.circuits`) and
``bar W`` is the union of the columns (fixed in-plane coordinates) meeting W.

On configurations where X and Y both reach ``bar Gamma`` in Z but not each
other, the map f rewires one or two columns of ``bar Gamma`` so that
X <-> Y in Z.  Case tags: ``a1`` (one shared column), ``a2`` (two columns),
``b1``/``b2`` (Y already meets Gamma), ``c1``/``c2`` (X meets Gamma; case b
with X and Y swapped).
"""

from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .circuits import CircuitData, CircuitGeometry
from .estimators import Z95, ConditioningStarvation, Estimate, qm_ratio_events
from .events import Connect, resolve_set
from .lattice import LatticeError, LatticeSpec, Region, box_sets, build_box_region
from .percolation import Configuration, check_probability, sample_block

log = logging.getLogger(__name__)


class ModificationError(RuntimeError):
    """An internal invariant of the modification map failed."""


def as_slab(spec: LatticeSpec) -> LatticeSpec:
    """The square lattice is the slab with d=2, k=0."""
    if spec.is_slab:
        return spec
    if spec.d == 2:
        return LatticeSpec.slab(2, 0)
    raise LatticeError(f"{spec} is not a slab")


def d_bound(spec: LatticeSpec) -> int:
    """Edit bound ``4d(k+1)^(d-2)`` for the two-column construction."""
    return 4 * spec.d * (spec.k + 1) ** (spec.d - 2)


def d_bound_alt(spec: LatticeSpec) -> int:
    """The variant ``4d(k+1)k^(d-2)``, reported alongside :func:`d_bound`."""
    return 4 * spec.d * (spec.k + 1) * spec.k ** (spec.d - 2)


def d_bound_single(spec: LatticeSpec) -> int:
    """Edit bound ``2d(k+1)^(d-2)`` for a single column."""
    return 2 * spec.d * (spec.k + 1) ** (spec.d - 2)


def _linf(region):
    return np.abs(region.coords[:, :2]).max(axis=1)


class SlabSetup:
    """Resolved sets, column ids and circuit geometry for one (region, m, Z, X, Y)."""

    def __init__(self, region: Region, m: int, z="all", x=None, y=None, check: bool = True):
        if region.spec is None or not region.spec.is_slab:
            raise LatticeError("slab modification needs a slab region")
        self.region = region
        self.m = int(m)
        self.zmask = resolve_set(region, z).mask.copy()
        x = {"box": 0} if x is None else x
        y = {"box_boundary": int(_linf(region).max())} if y is None else y
        self.x = np.flatnonzero(resolve_set(region, x).mask & self.zmask).astype(np.int64)
        self.y = np.flatnonzero(resolve_set(region, y).mask & self.zmask).astype(np.int64)
        self.circ = CircuitGeometry(region, m)
        if check:
            self._check()
        planar = region.coords[:, :2]
        keys, self.col = np.unique(planar, axis=0, return_inverse=True)
        self.col = self.col.ravel().astype(np.int64)
        self.col_coords = [tuple(int(a) for a in k) for k in keys]
        order = np.argsort(self.col, kind="stable")
        bounds = np.searchsorted(self.col[order], np.arange(len(keys) + 1))
        self.col_members = [order[bounds[c]:bounds[c + 1]] for c in range(len(keys))]
        self.indptr, self.nbr, self.nbr_edge = region.csr()

    def _check(self):
        m = self.m
        an = box_sets(self.region, 2 * m, 3 * m)[2].mask
        linf = _linf(self.region)
        if (an & ~self.zmask).any():
            raise LatticeError("Z must contain An(2m, 3m)")
        if self.x.size == 0 or self.y.size == 0:
            raise LatticeError("X and Y must meet Z")
        if (linf[self.x] > 2 * m).any():
            raise LatticeError("X must lie in Q(2m)")
        if (linf[self.y] <= 3 * m).any():
            raise LatticeError("Y must lie outside Q(3m)")

    # ----------------------------------------------------------- helpers
    def labels(self, bits, zmask):
        return K.label_batch(bits[None, :], self.region.eu, self.region.ev, zmask)[0]

    def connected(self, lab, a, b) -> bool:
        return bool(K.connected_batch(lab[None, :], np.asarray(a, np.int64), np.asarray(b, np.int64))[0])

    def column_mask(self, cols):
        return np.isin(self.col, np.asarray(list(cols), dtype=np.int64))

    def attachments(self, bits, cols, src):
        """Points u of the given columns joined to ``src`` in Z by an open path
        that leaves the column of u at its first step and never returns.

        Returns ``(dist, u, path_edges)`` sorted by (dist, u); the path is a
        BFS-shortest one, listed from u outwards.
        """
        out = []
        srcset = set(src.tolist())
        for c in sorted(cols):
            zc = self.zmask & (self.col != c)
            dist, par = K.bfs_open(self.indptr, self.nbr, self.nbr_edge, bits, zc, src)
            for u in self.col_members[c]:
                u = int(u)
                if not self.zmask[u]:
                    continue
                if u in srcset:
                    out.append((0, u, ()))
                    continue
                best = None
                for k in range(self.indptr[u], self.indptr[u + 1]):
                    w, e = int(self.nbr[k]), int(self.nbr_edge[k])
                    if bits[e] and zc[w] and dist[w] >= 0 and (best is None or dist[w] + 1 < best[0]):
                        best = (int(dist[w]) + 1, e, w)
                if best is None:
                    continue
                d, e, w = best
                path = [e]
                while dist[w] > 0:
                    e2 = int(par[w])
                    path.append(e2)
                    a, b = int(self.region.eu[e2]), int(self.region.ev[e2])
                    w = a if b == w else b
                out.append((d, u, tuple(path)))
        out.sort(key=lambda t: (t[0], t[1]))
        return out

    def column_path(self, c, start, target_mask):
        """Lexicographically first shortest path inside column c from start to the targets."""
        members = self.col_members[c]
        inside = np.zeros(self.region.nv, dtype=bool)
        inside[members] = True
        if target_mask[start]:
            return []
        dist = {int(t): 0 for t in members if target_mask[t]}
        if not dist:
            raise ModificationError(f"column {self.col_coords[c]} holds no target vertex")
        frontier = sorted(dist)
        while frontier:
            nxt = []
            for x in frontier:
                for k in range(self.indptr[x], self.indptr[x + 1]):
                    y = int(self.nbr[k])
                    if inside[y] and y not in dist:
                        dist[y] = dist[x] + 1
                        nxt.append(y)
            frontier = sorted(nxt)
        if start not in dist:
            raise ModificationError("column is disconnected")
        path, cur = [], int(start)
        while dist[cur] > 0:
            step = None
            for k in range(self.indptr[cur], self.indptr[cur + 1]):
                y = int(self.nbr[k])
                if inside[y] and dist.get(y, -1) == dist[cur] - 1 and (step is None or y < step[0]):
                    step = (y, int(self.nbr_edge[k]))
            path.append(step[1])
            cur = step[0]
        return path


@dataclass
class CaseData:
    case: str
    gamma: CircuitData
    u: int
    v: int | None
    pi_u: tuple
    pi_v: tuple
    columns: tuple  # column ids (indices into SlabSetup.col_coords)


def _setup_for(config, x, y, z, m, setup):
    if setup is not None:
        return setup
    return SlabSetup(config.region, m, z, x, y)


def classify_case(config: Configuration, x=None, y=None, z="all", m: int = 1,
                  setup: SlabSetup | None = None) -> CaseData | None:
    """Case data for ``f``, or ``None`` when the configuration is outside E_a, E_b, E_c."""
    s = _setup_for(config, x, y, z, m, setup)
    bits = config.bits
    lab = s.labels(bits, s.zmask)
    if s.connected(lab, s.x, s.y):
        return None
    gamma = s.circ.minimal(bits)
    if gamma is None:
        return None
    gverts = np.unique(np.asarray(gamma.vertices, dtype=np.int64))
    gcols = sorted(set(s.col[gverts].tolist()))
    gbar = np.flatnonzero(s.column_mask(gcols)).astype(np.int64)
    if not (s.connected(lab, s.x, gbar) and s.connected(lab, s.y, gbar)):
        return None
    xg, yg = s.connected(lab, s.x, gverts), s.connected(lab, s.y, gverts)
    if xg and yg:
        raise ModificationError("X and Y both meet Gamma but are not connected")
    if not xg and not yg:
        ua = s.attachments(bits, gcols, s.x)
        va = s.attachments(bits, gcols, s.y)
        if not ua or not va:
            raise ModificationError("no attachment point despite X, Y <-> bar Gamma")
        for du, u, pu in ua:
            c = int(s.col[u])
            same = [t for t in va if s.col[t[1]] == c]
            if same:
                _, v, pv = same[0]
                return CaseData("a1", gamma, u, v, pu, pv, (c,))
        _, u, pu = ua[0]
        _, v, pv = va[0]
        return CaseData("a2", gamma, u, v, pu, pv, (int(s.col[u]), int(s.col[v])))
    if yg:
        return _case_b(s, bits, gamma, gverts, gcols, s.x, s.y, "b")
    return _case_b(s, bits, gamma, gverts, gcols, s.y, s.x, "c")


def _case_b(s: SlabSetup, bits, gamma, gverts, gcols, a, b, tag):
    """``a`` misses Gamma, ``b`` meets it."""
    ua = s.attachments(bits, gcols, a)
    if not ua:
        raise ModificationError("no attachment point despite <-> bar Gamma")
    for _, u, pu in ua:
        c = int(s.col[u])
        zc = s.zmask & (s.col != c)
        lab = s.labels(bits, zc)
        rest = gverts[s.col[gverts] != c]
        if s.connected(lab, b[zc[b]], rest):
            return CaseData(tag + "1", gamma, u, None, pu, (), (c,))
    _, u, pu = ua[0]
    c = int(s.col[u])
    va = s.attachments(bits, [c], b)
    if not va:
        raise ModificationError("no attachment of the second set in the column of u")
    _, v, pv = va[0]
    return CaseData(tag + "2", gamma, u, v, pu, pv, (c,))


def apply_modification(config: Configuration, data: CaseData, x=None, y=None, z="all", m: int = 1,
                       setup: SlabSetup | None = None) -> Configuration:
    """``f(config)`` for the case data returned by :func:`classify_case`."""
    s = _setup_for(config, x, y, z, m, setup)
    region = s.region
    bits = config.bits.copy()
    cmask = s.column_mask(data.columns)
    touch = cmask[region.eu] | cmask[region.ev]
    keep = np.zeros(region.ne, dtype=bool)
    keep[list(data.pi_u)] = True
    keep[list(data.pi_v)] = True
    keep[list(data.gamma.edges)] = True
    bits[touch & ~keep] = 0
    gmask = np.zeros(region.nv, dtype=bool)
    gmask[list(data.gamma.vertices)] = True
    cu = int(s.col[data.u])
    rho = s.column_path(cu, data.u, gmask)
    bits[rho] = 1
    if data.v is not None:
        cv = int(s.col[data.v])
        if cv == cu:
            target = gmask.copy()
            target[data.u] = True
            for e in rho:
                target[region.eu[e]] = target[region.ev[e]] = True
            bits[s.column_path(cv, data.v, target)] = 1
        else:
            bits[s.column_path(cv, data.v, gmask)] = 1
    return config.with_bits(bits)


def reconstruct_columns(fconfig: Configuration, case: str, setup: SlabSetup):
    """Recover the modified columns from ``f(config)`` alone.

    Gamma is recomputed; the columns are those of the Gamma endpoints of open
    edges from the cluster of X (case a: X and Y; case c: Y) in Z minus Gamma.
    Returns ``(gamma, columns)``.
    """
    s = setup
    bits = fconfig.bits
    gamma = s.circ.minimal(bits)
    if gamma is None:
        return None, ()
    region = s.region
    gmask = np.zeros(region.nv, dtype=bool)
    gmask[list(gamma.vertices)] = True
    zc = s.zmask & ~gmask
    lab = s.labels(bits, zc)
    sides = {"a": (s.x, s.y), "b": (s.x,), "c": (s.y,)}[case[0]]
    src = np.concatenate([t[zc[t]] for t in sides]).astype(np.int64)
    kmask = K.members_batch(lab[None, :], src)[0]
    eu, ev = region.eu, region.ev
    op = bits.astype(bool) & s.zmask[eu] & s.zmask[ev]
    e1 = op & kmask[eu] & gmask[ev]
    e2 = op & kmask[ev] & gmask[eu]
    ends = np.concatenate([ev[e1], eu[e2]])
    return gamma, tuple(sorted(set(s.col[ends].tolist())))


@dataclass
class ModificationReport:
    case: str
    columns: list  # in-plane coordinates of the modified columns
    edit_distance: int
    d_bound: int
    d_bound_alt: int
    case_bound: int
    target_holds: bool
    reconstruction_ok: bool
    circuit_preserved: bool
    local_ok: bool
    pi_u: list
    pi_v: list
    u: tuple
    v: tuple | None
    sample_index: int = -1

    @property
    def passed(self) -> bool:
        return (self.edit_distance <= self.d_bound and self.target_holds and self.reconstruction_ok
                and self.local_ok)

    def to_row(self) -> dict:
        return {"sample_index": self.sample_index, "case": self.case,
                "columns": ";".join(f"{a}:{b}" for a, b in self.columns),
                "edits": self.edit_distance, "bound": self.d_bound, "bound_alt": self.d_bound_alt,
                "case_bound": self.case_bound, "target": int(self.target_holds),
                "reconstruction": int(self.reconstruction_ok),
                "circuit_preserved": int(self.circuit_preserved), "local": int(self.local_ok),
                "passed": int(self.passed)}


def verify_instance(config: Configuration, setup: SlabSetup) -> ModificationReport | None:
    """Classify, apply f and check the three map properties on one configuration."""
    s = setup
    data = classify_case(config, setup=s)
    if data is None:
        return None
    fc = apply_modification(config, data, setup=s)
    region = s.region
    diff = np.flatnonzero(fc.bits != config.bits)
    cmask = s.column_mask(data.columns)
    touch = cmask[region.eu] | cmask[region.ev]
    target = s.connected(s.labels(fc.bits, s.zmask), s.x, s.y)
    gamma2, cols = reconstruct_columns(fc, data.case, s)
    preserved = gamma2 is not None and gamma2.edges == data.gamma.edges
    spec = region.spec
    single = data.case != "a2"
    return ModificationReport(
        data.case, [s.col_coords[c] for c in data.columns], int(diff.size), d_bound(spec),
        d_bound_alt(spec), d_bound_single(spec) if single else d_bound(spec), target,
        bool(preserved and cols == tuple(sorted(data.columns))), preserved, bool(touch[diff].all()),
        list(data.pi_u), list(data.pi_v), region.coord(data.u),
        None if data.v is None else region.coord(data.v), config.sample_index)


@dataclass
class VerificationSummary:
    reports: list
    n_samples: int
    n_hits: int
    n_failures: int
    case_counts: dict
    max_edits: int
    seed: int
    p: float
    wallclock: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return self.n_hits > 0 and self.n_failures == 0

    def to_dict(self):
        return {"n_samples": self.n_samples, "n_hits": self.n_hits, "n_failures": self.n_failures,
                "case_counts": self.case_counts, "max_edits": self.max_edits, "seed": self.seed,
                "p": self.p, "wallclock_s": self.wallclock, **self.meta}


def verify_modification(spec: LatticeSpec, m: int = 1, z="all", x=None, y=None, p: float = 0.45,
                        budget: int = 10_000, seed: int = 0, box: int | None = None,
                        target_hits: int | None = None, dump_dir: str | None = None) -> VerificationSummary:
    """Sample configurations on Q(box), keep those in E_a, E_b or E_c, apply f and check it.

    Defaults: ``box = 4m``, Z the whole box, X the origin column, Y the
    boundary of the box.  Sampling stops early once ``target_hits``
    configurations were checked.  Failing samples are written to ``dump_dir``.
    Raises :class:`ConditioningStarvation` when no configuration qualifies.
    """
    spec = as_slab(spec)
    p = check_probability(p)
    box = 4 * m if box is None else int(box)
    region = build_box_region(spec, box)
    s = SlabSetup(region, m, z, x, {"box_boundary": box} if y is None else y)
    t0 = time.perf_counter()
    an = np.flatnonzero(box_sets(region, 2 * m, 3 * m)[2].mask).astype(np.int64)
    reports, counts, fails = [], {}, 0
    done = 0
    rows = max(64, min(8192, (1 << 22) // region.ne))
    while done < budget and (target_hits is None or len(reports) < target_hits):
        cnt = min(rows, budget - done)
        bits = sample_block(region, p, seed, done, cnt)
        lab = K.label_batch(bits, region.eu, region.ev, s.zmask)
        cand = np.flatnonzero(~K.connected_batch(lab, s.x, s.y) & K.connected_batch(lab, s.x, an)
                              & K.connected_batch(lab, s.y, an))
        cand = cand[s.circ.exists_batch(bits[cand])] if cand.size else cand
        for r in cand:
            cfg = Configuration(region, bits[r], p, seed, done + int(r))
            rep = verify_instance(cfg, s)
            if rep is None:
                continue
            reports.append(rep)
            counts[rep.case] = counts.get(rep.case, 0) + 1
            if not rep.passed:
                fails += 1
                log.error("modification check failed on sample %d: %s", cfg.sample_index, rep.to_row())
                if dump_dir:
                    os.makedirs(dump_dir, exist_ok=True)
                    with open(os.path.join(dump_dir, f"sample_{cfg.sample_index}.txt"), "w") as fh:
                        fh.write(cfg.to_text())
            if target_hits is not None and len(reports) >= target_hits:
                done += int(r) + 1
                break
        else:
            done += cnt
    summary = VerificationSummary(reports, done, len(reports), fails, counts,
                                  max((r.edit_distance for r in reports), default=0), int(seed), p,
                                  time.perf_counter() - t0,
                                  {"m": m, "box": box, "d_bound": d_bound(spec),
                                   "d_bound_alt": d_bound_alt(spec)})
    if not reports:
        est = Estimate(0.0, 0.0, done, 0, int(seed), summary.wallclock, summary.to_dict())
        raise ConditioningStarvation("no configuration in E_a, E_b or E_c within the budget", est)
    return summary


def handcrafted_instance(spec: LatticeSpec | None = None, m: int = 1, shared_column: bool = False):
    """A configuration with only Gamma and two attachment paths open.

    Gamma is the ring on dQ(2m) in layer 0 of Q(4m).  X is the origin in the
    top layer, joined along the positive first axis to the column at
    ``(2m, 0)``; Y is ``(0, 4m)`` in the top layer, joined down the second
    axis to the column at ``(0, 2m)`` (case a2).  With ``shared_column`` Y
    instead runs along the top row and down the first axis to the middle
    layer of column ``(2m, 0)`` (case a1; needs ``k >= 2``).
    Returns ``(config, setup)``.
    """
    spec = LatticeSpec.slab(3, 1) if spec is None else as_slab(spec)
    if spec.d < 3 or spec.k < 1:
        raise LatticeError("the handcrafted instance needs d >= 3 and k >= 1")
    top = spec.k
    region = build_box_region(spec, 4 * m)
    bits = np.zeros(region.ne, dtype=np.uint8)

    def pt(a, b, h=0):
        return (a, b) + (h,) * (spec.d - 2)

    def open_path(points):
        for a, b in zip(points, points[1:]):
            bits[region.edge_between(a, b)] = 1

    r = 2 * m
    ring = ([(i, -r) for i in range(-r, r)] + [(r, j) for j in range(-r, r)]
            + [(i, r) for i in range(r, -r, -1)] + [(-r, j) for j in range(r, -r, -1)])
    open_path([pt(a, b) for a, b in ring] + [pt(-r, -r)])
    open_path([pt(i, 0, top) for i in range(0, r + 1)])
    if shared_column:
        if spec.d != 3 or spec.k < 2:
            raise LatticeError("the shared-column instance needs slab(3, k) with k >= 2")
        open_path([pt(0, 4 * m, 1)] + [pt(i, 4 * m, 1) for i in range(1, 4 * m + 1)]
                  + [pt(4 * m, j, 1) for j in range(4 * m - 1, -1, -1)]
                  + [pt(i, 0, 1) for i in range(4 * m - 1, r - 1, -1)])
        y = [list(pt(0, 4 * m, 1))]
    else:
        open_path([pt(0, j, top) for j in range(4 * m, r - 1, -1)])
        y = [list(pt(0, 4 * m, top))]
    x = [list(pt(0, 0, top))]
    setup = SlabSetup(region, m, "all", x, y)
    return Configuration(region, bits), setup


# ------------------------------------------------------------- QM constants

@dataclass
class QMConstantReport:
    p: float
    m: int
    z: object
    probes: list
    estimates: list
    c_star: float
    c_star_stderr: float
    delta: float | None = None
    inconclusive: list = field(default_factory=list)

    def to_dict(self):
        return {"p": self.p, "m": self.m, "z": self.z, "probes": self.probes,
                "ratios": [e.mean for e in self.estimates], "stderrs": [e.stderr for e in self.estimates],
                "c_star": self.c_star, "c_star_stderr": self.c_star_stderr, "delta": self.delta,
                "inconclusive": self.inconclusive}


def default_probes(m: int, box: int):
    return [({"box": 0}, {"box_boundary": box}),
            ({"box_boundary": m}, {"box_boundary": box}),
            ({"box_boundary": m}, {"box_boundary": 3 * m + 1})]


def qm_constant_report(spec: LatticeSpec, p: float, m: int, z="all", probes=None, budget: int = 10_000,
                       seed: int = 0, box: int | None = None, check_geometry: bool = True,
                       pc: float | None = None) -> QMConstantReport:
    """Ratios ``P[X<->Y in Z] / (P[X<->dQ(2m) in Z] P[Y<->dQ(2m) in Z])`` on Q(box).

    Every probe uses the same sample stream.  With ``check_geometry`` the
    probes must satisfy Z >= An(m, 3m), X in Q(m), Y outside Q(3m).
    """
    spec = as_slab(spec)
    p = check_probability(p)
    box = 4 * m if box is None else int(box)
    region = build_box_region(spec, box)
    probes = default_probes(m, box) if probes is None else list(probes)
    zset = resolve_set(region, z)
    linf = _linf(region)
    if check_geometry:
        if (box_sets(region, m, 3 * m)[2].mask & ~zset.mask).any():
            raise LatticeError("Z must contain An(m, 3m)")
    ring = {"box_boundary": 2 * m}
    ests, flags = [], []
    for xs, ys in probes:
        xm, ym = resolve_set(region, xs).mask, resolve_set(region, ys).mask
        if check_geometry and ((linf[xm] > m).any() or (linf[ym] <= 3 * m).any()):
            raise LatticeError(f"probe {xs!r}, {ys!r} violates X in Q(m), Y outside Q(3m)")
        est = qm_ratio_events(region, p, Connect(xs, ys, z), Connect(xs, ring, z), Connect(ys, ring, z),
                              budget, seed)
        ests.append(est)
        flags.append(bool(est.extra["inconclusive"]))
    vals = [e.mean for e in ests]
    ok = [i for i, v in enumerate(vals) if np.isfinite(v)]
    if ok:
        i = min(ok, key=lambda t: vals[t])
        c, c_se = vals[i], ests[i].stderr
    else:
        c, c_se = float("nan"), float("nan")
    delta = None if pc is None else p - pc
    return QMConstantReport(p, m, z if not hasattr(z, "mask") else "custom", probes, ests, float(c),
                            float(c_se), delta, flags)
