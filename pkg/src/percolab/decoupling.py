"""Scale selection, cluster explorations, factorization and transfer matrices.

Notation: a schedule ``N[0] < N[1] < ...`` around a base vertex v gives
balls ``B_t = B(v, N[t])``, spheres ``S_t`` and annuli ``A_t = A(v, N[t], N[t+1])``.
``F_t`` is the event that ``A_t`` has exactly one open crossing cluster.
The inner exploration at scale t is ``C_t`` (vertices of ``B_{t+1}`` joined
to ``B_t`` inside ``B_{t+1}``) and ``D_t`` (vertices of ``S(v, N[t+1]+1)``
joined to ``C_t`` by an open edge).
"""

from __future__ import annotations

import hashlib
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .events import E1, E2, Batch, Cylinder, Event, Sure
from .estimators import (ConditioningStarvation, Estimate, conditional_counts, bernoulli_stderr)
from .lattice import LatticeError, LatticeSpec, Region, build_ball_region, region_distances
from .oracle import EDGE_CAP, OracleCapError
from .percolation import check_probability, sample_block
from .rng import derive_seed

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ scales

class ScaleSearchError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass
class ScaleSchedule:
    v: tuple
    scales: list
    eps_hat: list = field(default_factory=list)
    eps_target: float | None = None
    details: list = field(default_factory=list)

    def to_dict(self):
        return {"v": list(self.v), "scales": list(self.scales), "eps_hat": list(self.eps_hat),
                "eps_target": self.eps_target, "details": self.details}


def scale_candidates(m: int, max_n: int | None = None) -> list:
    """``4m+1`` followed by the doubling sequence ``8m, 16m, ...``."""
    max_n = 16 * m if max_n is None else max_n
    out = [4 * m + 1]
    n = 8 * m
    while n <= max_n:
        out.append(n)
        n *= 2
    return out


def choose_scales(spec: LatticeSpec, v=None, m: int = 4, eps_target: float = 0.2, p_grid=(0.5,),
                  budget: int = 100_000, seed: int = 0, max_n: int | None = None) -> ScaleSchedule:
    """Smallest candidate n with ``max_p P[E2(v,m,n) | E1(v,m,n)] + 2 se < eps_target``.

    The budget is split evenly over (candidate, grid point) pairs.  Grid points
    where E1 is never observed are skipped with a warning.
    """
    v = spec.origin() if v is None else tuple(v)
    if not 0 < eps_target <= 1:
        raise LatticeError("eps_target must lie in (0, 1]")
    cands = scale_candidates(m, max_n)
    if eps_target >= 1:
        return ScaleSchedule(v, [m, cands[0]], [1.0], eps_target, [{"n": cands[0], "vacuous": True}])
    per_point = max(100, budget // (len(cands) * max(1, len(p_grid))))
    best = None
    details = []
    for n in cands:
        region = build_ball_region(spec, v, n)
        worst, worst_p = -1.0, None
        for p in p_grid:
            p = check_probability(p)
            s = derive_seed(seed, "scales", m, n, repr(p))
            nn, acc, hits = conditional_counts(region, p, E2(v, m, n), E1(v, m, n), s, per_point)
            if acc == 0:
                log.warning("E1 never occurred at p=%s (n=%d); grid point skipped", p, n)
                details.append({"n": n, "p": p, "skipped": True})
                continue
            mean = hits / acc
            upper = mean + 2 * bernoulli_stderr(hits, acc)
            details.append({"n": n, "p": p, "mean": mean, "upper": upper, "accepted": acc})
            if upper > worst:
                worst, worst_p = upper, p
        if worst < 0:
            continue
        if best is None or worst < best[1]:
            best = (n, worst, worst_p)
        if worst < eps_target:
            return ScaleSchedule(v, [m, n], [worst], eps_target, details)
    raise ScaleSearchError(f"no candidate n <= {cands[-1]} met eps={eps_target}; best {best}", best)


# ----------------------------------------------------------- explorations

def _record_hash(kind, a, b) -> str:
    h = hashlib.sha256(kind.encode())
    h.update(np.asarray(sorted(a), dtype=np.int64).tobytes())
    h.update(b"|")
    h.update(np.asarray(sorted(b), dtype=np.int64).tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class ExplorationRecord:
    """A realized exploration: (U, R) for ``inner``, (X, Y) for ``outer``."""

    kind: str
    first: tuple  # U or X (vertex indices, ascending)
    second: tuple  # R or Y
    unique: bool

    @property
    def key(self) -> str:
        return _record_hash(self.kind, self.first, self.second)

    @property
    def U(self):
        return self.first

    @property
    def R(self):
        return self.second

    def to_dict(self, region: Region | None = None):
        d = {"kind": self.kind, "first": list(self.first), "second": list(self.second),
             "unique": self.unique, "key": self.key}
        if region is not None:
            d["first_coords"] = [list(region.coord(i)) for i in self.first]
            d["second_coords"] = [list(region.coord(i)) for i in self.second]
        return d


class ScaleGeometry:
    """Distances from v, per-radius masks and boundary edge lists for one region."""

    def __init__(self, region: Region, v, restrict: bool = False):
        self.region = region
        self.v = tuple(v)
        self.dist = region_distances(region, v, restrict)
        if restrict:
            self.dist = np.where(self.dist < 0, np.iinfo(np.int64).max // 2, self.dist)
        self._cache = {}

    def ball(self, r):
        return self.dist <= r

    def sphere_idx(self, r):
        return np.flatnonzero(self.dist == r).astype(np.int64)

    def annulus(self, m, n):
        return (self.dist >= m) & (self.dist <= n)

    def require(self, r):
        if self.region.spec is not None and self.dist.max() < r and not (self.dist == r).any():
            raise LatticeError(f"region does not reach distance {r} from {self.v}")

    def shell_edges(self, r):
        """Edges between S(r) and S(r+1) as (edge, inner endpoint, outer endpoint)."""
        key = ("shell", r)
        if key not in self._cache:
            eu, ev = self.region.eu.astype(np.int64), self.region.ev.astype(np.int64)
            du, dv = self.dist[eu], self.dist[ev]
            a = (du == r) & (dv == r + 1)
            b = (dv == r) & (du == r + 1)
            e = np.flatnonzero(a | b)
            inner = np.where(a[e], eu[e], ev[e])
            outer = np.where(a[e], ev[e], eu[e])
            self._cache[key] = (e.astype(np.int64), inner, outer)
        return self._cache[key]

    def inner_batch(self, batch: Batch, n_lo: int, n_hi: int):
        """``(U, R, F)`` masks for the inner exploration between radii n_lo < n_hi."""
        region = self.region
        lab = batch.labels(self.ball(n_hi))
        src = np.flatnonzero(self.ball(n_lo)).astype(np.int64)
        U = K.members_batch(lab, src)
        e, inner, outer = self.shell_edges(n_hi)
        R = K.boundary_hits_batch(U, batch.bits, e, inner, outer, region.nv)
        F = self.unique_batch(batch, n_lo, n_hi)
        return U, R, F

    def unique_batch(self, batch: Batch, n_lo: int, n_hi: int):
        lab = batch.labels(self.annulus(n_lo, n_hi))
        return K.crossing_count_batch(lab, self.sphere_idx(n_lo), self.sphere_idx(n_hi)) == 1

    def outer_batch(self, batch: Batch, n_prev: int, n_j: int):
        """``(X, Y, F)`` masks for the outer exploration of A(v, n_prev, n_j)."""
        region = self.region
        lab = batch.labels(self.annulus(n_prev, n_j))
        X = K.members_batch(lab, self.sphere_idx(n_j))
        e, inner, outer = self.shell_edges(n_prev - 1)
        # inner endpoints lie on S(n_prev - 1); hits are recorded there
        Y = K.boundary_hits_batch(X, batch.bits, e, outer, inner, region.nv)
        F = self.unique_batch(batch, n_prev, n_j)
        return X, Y, F


def _check_radii(lo, hi):
    if hi <= lo:
        raise LatticeError(f"need {lo} < {hi}")


def explore_inner(config, v=None, n_i: int = 1, n_next: int = 2, restrict: bool = False,
                  geometry: ScaleGeometry | None = None) -> ExplorationRecord:
    region = config.region
    v = region.spec.origin() if v is None else tuple(v)
    _check_radii(n_i, n_next)
    g = geometry or ScaleGeometry(region, v, restrict)
    if not restrict:
        _require_ball(region, g, n_next + 1)
    U, R, F = g.inner_batch(Batch(region, config.bits), n_i, n_next)
    return ExplorationRecord("inner", tuple(np.flatnonzero(U[0]).tolist()),
                             tuple(np.flatnonzero(R[0]).tolist()), bool(F[0]))


def explore_outer(config, v=None, n_prev: int = 1, n_j: int = 2, restrict: bool = False,
                  geometry: ScaleGeometry | None = None) -> ExplorationRecord:
    region = config.region
    v = region.spec.origin() if v is None else tuple(v)
    _check_radii(n_prev, n_j)
    if n_prev < 1:
        raise LatticeError("n_prev must be >= 1")
    g = geometry or ScaleGeometry(region, v, restrict)
    if not restrict:
        _require_ball(region, g, n_j)
    X, Y, F = g.outer_batch(Batch(region, config.bits), n_prev, n_j)
    return ExplorationRecord("outer", tuple(np.flatnonzero(X[0]).tolist()),
                             tuple(np.flatnonzero(Y[0]).tolist()), bool(F[0]))


def _require_ball(region, g, r):
    from .lattice import _ball_coords
    if region.spec is None:
        return
    expected = _ball_coords(region.spec, region.spec.check_coord(g.v), r).shape[0]
    if int((g.dist <= r).sum()) != expected:
        raise LatticeError(f"B(v,{r}) is not contained in the region")


# ------------------------------------------------------- exact factorization

def _poly_eval(counts, n_edges, p):
    if p == 0.0:
        return float(counts[0])
    if p == 1.0:
        return float(counts[n_edges])
    k = np.arange(n_edges + 1)
    return float(np.sum(np.asarray(counts, dtype=float) * p ** k * (1 - p) ** (n_edges - k)))


def _connect_poly(region: Region, zmask, xmask, ys):
    """Counts by open-edge number of configurations on Z's edges with X <-> Y in Z."""
    eu, ev = region.eu, region.ev
    zedges = np.flatnonzero(zmask[eu] & zmask[ev])
    mz = zedges.size
    counts = np.zeros(mz + 1, dtype=np.int64)
    xs = np.flatnonzero(xmask & zmask).astype(np.int64)
    ys = ys[zmask[ys]]
    total = 1 << mz
    for start in range(0, total, 1 << 16):
        cnt = min(1 << 16, total - start)
        sub = K.enumerate_bits(start, cnt, mz)
        bits = np.zeros((cnt, region.ne), dtype=np.uint8)
        bits[:, zedges] = sub
        lab = K.label_batch(bits, eu, ev, zmask)
        ok = K.connected_batch(lab, xs, ys)
        counts += np.bincount(sub.sum(axis=1)[ok], minlength=mz + 1)
    return counts, mz


@dataclass
class FactorizationReport:
    deviations: dict  # p -> |lhs - rhs|
    lhs: dict
    rhs: dict
    n_records: int
    n_edges: int

    @property
    def max_abs_deviation(self) -> float:
        return max(self.deviations.values()) if self.deviations else 0.0


def verify_factorization_exact(region: Region, v, w, n_i: int, n_next: int, n: int,
                               event: Event | None = None, p_values=(0.2, 0.5, 0.8),
                               restrict: bool = True) -> FactorizationReport:
    """Both sides of the one-scale decomposition, computed by enumeration.

    Left: ``P[E, w<->S(w,n), F]``.  Right: the sum over realized inner records
    (U, R) of ``P[E, w<->S(v,n_next), F, C=U, D=R] * P[R <-> S(w,n) in B(w,n) minus U]``.
    Here F is the unique-crossing event of ``A(v, n_i, n_next)``.
    """
    if region.ne > EDGE_CAP:
        raise OracleCapError(f"region has {region.ne} edges; exact enumeration is capped at {EDGE_CAP}")
    event = Sure() if event is None else event
    gv = ScaleGeometry(region, v, restrict)
    gw = ScaleGeometry(region, w, restrict)
    nv, ne = region.nv, region.ne
    b_w = gw.ball(n)
    s_w = gw.sphere_idx(n)
    w_idx = np.array([region.index_of(w)], dtype=np.int64)
    s_next = gv.sphere_idx(n_next)
    b_next = gv.ball(n_next)
    lhs_counts = np.zeros(ne + 1, dtype=np.int64)
    rec_counts = {}
    weights = (np.int64(1) << np.arange(2 * nv, dtype=np.int64))
    if 2 * nv > 62:
        raise LatticeError("record encoding supports at most 31 vertices")
    total = 1 << ne
    for start in range(0, total, 1 << 16):
        cnt = min(1 << 16, total - start)
        bits = K.enumerate_bits(start, cnt, ne)
        batch = Batch(region, bits)
        k = bits.sum(axis=1, dtype=np.int64)
        e_ok = event.evaluate(region, batch)
        U, R, F = gv.inner_batch(batch, n_i, n_next)
        arm_n = K.connected_batch(batch.labels(b_w), w_idx, s_w)
        arm_next = K.connected_batch(batch.labels(b_next), w_idx, s_next)
        lhs = e_ok & arm_n & F
        lhs_counts += np.bincount(k[lhs], minlength=ne + 1)
        rsel = e_ok & arm_next & F
        if rsel.any():
            code = np.concatenate([U[rsel], R[rsel]], axis=1).astype(np.int64) @ weights
            keys, inv = np.unique(code, return_inverse=True)
            tab = np.zeros((keys.size, ne + 1), dtype=np.int64)
            np.add.at(tab, (inv, k[rsel]), 1)
            for key, row in zip(keys.tolist(), tab):
                acc = rec_counts.get(key)
                rec_counts[key] = row if acc is None else acc + row
    gammas = {}
    for key in rec_counts:
        bitsv = (np.int64(key) >> np.arange(2 * nv, dtype=np.int64)) & 1
        u_mask, r_mask = bitsv[:nv].astype(bool), bitsv[nv:].astype(bool)
        gammas[key] = _connect_poly(region, b_w & ~u_mask, r_mask, s_w)
    dev, lv, rv = {}, {}, {}
    for p in p_values:
        p = check_probability(p)
        left = _poly_eval(lhs_counts, ne, p)
        right = math.fsum(_poly_eval(rec_counts[key], ne, p) * _poly_eval(*gammas[key], p)
                          for key in rec_counts)
        lv[p], rv[p], dev[p] = left, right, abs(left - right)
    return FactorizationReport(dev, lv, rv, len(rec_counts), ne)


def strip_instance():
    """3x5 grid strip (22 edges) with its center vertex, as used in the checks."""
    from .lattice import LatticeSpec, build_rectangle_region
    region = build_rectangle_region(LatticeSpec.hypercubic(2), (0, 0), (4, 2))
    return region, (2, 1)


# ---------------------------------------------------------- transfer matrix

@dataclass
class TransferMatrix:
    rows: list  # class labels at the inner scale
    cols: list  # class labels at the outer scale
    entries: np.ndarray
    stderr: np.ndarray
    hits: np.ndarray
    row_counts: np.ndarray
    u_prime: np.ndarray
    u_second: np.ndarray
    scales: tuple
    p: float
    seed: int
    budget: int
    retained_mass_rows: float
    retained_mass_cols: float
    zero_entries: list = field(default_factory=list)
    chain_prime: np.ndarray | None = None  # pass-2 hits of u'M per column
    chain_second: np.ndarray | None = None  # pass-2 hits of u''M per column

    def to_dict(self):
        return {"rows": self.rows, "cols": self.cols, "entries": self.entries.tolist(),
                "stderr": self.stderr.tolist(), "hits": self.hits.tolist(),
                "row_counts": self.row_counts.tolist(), "u_prime": self.u_prime.tolist(),
                "u_second": self.u_second.tolist(), "scales": list(self.scales), "p": self.p,
                "seed": self.seed, "budget": self.budget,
                "retained_mass_rows": self.retained_mass_rows,
                "retained_mass_cols": self.retained_mass_cols, "zero_entries": self.zero_entries,
                "chain_prime": None if self.chain_prime is None else self.chain_prime.tolist(),
                "chain_second": None if self.chain_second is None else self.chain_second.tolist()}


@dataclass
class HopfReport:
    kappa_sq: float
    kappa: float
    contraction: float
    osc: list = field(default_factory=list)
    osc_stderr: list = field(default_factory=list)
    osc_nonincreasing: bool | None = None
    xi_hat: float | None = None
    xi_stderr: float | None = None
    c_star_context: float | None = None
    p_event: float | None = None
    n_records: int | None = None

    def to_dict(self):
        return dict(self.__dict__)


def _schedule_list(schedule):
    return list(schedule.scales if isinstance(schedule, ScaleSchedule) else schedule)


def _size_thresholds(sizes: np.ndarray, k: int) -> np.ndarray:
    """Cut points splitting positive sizes into at most k equal-frequency bins."""
    sizes = sizes[sizes > 0]
    if sizes.size == 0:
        return np.zeros(0, dtype=np.int64)
    q = np.quantile(sizes, np.arange(1, k) / k, method="higher")
    return np.unique(q.astype(np.int64))


def _size_classes(sizes: np.ndarray, thr: np.ndarray) -> np.ndarray:
    cls = np.searchsorted(thr, sizes, side="right")
    return np.where(sizes > 0, cls, -1)


def _class_labels(thr):
    edges = [1] + [int(t) for t in thr]
    return [f"|R|>={lo}" if hi is None else f"{lo}<=|R|<{hi}"
            for lo, hi in zip(edges, edges[1:] + [None])]


def _blocks(total, rows):
    done = 0
    while done < total:
        cnt = min(rows, total - done)
        yield done, cnt
        done += cnt


DEFAULT_SCHEDULE = (2, 4, 5, 16, 64)
CALIBRATION = 2000  # samples used to fit the column classes


class _ChainSampler:
    """Inner records at scale i and outer events at scale j on ``B(v, N[j+1]+1)``."""

    def __init__(self, spec, v, scales, i, j, event):
        self.N, self.i, self.j = scales, i, j
        self.region = build_ball_region(spec, v, scales[j + 1] + 1)
        self.g = ScaleGeometry(self.region, v)
        self.small = build_ball_region(spec, v, scales[i + 1] + 1)
        self.gs = ScaleGeometry(self.small, v)
        self.event = event
        self.v_idx = np.array([self.small.index_of(v)], dtype=np.int64)
        imap = self.region.index_map()
        self.embed = np.array([imap[c] for c in map(tuple, self.small.coords.tolist())], dtype=np.int64)
        self.far = self.g.sphere_idx(scales[j + 1])
        self.big = self.g.ball(scales[j + 1])

    def inner(self, batch):
        """``(U, R, pool, e_ok)`` on the small region: records at scale i with
        ``F_i`` and ``v <-> S_{i+1}``; vertex masks are embedded in the big region."""
        g, N, i = self.gs, self.N, self.i
        U, R, F = g.inner_batch(batch, N[i], N[i + 1])
        arm = K.connected_batch(batch.labels(g.ball(N[i + 1])), self.v_idx, g.sphere_idx(N[i + 1]))
        ok = F & arm
        nbig = self.region.nv
        Ub = np.zeros((int(ok.sum()), nbig), dtype=bool)
        Rb = np.zeros_like(Ub)
        Ub[:, self.embed] = U[ok]
        Rb[:, self.embed] = R[ok]
        return Ub, Rb, ok, self.event.evaluate(self.small, batch)[ok]

    def outer(self, batch):
        """Column sizes ``|D_j|`` and the indicator of ``F_{j-1}`` and ``F_j``."""
        g, N, j = self.g, self.N, self.j
        _, R, F = g.inner_batch(batch, N[j], N[j + 1])
        ok = F & g.unique_batch(batch, N[j - 1], N[j])
        return R.sum(axis=1), ok

    def link(self, bits, U, R):
        """``R <-> S_{j+1}`` inside ``B_{j+1}`` minus U, one (U, R) per sample row."""
        z = self.big[None, :] & ~U
        lab = K.label_batch_masks(bits, self.region.eu, self.region.ev, z)
        return K.connected_mask_batch(lab, R, self.far)


def estimate_hopf_chain(spec: LatticeSpec, v=None, schedule=DEFAULT_SCHEDULE, i: int = 0, j: int = 3,
                        p: float = 0.5, budget: int = 100_000, seed: int = 0, top_k: int = 8,
                        event: Event | None = None, min_count: int = 30, strict_gap: bool = True,
                        n_draws: int = 0):
    """Transfer matrix between scales i and j and the two-term Hopf oscillation sequence.

    Pass 1 samples ``budget`` configurations of the small ball
    ``B(v, N[i+1]+1)`` and keeps the inner records at scale i on ``F_i`` and
    ``v <-> S_{i+1}``.  Records are
    grouped into at most ``top_k`` equal-frequency classes by ``|R|``; the
    boundary vectors ``u'`` (with the event) and ``u''`` are their class
    frequencies.  Columns are the same kind of classes for ``D_j``.

    Pass 2 samples ``budget`` fresh configurations of ``B(v, N[j+1]+1)``.  The outer events do not read edges
    touching U, so each fresh sample is paired with a stored record: one per
    row class for the matrix entries, and one each from the ``u'`` and ``u''``
    pools for the chained vectors ``u'M`` and ``u''M``.
    Returns ``(TransferMatrix, HopfReport)``.
    """
    v = spec.origin() if v is None else tuple(v)
    N = _schedule_list(schedule)
    if j <= i:
        raise LatticeError("need j > i")
    if strict_gap and j <= i + 2:
        raise LatticeError(f"scale index j={j} must exceed i+2={i + 2}")
    if j + 1 >= len(N) or i < 0:
        raise LatticeError("schedule too short for the requested scales")
    if top_k < 1 or budget < 8:
        raise LatticeError("budget and top_k must be positive")
    p = check_probability(p)
    event = event if event is not None else _origin_edge(spec, v)
    smp = _ChainSampler(spec, v, N, i, j, event)
    reg = smp.region
    rows = max(1, min(2048, (1 << 21) // (reg.ne + 8 * reg.nv)))
    s1 = derive_seed(seed, "hopf", "pass1")
    s2 = derive_seed(seed, "hopf", "pass2")
    n1 = n2 = int(budget)

    # pass 1: records on the small ball, column calibration on the big one
    pool_u, pool_r, pool_e, col_sizes = [], [], [], []
    small = smp.small
    rows_s = max(1, min(8192, (1 << 21) // (small.ne + 8 * small.nv)))
    for start, cnt in _blocks(n1, rows_s):
        U, R, _, e_ok = smp.inner(Batch(small, sample_block(small, p, s1, start, cnt)))
        pool_u.append(U)
        pool_r.append(R)
        pool_e.append(e_ok)
    n_cal = min(n1, CALIBRATION)
    s_cal = derive_seed(seed, "hopf", "columns")
    for start, cnt in _blocks(n_cal, rows):
        size_j, ok_j = smp.outer(Batch(reg, sample_block(reg, p, s_cal, start, cnt)))
        col_sizes.append(size_j[ok_j])
    pool_u = np.concatenate(pool_u)
    pool_r = np.concatenate(pool_r)
    pool_e = np.concatenate(pool_e)
    col_sizes = np.concatenate(col_sizes)
    rsize = pool_r.sum(axis=1)
    live = rsize > 0  # records with empty R contribute a zero row
    row_thr = _size_thresholds(rsize, top_k)
    col_thr = _size_thresholds(col_sizes, top_k)
    row_cls = _size_classes(rsize, row_thr)
    n_rows, n_cols = len(row_thr) + 1, len(col_thr) + 1
    u2 = np.bincount(row_cls[live], minlength=n_rows)
    u1 = np.bincount(row_cls[live & pool_e], minlength=n_rows)
    keep_r = np.flatnonzero(u2 > 0)
    col_pass1 = np.bincount(_size_classes(col_sizes, col_thr)[col_sizes > 0], minlength=n_cols)
    keep_c = np.flatnonzero(col_pass1 > 0)
    if keep_r.size == 0 or keep_c.size == 0:
        raise ConditioningStarvation("no usable records in pass 1", None)
    members = [np.flatnonzero(live & (row_cls == a)) for a in keep_r]
    idx2 = np.flatnonzero(live)
    idx1 = np.flatnonzero(live & pool_e)
    col_map = np.full(n_cols, -1)
    col_map[keep_c] = np.arange(keep_c.size)

    # pass 2: entries and chained vectors
    hits = np.zeros((keep_r.size, keep_c.size), dtype=np.int64)
    h1 = np.zeros(keep_c.size, dtype=np.int64)
    h2 = np.zeros(keep_c.size, dtype=np.int64)
    for start, cnt in _blocks(n2, rows):
        batch = Batch(reg, sample_block(reg, p, s2, start, cnt))
        size_j, ok_j = smp.outer(batch)
        col = col_map[_size_classes(size_j, col_thr).clip(0)]
        col = np.where(ok_j & (size_j > 0) & (col >= 0), col, -1)
        sel = np.flatnonzero(col >= 0)
        if sel.size == 0:
            continue
        # the link is only evaluated where the outer events already hold
        sub = batch.bits[sel]
        k = start + sel
        csel = col[sel]
        for a, mem in enumerate(members):
            r = mem[k % mem.size]
            hit = smp.link(sub, pool_u[r], pool_r[r])
            np.add.at(hits[a], csel[hit], 1)
        for pool, acc in ((idx2, h2), (idx1, h1)):
            if pool.size == 0:
                continue
            r = pool[k % pool.size]
            hit = smp.link(sub, pool_u[r], pool_r[r])
            acc += np.bincount(csel[hit], minlength=keep_c.size)
    ent = hits / n2
    se = np.sqrt(ent * (1 - ent) / n2)
    rows_l = [_class_labels(row_thr)[a] for a in keep_r]
    cols_l = [_class_labels(col_thr)[c] for c in keep_c]
    zeros = [[rows_l[a], cols_l[c]] for a, c in zip(*np.nonzero(hits == 0))]
    mat = TransferMatrix(rows_l, cols_l, ent, se, hits, u2[keep_r], u1[keep_r] / n1, u2[keep_r] / n1,
                         (N[i], N[j]), p, int(seed), int(budget),
                         float(live.sum() / max(len(live), 1)),
                         float((col_sizes > 0).sum() / max(len(col_sizes), 1)), zeros)
    mat.chain_prime, mat.chain_second = h1.copy(), h2.copy()
    osc0, se0 = _oscillation(u1[keep_r], u2[keep_r], min_count)
    osc1, se1 = _oscillation_poisson(h1, h2, min_count)
    nonincr = None
    if np.isfinite(osc0) and np.isfinite(osc1):
        nonincr = bool(osc1 <= osc0 + 2 * math.hypot(se0, se1))
    q = idx1.size / idx2.size if idx2.size else float("nan")
    xi = q * h1.sum() / h2.sum() if h2.sum() else float("nan")
    xi_se = xi * math.sqrt((1 - q) / max(idx1.size, 1) + 1 / max(h1.sum(), 1) + 1 / max(h2.sum(), 1)) \
        if np.isfinite(xi) else float("nan")
    if not zeros:
        report = cross_ratio_and_contraction(mat)
    else:
        log.warning("%d transfer-matrix entries had zero hits", len(zeros))
        report = HopfReport(float("nan"), float("nan"), float("nan"))
    report.osc, report.osc_stderr, report.osc_nonincreasing = [osc0, osc1], [se0, se1], nonincr
    report.xi_hat, report.xi_stderr = float(xi), float(xi_se)
    report.p_event = float(pool_e.sum() / max(pool_e.size, 1))
    report.n_records = int(live.sum())
    return mat, report


def _oscillation(vp, vs, min_count):
    """max/min of binomial ratios ``vp/vs`` over entries with ``vs >= min_count``."""
    vp, vs = np.asarray(vp), np.asarray(vs)
    ok = vs >= min_count
    if ok.sum() < 1:
        return float("nan"), float("nan")
    r = vp[ok] / vs[ok]
    se = np.sqrt(r * (1 - r) / vs[ok])
    hi, lo = int(np.argmax(r)), int(np.argmin(r))
    if r[lo] <= 0:
        return float("inf"), float("nan")
    osc = r[hi] / r[lo]
    return float(osc), float(osc * math.hypot(se[hi] / r[hi], se[lo] / r[lo]))


def _oscillation_poisson(h1, h2, min_count):
    """max/min of ``h1/h2`` for independent counts, relative errors ``1/sqrt(h)``."""
    h1, h2 = np.asarray(h1, dtype=float), np.asarray(h2, dtype=float)
    ok = (h1 >= min_count) & (h2 >= min_count)
    if ok.sum() < 1:
        return float("nan"), float("nan")
    r = h1[ok] / h2[ok]
    rel = np.sqrt(1 / h1[ok] + 1 / h2[ok])
    hi, lo = int(np.argmax(r)), int(np.argmin(r))
    osc = r[hi] / r[lo]
    return float(osc), float(osc * math.hypot(rel[hi], rel[lo])) if hi != lo else 0.0


def _origin_edge(spec, v):
    """Default event: the edge from v in the first coordinate direction is open."""
    w = list(v)
    w[0] += 1
    return Cylinder([(tuple(v), tuple(w))], [1])


def estimate_transfer_matrix(spec: LatticeSpec, v=None, schedule=DEFAULT_SCHEDULE, i: int = 0,
                             j: int = 3, p: float = 0.5, budget: int = 100_000, seed: int = 0,
                             top_k: int = 8, event: Event | None = None) -> TransferMatrix:
    """Single matrix between scale indices i and j (requires j > i + 2)."""
    mat, _ = estimate_hopf_chain(spec, v, schedule, i, j, p, budget, seed, top_k, event)
    return mat


def cross_ratio_and_contraction(M, c_star: float | None = None, p_event: float | None = None) -> HopfReport:
    """Largest oriented cross ratio of a positive matrix and the Hopf factor."""
    a = np.asarray(M.entries if isinstance(M, TransferMatrix) else M, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise LatticeError("need a nonempty matrix")
    if not (a > 0).all():
        raise LatticeError("all entries must be positive")
    lg = np.log(a)
    # cross(r1, r2, c1, c2) = L[r1,c1] + L[r2,c2] - L[r1,c2] - L[r2,c1]
    d = lg[:, None, :, None] + lg[None, :, None, :] - lg[:, None, None, :] - lg[None, :, :, None]
    ksq = float(np.exp(np.abs(d).max()))
    kappa = math.sqrt(ksq)
    ctx = None
    if c_star is not None and p_event:
        ctx = 1.0 / (c_star ** 2 * p_event)
    return HopfReport(ksq, kappa, (kappa - 1) / (kappa + 1), c_star_context=ctx, p_event=p_event)
