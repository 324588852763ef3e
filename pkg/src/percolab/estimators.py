"""Monte Carlo estimators built on the counter RNG.

Sample ``i`` of a run with seed ``s`` is always configuration ``(s, i)``, so
every tally below is a sum of per-sample integers and does not depend on how
samples are chunked or distributed.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .events import Batch, Connect, CrossingCount, Event, OneArm, resolve_set
from .lattice import (LatticeError, LatticeSpec, Region, build_ball_region,
                      build_rectangle_region)
from .percolation import check_probability, sample_block
from .rng import derive_seed

log = logging.getLogger(__name__)

Z95 = 1.959963984540054
MIN_ACCEPTED = 100
MAX_VERTICES = 10_000_000
_CHUNK_CELLS = 1 << 22


class ConditioningStarvation(RuntimeError):
    """Too few samples satisfied the conditioning event."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


@dataclass
class Estimate:
    mean: float
    stderr: float
    n_samples: int
    n_accepted: int
    seed: int
    wallclock: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def ci95(self) -> tuple:
        return (self.mean - Z95 * self.stderr, self.mean + Z95 * self.stderr)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci95"] = list(self.ci95)
        return d


@dataclass
class SeriesReport:
    parameter: str
    values: list
    estimates: list
    differences: list = field(default_factory=list)  # (|a_i - a_{i+1}|, stderr)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.values) != len(self.estimates):
            raise ValueError("one estimate per parameter value")
        if not self.differences:
            self.differences = successive_differences(self.estimates)

    def means(self) -> list:
        return [e.mean for e in self.estimates]

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "values": list(self.values),
                "estimates": [e.to_dict() for e in self.estimates],
                "differences": [list(d) for d in self.differences], "meta": self.meta}


def successive_differences(estimates) -> list:
    return [(abs(a.mean - b.mean), math.hypot(a.stderr, b.stderr))
            for a, b in zip(estimates, estimates[1:])]


def bernoulli_stderr(hits: int, n: int) -> float:
    if n <= 0:
        return float("nan")
    m = hits / n
    return math.sqrt(m * (1.0 - m) / n)


def chunk_rows(region: Region, lazy: bool = False) -> int:
    if lazy:
        return 1 << 15
    return int(max(1, min(1 << 15, _CHUNK_CELLS // (region.ne + 4 * region.nv + 1))))


def _stream_eval(region, p, event: Event, seed, first, count, bits=None):
    if bits is not None:
        return event.evaluate(region, bits)
    return event.evaluate_stream(region, p, seed, first, count)


_WORKERS = 1


def set_workers(n: int) -> int:
    """Number of threads used to evaluate sample blocks; returns the old value.

    Blocks are consumed in sample order whatever the thread count, so every
    tally is identical for any number of workers.
    """
    global _WORKERS
    old = _WORKERS
    _WORKERS = max(1, int(n))
    return old


def get_workers() -> int:
    return _WORKERS


def _eval_block(region, p, seed, events, lazy, start, cnt):
    bits = None if lazy else Batch(region, sample_block(region, p, seed, start, cnt))
    return start, [_stream_eval(region, p, e, seed, start, cnt, bits) for e in events]


def iter_chunks(region: Region, p, seed, budget, events, first: int = 0):
    """Yield ``(start, [bool arrays])`` for consecutive sample blocks.

    All events share one draw of the block unless every one of them can be
    evaluated lazily from the stream.
    """
    lazy = all(e.lazy for e in events)
    rows = chunk_rows(region, lazy)
    for e in events:
        e._resolve(region)  # fill the per-region cache before threads start
    blocks = [(first + d, min(rows, budget - d)) for d in range(0, budget, rows)]
    if _WORKERS == 1 or len(blocks) == 1:
        for start, cnt in blocks:
            yield _eval_block(region, p, seed, events, lazy, start, cnt)
        return
    with ThreadPoolExecutor(_WORKERS) as pool:
        step = 2 * _WORKERS
        for i in range(0, len(blocks), step):
            futs = [pool.submit(_eval_block, region, p, seed, events, lazy, s, c)
                    for s, c in blocks[i:i + step]]
            for f in futs:
                yield f.result()


def estimate_event_probability(region: Region, p: float, event: Event, budget: int, seed: int) -> Estimate:
    p = check_probability(p)
    if budget < 100:
        raise LatticeError("budget must be >= 100")
    t0 = time.perf_counter()
    hits = 0
    for _, (ok,) in iter_chunks(region, p, seed, budget, [event]):
        hits += int(ok.sum())
    return Estimate(hits / budget, bernoulli_stderr(hits, budget), budget, budget, int(seed),
                    time.perf_counter() - t0)


def conditional_counts(region, p, target, condition, seed, budget, target_accepted=None):
    """``(n_samples, n_accepted, n_hits)`` with optional early stop.

    With ``target_accepted`` sampling stops at the exact sample where the
    accepted count reaches it, independent of chunk size.
    """
    n = acc = hits = 0
    for start, (c, t) in iter_chunks(region, p, seed, budget, [condition, target]):
        if target_accepted is not None:
            need = target_accepted - acc
            cum = np.cumsum(c)
            if cum.size and cum[-1] >= need:
                cut = int(np.searchsorted(cum, need)) + 1
                c, t = c[:cut], t[:cut]
                n += cut
                acc += int(c.sum())
                hits += int((c & t).sum())
                break
        n += c.size
        acc += int(c.sum())
        hits += int((c & t).sum())
    return n, acc, hits


def estimate_conditional(region: Region, p: float, target: Event, condition: Event, budget: int,
                         min_accepted: int = MIN_ACCEPTED, seed: int = 0,
                         target_accepted: int | None = None) -> Estimate:
    """Rejection estimate of ``P[target | condition]``."""
    p = check_probability(p)
    if min_accepted < MIN_ACCEPTED:
        raise LatticeError(f"min_accepted must be >= {MIN_ACCEPTED}")
    t0 = time.perf_counter()
    n, acc, hits = conditional_counts(region, p, target, condition, seed, budget, target_accepted)
    mean = hits / acc if acc else float("nan")
    est = Estimate(mean, bernoulli_stderr(hits, acc) if acc else float("nan"), n, acc, int(seed),
                   time.perf_counter() - t0)
    if acc < min_accepted:
        raise ConditioningStarvation(f"only {acc} of {n} samples satisfied the condition "
                                     f"(need {min_accepted})", est)
    return est


# --------------------------------------------------------------- qm ratios

def ratio_from_counts(counts: np.ndarray, n: int):
    """Ratio ``a / (b c)`` of three indicator means and its delta-method stderr.

    ``counts[k]`` tallies samples whose indicator pattern (a, b, c) equals the
    bits of ``k`` (a is bit 0).
    """
    pat = np.array([[(k >> j) & 1 for j in range(3)] for k in range(8)], dtype=float)
    w = counts / n
    mean = w @ pat
    second = pat.T @ (pat * w[:, None])
    cov = second - np.outer(mean, mean)
    a, b, c = mean
    if b <= 0 or c <= 0 or a <= 0:
        r = a / (b * c) if b > 0 and c > 0 else float("nan")
        return r, float("nan"), mean, np.sqrt(np.maximum(np.diag(cov), 0) / n)
    g = np.array([1 / a, -1 / b, -1 / c])
    var_log = float(g @ cov @ g) / n
    r = a / (b * c)
    return r, r * math.sqrt(max(var_log, 0.0)), mean, np.sqrt(np.maximum(np.diag(cov), 0) / n)


def qm_ratio_events(region, p, ea: Event, eb: Event, ec: Event, budget, seed) -> Estimate:
    p = check_probability(p)
    t0 = time.perf_counter()
    counts = np.zeros(8, dtype=np.int64)
    for _, (a, b, c) in iter_chunks(region, p, seed, budget, [ea, eb, ec]):
        k = a.astype(np.int64) | (b.astype(np.int64) << 1) | (c.astype(np.int64) << 2)
        counts += np.bincount(k, minlength=8)
    r, se, means, ses = ratio_from_counts(counts, budget)
    inconclusive = bool(means[1] - Z95 * ses[1] <= 0 or means[2] - Z95 * ses[2] <= 0)
    extra = {"numerator": float(means[0]), "denominator_x": float(means[1]),
             "denominator_y": float(means[2]), "stderrs": [float(s) for s in ses],
             "inconclusive": inconclusive, "counts": [int(c) for c in counts]}
    return Estimate(float(r), float(se), budget, budget, int(seed), time.perf_counter() - t0, extra)


def qm_ratio(spec: LatticeSpec, p: float, m: int, z, x, y, budget: int, seed: int,
             v=None, radius: int | None = None) -> Estimate:
    """``P[X<->Y in Z] / (P[X<->S(v,2m) in Z] P[Y<->S(v,2m) in Z])`` on one stream.

    ``z``, ``x`` and ``y`` are set specifiers (see ``events.resolve_set``).
    The ambient region is the ball ``B(v, radius)``, ``radius = 6m`` by default.
    """
    v = spec.origin() if v is None else tuple(v)
    region = build_ball_region(spec, v, 6 * m if radius is None else radius)
    zs = resolve_set(region, z)
    xs, ys = resolve_set(region, x) & zs, resolve_set(region, y) & zs
    a_in = resolve_set(region, {"ball": m, "center": list(v)})
    if not xs.issubset(a_in):
        raise LatticeError("X must lie inside B(v, m)")
    if (ys & resolve_set(region, {"ball": 4 * m, "center": list(v)})):
        raise LatticeError("Y must lie outside B(v, 4m)")
    s2m = resolve_set(region, {"shell": 2 * m, "center": list(v)})
    est = qm_ratio_events(region, p, Connect(xs, ys, zs), Connect(xs, s2m, zs), Connect(ys, s2m, zs),
                          budget, seed)
    est.extra.update({"m": m, "region": region.descriptor})
    return est


# --------------------------------------------------------------- IIC limits

def iic_first_limit(spec: LatticeSpec, w, event: Event, p: float, n_list, budget: int, seed: int,
                    target_accepted: int | None = None, min_accepted: int = MIN_ACCEPTED) -> SeriesReport:
    """``P[E | w <-> S(w,n)]`` for each n; independent derived seed per n."""
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise LatticeError("n_list must be increasing")
    w = spec.origin() if w is None else tuple(w)
    ests = []
    for n in n_list:
        region = build_ball_region(spec, w, n)
        s = derive_seed(seed, "iic-first", n)
        try:
            e = estimate_conditional(region, p, event, OneArm(w, n), budget, min_accepted, s,
                                     target_accepted)
        except ConditioningStarvation as exc:
            e = exc.estimate
            e.extra["starved"] = True
        e.extra["n"] = n
        ests.append(e)
    return SeriesReport("n", n_list, ests, meta={"p": p, "w": list(w), "event": event.to_dict(),
                                                 "seed": seed, "budget": budget})


def iic_second_limit(spec: LatticeSpec, w, event: Event, p_list, proxy_n: int, budget: int, seed: int,
                     target_accepted: int | None = None, min_accepted: int = MIN_ACCEPTED) -> SeriesReport:
    """``P_p[E | w <-> S(w, proxy_n)]`` as a proxy for conditioning on an infinite cluster."""
    p_list = [float(p) for p in p_list]
    if any(b >= a for a, b in zip(p_list, p_list[1:])):
        raise LatticeError("p_list must be strictly decreasing")
    w = spec.origin() if w is None else tuple(w)
    region = build_ball_region(spec, w, proxy_n)
    cond = OneArm(w, proxy_n)
    ests = []
    for p in p_list:
        s = derive_seed(seed, "iic-second", proxy_n, repr(p))
        try:
            e = estimate_conditional(region, p, event, cond, budget, min_accepted, s, target_accepted)
        except ConditioningStarvation as exc:
            e = exc.estimate
            e.extra["starved"] = True
        e.extra["p"] = p
        ests.append(e)
    return SeriesReport("p", p_list, ests, meta={"proxy_n": proxy_n, "w": list(w),
                                                 "event": event.to_dict(), "seed": seed})


# ------------------------------------------------------------ critical point

def crossing_rectangle(spec: LatticeSpec, n: int):
    """Region ``[0, n] x [0, n-1]`` (all slab layers) and its left-right crossing event."""
    region = build_rectangle_region(spec, (0, 0), (n, n - 1))
    left = region.vertex_set(mask=region.coords[:, 0] == 0)
    right = region.vertex_set(mask=region.coords[:, 0] == n)
    return region, Connect(left, right, region.all())


def estimate_pc(spec: LatticeSpec, n: int, tolerance: float = 2e-3, budget: int = 4000, seed: int = 0,
                lo: float = 0.0, hi: float = 1.0, slope_step: float = 0.02) -> Estimate:
    """Bisection for the p where the left-right crossing probability is 1/2.

    All bisection steps reuse samples ``0 .. budget-1``; with the counter RNG
    this is the monotone coupling, so the empirical crossing curve is
    nondecreasing in p and bisection is well defined.  The reported stderr
    combines the bisection half-width with ``sd(F) / F'`` where F' is a
    central difference of the same empirical curve.
    """
    if n < 2:
        raise LatticeError("rectangle size must be >= 2")
    t0 = time.perf_counter()
    region, ev = crossing_rectangle(spec, n)

    def F(p):
        return estimate_event_probability(region, p, ev, budget, seed).mean

    steps = 0
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if F(mid) >= 0.5:
            hi = mid
        else:
            lo = mid
        steps += 1
    pc = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    f_hi, f_lo = F(min(1.0, pc + slope_step)), F(max(0.0, pc - slope_step))
    slope = (f_hi - f_lo) / (min(1.0, pc + slope_step) - max(0.0, pc - slope_step))
    mc = math.sqrt(0.25 / budget) / slope if slope > 0 else float("inf")
    extra = {"half_width": half, "mc_stderr": mc, "slope": slope, "bisection_steps": steps,
             "crossing_minus": f_lo, "crossing_plus": f_hi, "n": n, "combined": half + Z95 * mc}
    return Estimate(pc, math.hypot(half, mc), budget, budget, int(seed), time.perf_counter() - t0, extra)


DEFAULT_PC = {("hypercubic", 2, 0): 0.5}


def default_pc(spec: LatticeSpec, seed: int = 0, n: int = 32, budget: int = 2000):
    """``(p_c, provenance)``; square lattice uses 1/2, other graphs are estimated."""
    key = (spec.family, spec.d, spec.k)
    if key in DEFAULT_PC or (spec.is_slab and spec.d == 2):
        return 0.5, {"source": "self-duality"}
    est = estimate_pc(spec, n, 2e-3, budget, seed)
    return est.mean, {"source": "estimate_pc", "n": n, "budget": budget, "seed": seed,
                      "stderr": est.stderr}


# -------------------------------------------------------------------- census

def cluster_census(spec: LatticeSpec, m: int, p: float, mode: str, params=None, budget: int = 1000,
                   seed: int = 0, max_vertices: int = MAX_VERTICES) -> SeriesReport:
    """Exploratory statistics; nothing here is gated.

    ``crossing_count`` reports the distribution of the number of crossing
    clusters of A(0, m, 2m); ``two_point`` reports ``P[0 <-> x]`` for
    ``x = (r, 0, ...)`` with ``r`` in ``params`` inside ``B(0, 2 max r)``.
    """
    p = check_probability(p)
    o = spec.origin()
    if mode == "crossing_count":
        region = build_ball_region(spec, o, 2 * m)
        if region.nv > max_vertices:
            raise LatticeError(f"region has {region.nv} vertices (cap {max_vertices})")
        ev = CrossingCount({"annulus": [m, 2 * m]}, {"shell": m}, {"shell": 2 * m})
        hist = {}
        done = 0
        rows = chunk_rows(region)
        while done < budget:
            cnt = min(rows, budget - done)
            c = ev.counts(Batch(region, sample_block(region, p, seed, done, cnt)))
            for k, v in zip(*np.unique(c, return_counts=True)):
                hist[int(k)] = hist.get(int(k), 0) + int(v)
            done += cnt
        ks = sorted(hist)
        ests = [Estimate(hist[k] / budget, bernoulli_stderr(hist[k], budget), budget, budget, seed)
                for k in ks]
        mean_count = sum(k * v for k, v in hist.items()) / budget
        return SeriesReport("crossing_count", ks, ests, meta={"m": m, "p": p, "mean": mean_count,
                                                              "histogram": hist})
    if mode == "two_point":
        rs = [int(r) for r in (params or [m])]
        region = build_ball_region(spec, o, 2 * max(rs))
        if region.nv > max_vertices:
            raise LatticeError(f"region has {region.nv} vertices (cap {max_vertices})")
        ests = []
        for r in rs:
            x = tuple([r] + [0] * (spec.d - 1))
            ests.append(estimate_event_probability(region, p, Connect([o], [x], "all"), budget, seed))
        return SeriesReport("distance", rs, ests, meta={"m": m, "p": p})
    raise LatticeError(f"unknown census mode {mode!r}")
