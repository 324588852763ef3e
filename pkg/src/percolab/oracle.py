"""Exact event probabilities on small regions by full enumeration.

Configuration ``c`` (an integer in ``[0, 2**ne)``) opens edge ``j`` iff bit
``j`` of ``c`` is set.  Events are evaluated with the same ``Event.evaluate``
code used by the Monte Carlo engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import enumerate_bits
from .events import E1, E2, Event, Sure
from .lattice import LatticeError, Region
from .percolation import check_probability

EDGE_CAP = 24
CHUNK = 1 << 16
TOL = 1e-12


class OracleCapError(LatticeError):
    pass


@dataclass
class EventPolynomial:
    """Counts ``N[k]`` of event configurations with ``k`` open edges."""

    n_edges: int
    coefficients: list  # python ints
    descriptor: dict = field(default_factory=dict)
    event: dict = field(default_factory=dict)

    def __call__(self, p):
        return exact_probability(self, p)

    def to_dict(self) -> dict:
        return {"n_edges": self.n_edges, "coefficients": [int(c) for c in self.coefficients],
                "region": self.descriptor, "event": self.event}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["n_edges"]), [int(c) for c in d["coefficients"]], d.get("region", {}),
                   d.get("event", {}))

    def power_coefficients(self) -> list:
        """Integer coefficients ``a[j]`` of ``P(p) = sum_j a[j] p**j``."""
        n = self.n_edges
        a = [0] * (n + 1)
        for k, nk in enumerate(self.coefficients):
            if nk == 0:
                continue
            for i in range(n - k + 1):
                a[k + i] += nk * math.comb(n - k, i) * (-1) ** i
        return a


def _check_cap(region: Region):
    if region.ne > EDGE_CAP:
        raise OracleCapError(f"region has {region.ne} edges; exact enumeration is capped at {EDGE_CAP}")


def enumerate_event(region: Region, evaluate, chunk: int = CHUNK) -> np.ndarray:
    """Count configurations satisfying ``evaluate(bits) -> bool[n]`` by open-edge count.

    Chunks are independent; counts are summed in integer arithmetic.
    """
    _check_cap(region)
    ne = region.ne
    total = 1 << ne
    counts = np.zeros(ne + 1, dtype=np.int64)
    for start in range(0, total, chunk):
        cnt = min(chunk, total - start)
        bits = enumerate_bits(start, cnt, ne)
        ok = np.asarray(evaluate(bits), dtype=bool)
        k = bits.sum(axis=1, dtype=np.int64)
        counts += np.bincount(k[ok], minlength=ne + 1)
    return counts


def exact_event_polynomial(region: Region, event: Event) -> EventPolynomial:
    counts = enumerate_event(region, lambda b: event.evaluate(region, b))
    return EventPolynomial(region.ne, [int(c) for c in counts], region.descriptor, event.to_dict())


def exact_probability(poly: EventPolynomial, p: float) -> float:
    """Bernstein-form evaluation; log-space weights for more than 16 edges."""
    p = check_probability(p)
    n = poly.n_edges
    c = poly.coefficients
    if p == 0.0:
        return float(c[0])
    if p == 1.0:
        return float(c[n])
    if n <= 16:
        return float(sum(nk * p ** k * (1 - p) ** (n - k) for k, nk in enumerate(c)))
    lp, lq = math.log(p), math.log1p(-p)
    return float(math.fsum(nk * math.exp(k * lp + (n - k) * lq) for k, nk in enumerate(c) if nk))


def exact(region: Region, event: Event, p: float) -> float:
    return exact_probability(exact_event_polynomial(region, event), p)


@dataclass
class BKPoint:
    p: float
    p_e2: float
    p_e2_given_e1: float | None
    lower_margin: float | None  # P[E2|E1] - P[E2]
    upper_margin: float | None  # sqrt(P[E2]) - P[E2|E1]
    holds: bool | None  # None when P[E1] = 0


def verify_bk_chain(region: Region, v=None, m=1, n=2, p_grid=None, tol=TOL) -> list:
    """Exact check of ``P[E2] <= P[E2|E1] <= sqrt(P[E2])`` on a grid."""
    p_grid = [i / 10 for i in range(1, 10)] if p_grid is None else p_grid
    e1, e2 = E1(v, m, n), E2(v, m, n)
    pe1 = exact_event_polynomial(region, e1)
    pe2 = exact_event_polynomial(region, e2)
    both = exact_event_polynomial(region, e1 & e2)
    out = []
    for p in p_grid:
        a, b, j = exact_probability(pe1, p), exact_probability(pe2, p), exact_probability(both, p)
        if a <= 0.0:
            out.append(BKPoint(p, b, None, None, None, None))
            continue
        cond = j / a
        lo, hi = cond - b, math.sqrt(b) - cond
        out.append(BKPoint(p, b, cond, lo, hi, bool(lo >= -tol and hi >= -tol)))
    return out


@dataclass
class CrossCheck:
    exact: float
    mean: float
    stderr: float
    z: float


def oracle_mc_crosscheck(region: Region, p: float, event: Event, budget: int, seed: int) -> CrossCheck:
    """``z = (MC mean - exact) / stderr`` for one event."""
    from .estimators import estimate_event_probability

    ex = exact(region, event, p)
    est = estimate_event_probability(region, p, event, budget, seed)
    diff = est.mean - ex
    if est.stderr == 0.0:
        if abs(diff) > TOL:
            raise AssertionError(f"zero-variance estimate {est.mean} disagrees with exact value {ex}")
        z = 0.0
    else:
        z = diff / est.stderr
    return CrossCheck(ex, est.mean, est.stderr, float(z))


def sure_polynomial(region: Region) -> EventPolynomial:
    return exact_event_polynomial(region, Sure())
