"""Independent brute-force reference implementations used as test oracles.

Nothing here imports the package: graphs are built from coordinate
tuples, connectivity is a plain BFS, and probabilities come from summing
over all ``2**|E|`` edge states with exact fractions.
"""

from __future__ import annotations

import itertools
from collections import deque
from fractions import Fraction

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
SALT = 0x6A09E667F3BCC909


# ------------------------------------------------------------------ graphs

def diamond(n, d=2):
    """Coordinates with L1 norm <= n in Z^d."""
    rng = range(-n, n + 1)
    return sorted(c for c in itertools.product(rng, repeat=d) if sum(map(abs, c)) <= n)


def slab_box(n, d, k):
    """Vertices of Q(n) in Z^2 x {0..k}^(d-2)."""
    plane = itertools.product(range(-n, n + 1), repeat=2)
    layers = list(itertools.product(range(k + 1), repeat=d - 2))
    return sorted(a + b for a in plane for b in layers)


def induced_edges(vertices):
    vs = set(vertices)
    out = []
    for v in sorted(vs):
        for a in range(len(v)):
            w = v[:a] + (v[a] + 1,) + v[a + 1:]
            if w in vs:
                out.append((v, w))
    return out


def l1(v):
    return sum(map(abs, v))


# ------------------------------------------------------------ connectivity

def components(vertices, open_edges):
    adj = {v: [] for v in vertices}
    for a, b in open_edges:
        if a in adj and b in adj:
            adj[a].append(b)
            adj[b].append(a)
    seen, comps = set(), []
    for v in sorted(adj):
        if v in seen:
            continue
        comp, queue = {v}, deque([v])
        seen.add(v)
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    comp.add(y)
                    queue.append(y)
        comps.append(frozenset(comp))
    return comps


def connected(vertices, open_edges, xs, ys):
    xs, ys = set(xs) & set(vertices), set(ys) & set(vertices)
    return any(c & xs and c & ys for c in components(vertices, open_edges))


def crossing_count(vertices, open_edges, inner, outer):
    inner, outer = set(inner), set(outer)
    return sum(1 for c in components(vertices, open_edges) if c & inner and c & outer)


# -------------------------------------------------------------- enumeration

def enumerate_probability(edges, predicate, p):
    """Exact ``P[predicate(open_edges)]``; ``p`` may be a Fraction."""
    p = Fraction(p)
    total = Fraction(0)
    n = len(edges)
    for states in itertools.product((0, 1), repeat=n):
        if predicate([e for e, s in zip(edges, states) if s]):
            k = sum(states)
            total += p ** k * (1 - p) ** (n - k)
    return total


def enumerate_counts(edges, predicate):
    """``N[k]``: satisfying configurations with k open edges."""
    n = len(edges)
    counts = [0] * (n + 1)
    for states in itertools.product((0, 1), repeat=n):
        if predicate([e for e, s in zip(edges, states) if s]):
            counts[sum(states)] += 1
    return counts


# -------------------------------------------------------------------- rng

def _mix(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def uniform(seed, sample, edge):
    """Splitmix64 counter stream in Python integers."""
    k0 = _mix((seed & MASK) ^ SALT)
    key = _mix((k0 + (sample + 1) * GOLDEN) & MASK)
    x = _mix((key + (edge + 1) * GOLDEN) & MASK)
    return (x >> 11) * 2.0 ** -53
