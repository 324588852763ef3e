"""Bernoulli bond configurations and restricted connectivity queries."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .lattice import LatticeError, Region, VertexSet, region_from_descriptor
from .rng import RNG_VERSION, seed_to_uint64


def check_probability(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0 or np.isnan(p):
        raise LatticeError(f"p must lie in [0, 1], got {p}")
    return p


@dataclass(frozen=True, eq=False)
class Configuration:
    """One sample: an open bit per region edge plus its provenance.

    ``sample_index`` is ``-1`` for configurations that were built or edited
    by hand rather than drawn from the stream.
    """

    region: Region
    bits: np.ndarray = field(repr=False)
    p: float = float("nan")
    seed: int = 0
    sample_index: int = -1

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if b.shape != (self.region.ne,):
            raise LatticeError(f"expected {self.region.ne} edge bits, got shape {b.shape}")
        object.__setattr__(self, "bits", b)

    @property
    def n_open(self) -> int:
        return int(self.bits.sum())

    def is_open(self, e: int) -> bool:
        return bool(self.bits[e])

    def open_edges(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def with_bits(self, bits) -> "Configuration":
        return Configuration(self.region, np.asarray(bits, dtype=np.uint8), self.p, self.seed, -1)

    def to_text(self) -> str:
        header = {"region": self.region.descriptor, "p": self.p, "seed": self.seed,
                  "sample_index": self.sample_index, "rng": RNG_VERSION}
        lines = ["# " + json.dumps(header, sort_keys=True)]
        lines += [f"{j} {int(b)}" for j, b in enumerate(self.bits)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, region: Region | None = None) -> "Configuration":
        rows = text.strip().splitlines()
        header = json.loads(rows[0][1:].strip())
        if region is None:
            region = region_from_descriptor(header["region"])
        bits = np.zeros(region.ne, dtype=np.uint8)
        for line in rows[1:]:
            j, b = line.split()
            bits[int(j)] = int(b)
        return cls(region, bits, header["p"], header["seed"], header["sample_index"])


def sample_configuration(region: Region, p: float, seed: int, sample_index: int) -> Configuration:
    p = check_probability(p)
    s = seed_to_uint64(seed)
    bits = K.sample_bits(np.uint64(s), np.uint64(sample_index), 1, region.ne, p)[0]
    return Configuration(region, bits, p, int(seed), int(sample_index))


def sample_block(region: Region, p: float, seed: int, first: int, count: int) -> np.ndarray:
    """Edge bits of samples ``first .. first+count-1`` as a ``(count, ne)`` array."""
    p = check_probability(p)
    return K.sample_bits(np.uint64(seed_to_uint64(seed)), np.uint64(first), int(count), region.ne, p)


def _as_set(region: Region, s) -> VertexSet:
    from .events import resolve_set  # events imports this module

    if isinstance(s, VertexSet):
        if s.region is not region:
            raise LatticeError("vertex set belongs to another region")
        return s
    return resolve_set(region, s)


def _zmask(region: Region, z) -> np.ndarray:
    if z is None:
        return np.ones(region.nv, dtype=np.bool_)
    if isinstance(z, np.ndarray) and z.dtype == np.bool_:
        return z
    return _as_set(region, z).mask


@dataclass(frozen=True, eq=False)
class ClusterLabeling:
    """Open clusters inside Z; ``labels[v]`` is the smallest member index or -1."""

    z: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    @property
    def cluster_ids(self) -> np.ndarray:
        return np.unique(self.labels[self.labels >= 0])

    @property
    def n_clusters(self) -> int:
        return int(self.cluster_ids.size)

    def sizes(self) -> dict:
        ids, counts = np.unique(self.labels[self.labels >= 0], return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}

    def cluster_of(self, v: int) -> np.ndarray:
        lab = self.labels[v]
        if lab < 0:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(self.labels == lab)

    def same(self, a: int, b: int) -> bool:
        return self.labels[a] >= 0 and self.labels[a] == self.labels[b]


def label_clusters(config: Configuration, z=None) -> ClusterLabeling:
    region = config.region
    zm = _zmask(region, z)
    labels = K.label_batch(config.bits[None, :], region.eu, region.ev, zm)[0]
    return ClusterLabeling(zm.copy(), labels)


def _indices(region: Region, s) -> np.ndarray:
    return _as_set(region, s).indices


def connected_in(config: Configuration, x, y, z=None) -> bool:
    """``X <-> Y in Z``; X and Y are intersected with Z first."""
    region = config.region
    lab = label_clusters(config, z).labels
    xs, ys = _indices(region, x), _indices(region, y)
    return bool(K.connected_batch(lab[None, :], xs, ys)[0])


def crossing_cluster_count(config: Configuration, annulus, inner, outer) -> int:
    region = config.region
    lab = label_clusters(config, annulus).labels
    return int(K.crossing_count_batch(lab[None, :], _indices(region, inner), _indices(region, outer))[0])
