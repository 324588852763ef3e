"""Result rows, run manifests and flat config files.

CSV rows carry only reproducible quantities plus the measured wall time;
timestamps and host details live in the manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields

from .rng import RNG_VERSION

SCHEMA_VERSION = 1
RESULT_COLUMNS = ("run_id", "graph", "d", "k", "geometry", "p", "m", "n", "event", "estimator",
                  "mean", "stderr", "ci_lo", "ci_hi", "n_samples", "n_accepted", "seed", "wallclock_s")
NUMERIC_COLUMNS = ("d", "k", "p", "m", "n", "mean", "stderr", "ci_lo", "ci_hi", "n_samples",
                   "n_accepted", "seed")
Z95 = 1.959963984540054


class ResultSchemaError(ValueError):
    pass


def _fmt(x):
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


@dataclass
class ResultRow:
    run_id: str
    graph: str
    d: int
    k: int
    geometry: str
    p: float
    m: int
    n: int
    event: str
    estimator: str
    mean: float
    stderr: float
    ci_lo: float
    ci_hi: float
    n_samples: int
    n_accepted: int
    seed: int
    wallclock_s: float

    def __post_init__(self):
        for name in ("p", "mean", "stderr", "ci_lo", "ci_hi", "wallclock_s"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ResultSchemaError(f"{name} must be finite, got {v}")
            setattr(self, name, v)
        for name in ("d", "k", "m", "n", "n_samples", "n_accepted", "seed"):
            setattr(self, name, int(getattr(self, name)))
        if not self.ci_lo <= self.mean <= self.ci_hi:
            raise ResultSchemaError("need ci_lo <= mean <= ci_hi")

    @classmethod
    def from_estimate(cls, run_id, spec, geometry, p, m, n, event, estimator, est):
        lo, hi = est.mean - Z95 * est.stderr, est.mean + Z95 * est.stderr
        return cls(run_id, spec.family, spec.d, spec.k, geometry, p, m, n, event, estimator,
                   est.mean, est.stderr, lo, hi, est.n_samples, est.n_accepted, est.seed,
                   round(est.wallclock, 6))

    def values(self) -> list:
        return [_fmt(getattr(self, c)) for c in RESULT_COLUMNS]

    def numeric(self) -> tuple:
        return tuple(getattr(self, c) for c in NUMERIC_COLUMNS)


def write_results(rows, path: str) -> None:
    """Append rows to a CSV, writing the header only for a new or empty file."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    if not new:
        with open(path, newline="") as fh:
            head = next(csv.reader(fh), None)
        if tuple(head or ()) != RESULT_COLUMNS:
            raise ResultSchemaError(f"{path} has a different header")
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow(r.values())


def read_results(path: str) -> list:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        head = next(rd, None)
        if tuple(head or ()) != RESULT_COLUMNS:
            raise ResultSchemaError(f"{path} has a different header")
        return [ResultRow(**dict(zip(RESULT_COLUMNS, row))) for row in rd]


@dataclass
class RunManifest:
    run_id: str
    command: list
    parameters: dict
    graph: dict
    seed: int
    budgets: dict = field(default_factory=dict)
    started: str = ""
    finished: str = ""
    outputs: list = field(default_factory=list)
    pc_provenance: dict | None = None
    workers: int = 1
    exit_code: int | None = None
    tool_version: str = ""
    rng: str = RNG_VERSION
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ResultSchemaError(f"unsupported manifest schema {d.get('schema_version')}")
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def write_manifest(manifest: RunManifest, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path: str) -> RunManifest:
    with open(path) as fh:
        return RunManifest.from_dict(json.load(fh))


def make_run_id(command: str, parameters: dict, seed: int) -> str:
    """Deterministic id: the same command, parameters and seed give the same id."""
    blob = json.dumps({"command": command, "parameters": parameters, "seed": seed}, sort_keys=True,
                      default=str)
    return f"{command}-{hashlib.sha256(blob.encode()).hexdigest()[:12]}"


def load_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; keys use dashes or underscores."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, val = (t.strip() for t in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def default_seed(fallback: int = 0) -> int:
    """``PERC_SEED`` from the environment, else ``fallback``."""
    v = os.environ.get("PERC_SEED")
    return int(v) if v not in (None, "") else fallback
