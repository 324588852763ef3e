"""Acceptance criteria 1-11 as callable checks.

Each check returns a :class:`CriterionResult`.  The CLI ``suite`` command
and ``tests/test_acceptance.py`` both run these functions, so the budgets
and tolerances live in one place.
"""

from __future__ import annotations

import functools
import math
import os
import tempfile
import time
from dataclasses import dataclass, field

from .decoupling import estimate_hopf_chain, strip_instance, verify_factorization_exact
from .estimators import (estimate_conditional, estimate_event_probability, estimate_pc, iic_first_limit,
                         iic_second_limit, qm_ratio)
from .events import E1, E2, Circuit, Connect, Cylinder, OneArm, Sure, origin_star
from .lattice import LatticeSpec, build_ball_region, build_box_region, build_rectangle_region
from .oracle import exact, verify_bk_chain
from .rng import derive_seed
from .slabqm import verify_modification

SEED = 20240601
P_GRID = (0.2, 0.5, 0.8)
QUICK = (1, 2, 3)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} {tag}  {self.title}: {self.detail} ({self.seconds:.1f}s)"


def _combined(*se):
    return math.sqrt(sum(s * s for s in se))


# ---------------------------------------------------------------- 1-3: exact

def oracle_cases():
    """``(name, region, event)`` for the four small oracle events."""
    sq = LatticeSpec.hypercubic(2)
    o = sq.origin()
    square = build_rectangle_region(sq, (0, 0), (1, 1))
    ball2 = build_ball_region(sq, o, 2)
    # E1 and E2 only read the 12 annulus edges; the 4 inner edges integrate out
    return [("unit-square crossing", square, Connect([(0, 0)], [(1, 1)], "all")),
            ("B(0,2) one-arm", ball2, OneArm(o, 2)),
            ("E1(0,1,2)", ball2, E1(o, 1, 2)),
            ("E2(0,1,2)", ball2, E2(o, 1, 2))]


def criterion_1(budget: int = 100_000, seed: int = SEED) -> CriterionResult:
    cases = oracle_cases()
    worst_z, closed_err, rows = 0.0, 0.0, []
    for name, region, ev in cases:
        for p in P_GRID:
            ex = exact(region, ev, p)
            if name == "unit-square crossing":
                closed_err = max(closed_err, abs(ex - (2 * p ** 2 - p ** 4)))
            elif name == "E1(0,1,2)":
                closed_err = max(closed_err, abs(ex - (1 - (1 - p) ** 12)))
            est = estimate_event_probability(region, p, ev, budget, derive_seed(seed, "c1", name, repr(p)))
            diff = est.mean - ex
            # standard error of the estimator under the exact value; the empirical one
            # collapses to 0 when every sample agrees (E1 at p = 0.8 fails w.p. 4e-9)
            se = math.sqrt(ex * (1 - ex) / est.n_samples)
            z = (0.0 if abs(diff) <= 1e-12 else math.inf) if se == 0 else abs(diff) / se
            worst_z = max(worst_z, z)
            rows.append({"event": name, "p": p, "exact": ex, "mean": est.mean, "stderr": se, "z": z})
    ok = worst_z <= 4 and closed_err <= 1e-12
    return CriterionResult(1, "oracle agreement", ok,
                           f"max |z| = {worst_z:.2f} (<= 4), closed-form error {closed_err:.1e} (<= 1e-12)",
                           data={"rows": rows})


def criterion_2() -> CriterionResult:
    region, c = strip_instance()
    edge = Cylinder([(c, (c[0] + 1, c[1]))])
    devs = {}
    for name, ev in (("sure", Sure()), ("one-edge cylinder", edge)):
        rep = verify_factorization_exact(region, c, c, 1, 2, 3, ev, P_GRID)
        devs[name] = rep.max_abs_deviation
    worst = max(devs.values())
    return CriterionResult(2, "factorization identity", worst <= 1e-9,
                           f"max deviation {worst:.2e} over {region.ne} edges (<= 1e-9)", data=devs)


def criterion_3() -> CriterionResult:
    sq = LatticeSpec.hypercubic(2)
    region = build_ball_region(sq, sq.origin(), 2)
    pts = verify_bk_chain(region, sq.origin(), 1, 2, [i / 10 for i in range(1, 10)], 1e-12)
    ok = all(pt.holds for pt in pts)
    lo = min(pt.lower_margin for pt in pts)
    hi = min(pt.upper_margin for pt in pts)
    return CriterionResult(3, "BK chain", ok, f"min lower margin {lo:.3e}, min upper margin {hi:.3e}",
                           data={"points": [pt.__dict__ for pt in pts]})


# ------------------------------------------------------------- 4-6: uniqueness, IIC, QM

def criterion_4(accepted: int = 100_000, seed: int = SEED) -> CriterionResult:
    sq = LatticeSpec.hypercubic(2)
    o, m = sq.origin(), 4
    ests = []
    for n in (8, 16, 32):
        region = build_ball_region(sq, o, n)
        ests.append(estimate_conditional(region, 0.5, E2(o, m, n), E1(o, m, n), 10 * accepted,
                                         seed=derive_seed(seed, "c4", n), target_accepted=accepted))
    ok = all(b.mean <= a.mean + 2 * _combined(a.stderr, b.stderr) for a, b in zip(ests, ests[1:]))
    acc_ok = all(e.n_accepted >= accepted for e in ests)
    txt = ", ".join(f"n={n}: {e.mean:.4f}+-{e.stderr:.4f}" for n, e in zip((8, 16, 32), ests))
    return CriterionResult(4, "uniqueness signature", ok and acc_ok, txt,
                           data={"estimates": [e.to_dict() for e in ests]})


IIC_N = (16, 32, 64, 128, 256)


def criterion_5(accepted: int = 20_000, seed: int = SEED) -> CriterionResult:
    sq = LatticeSpec.hypercubic(2)
    o = sq.origin()
    ev = origin_star(sq)
    first = iic_first_limit(sq, o, ev, 0.5, IIC_N, 20 * accepted, derive_seed(seed, "c5a"), accepted)
    diffs = first.differences  # (|a_n - a_2n|, stderr)
    mono = all(b[0] <= a[0] + 2 * _combined(a[1], b[1]) for a, b in zip(diffs, diffs[1:]))
    second = iic_second_limit(sq, o, ev, [0.505], IIC_N[-1], 20 * accepted, derive_seed(seed, "c5b"), accepted)
    a, b = first.estimates[-1], second.estimates[-1]
    gap = abs(a.mean - b.mean)
    tol = 3 * _combined(a.stderr, b.stderr)
    ok = mono and gap <= tol
    txt = ("differences " + ", ".join(f"{d:.4f}" for d, _ in diffs)
           + f"; terminal first {a.mean:.4f} vs second {b.mean:.4f}, gap {gap:.4f} (<= {tol:.4f})")
    return CriterionResult(5, "IIC two-limit agreement", ok, txt,
                           data={"first": first.to_dict(), "second": second.to_dict()})


def criterion_6(budget: int = 10_000, seed: int = SEED) -> CriterionResult:
    sq = LatticeSpec.hypercubic(2)
    ratios = {}
    for m in (4, 8, 16):
        h = max(1, m // 2)
        ratios[m] = qm_ratio(sq, 0.5, m, {"ball": 6 * m}, {"shell": h}, {"shell": 6 * m}, budget,
                             derive_seed(seed, "c6", m))
    excl = all(r.ci95[0] > 0 for r in ratios.values())
    ok = excl and ratios[16].mean >= 0.5 * ratios[4].mean
    txt = ", ".join(f"r({m})={r.mean:.3f} [{r.ci95[0]:.3f}, {r.ci95[1]:.3f}]" for m, r in ratios.items())
    return CriterionResult(6, "quasi-multiplicativity non-degeneracy", ok, txt,
                           data={m: r.to_dict() for m, r in ratios.items()})


# ------------------------------------------------------------- 7-9: slabs, p_c

SLAB_GEOMETRY = {"z": {"box_annulus": [2, 4]}, "x": [[2, 0, 1]], "y": [[4, 0, 1]]}


def criterion_7(hits: int = 1000, seed: int = SEED) -> CriterionResult:
    sl = LatticeSpec.slab(3, 1)
    s = verify_modification(sl, 1, SLAB_GEOMETRY["z"], SLAB_GEOMETRY["x"], SLAB_GEOMETRY["y"], 0.45,
                            budget=50_000_000, seed=seed, target_hits=hits)
    ok = s.n_hits >= hits and s.n_failures == 0 and s.max_edits <= 24
    return CriterionResult(7, "modification-map universality", ok,
                           f"{s.n_hits} configurations, {s.n_failures} failures, max edits {s.max_edits} "
                           f"(<= 24), cases {dict(sorted(s.case_counts.items()))}",
                           data=s.to_dict())


@functools.lru_cache(maxsize=None)
def pc_estimates(seed: int = SEED, n: int = 64, budget: int = 4000):
    """``(hypercubic(2), slab(3,1))`` crossing-point estimates, cached."""
    return (estimate_pc(LatticeSpec.hypercubic(2), n, 2e-3, budget, derive_seed(seed, "pc", "sq")),
            estimate_pc(LatticeSpec.slab(3, 1), n, 2e-3, budget, derive_seed(seed, "pc", "slab")))


def criterion_8(budget: int = 10_000, seed: int = SEED) -> CriterionResult:
    """Literal check plus a guard: ``P(m=4)`` must be resolvably positive.

    Without the guard two zero estimates would pass ``0 >= 0.5 * 0``.  A
    supercritical comparison at p = 0.5 is logged for context, not gated.
    """
    sl = LatticeSpec.slab(3, 1)
    p = pc_estimates(seed)[1].mean + 0.01

    def probs(pp, tag):
        out = {}
        for m in (4, 16):
            region = build_box_region(sl, 3 * m)
            out[m] = estimate_event_probability(region, pp, Circuit(m), budget, derive_seed(seed, tag, m))
        return out

    ests = probs(p, "c8")
    widths = {m: e.ci95[1] - e.ci95[0] for m, e in ests.items()}
    literal = ests[16].mean >= 0.5 * ests[4].mean and max(widths.values()) <= 0.02
    resolved = ests[4].ci95[0] > 0
    ctx = probs(0.5, "c8-context")
    txt = (f"p = {p:.4f}; P(m=4) = {ests[4].mean:.4f}, P(m=16) = {ests[16].mean:.4f}; "
           f"max CI width {max(widths.values()):.4f} (<= 0.02); literal inequality {literal}; "
           f"P(m=4) resolved above 0: {resolved}; context p=0.5: P(4) = {ctx[4].mean:.3f}, "
           f"P(16) = {ctx[16].mean:.3f}")
    return CriterionResult(8, "circuit probability stability", literal and resolved, txt,
                           data={"estimates": {m: e.to_dict() for m, e in ests.items()},
                                 "context_p0.5": {m: e.to_dict() for m, e in ctx.items()}})


def criterion_9(seed: int = SEED) -> CriterionResult:
    sq, sl = pc_estimates(seed)
    c_sq, c_sl = sq.extra["combined"], sl.extra["combined"]
    ok_sq = abs(sq.mean - 0.5) <= c_sq
    ok_sl = sl.mean <= sq.mean + c_sq + c_sl
    txt = (f"hypercubic(2) {sq.mean:.4f} +- {c_sq:.4f}; slab(3,1) {sl.mean:.4f} +- {c_sl:.4f}")
    return CriterionResult(9, "critical-point checks", ok_sq and ok_sl, txt,
                           data={"hypercubic": sq.to_dict(), "slab": sl.to_dict()})


# ------------------------------------------------------------ 10-11: matrix, determinism

def criterion_10(budget: int = 100_000, seed: int = 1) -> CriterionResult:
    M, rep = estimate_hopf_chain(LatticeSpec.hypercubic(2), None, p=0.5, budget=budget, seed=seed, top_k=8)
    positive = bool((M.entries > 0).all())
    ok = positive and bool(rep.osc_nonincreasing)
    osc = ", ".join(f"{o:.3f}+-{s:.3f}" for o, s in zip(rep.osc, rep.osc_stderr))
    txt = (f"{M.entries.size} entries, min {M.entries.min():.3e}; osc {osc}; "
           f"kappa^2 = {rep.kappa_sq:.3f}, xi = {rep.xi_hat:.3f}+-{rep.xi_stderr:.3f} (logged)")
    return CriterionResult(10, "transfer-matrix diagnostics", ok, txt,
                           data={"matrix": M.to_dict(), "hopf": rep.to_dict()})


DETERMINISM_RUNS = (
    ["estimate", "--n", "40", "--m", "8", "--event", "E2", "--p", "0.5", "--budget", "20000", "--seed", "7"],
    ["iic-first", "--n-list", "8,16,32", "--event", "star", "--p", "0.5", "--budget", "200000",
     "--target-accepted", "3000", "--seed", "11"],
)


def criterion_11(workdir: str | None = None) -> CriterionResult:
    """Base runs use one worker; each manifest is replayed with 1 and 4 workers."""
    from .cli import main, replay_manifest
    from .io import read_manifest, read_results

    def numeric(manifest_path):
        m = read_manifest(manifest_path)
        return [r.numeric() for f in m.outputs if f.endswith(".csv") for r in read_results(f)]

    tmp = tempfile.TemporaryDirectory() if workdir is None else None
    root = tmp.name if tmp else workdir
    try:
        n_rows = 0
        for t, argv in enumerate(DETERMINISM_RUNS):
            base = os.path.join(root, f"base{t}")
            code = main(argv + ["--workers", "1", "--out", base])
            man = [f for f in os.listdir(base) if f.endswith(".manifest.json")]
            if code != 0 or len(man) != 1:
                return CriterionResult(11, "determinism", False, f"{argv[0]} base run exited {code}")
            path = os.path.join(base, man[0])
            ref = numeric(path)
            for w in (1, 4):
                out = os.path.join(root, f"replay{t}_{w}")
                code = replay_manifest(path, workers=w, out=out)
                got = numeric(os.path.join(out, man[0]))
                if code != 0 or not ref or got != ref:
                    return CriterionResult(11, "determinism", False,
                                           f"{argv[0]} replay with {w} workers differs (exit {code})")
            n_rows += len(ref)
        return CriterionResult(11, "determinism", True,
                               f"{len(DETERMINISM_RUNS)} manifests, {n_rows} rows identical under 1 and 4 workers")
    finally:
        if tmp:
            tmp.cleanup()


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
            11: criterion_11}


def run_criterion(number: int) -> CriterionResult:
    """Run one criterion; unexpected exceptions count as failures."""
    t0 = time.perf_counter()
    try:
        res = CRITERIA[number]()
    except Exception as exc:  # noqa: BLE001 - reported as a failed criterion
        res = CriterionResult(number, CRITERIA[number].__name__, False, f"{type(exc).__name__}: {exc}")
    res.seconds = time.perf_counter() - t0
    return res


def run_suite(quick: bool = False, numbers=None, log=print) -> list:
    numbers = list(QUICK if quick else CRITERIA) if numbers is None else list(numbers)
    out = []
    for k in numbers:
        res = run_criterion(k)
        if log is not None:
            log(res.line())
        out.append(res)
    return out
