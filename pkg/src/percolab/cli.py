"""Command-line entry point: ``percolab <command> [flags]``.

Every run appends ResultRows to ``<out>/<command>.csv`` and writes
``<out>/<run_id>.manifest.json`` plus a JSON report.  Exit codes: 0 success,
1 usage or input error, 2 acceptance/invariant failure or I/O error,
3 conditioning starvation.  Flags override values from ``--config``;
``PERC_SEED`` supplies the default seed.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys

from . import __version__
from .decoupling import (DEFAULT_SCHEDULE, ScaleSearchError, choose_scales, estimate_hopf_chain,
                         estimate_transfer_matrix, strip_instance, verify_factorization_exact)
from .estimators import (ConditioningStarvation, Estimate, cluster_census, default_pc, estimate_conditional,
                         estimate_event_probability, estimate_pc, get_workers, iic_first_limit, iic_second_limit,
                         qm_ratio, set_workers)
from .events import E1, E2, Circuit, Cylinder, OneArm, Sure, UniqueCrossing, event_from_dict, origin_star, resolve_set
from .io import (ResultRow, ResultSchemaError, RunManifest, default_seed, load_config, make_run_id, read_manifest,
                 write_manifest, write_results)
from .lattice import (LatticeError, LatticeSpec, build_ball_region, build_box_region, build_rectangle_region,
                      induced_restriction)
from .oracle import exact_event_polynomial, exact_probability, verify_bk_chain
from .slabqm import ModificationError, verify_modification

log = logging.getLogger("percolab")

COMMANDS = ("estimate", "conditional", "qm", "iic-first", "iic-second", "scales", "matrix", "hopf",
            "slab-verify", "pc", "census", "oracle", "bk", "factorize", "suite")
# flags that describe where output goes or how fast it runs, not what is computed
_RUNTIME = ("command", "config", "workers", "out", "verbose")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ----------------------------------------------------------------- parsing

def _common(p):
    g = p.add_argument_group("common")
    g.add_argument("--graph", default="hypercubic", choices=["hypercubic", "slab"])
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--k", type=int, default=0)
    g.add_argument("--p", type=float, default=None)
    g.add_argument("--m", type=int, default=None)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--budget", type=int, default=None)
    g.add_argument("--seed", type=int, default=None, help="default: PERC_SEED or 0")
    g.add_argument("--out", default="results", help="output directory")
    g.add_argument("--config", default=None, help="flat key = value file; flags win")
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="percolab", description="Bernoulli bond percolation experiments")
    parser.add_argument("--version", action="version", version=f"percolab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    sp = {}

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _common(p)
        sp[name] = p
        return p

    p = add("estimate", "plain Monte Carlo probability of an event")
    p.add_argument("--event", default=None, help="preset (E1, E2, F, one-arm, star, edge, sure, circuit) or JSON")
    p.add_argument("--geometry", default=None, choices=["ball", "box", "annulus", "rectangle"])

    p = add("conditional", "rejection estimate of P[event | given]")
    p.add_argument("--event", default=None)
    p.add_argument("--given", default=None)
    p.add_argument("--geometry", default=None, choices=["ball", "box", "annulus", "rectangle"])
    p.add_argument("--min-accepted", type=int, default=100)
    p.add_argument("--target-accepted", type=int, default=None)

    p = add("qm", "quasi-multiplicativity ratio for probe sets")
    for f in ("--x", "--y", "--z"):
        p.add_argument(f, default=None, help="set specifier as JSON")

    for name, what in (("iic-first", "P[E | 0 <-> S(n)] at fixed p over n"),
                       ("iic-second", "P_p[E | 0 <-> S(proxy_n)] over decreasing p")):
        p = add(name, what)
        p.add_argument("--event", default="star")
        p.add_argument("--target-accepted", type=int, default=None)
        p.add_argument("--min-accepted", type=int, default=100)
    sp["iic-first"].add_argument("--n-list", default="16,32,64")
    sp["iic-second"].add_argument("--p-list", default="0.52,0.51,0.505")
    sp["iic-second"].add_argument("--proxy-n", type=int, default=None)

    p = add("scales", "smallest n with small P[E2 | E1]")
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--p-grid", default="0.5")
    p.add_argument("--max-n", type=int, default=None)

    for name, what in (("matrix", "transfer matrix between two scales"),
                       ("hopf", "transfer matrix with contraction and oscillation diagnostics")):
        p = add(name, what)
        p.add_argument("--schedule", default=",".join(map(str, DEFAULT_SCHEDULE)))
        p.add_argument("--i", type=int, default=0)
        p.add_argument("--j", type=int, default=3)
        p.add_argument("--top-k", type=int, default=8)

    p = add("slab-verify", "check the slab modification map on sampled configurations")
    for f in ("--x", "--y", "--z"):
        p.add_argument(f, default=None, help="set specifier as JSON")
    p.add_argument("--box", type=int, default=None)
    p.add_argument("--target-hits", type=int, default=None)
    p.add_argument("--dump-dir", default=None)

    p = add("pc", "crossing-probability estimate of the critical point")
    p.add_argument("--tolerance", type=float, default=2e-3)

    p = add("census", "exploratory cluster statistics")
    p.add_argument("--mode", default="crossing_count", choices=["crossing_count", "two_point"])
    p.add_argument("--params", default=None, help="comma-separated distances for two_point")

    p = add("oracle", "exact event polynomial by enumeration (small regions)")
    p.add_argument("--event", default=None)
    p.add_argument("--geometry", default=None, choices=["ball", "box", "annulus", "rectangle"])

    add("bk", "exact check of P[E2] <= P[E2|E1] <= sqrt(P[E2])")

    p = add("factorize", "exact one-scale factorization on the 3x5 strip")
    p.add_argument("--event", default="sure", choices=["sure", "edge"])

    p = add("suite", "run the acceptance criteria")
    p.add_argument("--quick", action="store_true", help="oracle-backed subset only")
    p.add_argument("--criteria", default=None, help="comma-separated criterion numbers")
    parser._subparsers_map = sp
    return parser


def _truthy(v):
    if isinstance(v, bool):
        return v
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def parse_args(argv):
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    cmd = next((a for a in argv if a in COMMANDS), None)
    if known.config and cmd:
        cfg = load_config(known.config)
        sub = parser._subparsers_map[cmd]
        dests = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(dests))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        for key, val in cfg.items():
            if isinstance(dests[key], argparse._StoreTrueAction):
                cfg[key] = _truthy(val)
        sub.set_defaults(**cfg)
    args = parser.parse_args(argv)
    return parser, args


def _need(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise UsageError("missing required flag(s): " + ", ".join("--" + m for m in missing))


def _ints(text):
    return [int(t) for t in str(text).split(",") if t.strip()]


def _floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _json_or_none(text):
    return None if text is None else json.loads(text)


# ----------------------------------------------------------------- helpers

def _spec(args) -> LatticeSpec:
    return LatticeSpec.parse(args.graph, args.d, args.k)


PRESETS = ("E1", "E2", "F", "one-arm", "star", "edge", "sure", "circuit")


def parse_event(text, spec: LatticeSpec, m, n):
    """Event from a preset name or a JSON object; returns ``(event, label)``."""
    o = spec.origin()
    if text in PRESETS:
        if text in ("E1", "E2", "F"):
            if m is None or n is None:
                raise UsageError(f"event {text} needs --m and --n")
            return {"E1": E1, "E2": E2, "F": UniqueCrossing}[text](o, m, n), f"{text}(0,{m},{n})"
        if text == "one-arm":
            if n is None:
                raise UsageError("event one-arm needs --n")
            return OneArm(o, n), f"one-arm(0,{n})"
        if text == "star":
            return origin_star(spec), "star(0)"
        if text == "edge":
            e1 = tuple([1] + [0] * (spec.d - 1))
            return Cylinder([(o, e1)]), "edge(0,e1)"
        if text == "sure":
            return Sure(), "sure"
        if m is None:
            raise UsageError("event circuit needs --m")
        return Circuit(m), f"circuit({m})"
    try:
        d = json.loads(text)
    except (TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"event must be one of {', '.join(PRESETS)} or a JSON object") from exc
    ev = event_from_dict(d)
    return ev, json.dumps(ev.to_dict(), sort_keys=True, separators=(",", ":"))


def build_region(spec, geometry, m, n):
    """``(region, label)`` for ball, box, annulus or rectangle geometries."""
    if n is None:
        raise UsageError("missing required flag: --n")
    o = spec.origin()
    if geometry == "box":
        return build_box_region(spec, n), f"box({n})"
    if geometry == "rectangle":
        return build_rectangle_region(spec, (0, 0), (n, n - 1)), f"rectangle({n})"
    region = build_ball_region(spec, o, n)
    if geometry == "annulus":
        if m is None:
            raise UsageError("annulus geometry needs --m")
        return induced_restriction(region, resolve_set(region, {"annulus": [m, n]})), f"annulus({m},{n})"
    return region, f"ball({n})"


class _Run:
    """Collects rows and reports for one invocation."""

    def __init__(self, args, spec, run_id):
        self.args, self.spec, self.run_id = args, spec, run_id
        self.rows, self.report, self.code = [], {}, 0
        self.pc_provenance = None

    def est_row(self, geometry, p, event, estimator, est, m=None, n=None):
        a = self.args
        m = a.m if m is None else m
        n = a.n if n is None else n
        self.rows.append(ResultRow.from_estimate(self.run_id, self.spec, geometry, float(p), m or 0, n or 0,
                                                 event, estimator, est))

    def value_row(self, geometry, p, event, estimator, value, stderr=0.0, n_samples=0, n_accepted=0,
                  m=None, n=None, wallclock=0.0):
        est = Estimate(float(value), float(stderr), int(n_samples), int(n_accepted), self.seed, wallclock)
        self.est_row(geometry, p, event, estimator, est, m, n)

    @property
    def seed(self):
        return self.args.seed


def _p(args, fallback=0.5):
    return fallback if args.p is None else args.p


# ----------------------------------------------------------------- commands

def cmd_estimate(run: _Run):
    a, spec = run.args, run.spec
    _need(a, "event")
    ev, label = parse_event(a.event, spec, a.m, a.n)
    n = a.n
    if a.event == "circuit" and n is None:
        n = 3 * a.m
    geometry = a.geometry or ("box" if a.event == "circuit" else "ball")
    region, glabel = build_region(spec, geometry, a.m, n)
    _need(a, "p")
    est = estimate_event_probability(region, a.p, ev, a.budget or 10_000, a.seed)
    run.est_row(glabel, a.p, label, "mc", est, n=n)
    run.report = {"estimate": est.to_dict(), "region": region.descriptor}


def cmd_conditional(run: _Run):
    a, spec = run.args, run.spec
    _need(a, "event", "given", "p")
    tgt, tl = parse_event(a.event, spec, a.m, a.n)
    cond, cl = parse_event(a.given, spec, a.m, a.n)
    region, glabel = build_region(spec, a.geometry or "ball", a.m, a.n)
    est = estimate_conditional(region, a.p, tgt, cond, a.budget or 100_000, a.min_accepted, a.seed,
                               a.target_accepted)
    run.est_row(glabel, a.p, f"{tl}|{cl}", "rejection", est)
    run.report = {"estimate": est.to_dict(), "region": region.descriptor}


def cmd_qm(run: _Run):
    a, spec = run.args, run.spec
    _need(a, "m")
    m = a.m
    x = _json_or_none(a.x) or {"shell": max(1, m // 2)}
    y = _json_or_none(a.y) or {"shell": 6 * m}
    z = _json_or_none(a.z) or {"ball": 6 * m}
    p = _p(a)
    est = qm_ratio(spec, p, m, z, x, y, a.budget or 10_000, a.seed, radius=a.n)
    label = json.dumps({"x": x, "y": y, "z": z}, sort_keys=True, separators=(",", ":"))
    run.est_row(f"ball({a.n or 6 * m})", p, label, "qm-ratio", est, n=a.n or 6 * m)
    run.report = {"estimate": est.to_dict()}


def _series_rows(run, series, geometry, event, estimator, key):
    starved = []
    for v, e in zip(series.values, series.estimates):
        if e.extra.get("starved") or not math.isfinite(e.mean):
            starved.append(v)
            continue
        if key == "n":
            run.est_row(geometry(v), run.args.p if run.args.p is not None else 0.5, event, estimator, e, n=v)
        else:
            run.est_row(geometry(v), v, event, estimator, e)
    run.report = {"series": series.to_dict(), "starved": starved}
    if starved:
        run.code = 3


def cmd_iic_first(run: _Run):
    a, spec = run.args, run.spec
    ev, label = parse_event(a.event, spec, a.m, a.n)
    series = iic_first_limit(spec, None, ev, _p(a), _ints(a.n_list), a.budget or 100_000, a.seed,
                             a.target_accepted, a.min_accepted)
    _series_rows(run, series, lambda n: f"ball({n})", label, "iic-first", "n")


def cmd_iic_second(run: _Run):
    a, spec = run.args, run.spec
    proxy = a.proxy_n if a.proxy_n is not None else a.n
    if proxy is None:
        raise UsageError("missing required flag: --proxy-n (or --n)")
    a.n = proxy
    ev, label = parse_event(a.event, spec, a.m, proxy)
    series = iic_second_limit(spec, None, ev, _floats(a.p_list), proxy, a.budget or 100_000, a.seed,
                              a.target_accepted, a.min_accepted)
    _series_rows(run, series, lambda p: f"ball({proxy})", label, "iic-second", "p")


def cmd_scales(run: _Run):
    a, spec = run.args, run.spec
    _need(a, "m")
    grid = _floats(a.p_grid)
    sched = choose_scales(spec, None, a.m, a.eps, grid, a.budget or 100_000, a.seed, a.max_n)
    n = sched.scales[-1]
    run.value_row(f"ball({n})", max(grid), f"E2|E1(0,{a.m},{n})", "scale-eps-upper", sched.eps_hat[0],
                  n=n)
    run.report = {"schedule": sched.to_dict()}


def cmd_matrix(run: _Run):
    a, spec = run.args, run.spec
    sched = _ints(a.schedule)
    M = estimate_transfer_matrix(spec, None, sched, a.i, a.j, _p(a), a.budget or 100_000, a.seed, a.top_k)
    _matrix_rows(run, M, sched)
    run.report = {"matrix": M.to_dict()}


def _matrix_rows(run, M, sched):
    a = run.args
    g = f"ball({sched[a.j + 1] + 1})"
    for r, rl in enumerate(M.rows):
        for c, cl in enumerate(M.cols):
            run.value_row(g, M.p, f"{rl} -> {cl}", "transfer-entry", M.entries[r, c], M.stderr[r, c],
                          M.budget, int(M.hits[r, c]), m=sched[a.i], n=sched[a.j])


def cmd_hopf(run: _Run):
    a, spec = run.args, run.spec
    sched = _ints(a.schedule)
    M, rep = estimate_hopf_chain(spec, None, sched, a.i, a.j, _p(a), a.budget or 100_000, a.seed, a.top_k)
    _matrix_rows(run, M, sched)
    g = f"ball({sched[a.j + 1] + 1})"
    kw = dict(m=sched[a.i], n=sched[a.j], n_samples=M.budget)
    run.value_row(g, M.p, "matrix", "kappa-squared", rep.kappa_sq, **kw)
    for t, (o, s) in enumerate(zip(rep.osc, rep.osc_stderr)):
        run.value_row(g, M.p, f"step{t}", "oscillation", o, s, **kw)
    if rep.xi_hat is not None and math.isfinite(rep.xi_hat):
        run.value_row(g, M.p, "origin-edge", "xi", rep.xi_hat, rep.xi_stderr, **kw)
    run.report = {"matrix": M.to_dict(), "hopf": rep.to_dict()}


def cmd_slab_verify(run: _Run):
    a, spec = run.args, run.spec
    m = a.m or 1
    p = _p(a, 0.45)
    s = verify_modification(spec, m, _json_or_none(a.z) or "all", _json_or_none(a.x), _json_or_none(a.y), p,
                            a.budget or 10_000, a.seed, a.box, a.target_hits, a.dump_dir)
    rate = (s.n_hits - s.n_failures) / s.n_hits
    run.value_row(f"box({s.meta['box']})", p, "modification", "pass-rate", rate, 0.0, s.n_samples, s.n_hits,
                  m=m, n=s.meta["box"])
    run.report = {"summary": s.to_dict(), "failures": [r.to_row() for r in s.reports if not r.passed]}
    if not s.all_passed:
        run.code = 2


def cmd_pc(run: _Run):
    a, spec = run.args, run.spec
    n = a.n or 32
    est = estimate_pc(spec, n, a.tolerance, a.budget or 4000, a.seed)
    run.est_row(f"rectangle({n})", est.mean, "left-right crossing", "pc-bisection", est, n=n)
    run.report = {"estimate": est.to_dict()}


def cmd_census(run: _Run):
    a, spec = run.args, run.spec
    _need(a, "m")
    p = a.p
    if p is None:
        p, run.pc_provenance = default_pc(spec, a.seed)
    params = _ints(a.params) if a.params else None
    rep = cluster_census(spec, a.m, p, a.mode, params, a.budget or 1000, a.seed)
    for v, e in zip(rep.values, rep.estimates):
        label = f"crossing_count={v}" if a.mode == "crossing_count" else f"0<->({v},0..)"
        run.est_row(f"ball({2 * a.m})", p, label, a.mode, e)
    run.report = {"census": rep.to_dict()}


def cmd_oracle(run: _Run):
    a, spec = run.args, run.spec
    _need(a, "event")
    ev, label = parse_event(a.event, spec, a.m, a.n)
    region, glabel = build_region(spec, a.geometry or "ball", a.m, a.n)
    poly = exact_event_polynomial(region, ev)
    run.report = {"polynomial": poly.to_dict(), "power_coefficients": [str(c) for c in poly.power_coefficients()]}
    if a.p is not None:
        val = exact_probability(poly, a.p)
        run.value_row(glabel, a.p, label, "exact", val, n_samples=1 << region.ne)
        run.report["probability"] = val


def cmd_bk(run: _Run):
    a, spec = run.args, run.spec
    m, n = a.m or 1, a.n or 2
    region, glabel = build_region(spec, "ball", m, n)
    grid = [a.p] if a.p is not None else [i / 10 for i in range(1, 10)]
    pts = verify_bk_chain(region, spec.origin(), m, n, grid)
    for pt in pts:
        if pt.p_e2_given_e1 is not None:
            run.value_row(glabel, pt.p, f"E2|E1(0,{m},{n})", "exact-conditional", pt.p_e2_given_e1, m=m, n=n)
        run.value_row(glabel, pt.p, f"E2(0,{m},{n})", "exact", pt.p_e2, m=m, n=n)
    run.report = {"points": [pt.__dict__ for pt in pts]}
    if any(pt.holds is False for pt in pts):
        run.code = 2


def cmd_factorize(run: _Run):
    a = run.args
    region, c = strip_instance()
    ev = Sure() if a.event == "sure" else Cylinder([(c, (c[0] + 1, c[1]))])
    grid = [a.p] if a.p is not None else [0.2, 0.5, 0.8]
    rep = verify_factorization_exact(region, c, c, 1, 2, 3, ev, grid)
    for p in grid:
        run.value_row("strip(3x5)", p, a.event, "factorization-deviation", rep.deviations[p], m=1, n=3)
    run.report = {"deviations": rep.deviations, "lhs": rep.lhs, "rhs": rep.rhs, "n_records": rep.n_records}
    if rep.max_abs_deviation > 1e-9:
        run.code = 2


def cmd_suite(run: _Run):
    from .acceptance import run_suite

    nums = _ints(run.args.criteria) if run.args.criteria else None
    results = run_suite(quick=run.args.quick, numbers=nums, log=lambda s: print(s, flush=True))
    run.report = {"criteria": [{"number": r.number, "title": r.title, "passed": r.passed, "detail": r.detail,
                                "seconds": r.seconds} for r in results]}
    if not all(r.passed for r in results):
        run.code = 2


HANDLERS = {"estimate": cmd_estimate, "conditional": cmd_conditional, "qm": cmd_qm,
            "iic-first": cmd_iic_first, "iic-second": cmd_iic_second, "scales": cmd_scales,
            "matrix": cmd_matrix, "hopf": cmd_hopf, "slab-verify": cmd_slab_verify, "pc": cmd_pc,
            "census": cmd_census, "oracle": cmd_oracle, "bk": cmd_bk, "factorize": cmd_factorize,
            "suite": cmd_suite}


# ----------------------------------------------------------------- driver

def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _emit_error(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message), "exit_code": code}) + "\n")


def _parameters(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _RUNTIME}


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser, args = parse_args(argv)
    except UsageError as exc:
        _emit_error("usage", exc, 1)
        return 1
    except (OSError, ValueError) as exc:
        _emit_error("config", exc, 1)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is None:
        args.seed = default_seed(0)
    params = _parameters(args)
    run_id = make_run_id(args.command, params, args.seed)
    started = _now()
    prev_workers = get_workers()
    manifest = None
    try:
        spec = _spec(args)
        set_workers(args.workers)
        run = _Run(args, spec, run_id)
        manifest = RunManifest(run_id, ["percolab"] + argv, params, spec.to_dict(), args.seed,
                               {"budget": args.budget}, started, workers=args.workers, tool_version=__version__)
        code = 0
        try:
            HANDLERS[args.command](run)
            code = run.code
        except ConditioningStarvation as exc:
            _emit_error("conditioning_starvation", exc, 3)
            est = exc.estimate
            run.report = {"partial": est.to_dict() if est is not None else None}
            code = 3
        except (ScaleSearchError, ModificationError, AssertionError) as exc:
            _emit_error(type(exc).__name__, exc, 2)
            run.report = {"failure": str(exc), "best": getattr(exc, "args", [None, None])[-1]}
            code = 2
        manifest.outputs = _write_outputs(args.out, args.command, run)
        manifest.pc_provenance = run.pc_provenance
        manifest.finished, manifest.exit_code = _now(), code
        write_manifest(manifest, os.path.join(args.out, f"{run_id}.manifest.json"))
        print(json.dumps({"run_id": run_id, "exit_code": code, "rows": len(run.rows),
                          "outputs": manifest.outputs}))
        if code == 2:
            _emit_error("invariant_failure", f"{args.command} reported a failed check", 2)
        return code
    except UsageError as exc:
        parser._subparsers_map[args.command].print_usage(sys.stderr)
        _emit_error("usage", exc, 1)
        return 1
    except (LatticeError, ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, ResultSchemaError):
            _emit_error("result_schema", exc, 2)
            return 2
        _emit_error("input", exc, 1)
        return 1
    except OSError as exc:
        _emit_error("io", f"{exc} (outputs may be partially written)", 2)
        return 2
    finally:
        set_workers(prev_workers)


def _write_outputs(out, command, run: _Run) -> list:
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.abspath(os.path.join(out, f"{command}.csv"))
    write_results(run.rows, csv_path)
    rep_path = os.path.abspath(os.path.join(out, f"{run.run_id}.report.json"))
    with open(rep_path, "w") as fh:
        json.dump(_jsonable(run.report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [csv_path, rep_path]


def replay_manifest(path: str, workers: int | None = None, out: str | None = None) -> int:
    """Re-run the command recorded in a manifest from its stored parameters."""
    m = read_manifest(path)
    cmd = m.parameters.get("command") or m.command[1]
    argv = [cmd]
    for key, val in m.parameters.items():
        if val is None or val is False:
            continue
        flag = "--" + key.replace("_", "-")
        argv += [flag] if val is True else [flag, str(val)]
    argv += ["--workers", str(m.workers if workers is None else workers)]
    argv += ["--out", out or os.path.dirname(os.path.abspath(path))]
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
