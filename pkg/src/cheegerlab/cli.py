"""Command-line front end: property suites, Ricci scans, curvature samples and catalogs.

Exit codes: 0 pass, 1 property failure, 2 usage error, 3 hypothesis failure.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import actions as A
from . import bundles as B
from . import cheeger as C
from . import maps as M
from . import riemann as R
from .algebra import I as QI
from .algebra import qmul

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_HYPOTHESIS = 0, 1, 2, 3

SUITES = ("cocycles", "equivariance", "hat-composition", "oneill", "cheeger-identities", "fiber-shrink", "involutions")

DEFAULT_SAMPLES = {
    "cocycles": 1000,
    "equivariance": 1000,
    "hat-composition": 1000,
    "oneill": 20,
    "cheeger-identities": 100,
    "fiber-shrink": 1000,
    "involutions": 1000,
}

DEFAULT_TOL = {
    "algebraic": 1e-9,
    "control": 0.1,
    "oneill": 5e-2,
    "identities": 1e-12,
    "monotonicity": 1e-3,
    "slope": 0.15,
    "vertical-limit": 1e-2,
    "fiber-shrink": 1e-9,
    "positivity": 0.0,
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = "verify"
    suite: str | None = None
    space: str | None = None
    action: str | None = None
    metric: str = "round"
    samples: int | None = None
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    t_grid: list | None = None
    points: int = 50
    out: str | None = None
    inject_broken: bool = False

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOL[name]))

    def n(self, default: int) -> int:
        return default if self.samples is None else self.samples

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        clean = {}
        for k, v in d.items():
            key = k.replace("-", "_")
            if key not in names:
                raise UsageError(f"unknown config key {k!r}")
            clean[key] = v
        return cls(**clean)


# ---------------------------------------------------------------- report helpers


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def check(cid: str, residual: float, tol: float, expect: str = "<=", **extra) -> dict:
    """One report line; ``expect`` is ``<=`` for identities and ``>`` for negative controls."""
    r = float(residual)
    ok = (r <= tol) if expect == "<=" else (r > tol)
    out = {"id": cid, "residual": _num(r), "tolerance": tol, "expect": expect, "passed": bool(ok and math.isfinite(r))}
    out.update({k: _num(v) if isinstance(v, float) else v for k, v in extra.items()})
    return out


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def parse_t_grid(spec) -> list:
    """A comma list of reals, or ``B^lo..B^hi`` for the powers ``B^k``."""
    if spec is None:
        return None
    if isinstance(spec, (list, tuple)):
        return [float(t) for t in spec]
    m = re.match(r"^\s*([0-9.]+)\^(-?\d+)\.\.\1\^(-?\d+)\s*$", spec)
    if m:
        base, lo, hi = float(m.group(1)), int(m.group(2)), int(m.group(3))
        return [base**k for k in range(lo, hi + 1)]
    try:
        return [float(t) for t in spec.split(",") if t.strip()]
    except ValueError as e:
        raise UsageError(f"bad t-grid {spec!r}") from e


def _const(c):
    return lambda x: c * np.ones(np.atleast_2d(x).shape[0])


_ORACLE_CACHE: dict = {}


def run_inflation_oracle(points: int, seed: int) -> dict:
    key = (points, seed)
    if key not in _ORACLE_CACHE:
        o = C.inflation_oracle(n_points=points, seed=seed)
        if o["chosen"] is None:
            raise UsageError("inflation oracle found no admissible frequency")
        _ORACLE_CACHE[key] = o
    return _ORACLE_CACHE[key]


def resolve_metric(metric_id: str, spec: A.ActionSpec, cfg: RunConfig | None = None) -> R.AmbientMetric:
    """Metric ids: round, biinvariant, inflated, inflated(a,omega), fiber-scaled(s), oracle."""
    sid = spec.space.id
    if metric_id == "round":
        return R.round_metric(sid)
    if metric_id == "biinvariant":
        return R.biinvariant_metric(sid)
    if metric_id == "inflated":
        return C.inflated_hopf_metric()
    if metric_id == "oracle":
        o = run_inflation_oracle(cfg.points if cfg else 50, cfg.seed if cfg else 0)
        return C.inflated_hopf_metric(o["chosen"]["a"], o["chosen"]["omega"])
    m = re.match(r"^inflated\(([^,]+),([^)]+)\)$", metric_id)
    if m:
        return C.inflated_hopf_metric(float(m.group(1)), float(m.group(2)))
    m = re.match(r"^fiber-scaled\(([^)]+)\)$", metric_id)
    if m:
        return R.fiber_scaled_metric(spec, _const(float(m.group(1))), metric_id)
    raise UsageError(f"unknown metric {metric_id!r}")


# ---------------------------------------------------------------- suites

ATLAS_MAPS = (
    ["hopf", "f8", "b", "b-gm", "f10-I", "f10-II", "eta", "eta-L", "eta-R", "I5"]
    + [f"tau({n})" for n in range(2, 7)]
    + [f"j-tau({n})" for n in range(2, 7)]
    + [f"tau-c({m})" for m in (1, 2, 3)]
    + [f"tau-h({m})" for m in (1, 2)]
    + [f"j-tau-c({m})" for m in (1, 2, 3)]
    + [f"s({k})" for k in (2, 3, 4)]
    + [f"t({m},{n})" for m in range(-3, 4) for n in range(-3, 4)]
)

MILNOR_PAIRS = [(k, r) for k in (-2, -1, 1, 2) for r in (-1, 1, 2)]


def bundle_ids() -> list:
    return [b for b in B.catalog() if b != "milnor(m,n)"]


def _broken_hopf(x):
    y = M.hopf(x)
    return np.concatenate([y[:1], qmul(QI, y[1:])])


def _right_i_cocycle():
    return B.clutching_cocycle("s4-conj", B.Ref.make("right-i"))


def suite_cocycles(cfg: RunConfig) -> list:
    n, tol, ctl = cfg.n(DEFAULT_SAMPLES["cocycles"]), cfg.tol("algebraic"), cfg.tol("control")
    out = []
    for bid in bundle_ids():
        rep = B.validate_cocycle(B.get_bundle(bid).cocycle, n, cfg.seed)
        out.append(check(f"cocycle:{bid}", rep.cocycle_residual, tol))
        out.append(check(f"cocycle-equivariance:{bid}", rep.equivariance_residual, tol))
    for k, r in MILNOR_PAIRS:
        res = B.milnor_glue_residual(k, r, k, r - k, min(n, 200), cfg.seed)
        out.append(check(f"milnor-glue:milnor({k},{r - k})", res, tol))
    rep = B.validate_cocycle(_right_i_cocycle(), n, cfg.seed)
    out.append(check("control:cocycle-equivariance:right-i", rep.equivariance_residual, ctl, ">"))
    c = B.get_bundle("hopf").cocycle
    x = c.sample_overlap_rows(n, np.random.default_rng(cfg.seed))
    g = c.transition_rows(c.to_sphere_rows(x))
    e = np.broadcast_to(B.identity("S3").matrix, g.shape)
    wrong = {(0, 0): e, (1, 1): e, (0, 1): g, (1, 0): g}
    out.append(check("control:cocycle:uninverted-transition", B.triple_overlap_residual("S3", wrong), ctl, ">"))
    if cfg.inject_broken:
        rep = B.validate_cocycle(_right_i_cocycle(), n, cfg.seed)
        out.append(check("cocycle-equivariance:injected-right-i", rep.equivariance_residual, tol))
    return out


def suite_equivariance(cfg: RunConfig) -> list:
    n, tol = cfg.n(DEFAULT_SAMPLES["equivariance"]), cfg.tol("algebraic")
    out = [check(f"map-equivariance:{mid}", M.map_equivariance(M.get_map(mid), n, cfg.seed), tol) for mid in ATLAS_MAPS]
    bad = A.check_equivariance(_broken_hopf, A.get_action("hopf-star-s7"), A.get_action("s4-conj"), n, cfg.seed)
    out.append(check("control:map-equivariance:twisted-hopf", bad, cfg.tol("control"), ">"))
    if cfg.inject_broken:
        out.append(check("map-equivariance:injected-twisted-hopf", bad, tol))
    return out


def suite_hat_composition(cfg: RunConfig) -> list:
    n, tol = cfg.n(DEFAULT_SAMPLES["hat-composition"]), cfg.tol("algebraic")
    out = [check(f"hat-composition:{bid}", B.cocycle_hat_composition(B.get_bundle(bid).cocycle, n, cfg.seed), tol)
           for bid in bundle_ids()]
    spec = A.get_action("s6-gm")
    b = lambda x: B.s3(M.b_map(x))
    out.append(check("hat-composition:b,b^2", B.hat_composition_check(b, B.pointwise_power(b, 2), spec, n, cfg.seed), tol))
    bad = B.cocycle_hat_composition(_right_i_cocycle(), n, cfg.seed)
    out.append(check("control:hat-composition:right-i", bad, cfg.tol("control"), ">"))
    if cfg.inject_broken:
        out.append(check("hat-composition:injected-right-i", bad, tol))
    return out


HOPF_ID = "hopf-principal-s7"


def suite_oneill(cfg: RunConfig) -> list:
    n, tol = cfg.n(DEFAULT_SAMPLES["oneill"]), cfg.tol("oneill")
    sub = R.hopf_submersion()
    q = R.quotient_metric(sub)
    rng = np.random.default_rng(cfg.seed)
    spec = A.get_action(HOPF_ID)
    base, ident = 0.0, 0.0
    for _ in range(n):
        x = spec.space.sampler(rng)
        a, b = R.random_horizontal_pair(sub, x, rng)
        r = R.oneill_check(sub, x, a, b, base_metric=q)
        base = max(base, abs(r["lhs"] - 4.0))
        ident = max(ident, r["residual"])
    out = [check("oneill:hopf-base-curvature", base, tol), check("oneill:hopf-identity", ident, tol)]
    sub = R.product_submersion()
    worst = 0.0
    for _ in range(min(n, 5)):
        x = sub.total.space.sampler(rng)
        a, b = R.random_horizontal_pair(sub, x, rng)
        worst = max(worst, R.oneill_check(sub, x, a, b)["residual"])
    out.append(check("oneill:product-identity", worst, tol))
    return out


def _identity_actions():
    """Three cataloged actions with the metrics the identity checks use."""
    hopf = A.get_action(HOPF_ID)
    return [
        (hopf, R.fiber_scaled_metric(hopf, lambda x: 1 + 0.5 * np.atleast_2d(x)[:, 0] ** 2)),
        (A.get_action("s4-conj"), R.round_metric("S4")),
        (A.get_action("gm-s7"), R.round_metric("S7")),
    ]


def suite_cheeger_identities(cfg: RunConfig) -> list:
    n = cfg.n(DEFAULT_SAMPLES["cheeger-identities"])
    rng = np.random.default_rng(cfg.seed)
    out = []
    # tensor identities at (point, t) cells spread over three actions
    worst = {}
    acts = _identity_actions()
    for i in range(n):
        spec, metric = acts[i % len(acts)]
        st = C.orbit_tensor(metric, spec, spec.space.sampler(rng))
        res = C.tensor_identity_residuals(st, float(rng.uniform(0, 10)), rng)
        for k, v in res.items():
            worst[k] = max(worst.get(k, 0.0), v)
    out += [check(f"identity:{k}", v, cfg.tol("identities")) for k, v in sorted(worst.items())]
    # monotonicity on the Hopf action of round S^7
    hopf, rnd = A.get_action(HOPF_ID), R.round_metric("S7")
    per_point = 4
    pts = [hopf.space.sampler(rng) for _ in range(max(1, -(-n // per_point)))]
    base = [R.curvature_tensor(rnd.field(p)) for p in pts]
    planes = [[R.random_tangent_pair(hopf.space, p, rng) for _ in range(per_point)] for p in pts]
    for t in (0.1, 1.0, 10.0):
        dm = C.deformed_metric(rnd, hopf, t)
        gap = -np.inf
        count = 0
        for p, t0, pl in zip(pts, base, planes):
            tt = R.curvature_tensor(dm.field(p))
            for a, b in pl:
                if count >= n:
                    break
                gap = max(gap, C.kappa_0(rnd, p, a, b, t0) - C.kappa_t(dm, p, a, b, tt))
                count += 1
        out.append(check(f"monotonicity:t={t:g}", max(gap, 0.0), cfg.tol("monotonicity"), planes=count, worst_gap=gap))
    st = C.orbit_tensor(rnd, hopf, hopf.space.sampler(rng))
    e = np.eye(3)
    worst = 0.0
    for t in (0.1, 1.0, 10.0):
        dm = C.deformed_metric(rnd, hopf, t)
        for i, j in ((0, 1), (0, 2), (1, 2)):
            uu, vv = st.field(e[i]), st.field(e[j])
            lhs = C.kappa_t(dm, st.point, uu, vv)
            rhs = C.kappa_0(rnd, st.point, uu, vv) + C.bracket_lower_bound(st, t, e[i], e[j])
            worst = max(worst, rhs - lhs)
    out.append(check("monotonicity:bracket-bound", max(worst, 0.0), cfg.tol("monotonicity"), worst_gap=worst))
    # large-t limits: slopes on the inflated metric, vertical limit on the round metric
    ts = [1e2, 1e3, 1e4]
    m = C.inflated_hopf_metric()
    st = C.orbit_tensor(m, hopf, hopf.space.sampler(rng))
    u = rng.standard_normal(3)
    u /= np.linalg.norm(u)
    lt = C.limit_terms(m, hopf, st.point, st.horizontal[:, 0], u, ts)
    for key in ("slope_a", "slope_b", "slope_c"):
        s = lt[key]
        out.append(check(f"limit:{key}", abs(s + 1.0) if math.isfinite(s) else math.inf, cfg.tol("slope"), slope=s))
    st = C.orbit_tensor(rnd, hopf, hopf.space.sampler(rng))
    lim = C.orbit_ricci_limit(st, st.vectors[0])
    gap = max(abs(C.vertical_ricci(rnd, hopf, st.point, st.vectors[0], t) - lim) for t in ts)
    out.append(check("limit:vertical", gap, cfg.tol("vertical-limit"), orbit_limit=lim))
    return out


def suite_fiber_shrink(cfg: RunConfig) -> list:
    n, tol = cfg.n(DEFAULT_SAMPLES["fiber-shrink"]), cfg.tol("fiber-shrink")
    hopf, rnd = A.get_action(HOPF_ID), R.round_metric("S7")
    r = C.fiber_shrink_check(rnd, hopf, 0.1, n, cfg.seed)
    return [
        check("fiber-shrink:t-required", abs(r["t_required"] - 9.0), tol, t=r["t_required"]),
        check("fiber-shrink:max-vertical-norm", max(r["max_vertical_norm"] - 0.1, 0.0), tol,
              value=r["max_vertical_norm"]),
        check("fiber-shrink:bound-ratio", max(r["max_bound_ratio"] - 1.0, 0.0), tol, value=r["max_bound_ratio"]),
    ]


def suite_involutions(cfg: RunConfig) -> list:
    n, tol = cfg.n(DEFAULT_SAMPLES["involutions"]), cfg.tol("algebraic")
    out = []
    for k in (0, 1, 2):
        rep = B.involution_report(k, n, cfg.seed)
        delta = B.displacement_oracle(k)
        out.append(check(f"involution:theta{k}", rep["involution_residual"], tol))
        out.append(check(f"fixed-point-free:theta{k}", rep["min_displacement"], delta, ">", delta=delta))
    return out


SUITE_FUNCS = {
    "cocycles": suite_cocycles,
    "equivariance": suite_equivariance,
    "hat-composition": suite_hat_composition,
    "oneill": suite_oneill,
    "cheeger-identities": suite_cheeger_identities,
    "fiber-shrink": suite_fiber_shrink,
    "involutions": suite_involutions,
}


def run_suite(cfg: RunConfig) -> dict:
    if cfg.suite not in SUITE_FUNCS:
        raise UsageError(f"unknown suite {cfg.suite!r}; choose from {', '.join(SUITES)}")
    if cfg.samples is not None and cfg.samples <= 0:
        raise UsageError("samples must be positive")
    checks = sorted(SUITE_FUNCS[cfg.suite](cfg), key=lambda c: c["id"])
    failures = [c["id"] for c in checks if not c["passed"]]
    return {"suite": cfg.suite, "config": cfg.to_dict(), "checks": checks, "passed": not failures, "failures": failures}


# ---------------------------------------------------------------- subcommands


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def cmd_verify(cfg: RunConfig) -> int:
    rep = run_suite(cfg)
    text = dumps(rep)
    if cfg.out:
        _write(cfg.out, text)
    sys.stdout.write(text)
    for cid in rep["failures"]:
        sys.stderr.write(f"FAILED {cid}\n")
    return EXIT_PASS if rep["passed"] else EXIT_FAIL


def _scan_action(cfg: RunConfig) -> A.ActionSpec:
    spec = A.get_action(cfg.action or HOPF_ID)
    if cfg.space is not None and cfg.space != spec.space.id:
        raise UsageError(f"action {spec.id!r} acts on {spec.space.id}, not {cfg.space}")
    return spec


def cmd_scan(cfg: RunConfig) -> int:
    spec = _scan_action(cfg)
    if cfg.points <= 0:
        raise UsageError("points must be positive")
    metric = resolve_metric(cfg.metric, spec, cfg)
    grid = cfg.t_grid or [2.0**k for k in range(-4, 13)]
    res = C.ricci_positivity_scan(metric, spec, grid, cfg.points, cfg.seed, tol=cfg.tol("positivity"))
    if cfg.metric == "oracle":
        res.certificate["inflation_oracle"] = run_inflation_oracle(cfg.points, cfg.seed)
    cert = res.certificate_json() + "\n"
    if cfg.out:
        _write(cfg.out, res.to_csv())
        _write(cfg.out + ".json", cert)
    sys.stdout.write(cert)
    status = res.certificate["status"]
    if status == "hypothesis-failed":
        sys.stderr.write(f"hypothesis failure: {json.dumps(res.certificate['hypothesis_checks'], sort_keys=True)}\n")
        return EXIT_HYPOTHESIS
    return EXIT_PASS if status == "certified" else EXIT_FAIL


def cmd_curvature(cfg: RunConfig) -> int:
    """FD sectional curvatures at random planes; with ``--action`` and ``--t-grid`` of ``g_t``."""
    if cfg.action:
        spec = _scan_action(cfg)
        space = spec.space
    else:
        space = A.get_space(cfg.space or "S7")
        spec = None
    n = cfg.n(cfg.points)
    if n <= 0:
        raise UsageError("samples must be positive")
    if spec is not None:
        metric = resolve_metric(cfg.metric, spec, cfg)
    elif cfg.metric == "round":
        metric = R.round_metric(space.id)
    elif cfg.metric == "biinvariant":
        metric = R.biinvariant_metric(space.id)
    else:
        raise UsageError(f"metric {cfg.metric!r} needs --action")
    ts = cfg.t_grid if (spec is not None and cfg.t_grid) else [None]
    rng = np.random.default_rng(cfg.seed)
    pts = [space.sampler(rng) for _ in range(n)]
    planes = [R.random_tangent_pair(space, p, rng) for p in pts]
    lines = [",".join((["t"] if spec is not None else []) + R.CSV_HEADER)]
    for t in ts:
        m = metric if t is None else C.deformed_metric(metric, spec, t)
        for i, (p, (a, b)) in enumerate(zip(pts, planes)):
            row = replace(R.sectional_ambient(m, p, a, b), point_id=i).row()
            if spec is not None:
                row = [format(t if t is not None else 0.0, ".17g")] + row
            lines.append(",".join(map(str, row)))
    text = "\n".join(lines) + "\n"
    if cfg.out:
        _write(cfg.out, text)
    sys.stdout.write(text)
    return EXIT_PASS


SPACE_FAMILIES = ["S(n)", "O(n)", "U(n)", "Sp(n)", "Sp2", "T2", "S2xS1", "D4xS3"]


def catalog_listing() -> dict:
    acts = []
    for aid in A.catalog():
        if aid in A.PARAMETRIC_FAMILIES:
            acts.append({"id": aid, "family": True})
            continue
        s = A.get_action(aid)
        acts.append({"id": aid, "group": s.group, "space": s.space.id, "anchor": s.anchor})
    maps = []
    for mid in M.catalog():
        if mid in M.MAP_FAMILIES:
            maps.append({"id": mid, "family": True})
            continue
        d = M.get_map(mid).descriptor()
        d["anchor"] = M.get_map(mid).anchor
        maps.append(d)
    bundles = []
    for bid in B.catalog():
        if bid == "milnor(m,n)":
            bundles.append({"id": bid, "family": True, "anchor": "glue (x, q) -> (x, x^m q x^n) on S^3 x S^3"})
            continue
        c = B.get_bundle(bid).cocycle
        bundles.append({"id": bid, "action": c.action.id, "group": c.group, "transition": c.transition.id})
    return {"spaces": SPACE_FAMILIES, "actions": acts, "maps": maps, "bundles": bundles}


def cmd_catalog(cfg: RunConfig, self_test: bool = False) -> int:
    listing = catalog_listing()
    code = EXIT_PASS
    if self_test:
        reports = {}
        for suite in ("cocycles", "equivariance", "hat-composition"):
            sub = RunConfig(suite=suite, samples=cfg.samples, seed=cfg.seed, tolerances=cfg.tolerances)
            rep = run_suite(sub)
            reports[suite] = {"passed": rep["passed"], "failures": rep["failures"], "checks": len(rep["checks"])}
            if not rep["passed"]:
                code = EXIT_FAIL
        listing["self_test"] = reports
    text = dumps(listing)
    if cfg.out:
        _write(cfg.out, text)
    sys.stdout.write(text)
    return code


# ---------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cheegerlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("verify", "scan", "curvature", "catalog"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file; flags override its keys")
        s.add_argument("--suite")
        s.add_argument("--space")
        s.add_argument("--action")
        s.add_argument("--metric")
        s.add_argument("--samples", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a named tolerance")
        s.add_argument("--t-grid", help="comma list, or B^lo..B^hi for powers of B")
        s.add_argument("--points", type=int)
        s.add_argument("--out")
        if name == "verify":
            s.add_argument("--inject-broken", action="store_true", help="add a deliberately broken item")
        if name == "catalog":
            s.add_argument("--self-test", action="store_true", help="run the algebraic suites on every entry")
    return p


def build_config(args) -> RunConfig:
    base = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config: {e}") from e
        if not isinstance(base, dict):
            raise UsageError("config must be a JSON object")
    cfg = RunConfig.from_dict(base)
    cfg.command = args.command
    for key in ("suite", "space", "action", "metric", "samples", "seed", "points", "out"):
        v = getattr(args, key)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "inject_broken", False):
        cfg.inject_broken = True
    tols = dict(cfg.tolerances)
    for item in args.tol or []:
        name, sep, val = item.partition("=")
        if not sep or name not in DEFAULT_TOL:
            raise UsageError(f"bad --tol {item!r}; names: {', '.join(sorted(DEFAULT_TOL))}")
        try:
            tols[name] = float(val)
        except ValueError as e:
            raise UsageError(f"bad --tol value {val!r}") from e
    unknown = set(tols) - set(DEFAULT_TOL)
    if unknown:
        raise UsageError(f"unknown tolerance names {sorted(unknown)}")
    cfg.tolerances = tols
    cfg.t_grid = parse_t_grid(args.t_grid if args.t_grid is not None else cfg.t_grid)
    if cfg.seed is None or int(cfg.seed) < 0:
        raise UsageError("seed must be an unsigned integer")
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if cfg.command == "verify":
            return cmd_verify(cfg)
        if cfg.command == "scan":
            return cmd_scan(cfg)
        if cfg.command == "curvature":
            return cmd_curvature(cfg)
        return cmd_catalog(cfg, getattr(args, "self_test", False))
    except (UsageError, A.UnknownIdError) as e:
        sys.stderr.write(f"usage error: {e}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
