"""Cheeger deformations: orbit tensor, ``P_t``, ``C_t``, ``g_t`` and Ricci scans.

For an invariant metric ``g`` and Killing frame ``K`` over a Q-orthonormal
basis of the whole Lie algebra, the deformed metric has cometric
``g^{-1} + t K K^T``.  On tangent vectors this is the Woodbury form

    g_t = g - g K (t^{-1} + K^T g K)^{-1} K^T g,

which equals ``g`` on horizontal vectors and ``P (1 + tP)^{-1}`` on orbit
directions.  Isotropy directions have zero Killing fields and drop out.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import riemann as R
from .actions import ActionSpec, get_action
from .algebra.groups import _rng, bracket, from_coords, inner_q, q_norm
from .riemann import AmbientMetric, GGBundle, Submersion, killing_batch

EIG_RTOL = 1e-8


class NonPositiveOrbitTensor(ValueError):
    pass


class NegativeTError(ValueError):
    pass


class DecompositionError(ValueError):
    pass


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CHEEGERLAB_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    items = list(items)
    n = _threads()
    if n == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- orbit tensor


@dataclass
class CheegerState:
    """Orbit tensor data at ``p``.

    ``vectors`` holds the Q-orthonormal eigenvectors ``v_i`` of ``P`` as
    coordinate rows in the algebra basis; ``killing`` the ambient Killing
    frame of that basis; ``horizontal`` a g-orthonormal horizontal basis
    (columns).
    """

    point: np.ndarray
    eigenvalues: np.ndarray
    vectors: np.ndarray
    horizontal: np.ndarray
    killing: np.ndarray
    gram: np.ndarray
    metric: AmbientMetric
    action: ActionSpec
    t: float = 0.0

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    def field(self, coords) -> np.ndarray:
        """Killing field of the algebra element with the given coordinates."""
        return self.killing @ np.asarray(coords, dtype=float)

    def orbit_vectors(self) -> np.ndarray:
        """Columns ``v_i^*``."""
        return self.killing @ self.vectors.T

    def p_matrix(self) -> np.ndarray:
        """``P`` on m_p in the eigenbasis coordinates (diagonal)."""
        return np.diag(self.eigenvalues)

    def relation_residual(self) -> float:
        v = self.orbit_vectors()
        g = self.metric.matrix(self.point)
        return float(np.abs(v.T @ g @ v - np.diag(self.eigenvalues)).max()) if self.k else 0.0

    def decompose(self, xbar) -> tuple[np.ndarray, np.ndarray]:
        """``xbar = X + U^*``: horizontal part and U in eigenbasis coordinates."""
        xbar = np.asarray(xbar, dtype=float)
        space = self.action.space
        if space.tangency_residual(self.point, xbar) > 1e-8 * max(1.0, np.linalg.norm(xbar)):
            raise DecompositionError("vector is not tangent")
        if not self.k:
            return xbar, np.zeros(0)
        v = self.orbit_vectors()
        g = self.metric.matrix(self.point)
        u = (v.T @ g @ xbar) / self.eigenvalues
        x = xbar - v @ u
        if np.abs(v.T @ g @ x).max() > 1e-8 * max(1.0, np.linalg.norm(xbar)):
            raise DecompositionError("decomposition residual too large")
        return x, u


def orbit_tensor(metric: AmbientMetric, spec: ActionSpec, p) -> CheegerState:
    p = np.asarray(p, dtype=float)
    k = killing_batch(spec, p)[0]
    g = metric.matrix(p)
    gram = _sym(k.T @ g @ k)
    w, vec = np.linalg.eigh(gram)
    scale = max(1.0, float(np.abs(w).max()))
    if w.min() < -EIG_RTOL * scale:
        raise NonPositiveOrbitTensor(f"orbit tensor has a negative eigenvalue {w.min():.3g}")
    keep = w > EIG_RTOL * scale
    lam, vecs = w[keep], vec[:, keep].T
    tb = spec.space.tangent_basis(p).T
    ov = k @ vecs.T
    if ov.shape[1]:
        proj = np.eye(p.size) - ov @ np.linalg.solve(_sym(ov.T @ g @ ov), ov.T @ g)
        h = proj @ tb
    else:
        h = tb
    u, s, _ = np.linalg.svd(h)
    basis = u[:, : tb.shape[1] - ov.shape[1]]
    chol = np.linalg.cholesky(_sym(basis.T @ g @ basis))
    hor = basis @ np.linalg.inv(chol).T
    return CheegerState(p, lam, vecs, hor, k, gram, metric, spec)


# ---------------------------------------------------------------- deformed tensors


def _check_t(t):
    if t < 0:
        raise NegativeTError("t must be non-negative")


def deformed_tensors(state: CheegerState, t: float) -> dict:
    """Spectrum of ``P_t`` and the ambient matrix of ``C_t`` at the state's point."""
    _check_t(t)
    lam = state.eigenvalues
    pt = lam / (1.0 + t * lam)
    n = state.point.size
    c = np.eye(n)
    if state.k:
        v = state.orbit_vectors()
        g = state.metric.matrix(state.point)
        # C_t = 1 - sum_i (1 - 1/(1 + t lam_i)) v_i (v_i^T g) / lam_i
        w = (1.0 - 1.0 / (1.0 + t * lam)) / lam
        c = c - (v * w) @ (v.T @ g)
    return {"P_t": pt, "C_t": c, "C_t_vertical": 1.0 / (1.0 + t * lam), "t": t}


def tensor_identity_residuals(state: CheegerState, t: float, rng) -> dict:
    """The three tensor identities against direct matrix algebra."""
    d = deformed_tensors(state, t)
    c = d["C_t"]
    res = {}
    h = state.horizontal
    res["C_t_horizontal"] = float(np.abs(c @ h - h).max()) if h.size else 0.0
    if not state.k:
        res.update(C_t_vertical=0.0, P_t=0.0, C_t_decomposition=0.0)
        return res
    p = state.p_matrix()
    eye = np.eye(state.k)
    pt_direct = np.linalg.inv(np.linalg.inv(p) + t * eye)
    res["P_t"] = float(np.abs(pt_direct - p @ np.linalg.inv(eye + t * p)).max())
    res["P_t_spectrum"] = float(np.abs(np.diag(d["P_t"]) - pt_direct).max())
    v = state.orbit_vectors()
    # C_t on V has coordinates P^{-1} P_t in the v basis
    cv = np.linalg.lstsq(v, c @ v, rcond=None)[0]
    res["C_t_vertical"] = float(np.abs(cv - np.linalg.solve(p, pt_direct)).max())
    x = h @ rng.standard_normal(h.shape[1]) if h.size else np.zeros(state.point.size)
    u = rng.standard_normal(state.k)
    direct = x + v @ np.linalg.solve(eye + t * p, u)
    res["C_t_decomposition"] = float(np.abs(c @ (x + v @ u) - direct).max())
    return res


@dataclass
class DeformedMetric(AmbientMetric):
    """``g_t`` as an ambient tensor field."""

    base: AmbientMetric | None = None
    action: ActionSpec | None = None
    t: float = 0.0

    @classmethod
    def make(cls, base: AmbientMetric, action: ActionSpec, t: float) -> "DeformedMetric":
        _check_t(t)

        def tensor(x):
            g = base.tensor(x)
            if t == 0:
                return g
            k = killing_batch(action, x)
            gk = np.einsum("nij,nja->nia", g, k)
            m = np.einsum("nia,nib->nab", k, gk) + np.eye(k.shape[2])[None] / t
            corr = np.einsum("nia,nab,njb->nij", gk, np.linalg.inv(m), gk)
            return _sym(g - corr)

        return cls(base.space, tensor, f"cheeger({base.name},{action.id},t={t!r})", base.chart_factory, base, action, t)


def deformed_metric(base: AmbientMetric, spec: ActionSpec, t: float) -> DeformedMetric:
    return DeformedMetric.make(base, spec, t)


def deformed_metric_eval(dm: DeformedMetric, p, xbar, ybar) -> float:
    """``g(C_t xbar, ybar)`` through the decomposition ``xbar = X + U^*``."""
    st = orbit_tensor(dm.base, dm.action, p)
    x, u = st.decompose(xbar)
    st.decompose(ybar)
    cx = x + st.orbit_vectors() @ (u / (1.0 + dm.t * st.eigenvalues)) if st.k else x
    return float(cx @ dm.base.matrix(p) @ np.asarray(ybar, dtype=float))


def deformed_sectional(dm: DeformedMetric, p, xbar, ybar, **kw) -> R.CurvatureReport:
    return R.sectional_ambient(dm, p, xbar, ybar, **kw)


def kappa_t(dm: DeformedMetric, p, xbar, ybar, tensor_t=None, **kw) -> float:
    """Unnormalized ``R_{g_t}(C_t^{-1} xbar, C_t^{-1} ybar, C_t^{-1} ybar, C_t^{-1} xbar)``."""
    st = orbit_tensor(dm.base, dm.action, p)
    c = deformed_tensors(st, dm.t)["C_t"]
    a = np.linalg.lstsq(c, xbar, rcond=None)[0]
    b = np.linalg.lstsq(c, ybar, rcond=None)[0]
    f = dm.field(p)
    t = tensor_t or R.curvature_tensor(f, **kw)
    ca, cb = f.chart.to_chart(np.array([a, b]))
    return t.curvature(ca, cb, cb, ca)


def kappa_0(metric: AmbientMetric, p, xbar, ybar, tensor=None, **kw) -> float:
    """Unnormalized ``R_g(xbar, ybar, ybar, xbar)``."""
    f = metric.field(p)
    t = tensor or R.curvature_tensor(f, **kw)
    a, b = f.chart.to_chart(np.array([xbar, ybar]))
    return t.curvature(a, b, b, a)


def bracket_lower_bound(state: CheegerState, t: float, uc, vc) -> float:
    """``t^3/4 |[PU, PV]|_Q^2`` for U, V given by algebra coordinates."""
    pu = state.vectors.T @ (state.eigenvalues * (state.vectors @ uc))
    pv = state.vectors.T @ (state.eigenvalues * (state.vectors @ vc))
    b = bracket(from_coords(state.action.group, pu), from_coords(state.action.group, pv))
    return t**3 / 4.0 * q_norm(b) ** 2


# ---------------------------------------------------------------- Ricci


def _chart_tensor(metric, p, **kw):
    f = metric.field(p)
    return f, R.curvature_tensor(f, **kw)


def ricci_horizontal_form(state: CheegerState, tensor, chart, xbar, ybar=None) -> float:
    """``sum_i R_g(xbar, e_i, e_i, ybar)`` over the horizontal orthonormal basis."""
    ybar = xbar if ybar is None else ybar
    a, b = chart.to_chart(np.array([xbar, ybar]))
    es = chart.to_chart(state.horizontal.T)
    es = np.atleast_2d(es)
    return float(sum(np.einsum("ijkl,i,j,k,l->", tensor.riemann, a, e, e, b) for e in es))


def ricci_horizontal(metric: AmbientMetric, spec: ActionSpec, p, x, **kw) -> float:
    """``Ric^H(X)`` for horizontal X (FD curvature of ``metric``)."""
    st = orbit_tensor(metric, spec, p)
    _, u = st.decompose(x)
    if u.size and np.abs(u).max() > 1e-8 * max(1.0, np.linalg.norm(x)):
        raise ValueError("ricci_horizontal needs a horizontal vector")
    f, t = _chart_tensor(metric, p, **kw)
    return ricci_horizontal_form(st, t, f.chart, x)


def ricci_horizontal_matrix(state: CheegerState, tensor, chart) -> np.ndarray:
    """``Ric^H`` as a symmetric form on the horizontal orthonormal basis."""
    h = state.horizontal
    hc = np.atleast_2d(chart.to_chart(h.T))
    return _sym(np.einsum("ijkl,ai,bj,bk,cl->ac", tensor.riemann, hc, hc, hc, hc))


def orbit_ricci_limit(state: CheegerState, u) -> float:
    """``sum_i 1/4 |[v_i, U]|_Q^2`` for a Q-unit U (algebra coordinates)."""
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise ValueError("U must be Q-unit")
    tag = state.action.group
    uv = from_coords(tag, u)
    return float(sum(0.25 * q_norm(bracket(from_coords(tag, v), uv)) ** 2 for v in state.vectors))


def orbit_ricci_matrix(state: CheegerState) -> np.ndarray:
    """The orbit Ricci limit as a quadratic form on m_p (eigenbasis coordinates)."""
    tag = state.action.group
    vs = [from_coords(tag, v) for v in state.vectors]
    br = [[bracket(v, w) for w in vs] for v in vs]
    k = state.k
    m = np.array([[sum(0.25 * inner_q(br[i][a], br[i][b]) for i in range(k)) for b in range(k)] for a in range(k)])
    return _sym(m)


def limit_terms(metric: AmbientMetric, spec: ActionSpec, p, x, u, ts, tensor=None, **kw) -> dict:
    """The three large-t terms of the Ricci expansion at ``xbar = X + U^*``.

    ``x`` is horizontal and ``u`` holds algebra coordinates (Q-unit).
    Returns per-t values of (a) ``|Ric^H(C_t xbar) - Ric^H(X)|``, (b) the mixed
    ``kappa_0`` sum, (c) the bracket term, and the orbit Ricci limit.
    """
    st = orbit_tensor(metric, spec, p)
    f = metric.field(p)
    tensor = tensor or R.curvature_tensor(f, **kw)
    u = np.asarray(u, dtype=float)
    tag = spec.group
    ue = st.vectors @ u  # eigenbasis coordinates of U
    ustar = st.orbit_vectors() @ ue
    xbar = x + ustar
    base = ricci_horizontal_form(st, tensor, f.chart, x)
    lim = orbit_ricci_limit(st, u)
    rows = []
    for t in ts:
        lam = st.eigenvalues
        cx = x + st.orbit_vectors() @ (ue / (1 + t * lam))
        a = abs(ricci_horizontal_form(st, tensor, f.chart, cx) - base)
        b = 0.0
        for i in range(st.k):
            vi = st.orbit_vectors()[:, i]
            ca, cb = f.chart.to_chart(np.array([vi, cx]))
            b += lam[i] / (1 + t * lam[i]) * tensor.curvature(ca, cb, cb, ca)
        w = st.vectors.T @ (t * lam / (1 + t * lam) * ue)  # t P (1 + tP)^{-1} U in algebra coords
        wv = from_coords(tag, w)
        c = sum(
            t * lam[i] / (4 + 4 * t * lam[i]) * q_norm(bracket(from_coords(tag, st.vectors[i]), wv)) ** 2
            for i in range(st.k)
        )
        rows.append({"t": float(t), "a": float(a), "b": float(abs(b)), "c": float(c), "c_gap": float(abs(c - lim))})
    out = {"rows": rows, "orbit_limit": lim, "ricH_X": base, "xbar": xbar}
    for key, name in (("a", "slope_a"), ("b", "slope_b"), ("c_gap", "slope_c")):
        ys = np.array([r[key] for r in rows])
        if np.all(ys > 0):
            out[name] = float(np.polyfit(np.log(ts), np.log(ys), 1)[0])
        else:
            out[name] = float("nan")
    return out


def vertical_ricci(metric: AmbientMetric, spec: ActionSpec, p, u, t, **kw) -> float:
    """``Ric_{g_t}(U^*, U^*)`` by FD curvature of ``g_t``."""
    dm = deformed_metric(metric, spec, t)
    f, tt = _chart_tensor(dm, p, **kw)
    st = orbit_tensor(metric, spec, p)
    a = f.chart.to_chart(st.field(u))
    return tt.ricci_form(a)


# ---------------------------------------------------------------- scans


@dataclass
class ScanResult:
    rows: list
    table: list
    certificate: dict

    CSV_COLUMNS = ("t", "point-id", "min_ricci", "min_sec", "ricH_min")

    def to_csv(self) -> str:
        lines = [",".join(self.CSV_COLUMNS)]
        for r in self.rows:
            lines.append(",".join([f"{r['t']:.17g}", str(r["point-id"]), f"{r['min_ricci']:.17g}",
                                   f"{r['min_sec']:.17g}", f"{r['ricH_min']:.17g}"]))
        return "\n".join(lines) + "\n"

    def certificate_json(self) -> str:
        return json.dumps(self.certificate, sort_keys=True, indent=2)


def _frame_min_sectional(tensor) -> float:
    g = tensor.g
    w = np.linalg.cholesky(np.linalg.inv(g))  # columns g-orthonormal
    d = g.shape[0]
    vals = [tensor.sectional(w[:, i], w[:, j]) for i in range(d) for j in range(i + 1, d)]
    return float(min(vals)) if vals else float("nan")


def horizontal_ricci_min(metric: AmbientMetric, spec: ActionSpec, p, **kw) -> float:
    st = orbit_tensor(metric, spec, p)
    f, t = _chart_tensor(metric, p, **kw)
    m = ricci_horizontal_matrix(st, t, f.chart)
    return float(np.linalg.eigvalsh(m)[0]) if m.size else float("nan")


def limit_margin(metric: AmbientMetric, spec: ActionSpec, p, **kw) -> float:
    """``min`` over unit ``xbar`` of ``Ric^H(X) + orbit limit(U)`` (block-diagonal form)."""
    st = orbit_tensor(metric, spec, p)
    f, t = _chart_tensor(metric, p, **kw)
    vals = []
    m = ricci_horizontal_matrix(st, t, f.chart)
    if m.size:
        vals.append(np.linalg.eigvalsh(m)[0])
    if st.k:
        om = orbit_ricci_matrix(st)
        vals.append(np.linalg.eigvalsh(om)[0])
    return float(min(vals))


def ricci_positivity_scan(metric: AmbientMetric, spec: ActionSpec, t_grid, n_points: int = 50, seed=0,
                          tol: float = 0.0, **kw) -> ScanResult:
    """Minimum sampled Ricci curvature of ``g_t`` over a t-grid, with a certificate.

    ``min_ricci`` is the smallest eigenvalue of ``Ric_{g_t}`` relative to ``g_t``
    at each point, i.e. the minimum over all unit directions.
    """
    rng = _rng(seed)
    pts = [spec.space.sampler(rng) for _ in range(n_points)]
    cert = {
        "action": spec.id,
        "metric": metric.name,
        "seeds": {"points": seed},
        "n_points": n_points,
        "t_grid": [float(t) for t in t_grid],
        "tolerances": {"positivity": tol, "h1": kw.get("h1", R.H1), "h2": kw.get("h2", R.H2)},
    }
    checks = {"finite_orbit_pi1": bool(spec.finite_orbit_pi1)}
    ric_h = _pmap(lambda p: horizontal_ricci_min(metric, spec, p, **kw), pts)
    checks["ricH_min"] = float(np.nanmin(ric_h))
    checks["ricH_positive"] = bool(checks["ricH_min"] > tol)
    cert["hypothesis_checks"] = checks
    if not (checks["finite_orbit_pi1"] and checks["ricH_positive"]):
        cert["status"] = "hypothesis-failed"
        cert["t_star"] = None
        return ScanResult([], [], cert)
    margins = _pmap(lambda p: limit_margin(metric, spec, p, **kw), pts)
    checks["limit_margin_min"] = float(min(margins))

    def cell(args):
        t, i = args
        dm = deformed_metric(metric, spec, t)
        f = dm.field(pts[i])
        tt = R.curvature_tensor(f, **kw)
        return {"t": float(t), "point-id": i, "min_ricci": tt.min_ricci(), "min_sec": _frame_min_sectional(tt),
                "ricH_min": float(ric_h[i])}

    rows = _pmap(cell, [(t, i) for t in t_grid for i in range(n_points)])
    table = []
    t_star = None
    for t in t_grid:
        m = min(r["min_ricci"] for r in rows if r["t"] == float(t))
        table.append({"t": float(t), "min_ricci": m})
        if t_star is None and m > tol:
            t_star = float(t)
    cert["t_star"] = t_star
    cert["status"] = "certified" if t_star is not None else "none-found"
    cert["min_ricci_at_t_star"] = None if t_star is None else next(r["min_ricci"] for r in table if r["t"] == t_star)
    return ScanResult(rows, table, cert)


# ---------------------------------------------------------------- bundles over P


def fiber_shrink_check(metric: AmbientMetric, spec: ActionSpec, eps: float, n_samples: int = 1000, seed=0) -> dict:
    """The fiber-shrinking bound ``g_{P_t}(V, V) <= 1/(1 + t lam) <= eps`` on sampled unit vertical V."""
    rng = _rng(seed)
    pts = [spec.space.sampler(rng) for _ in range(n_samples)]
    states = [orbit_tensor(metric, spec, p) for p in pts]
    lam = float(min(s.eigenvalues.min() for s in states))
    if lam <= 0:
        raise NonPositiveOrbitTensor("action is not free")
    t = (1.0 - eps) / (lam * eps) if eps < 1 else 0.0
    worst = 0.0
    worst_ratio = 0.0
    sharp = []
    for s in states:
        c = rng.standard_normal(s.k)
        c /= np.sqrt(np.sum(c * c * s.eigenvalues))  # g-unit V = sum c_i v_i^*
        val = float(np.sum(c * c * s.eigenvalues / (1 + t * s.eigenvalues)))
        worst = max(worst, val)
        worst_ratio = max(worst_ratio, val * (1 + t * lam))
        v1 = 1.0 / np.sqrt(s.eigenvalues[0])
        sharp.append(s.eigenvalues[0] * v1 * v1 / (1 + t * s.eigenvalues[0]) * (1 + t * lam))
    return {"lambda": lam, "t_required": t, "eps": eps, "max_vertical_norm": worst,
            "max_bound_ratio": worst_ratio, "sharpness_range": [float(min(sharp)), float(max(sharp))]}


def vertical_norm_fd(metric: AmbientMetric, spec: ActionSpec, t: float, n_samples: int = 1000, seed=0) -> float:
    """Max ``g_{P_t}(V, V)`` over sampled g-unit vertical V using the assembled ``g_t`` tensor."""
    rng = _rng(seed)
    dm = deformed_metric(metric, spec, t)
    worst = 0.0
    for _ in range(n_samples):
        p = spec.space.sampler(rng)
        s = orbit_tensor(metric, spec, p)
        v = s.orbit_vectors() @ rng.standard_normal(s.k)
        v /= np.sqrt(v @ metric.matrix(p) @ v)
        worst = max(worst, float(v @ dm.matrix(p) @ v))
    return worst


def a_tensor_bound(bundle: GGBundle, n_samples: int = 100, seed=0) -> float:
    """1.5 x the max sampled ``|[X, Y]^V|^2 / (|X|^2 |Y|^2)`` over horizontal pairs."""
    rng = _rng(seed)
    sub = bundle.pi
    g_of = sub.total.matrix
    worst = 0.0
    for _ in range(n_samples):
        x = sub.total.space.sampler(rng)
        a, b = R.random_horizontal_pair(sub, x, rng)
        v = R.vertical_bracket(sub, x, a, b)
        g = g_of(x)
        worst = max(worst, float(v @ g @ v) / float((a @ g @ a) * (b @ g @ b)))
    return 1.5 * worst


def _with_total(sub: Submersion, total: AmbientMetric) -> Submersion:
    return Submersion(total, sub.action, sub.proj, sub.jac, sub.lift, sub.base, sub.name)


def curvature_comparison_check(bundle: GGBundle, eps: float, t: float, n_planes: int = 10, seed=0,
                               check_precondition: bool = True, **kw) -> dict:
    """``max K_M(d pi X, d pi Y) - K_{M'_t}(d pi' X, d pi' Y) - eps |X ^ Y|^2`` over planes of ``H''``.

    ``g_{P_t}`` is the Cheeger deformation of the bundle metric along the
    principal action; ``M`` keeps the quotient metric of ``g_P`` and ``M'``
    gets the quotient metric of ``g_{P_t}`` by the star action.
    """
    g_p = bundle.metric
    spec = bundle.pi.action
    pre = {}
    if check_precondition:
        c = a_tensor_bound(bundle, 50, seed)
        lam = fiber_shrink_check(g_p, spec, 0.5, 50, seed)["lambda"]
        eps1 = min(1.0, 4 * eps / (3 * c)) if c > 0 else 1.0
        need = (1 - eps1) / (lam * eps1)
        pre = {"C": c, "lambda": lam, "eps_prime": eps1, "t_min": need, "satisfied": bool(t >= need)}
    gt = deformed_metric(g_p, spec, t)
    qm = R.quotient_metric(bundle.pi)
    qs = R.quotient_metric(_with_total(bundle.pi_star, gt))
    rng = _rng(seed)
    worst = -np.inf
    rows = []
    for _ in range(n_planes):
        x = g_p.space.sampler(rng)
        hb = bundle.doubly_horizontal(x)
        if hb.shape[1] < 2:
            continue
        c = rng.standard_normal((2, hb.shape[1]))
        a, b = hb @ c[0], hb @ c[1]
        g = g_p.matrix(x)
        # g_P-orthonormalize
        a /= np.sqrt(a @ g @ a)
        b = b - (a @ g @ b) * a
        b /= np.sqrt(b @ g @ b)
        j, js = bundle.pi.jac(x), bundle.pi_star.jac(x)
        km = R.sectional_ambient(qm, bundle.pi.proj(x), j @ a, j @ b, **kw).K
        ks = R.sectional_ambient(qs, bundle.pi_star.proj(x), js @ a, js @ b, **kw).K
        d = km - ks - eps
        rows.append({"K_M": km, "K_Mprime": ks, "deficit": d})
        worst = max(worst, d)
    return {"max_deficit": float(worst), "planes": rows, "precondition": pre, "t": t, "eps": eps}


# ---------------------------------------------------------------- inflated fibers


def inflation_profile(a: float, omega: float):
    """``sigma^2 = 1 + a (1 - cos(omega lam)) / 2`` in the invariant ``lam = |x|^2 - |y|^2`` of S^7."""

    def sigma2(x):
        x = np.atleast_2d(x)
        lam = np.sum(x[:, :4] ** 2, 1) - np.sum(x[:, 4:] ** 2, 1)
        return 1.0 + a * (1.0 - np.cos(omega * lam)) / 2.0

    return sigma2


def inflated_hopf_metric(a: float = 0.25, omega: float = 4.0) -> AmbientMetric:
    spec = get_action("hopf-principal-s7")
    return R.fiber_scaled_metric(spec, inflation_profile(a, omega), f"inflated(a={a!r},omega={omega!r})")


def inflation_oracle(a_grid=(0.25,), omega_grid=(2.0, 4.0, 6.0, 8.0, 10.0), n_points: int = 50, seed=0, **kw) -> dict:
    """Pick the smallest inflation frequency with negative sampled Ricci at ``t = 0`` and positive ``Ric^H``."""
    spec = get_action("hopf-principal-s7")
    rng = _rng(seed)
    pts = [spec.space.sampler(rng) for _ in range(n_points)]
    table = []
    chosen = None
    for a in a_grid:
        for om in omega_grid:
            m = inflated_hopf_metric(a, om)
            ric = min(R.curvature_tensor(m.field(p), **kw).min_ricci() for p in pts)
            rh = min(horizontal_ricci_min(m, spec, p, **kw) for p in pts)
            table.append({"a": a, "omega": om, "min_ricci_t0": ric, "ricH_min": rh})
            if chosen is None and ric < 0 < rh:
                chosen = {"a": a, "omega": om}
    return {"chosen": chosen, "table": table, "seed": seed, "n_points": n_points}
