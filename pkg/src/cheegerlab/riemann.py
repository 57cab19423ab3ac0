"""Metrics in charts, finite-difference curvature, connections and submersions.

Every metric is given either by an ambient tensor field (a symmetric matrix
``G(x)`` acting on tangent vectors of an embedded space) or directly by its
coefficients in a chart.  Curvature is always computed from coefficients in
a chart centred at the point of interest: Christoffel symbols by central
differences of the coefficients (step ``h1``), the curvature tensor by
central differences of the Christoffel symbols (step ``h2``).

Sign convention: ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``
and ``K(X, Y) = g(R(X, Y)Y, X) / |X ^ Y|^2`` (the unit sphere has ``K = 1``).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.linalg

from .actions import (
    ActionSpec,
    Space,
    UnknownIdError,
    _c_to_real,
    action_matrix,
    get_action,
    get_space,
)
from .algebra.groups import (
    _basis_arrays,
    _rng,
    complex_to_qmat,
    haar_sample,
    is_quaternionic,
    parse_group,
    qconjT,
    qmat_to_complex,
    qmatmul,
)
from .algebra.quaternion import left_matrix, qconj, qmul, right_matrix

H1 = 1e-4
H2 = 1e-3
DEGENERATE_PLANE = 1e-8


class NotPositiveDefiniteError(ValueError):
    pass


class DegeneratePlaneError(ValueError):
    pass


class NotFreeError(ValueError):
    pass


# ---------------------------------------------------------------- charts


def _complement_frame(p: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the orthogonal complement of unit ``p``."""
    n = p.size
    q, _ = np.linalg.qr(np.column_stack([p, np.eye(n)]))
    e = q[:, 1:n]
    return e * np.sign(np.sum(e, axis=0) + 1e-300)


class Chart:
    """Parametrization ``u -> x`` of a neighbourhood of ``center`` with ``u = 0 -> center``."""

    dim: int
    center: np.ndarray

    def point(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_chart(self, vectors) -> np.ndarray:
        """Chart components of ambient tangent vectors at the centre (rows in, rows out)."""
        j = self.jacobian(np.zeros((1, self.dim)))[0]
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        sol = np.linalg.lstsq(j, v.T, rcond=None)[0].T
        return sol if np.ndim(vectors) > 1 else sol[0]

    def to_ambient(self, vectors) -> np.ndarray:
        j = self.jacobian(np.zeros((1, self.dim)))[0]
        return np.asarray(vectors, dtype=float) @ j.T


class StereoChart(Chart):
    """Stereographic projection from ``-p``, centred at ``p``: ``x = ((1 - |u|^2) p + 2 E u) / (1 + |u|^2)``."""

    def __init__(self, p):
        p = np.asarray(p, dtype=float)
        self.center = p / np.linalg.norm(p)
        self.frame = _complement_frame(self.center)
        self.dim = p.size - 1

    def point(self, u):
        u = np.atleast_2d(u)
        r2 = np.sum(u * u, axis=1, keepdims=True)
        return ((1 - r2) * self.center + 2 * u @ self.frame.T) / (1 + r2)

    def jacobian(self, u):
        u = np.atleast_2d(u)
        r2 = np.sum(u * u, axis=1)[:, None, None]
        x = self.point(u)
        dn = 2 * self.frame[None, :, :] - 2 * self.center[None, :, None] * u[:, None, :]
        return (dn - 2 * x[:, :, None] * u[:, None, :]) / (1 + r2)

    def inverse(self, x):
        x = np.atleast_2d(x)
        return (x @ self.frame) / (1 + x @ self.center)[:, None]


class TorusChart(Chart):
    """Angle chart of the Clifford-type torus ``(cos a, sin a, cos b, sin b)``."""

    def __init__(self, p):
        self.center = np.asarray(p, dtype=float)
        self.angles = np.array([np.arctan2(p[1], p[0]), np.arctan2(p[3], p[2])])
        self.dim = 2

    def point(self, u):
        a = self.angles + np.atleast_2d(u)
        return np.stack([np.cos(a[:, 0]), np.sin(a[:, 0]), np.cos(a[:, 1]), np.sin(a[:, 1])], axis=1)

    def jacobian(self, u):
        a = self.angles + np.atleast_2d(u)
        j = np.zeros((a.shape[0], 4, 2))
        j[:, 0, 0], j[:, 1, 0] = -np.sin(a[:, 0]), np.cos(a[:, 0])
        j[:, 2, 1], j[:, 3, 1] = -np.sin(a[:, 1]), np.cos(a[:, 1])
        return j


class ProductChart(Chart):
    """Product of charts on consecutive coordinate blocks."""

    def __init__(self, charts):
        self.charts = list(charts)
        self.center = np.concatenate([c.center for c in self.charts])
        self.dim = sum(c.dim for c in self.charts)

    def _split(self, u):
        u = np.atleast_2d(u)
        out, k = [], 0
        for c in self.charts:
            out.append(u[:, k : k + c.dim])
            k += c.dim
        return out

    def point(self, u):
        return np.concatenate([c.point(v) for c, v in zip(self.charts, self._split(u))], axis=1)

    def jacobian(self, u):
        parts = [c.jacobian(v) for c, v in zip(self.charts, self._split(u))]
        n = parts[0].shape[0]
        rows = sum(p.shape[1] for p in parts)
        j = np.zeros((n, rows, self.dim))
        r = k = 0
        for p in parts:
            j[:, r : r + p.shape[1], k : k + p.shape[2]] = p
            r += p.shape[1]
            k += p.shape[2]
        return j


def _work_basis(tag: str):
    """Algebra basis as real / complex matrices on which ``expm`` acts."""
    family, _ = parse_group(tag)
    basis = _basis_arrays(tag)
    if is_quaternionic(tag):
        return [qmat_to_complex(b) for b in basis]
    return [np.asarray(b) for b in basis]


def _to_work(tag: str, g_matrix):
    return qmat_to_complex(g_matrix) if is_quaternionic(tag) else np.asarray(g_matrix)


def _layout(tag: str, m) -> np.ndarray:
    family, _ = parse_group(tag)
    if is_quaternionic(tag):
        return complex_to_qmat(m).ravel()
    if family == "U":
        return _c_to_real(m.ravel())
    return np.real(m).ravel()


class GroupChart(Chart):
    """Exponential chart ``u -> g exp(sum u_a X_a)`` over a Q-orthonormal basis ``X_a``."""

    def __init__(self, tag: str, g_matrix):
        self.tag = tag
        self.g = _to_work(tag, g_matrix)
        self.basis = _work_basis(tag)
        self.dim = len(self.basis)
        self.center = _layout(tag, self.g)

    def _a(self, u):
        return sum(c * b for c, b in zip(u, self.basis))

    def point(self, u):
        return np.stack([_layout(self.tag, self.g @ scipy.linalg.expm(self._a(v))) for v in np.atleast_2d(u)])

    def jacobian(self, u):
        out = []
        for v in np.atleast_2d(u):
            a = self._a(v)
            cols = [_layout(self.tag, self.g @ scipy.linalg.expm_frechet(a, b, compute_expm=False)) for b in self.basis]
            out.append(np.stack(cols, axis=1))
        return np.stack(out)


def chart_at(space: Space, x) -> Chart:
    x = np.asarray(x, dtype=float)
    if space.id.startswith("S") and space.id[1:].isdigit():
        return StereoChart(x)
    if space.id == "T2":
        return TorusChart(x)
    if space.id == "S2xS1":
        return ProductChart([StereoChart(x[:3]), _CircleChart(x[3:])])
    family = space.id.split("(")[0]
    if family in ("O", "U", "Sp") or space.id == "Sp2":
        tag = space.id
        n = int(round(np.sqrt(space.ambient_dim // {"O": 1, "U": 2, "Sp": 4, "Sp2": 4}[family])))
        if family == "O":
            g = x.reshape(n, n)
        elif family == "U":
            c = x.reshape(n * n, 2)
            g = (c[:, 0] + 1j * c[:, 1]).reshape(n, n)
        else:
            g = x.reshape(n, n, 4)
        return GroupChart(tag, g)
    raise UnknownIdError(f"no chart for space {space.id!r}")


class _CircleChart(Chart):
    def __init__(self, p):
        self.center = np.asarray(p, dtype=float)
        self.angle = np.arctan2(p[1], p[0])
        self.dim = 1

    def point(self, u):
        a = self.angle + np.atleast_2d(u)[:, 0]
        return np.stack([np.cos(a), np.sin(a)], axis=1)

    def jacobian(self, u):
        a = self.angle + np.atleast_2d(u)[:, 0]
        return np.stack([-np.sin(a), np.cos(a)], axis=1)[:, :, None]


# ---------------------------------------------------------------- metric fields


@dataclass
class MetricField:
    """Metric coefficients ``coeffs(u)`` in a chart; the chart centre is ``u = 0``."""

    chart: Chart
    coeffs: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    @property
    def dim(self) -> int:
        return self.chart.dim

    def at(self, u=None) -> np.ndarray:
        u = np.zeros((1, self.dim)) if u is None else np.atleast_2d(u)
        return self.coeffs(u)[0]

    def check(self, u=None) -> float:
        g = self.at(u)
        if np.abs(g - g.T).max() > 1e-10 * max(1.0, np.abs(g).max()):
            raise NotPositiveDefiniteError("metric coefficients are not symmetric")
        lo = float(np.linalg.eigvalsh(0.5 * (g + g.T))[0])
        if lo <= 0:
            raise NotPositiveDefiniteError(f"metric coefficients not positive definite (min eigenvalue {lo:.3g})")
        return lo


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@dataclass
class AmbientMetric:
    """Metric given by a symmetric ambient tensor field restricted to tangent vectors."""

    space: Space
    tensor: Callable[[np.ndarray], np.ndarray]
    name: str = ""
    chart_factory: Callable | None = None

    def chart(self, x) -> Chart:
        return (self.chart_factory or (lambda p: chart_at(self.space, p)))(x)

    def inner(self, x, a, b) -> float:
        g = self.tensor(np.atleast_2d(x))[0]
        return float(np.asarray(a) @ g @ np.asarray(b))

    def matrix(self, x) -> np.ndarray:
        return self.tensor(np.atleast_2d(x))[0]

    def field(self, x) -> MetricField:
        ch = self.chart(x)

        def coeffs(u):
            j = ch.jacobian(u)
            g = self.tensor(ch.point(u))
            return _sym(np.einsum("nai,nab,nbj->nij", j, g, j))

        return MetricField(ch, coeffs, self.name)


def _identity_tensor(n):
    eye = np.eye(n)
    return lambda x: np.broadcast_to(eye, (np.atleast_2d(x).shape[0], n, n))


def round_metric(space_id: str) -> AmbientMetric:
    """Round metric of a sphere (restriction of the Euclidean metric); flat metric of ``T2``."""
    space = get_space(space_id)
    if space_id == "T2" or (space_id.startswith("S") and space_id[1:].isdigit()) or space_id == "S2xS1":
        return AmbientMetric(space, _identity_tensor(space.ambient_dim), f"round:{space_id}")
    raise UnknownIdError(f"no round metric for {space_id!r}")


def biinvariant_metric(group_id: str) -> AmbientMetric:
    """Bi-invariant metric from ``Q``: the Euclidean metric of the stored matrix layout."""
    family, n = parse_group(group_id)
    if family == "S3":
        return AmbientMetric(get_space("S3"), _identity_tensor(4), "biinvariant:S3")
    if family == "S3xS3":
        raise UnknownIdError("S3xS3 has no cataloged space")
    space = get_space(group_id)
    return AmbientMetric(space, _identity_tensor(space.ambient_dim), f"biinvariant:{group_id}")


def scaled_chart_field(f: MetricField, c: float) -> MetricField:
    """Same metric in the chart ``u -> chart(c u)``."""

    class _Scaled(Chart):
        def __init__(self):
            self.dim = f.chart.dim
            self.center = f.chart.center

        def point(self, u):
            return f.chart.point(c * np.atleast_2d(u))

        def jacobian(self, u):
            return c * f.chart.jacobian(c * np.atleast_2d(u))

    return MetricField(_Scaled(), lambda u: c * c * f.coeffs(c * np.atleast_2d(u)), f.name)


# ---------------------------------------------------------------- finite-difference curvature


@dataclass
class CurvatureTensor:
    g: np.ndarray
    riemann: np.ndarray  # R[i, j, k, l] = g(R(d_i, d_j) d_k, d_l)
    christoffel: np.ndarray
    h1: float
    h2: float

    @property
    def ricci(self) -> np.ndarray:
        # Ric_jk = sum_i R(d_i, d_j, d_k, d_i) over a frame: contract i with l via g^{-1}
        ginv = np.linalg.inv(self.g)
        return _sym(np.einsum("ijkl,il->jk", self.riemann, ginv))

    def sectional(self, x, y) -> float:
        x, y = np.asarray(x, float), np.asarray(y, float)
        num = np.einsum("ijkl,i,j,k,l->", self.riemann, x, y, y, x)
        return float(num / wedge_norm2(self.g, x, y))

    def curvature(self, x, y, z, w) -> float:
        return float(np.einsum("ijkl,i,j,k,l->", self.riemann, x, y, z, w))

    def ricci_form(self, x, y=None) -> float:
        y = x if y is None else y
        return float(np.asarray(x) @ self.ricci @ np.asarray(y))

    def min_ricci(self) -> float:
        """Smallest eigenvalue of Ric relative to g."""
        return float(scipy.linalg.eigh(self.ricci, self.g, eigvals_only=True)[0])


def wedge_norm2(g, x, y) -> float:
    return float((x @ g @ x) * (y @ g @ y) - (x @ g @ y) ** 2)


def _christoffel_from(gc, gp, gm, h1):
    """Second-kind symbols ``Gamma[m, i, j]`` from the metric and its ±h1 shifts along each axis."""
    dg = (gp - gm) / (2 * h1)  # dg[l, i, j] = d_l g_ij
    first = 0.5 * (np.transpose(dg, (2, 0, 1)) + np.transpose(dg, (2, 1, 0)) - dg)
    # first[l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    return np.einsum("ml,lij->mij", np.linalg.inv(gc), first)


def curvature_tensor(f: MetricField, u0=None, h1: float = H1, h2: float = H2, richardson: bool = False) -> CurvatureTensor:
    """Curvature tensor of ``f`` at chart point ``u0`` (default: the chart centre)."""
    if richardson:
        a = curvature_tensor(f, u0, h1, h2)
        b = curvature_tensor(f, u0, h1, h2 / 2)
        return CurvatureTensor(b.g, (4 * b.riemann - a.riemann) / 3, b.christoffel, h1, h2)
    d = f.dim
    u0 = np.zeros(d) if u0 is None else np.asarray(u0, dtype=float)
    eye = np.eye(d)
    centers = [u0] + [u0 + s * h2 * eye[k] for k in range(d) for s in (1.0, -1.0)]
    pts = []
    for c in centers:
        pts.append(c)
        for k in range(d):
            pts.append(c + h1 * eye[k])
            pts.append(c - h1 * eye[k])
    g_all = f.coeffs(np.array(pts)).reshape(len(centers), 2 * d + 1, d, d)
    gam = np.array(
        [_christoffel_from(blk[0], blk[1::2], blk[2::2], h1) for blk in g_all]
    )  # gam[c, m, i, j]
    g0 = g_all[0, 0]
    if np.linalg.eigvalsh(g0)[0] <= 0:
        raise NotPositiveDefiniteError("metric not positive definite at the evaluation point")
    g0c = gam[0]
    dgam = (gam[1::2] - gam[2::2]) / (2 * h2)  # dgam[k, m, i, j] = d_k Gamma^m_ij
    # R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    r_up = (
        np.einsum("iljk->ijkl", dgam)
        - np.einsum("jlik->ijkl", dgam)
        + np.einsum("lim,mjk->ijkl", g0c, g0c)
        - np.einsum("ljm,mik->ijkl", g0c, g0c)
    )
    r = np.einsum("ijkm,ml->ijkl", r_up, g0)
    # project the FD noise away from the skew and pair symmetries
    r = 0.5 * (r - np.einsum("jikl->ijkl", r))
    r = 0.5 * (r - np.einsum("ijlk->ijkl", r))
    r = 0.5 * (r + np.einsum("klij->ijkl", r))
    return CurvatureTensor(g0, r, g0c, h1, h2)


@dataclass
class CurvatureReport:
    point: np.ndarray
    plane: tuple
    K: float
    method: str
    h1: float | None = None
    h2: float | None = None
    point_id: int = 0
    plane_id: int = 0

    def row(self) -> list:
        fmt = lambda v: "" if v is None else f"{v:.17g}"
        return [self.point_id, self.plane_id, f"{self.K:.17g}", self.method, fmt(self.h1), fmt(self.h2)]


CSV_HEADER = ["point-id", "plane-id", "K", "method", "h1", "h2"]


def reports_to_csv(reports, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.row())
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def check_plane(g, x, y):
    nx, ny = np.sqrt(x @ g @ x), np.sqrt(y @ g @ y)
    if nx == 0 or ny == 0 or wedge_norm2(g, x / nx, y / ny) < DEGENERATE_PLANE:
        raise DegeneratePlaneError("plane is degenerate")


def sectional_fd(f: MetricField, x, y, h1: float = H1, h2: float = H2, point_id=0, plane_id=0, richardson=False) -> CurvatureReport:
    """FD sectional curvature at the chart centre of the plane spanned by chart vectors ``x``, ``y``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    g0 = f.at()
    check_plane(g0, x, y)
    t = curvature_tensor(f, None, h1, h2, richardson)
    return CurvatureReport(f.chart.center, (x, y), t.sectional(x, y), "finite-difference", h1, h2, point_id, plane_id)


def sectional_ambient(metric: AmbientMetric, p, a, b, **kw) -> CurvatureReport:
    """FD sectional curvature of the plane of ambient tangent vectors ``a``, ``b`` at ``p``."""
    f = metric.field(p)
    x, y = f.chart.to_chart(np.array([a, b]))
    rep = sectional_fd(f, x, y, **kw)
    rep.plane = (np.asarray(a, float), np.asarray(b, float))
    return rep


def biinvariant_sectional(x, y) -> CurvatureReport:
    """Closed form ``1/4 |[X, Y]|^2 / |X ^ Y|^2`` for algebra vectors."""
    from .algebra.groups import bracket, inner_q

    num = 0.25 * inner_q(bracket(x, y), bracket(x, y))
    den = inner_q(x, x) * inner_q(y, y) - inner_q(x, y) ** 2
    return CurvatureReport(np.array([]), (x, y), float(num / den), "closed-form")


def tangent_frame(space: Space, x) -> np.ndarray:
    return space.tangent_basis(np.asarray(x, dtype=float))


def random_tangent_pair(space: Space, x, rng) -> tuple[np.ndarray, np.ndarray]:
    tb = tangent_frame(space, x)
    c = rng.standard_normal((2, tb.shape[0]))
    return c[0] @ tb, c[1] @ tb


# ---------------------------------------------------------------- Killing frames, batched

_GEN_CACHE: dict[str, np.ndarray] = {}


def killing_generators(spec: ActionSpec) -> np.ndarray:
    """``A[a]`` with ``u_a^*(x) = A[a] x`` (every cataloged action is linear)."""
    if spec.id not in _GEN_CACHE:
        from .algebra.groups import algebra_basis

        n = spec.space.ambient_dim
        eye = np.eye(n)
        _GEN_CACHE[spec.id] = np.array(
            [np.stack([spec.apply_d(b.matrix, eye[j]) for j in range(n)], axis=1) for b in algebra_basis(spec.group)]
        )
    return _GEN_CACHE[spec.id]


def killing_batch(spec: ActionSpec, x) -> np.ndarray:
    """Killing frames ``K[n, :, a]`` at a batch of points."""
    return np.einsum("aij,nj->nia", killing_generators(spec), np.atleast_2d(x))


def orbit_gram(metric: AmbientMetric, spec: ActionSpec, x) -> np.ndarray:
    k = killing_batch(spec, x)[0]
    return _sym(k.T @ metric.matrix(x) @ k)


def fiber_scaled_metric(spec: ActionSpec, sigma2: Callable[[np.ndarray], np.ndarray], name="fiber-scaled") -> AmbientMetric:
    """Round metric with orbit directions rescaled by ``sigma2(x)`` (a batch function).

    ``G = I + (sigma2 - 1) Pi_V`` with ``Pi_V`` the Euclidean projection onto the orbit.
    Invariant whenever ``sigma2`` is.
    """
    space = spec.space
    n = space.ambient_dim

    def tensor(x):
        x = np.atleast_2d(x)
        k = killing_batch(spec, x)
        gram = np.einsum("nia,nib->nab", k, k)
        proj = np.einsum("nia,nab,njb->nij", k, np.linalg.pinv(gram, hermitian=True), k)
        s = np.asarray(sigma2(x), dtype=float).reshape(-1, 1, 1)
        return np.eye(n)[None] + (s - 1.0) * proj

    return AmbientMetric(space, tensor, name)


def transport_residual(metric: AmbientMetric, spec: ActionSpec, n_samples: int = 200, seed=0) -> float:
    """``max |G_{gx}(gX, gY) - G_x(X, Y)|`` over sampled points, tangent vectors and group elements."""
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        x = spec.space.sampler(rng)
        a, b = random_tangent_pair(spec.space, x, rng)
        g = haar_sample(spec.group, rng)
        m = action_matrix(spec, g)
        lhs = metric.inner(m @ x, m @ a, m @ b)
        worst = max(worst, abs(lhs - metric.inner(x, a, b)))
    return worst


# ---------------------------------------------------------------- connections


def adjoint_coords(tag: str, g_matrix, coords) -> np.ndarray:
    """Coordinates of ``Ad_g U`` in the Q-orthonormal basis."""
    basis = _basis_arrays(tag)
    u = sum(c * b for c, b in zip(coords, basis))
    if is_quaternionic(tag):
        a = qmatmul(qmatmul(g_matrix, u), qconjT(g_matrix))
        return np.array([float(np.sum(a * b)) for b in basis])
    a = g_matrix @ u @ np.conj(g_matrix).T
    return np.array([float(np.real(np.sum(np.conj(b) * a))) for b in basis])


@dataclass
class ConnectionForm:
    """Algebra-valued 1-form ``omega_x(X) = matrix(x) @ X`` (coordinates in the Q-orthonormal basis)."""

    action: ActionSpec
    matrix: Callable[[np.ndarray], np.ndarray]
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __call__(self, x, v) -> np.ndarray:
        return self.matrix(np.asarray(x, dtype=float)) @ np.asarray(v, dtype=float)

    def fundamental_residual(self, n_samples: int = 500, seed=0) -> float:
        rng = _rng(seed)
        worst = 0.0
        for _ in range(n_samples):
            x = self.action.space.sampler(rng)
            k = killing_batch(self.action, x)[0]
            worst = max(worst, float(np.abs(self.matrix(x) @ k - np.eye(k.shape[1])).max()))
        return worst

    def equivariance_residual(self, n_samples: int = 500, seed=0) -> float:
        """``omega_{gx}(gX) = Ad_g omega_x(X)`` for the principal action written as a left action."""
        rng = _rng(seed)
        worst = 0.0
        for _ in range(n_samples):
            x = self.action.space.sampler(rng)
            a, _ = random_tangent_pair(self.action.space, x, rng)
            g = haar_sample(self.action.group, rng)
            m = action_matrix(self.action, g)
            lhs = self(m @ x, m @ a)
            rhs = adjoint_coords(self.action.group, g.matrix, self(x, a))
            worst = max(worst, float(np.abs(lhs - rhs).max()))
        return worst

    def invariance_residual(self, star: ActionSpec, n_samples: int = 500, seed=0) -> float:
        """``omega_{rx}(rX) = omega_x(X)`` for a commuting action ``star``."""
        rng = _rng(seed)
        worst = 0.0
        for _ in range(n_samples):
            x = self.action.space.sampler(rng)
            a, _ = random_tangent_pair(self.action.space, x, rng)
            a /= np.linalg.norm(a)
            m = action_matrix(star, haar_sample(star.group, rng))
            worst = max(worst, float(np.abs(self(m @ x, m @ a) - self(x, a)).max()))
        return worst


def mechanical_connection(metric: AmbientMetric, spec: ActionSpec, cond_max: float = 1e8) -> ConnectionForm:
    """``omega_x(X) = P^{-1} K^T G X`` with orbit Gram ``P = K^T G K``: metric-orthogonal projection onto the orbit."""

    def matrix(x):
        x = np.asarray(x, dtype=float)
        k = killing_batch(spec, x)
        g = metric.tensor(np.atleast_2d(x))
        kg = np.einsum("nia,nij->naj", k, g)
        p = _sym(kg @ k)
        if np.linalg.cond(p).max() > cond_max:
            raise NotFreeError("the action is not free at this point")
        out = np.linalg.solve(p, kg)
        return out if x.ndim == 2 else out[0]

    return ConnectionForm(spec, matrix, f"mechanical:{metric.name}", {"batched": True})


def average_connection(omega0: ConnectionForm, star: ActionSpec, n_mc: int, seed=0) -> ConnectionForm:
    """Monte Carlo average of ``(omega0)_{rx}(rX)`` over ``n_mc`` Haar samples ``r`` of the star group."""
    rng = _rng(seed)
    mats = [action_matrix(star, haar_sample(star.group, rng)) for _ in range(n_mc)]

    stack = np.array(mats)

    def matrix(x):
        if omega0.meta.get("batched"):
            return np.einsum("nkj,nji->ki", omega0.matrix(stack @ x), stack) / n_mc
        return sum(omega0.matrix(m @ x) @ m for m in mats) / n_mc

    return ConnectionForm(omega0.action, matrix, f"average:{omega0.name}", {"n_mc": n_mc})


# ---------------------------------------------------------------- submersions


@dataclass
class Submersion:
    """Quotient map by a free isometric action, with any (not necessarily smooth) section."""

    total: AmbientMetric
    action: ActionSpec
    proj: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]  # (n_base, n_total) matrix of d proj
    lift: Callable[[np.ndarray], np.ndarray]
    base: Space
    name: str = ""

    def vertical(self, x) -> np.ndarray:
        return killing_batch(self.action, x)[0]

    def horizontal_projection(self, x) -> np.ndarray:
        """Matrix of the g-orthogonal projection of ambient tangent vectors onto horizontal vectors."""
        x = np.asarray(x, dtype=float)
        k = self.vertical(x)
        g = self.total.matrix(x)
        tb = self.total.space.tangent_basis(x)
        pt = tb.T @ tb
        p = _sym(k.T @ g @ k)
        return (np.eye(x.size) - k @ np.linalg.solve(p, k.T @ g)) @ pt

    def vertical_part(self, x, v) -> np.ndarray:
        k = self.vertical(x)
        g = self.total.matrix(x)
        return k @ np.linalg.solve(_sym(k.T @ g @ k), k.T @ g @ v)

    def horizontal_frame(self, x) -> np.ndarray:
        """Columns: a g-orthonormal basis of the horizontal space."""
        x = np.asarray(x, dtype=float)
        g = self.total.matrix(x)
        tb = self.total.space.tangent_basis(x).T
        h = self.horizontal_projection(x) @ tb
        u, s, _ = np.linalg.svd(h)
        basis = u[:, : int(np.sum(s > 1e-8 * s[0]))]
        w = np.linalg.cholesky(_sym(basis.T @ g @ basis))
        return basis @ np.linalg.inv(w).T

    def lift_matrix(self, x) -> np.ndarray:
        """Horizontal lift ``L`` at ``x``: ``d proj L = 1`` on the base tangent space."""
        hb = self.horizontal_frame(x)
        m = self.jac(x) @ hb
        return hb @ np.linalg.pinv(m)


def quotient_metric(sub: Submersion) -> AmbientMetric:
    """Base metric making ``sub.proj`` a Riemannian submersion, evaluated at ``sub.lift(b)``."""
    nb = sub.base.ambient_dim

    def tensor(b):
        out = []
        for pt in np.atleast_2d(b):
            x = sub.lift(pt)
            lm = sub.lift_matrix(x)
            out.append(_sym(lm.T @ sub.total.matrix(x) @ lm))
        return np.array(out).reshape(-1, nb, nb)

    return AmbientMetric(sub.base, tensor, f"quotient:{sub.name}")


def _hopf_poly(z):
    z = np.atleast_2d(z)
    x, y = z[:, :4], z[:, 4:]
    return np.concatenate([np.sum(x * x, 1, keepdims=True) - np.sum(y * y, 1, keepdims=True), 2 * qmul(x, qconj(y))], 1)


_CONJ = np.diag([1.0, -1.0, -1.0, -1.0])


def _hopf_jac(z):
    z = np.asarray(z, dtype=float)
    x, y = z[:4], z[4:]
    j = np.zeros((5, 8))
    j[0, :4], j[0, 4:] = 2 * x, -2 * y
    j[1:, :4] = 2 * right_matrix(qconj(y))
    j[1:, 4:] = 2 * left_matrix(x) @ _CONJ
    return j


def _hopf_lift(b):
    c, w = float(b[0]), np.asarray(b[1:], dtype=float)
    if c >= 0:
        x = np.sqrt((1 + c) / 2)
        return np.concatenate([[x, 0, 0, 0], qconj(w) / (2 * x)])
    y = np.sqrt((1 - c) / 2)
    return np.concatenate([w / (2 * y), [y, 0, 0, 0]])


_CONJ8 = np.kron(np.eye(2), _CONJ)


def hopf_submersion(total: AmbientMetric | None = None, conjugate: bool = False) -> Submersion:
    """``S^7 -> S^4`` quotient by the principal action (or, with ``conjugate``, by the star action)."""
    total = total or round_metric("S7")
    if not conjugate:
        return Submersion(
            total, get_action("hopf-principal-s7"), lambda z: _hopf_poly(z)[0], _hopf_jac, _hopf_lift, get_space("S4"), "hopf"
        )
    return Submersion(
        total,
        get_action("hopf-star-s7"),
        lambda z: _hopf_poly(_CONJ8 @ np.asarray(z, float))[0],
        lambda z: _hopf_jac(_CONJ8 @ np.asarray(z, float)) @ _CONJ8,
        lambda b: _CONJ8 @ _hopf_lift(b),
        get_space("S4"),
        "hopf-conjugate",
    )


def product_submersion() -> Submersion:
    """``S^2 x S^1 -> S^2`` forgetting the circle factor rotated by ``U(1)``."""
    total = round_metric("S2xS1")

    def jac(z):
        j = np.zeros((3, 5))
        j[:, :3] = np.eye(3)
        return j

    return Submersion(
        total,
        get_action("s2xs1-rot"),
        lambda z: np.asarray(z, float)[:3],
        jac,
        lambda b: np.concatenate([b, [1.0, 0.0]]),
        get_space("S2"),
        "product",
    )


def kaluza_klein(base: AmbientMetric, sub: Submersion, omega: ConnectionForm) -> AmbientMetric:
    """``<X, Y> = g_M(d pi X, d pi Y) + Q(omega X, omega Y)`` on the total space of ``sub``."""
    n = sub.total.space.ambient_dim

    def tensor(x):
        out = []
        for z in np.atleast_2d(x):
            j = sub.jac(z)
            w = omega.matrix(z)
            out.append(_sym(j.T @ base.matrix(sub.proj(z)) @ j + w.T @ w))
        return np.array(out).reshape(-1, n, n)

    return AmbientMetric(sub.total.space, tensor, f"kaluza-klein:{base.name}")


def coefficient_residual(a: AmbientMetric, b: AmbientMetric, n_samples: int = 100, seed=0) -> float:
    """Max difference of chart coefficients of two metrics on one space at sampled points."""
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        x = a.space.sampler(rng)
        fa, fb = a.field(x), b.field(x)
        u = rng.uniform(-0.1, 0.1, (3, fa.dim))
        worst = max(worst, float(np.abs(fa.coeffs(u) - fb.coeffs(u)).max()))
    return worst


# ---------------------------------------------------------------- O'Neill


def _retract(space: Space, z):
    if space.id == "S2xS1":
        return np.concatenate([z[:3] / np.linalg.norm(z[:3]), z[3:] / np.linalg.norm(z[3:])])
    return z / np.linalg.norm(z)


def vertical_bracket(sub: Submersion, x, a, b, h: float = 1e-5) -> np.ndarray:
    """Vertical part of ``[A, B]`` at ``x`` for the horizontal extensions of ``a``, ``b``.

    The extension of a vector ``v`` is the horizontal projection of ``v`` at every nearby point.
    """
    space = sub.total.space

    def ext(v):
        return lambda z: sub.horizontal_projection(_retract(space, z)) @ v

    ea, eb = ext(a), ext(b)
    db_a = (eb(x + h * a) - eb(x - h * a)) / (2 * h)
    da_b = (ea(x + h * b) - ea(x - h * b)) / (2 * h)
    return sub.vertical_part(x, db_a - da_b)


def oneill_check(sub: Submersion, x, a, b, base_metric: AmbientMetric | None = None, **kw) -> dict:
    """Compare ``K_base(d pi a, d pi b)`` with ``K_total(a, b) + 3/4 |[A, B]^V|^2 / |a ^ b|^2``."""
    x = np.asarray(x, dtype=float)
    hp = sub.horizontal_projection(x)
    if max(np.abs(hp @ a - a).max(), np.abs(hp @ b - b).max()) > 1e-9 * max(1.0, np.abs(a).max(), np.abs(b).max()):
        raise ValueError("oneill_check needs horizontal vectors")
    kt = sectional_ambient(sub.total, x, a, b, **kw).K
    base_metric = base_metric or quotient_metric(sub)
    j = sub.jac(x)
    kb = sectional_ambient(base_metric, sub.proj(x), j @ a, j @ b, **kw).K
    g = sub.total.matrix(x)
    v = vertical_bracket(sub, x, a, b)
    term = 0.75 * float(v @ g @ v) / wedge_norm2(g, a, b)
    rhs = kt + term
    return {"lhs": kb, "rhs": rhs, "K_total": kt, "bracket_term": term, "residual": abs(kb - rhs)}


def random_horizontal_pair(sub: Submersion, x, rng):
    hb = sub.horizontal_frame(x)
    c = rng.standard_normal((2, hb.shape[1]))
    return hb @ c[0], hb @ c[1]


# ---------------------------------------------------------------- G-G-bundles


@dataclass
class GGBundle:
    """Total space with two commuting free actions and the two quotient maps."""

    pi: Submersion
    pi_star: Submersion

    @property
    def metric(self) -> AmbientMetric:
        return self.pi.total

    def doubly_horizontal(self, x) -> np.ndarray:
        """Columns: a g-orthonormal basis of vectors orthogonal to both orbits."""
        x = np.asarray(x, dtype=float)
        g = self.metric.matrix(x)
        k = np.column_stack([self.pi.vertical(x), self.pi_star.vertical(x)])
        tb = self.metric.space.tangent_basis(x).T
        # solve k^T g v = 0 within the tangent space
        ns = scipy.linalg.null_space(k.T @ g @ tb)
        basis = tb @ ns
        w = np.linalg.cholesky(_sym(basis.T @ g @ basis))
        return basis @ np.linalg.inv(w).T


def hopf_gg_bundle(total: AmbientMetric | None = None) -> GGBundle:
    total = total or round_metric("S7")
    return GGBundle(hopf_submersion(total), hopf_submersion(total, conjugate=True))


def horizontal_lift_isometry_check(bundle: GGBundle, x, v, quotients=None) -> float:
    """``max(| |d pi v|_M - |v| |, | |d pi' v|_M' - |v| |)`` for ``v`` orthogonal to both orbits."""
    x = np.asarray(x, dtype=float)
    g = bundle.metric.matrix(x)
    k = np.column_stack([bundle.pi.vertical(x), bundle.pi_star.vertical(x)])
    nv = np.sqrt(v @ g @ v)
    if np.abs(k.T @ g @ v).max() > 1e-9 * max(1.0, nv):
        raise ValueError("vector is not orthogonal to both orbits")
    qm, qs = quotients or (quotient_metric(bundle.pi), quotient_metric(bundle.pi_star))
    res = 0.0
    for sub, q in ((bundle.pi, qm), (bundle.pi_star, qs)):
        w = sub.jac(x) @ v
        res = max(res, abs(np.sqrt(q.inner(sub.proj(x), w, w)) - nv))
    return float(res)


def geodesic_matching(bundle: GGBundle, x, v, length: float = 0.3, n_steps: int = 64, quotients=None) -> dict:
    """Lengths of the images under both quotient maps of the round geodesic from ``x`` along ``v``.

    Uses the great circle, so the total metric must be round.  ``v`` must be
    orthogonal to both orbits; then both images are horizontal-length curves.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    qm, qs = quotients or (quotient_metric(bundle.pi), quotient_metric(bundle.pi_star))
    s = np.linspace(0.0, length, 2 * n_steps + 1)
    lengths = []
    for sub, q in ((bundle.pi, qm), (bundle.pi_star, qs)):
        speeds = []
        for t in s:
            z = np.cos(t) * x + np.sin(t) * v
            dz = -np.sin(t) * x + np.cos(t) * v
            w = sub.jac(z) @ dz
            speeds.append(np.sqrt(q.inner(sub.proj(z), w, w)))
        lengths.append(float(scipy.integrate.simpson(speeds, x=s)))
    return {"length": length, "length_M": lengths[0], "length_M_star": lengths[1], "residual": abs(lengths[0] - lengths[1])}

