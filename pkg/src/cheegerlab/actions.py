"""Group actions on embedded manifolds.

Every cataloged action is linear in the ambient coordinates and acts by
orthogonal maps, so an action is stored as a pair of functions: ``apply``
for ``(g, x) -> g.x`` and ``apply_d`` for its closed-form differential
``(U, x) -> d/dt|0 exp(tU).x``.  Points are flat real arrays; every action
function broadcasts over leading axes.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .algebra.groups import (
    AlgebraVector,
    GroupElement,
    _rng,
    algebra_basis,
    algebra_dim,
    exp_algebra,
    haar_batch,
    haar_sample,
    parse_group,
    qconjT,
    qmat_identity,
    qmatmul,
)
from .algebra.quaternion import qconj, qmul

ON_MANIFOLD_TOL = 1e-8
ISOTROPY_RTOL = 1e-8


class OffManifoldError(ValueError):
    pass


class UnknownIdError(KeyError):
    pass


# ---------------------------------------------------------------- spaces


@dataclass(frozen=True)
class Space:
    """An embedded manifold given by defining equations ``F(x) = 0``."""

    id: str
    dim: int
    ambient_dim: int
    constraints: Callable[[np.ndarray], np.ndarray]
    differential: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator], np.ndarray]
    description: str = ""

    def residual(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.ambient_dim:
            return np.inf
        return float(np.max(np.abs(self.constraints(x)), initial=0.0))

    def sample(self, seed) -> np.ndarray:
        return self.sampler(_rng(seed))

    def check(self, x, tol: float = ON_MANIFOLD_TOL) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = self.residual(x)
        if not r <= tol:
            raise OffManifoldError(f"point is off {self.id} (defining residual {r:.3g})")
        return x

    def tangency_residual(self, x, v) -> float:
        return float(np.max(np.abs(self.differential(np.asarray(x, float), np.asarray(v, float))), initial=0.0))

    def tangent_basis(self, x) -> np.ndarray:
        """Euclidean-orthonormal basis of ``T_x``, as rows (dim, ambient_dim)."""
        x = np.asarray(x, dtype=float)
        eye = np.eye(self.ambient_dim)
        jac = np.array([self.differential(x, e) for e in eye]).T
        if jac.size == 0:
            return eye
        _, s, vt = np.linalg.svd(jac)
        rank = int(np.sum(s > 1e-10 * max(s.max(), 1.0)))
        return vt[rank:]

    def project_tangent(self, x, v) -> np.ndarray:
        b = self.tangent_basis(x)
        return b.T @ (b @ np.asarray(v, float))


def _sphere_sampler(n_ambient):
    def sample(rng):
        v = rng.standard_normal(n_ambient)
        return v / np.linalg.norm(v)

    def batch(rng, n):
        # same stream as n pointwise draws
        v = rng.standard_normal((n, n_ambient))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    sample.batch = batch
    return sample


def sample_rows(sample, rng, n: int) -> np.ndarray:
    """``n`` draws of a pointwise sampler as rows, using its ``batch`` twin when present."""
    if hasattr(sample, "batch"):
        return sample.batch(rng, n)
    return np.array([sample(rng) for _ in range(n)])


@lru_cache(maxsize=None)
def sphere(k: int) -> Space:
    """Unit sphere ``S^k`` in ``R^{k+1}``."""
    return Space(
        id=f"S{k}",
        dim=k,
        ambient_dim=k + 1,
        constraints=lambda x: np.atleast_1d(np.sum(x * x, axis=-1) - 1.0),
        differential=lambda x, v: np.atleast_1d(2.0 * np.sum(x * v, axis=-1)),
        sampler=_sphere_sampler(k + 1),
        description=f"unit sphere in R^{k + 1}",
    )


def _orthogonal_space(n: int) -> Space:
    def cons(x):
        a = x.reshape(n, n)
        m = a.T @ a - np.eye(n)
        return m[np.triu_indices(n)]

    def diff(x, v):
        a = x.reshape(n, n)
        b = v.reshape(n, n)
        m = a.T @ b + b.T @ a
        return m[np.triu_indices(n)]

    def sample(rng):
        return haar_sample(f"O({n})", rng).matrix.ravel().copy()

    return Space(f"O({n})", n * (n - 1) // 2, n * n, cons, diff, sample, "orthogonal matrices, row-major")


def _c_to_real(z: np.ndarray) -> np.ndarray:
    """Interleave real and imaginary parts along the last axis."""
    return np.stack([z.real, z.imag], axis=-1).reshape(*z.shape[:-1], 2 * z.shape[-1])


def _real_to_c(x: np.ndarray) -> np.ndarray:
    x = x.reshape(*x.shape[:-1], x.shape[-1] // 2, 2)
    return x[..., 0] + 1j * x[..., 1]


def _unitary_space(n: int) -> Space:
    def cmat(x):
        return _real_to_c(x).reshape(n, n)

    def cons(x):
        a = cmat(x)
        m = a.conj().T @ a - np.eye(n)
        iu = np.triu_indices(n)
        return np.concatenate([m.real[iu], m.imag[iu]])

    def diff(x, v):
        a, b = cmat(x), cmat(v)
        m = a.conj().T @ b + b.conj().T @ a
        iu = np.triu_indices(n)
        return np.concatenate([m.real[iu], m.imag[iu]])

    def sample(rng):
        return _c_to_real(haar_sample(f"U({n})", rng).matrix.ravel())

    return Space(f"U({n})", n * n, 2 * n * n, cons, diff, sample, "unitary matrices, row-major, (re, im) interleaved")


def _symplectic_space(n: int) -> Space:
    tag = "Sp2" if n == 2 else f"Sp({n})"

    def cons(x):
        a = x.reshape(n, n, 4)
        m = qmatmul(qconjT(a), a) - qmat_identity(n)
        out = [m[i, i, 0] for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                out.extend(m[i, j])
        return np.array(out)

    def diff(x, v):
        a = x.reshape(n, n, 4)
        b = v.reshape(n, n, 4)
        m = qmatmul(qconjT(a), b) + qmatmul(qconjT(b), a)
        out = [m[i, i, 0] for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                out.extend(m[i, j])
        return np.array(out)

    def sample(rng):
        return haar_sample(tag, rng).matrix.ravel().copy()

    return Space(tag, n * (2 * n + 1), 4 * n * n, cons, diff, sample, "quaternionic unitary matrices, row-major")


def _torus_space() -> Space:
    def cons(x):
        return np.array([x[0] ** 2 + x[1] ** 2 - 1.0, x[2] ** 2 + x[3] ** 2 - 1.0])

    def diff(x, v):
        return np.array([2 * (x[0] * v[0] + x[1] * v[1]), 2 * (x[2] * v[2] + x[3] * v[3])])

    def sample(rng):
        a, b = rng.uniform(0, 2 * np.pi, 2)
        return np.array([np.cos(a), np.sin(a), np.cos(b), np.sin(b)])

    return Space("T2", 2, 4, cons, diff, sample, "flat Clifford torus in R^4")


def _s2xs1_space() -> Space:
    def cons(x):
        return np.array([x[:3] @ x[:3] - 1.0, x[3:] @ x[3:] - 1.0])

    def diff(x, v):
        return np.array([2 * x[:3] @ v[:3], 2 * x[3:] @ v[3:]])

    def sample(rng):
        a = rng.standard_normal(3)
        b = rng.uniform(0, 2 * np.pi)
        return np.concatenate([a / np.linalg.norm(a), [np.cos(b), np.sin(b)]])

    return Space("S2xS1", 3, 5, cons, diff, sample, "product of the unit 2-sphere and the unit circle")


def _disc_chart_space() -> Space:
    """``D^4 x S^3``, one chart of a linear S^3-bundle over S^4."""

    def cons(x):
        q = x[..., 4:]
        return np.atleast_1d(np.sum(q * q, axis=-1) - 1.0)

    def diff(x, v):
        return np.atleast_1d(2.0 * np.sum(x[..., 4:] * v[..., 4:], axis=-1))

    def sample(rng):
        d = rng.standard_normal(4)
        d *= 0.999 * rng.uniform() ** 0.25 / np.linalg.norm(d)
        q = rng.standard_normal(4)
        return np.concatenate([d, q / np.linalg.norm(q)])

    return Space("D4xS3", 7, 8, cons, diff, sample, "open unit disc in H times unit quaternions")


_SPACE_RE = re.compile(r"^(?:S(\d+)|(O|U|Sp)\((\d+)\)|Sp2|T2|S2xS1|D4xS3)$")


@lru_cache(maxsize=None)
def get_space(space_id: str) -> Space:
    m = _SPACE_RE.match(space_id)
    if not m:
        raise UnknownIdError(f"unknown space {space_id!r}")
    if m.group(1):
        return sphere(int(m.group(1)))
    if space_id == "Sp2":
        return _symplectic_space(2)
    if space_id == "T2":
        return _torus_space()
    if space_id == "S2xS1":
        return _s2xs1_space()
    if space_id == "D4xS3":
        return _disc_chart_space()
    family, n = m.group(2), int(m.group(3))
    if family == "O":
        return _orthogonal_space(n)
    if family == "U":
        return _unitary_space(n)
    return _symplectic_space(n)


# ---------------------------------------------------------------- block actions
#
# A block layout splits the ambient vector into consecutive pieces, each
# transformed by one of:
#   ("fix", w)            identity on w coordinates
#   ("q", a, b)           quaternion v -> alpha v conj(beta), alpha = factor a (None = 1)
#   ("im", a)             imaginary quaternion v -> q v conj(q), q = factor a
#   ("vec", n)            v -> g v for the real matrix group O(n) on R^n
#   ("cvec", n)           v -> g v for U(n) on C^n (interleaved re/im)
#   ("hvec", n)           v -> g v for Sp(n) on H^n
#   ("rot", w)            U(1) rotation of the first complex coordinate, identity on the rest


def _factors(g_matrix: np.ndarray, group: str):
    """Block factors of a group matrix, or of a stack of them (leading axis)."""
    fam, n = parse_group(group)
    if fam == "S3":
        return [g_matrix[..., 0, 0, :]]
    if fam == "S3xS3":
        return [g_matrix[..., 0, 0, :], g_matrix[..., 1, 1, :]]
    return [g_matrix]


def _block_width(block) -> int:
    kind = block[0]
    if kind == "fix":
        return block[1]
    if kind == "q":
        return 4
    if kind == "im":
        return 3
    if kind == "vec":
        return block[1]
    if kind == "cvec":
        return 2 * block[1]
    if kind == "hvec":
        return 4 * block[1]
    if kind == "rot":
        return block[1]
    raise ValueError(kind)


def _embed_im(v):
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)


def _realify_complex(a: np.ndarray) -> np.ndarray:
    """Real matrix of ``z -> a z`` in interleaved coordinates (last two axes)."""
    n = a.shape[-1]
    out = np.zeros(a.shape[:-2] + (2 * n, 2 * n))
    out[..., 0::2, 0::2] = a.real
    out[..., 0::2, 1::2] = -a.imag
    out[..., 1::2, 0::2] = a.imag
    out[..., 1::2, 1::2] = a.real
    return out


def _hmatvec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    n = a.shape[-2]
    vv = v.reshape(*v.shape[:-1], n, 4)
    out = np.zeros_like(vv)
    for i in range(n):
        for j in range(n):
            out[..., i, :] += qmul(a[..., i, j, :], vv[..., j, :])
    return out.reshape(v.shape)


def _apply_blocks(blocks, facs, x, derivative: bool):
    out = np.empty_like(x)
    pos = 0
    for block in blocks:
        w = _block_width(block)
        v = x[..., pos : pos + w]
        kind = block[0]
        if kind == "fix":
            r = np.zeros_like(v) if derivative else v
        elif kind == "q":
            a, b = block[1], block[2]
            if derivative:
                r = np.zeros_like(v)
                if a is not None:
                    r = r + qmul(facs[a], v)
                if b is not None:
                    r = r - qmul(v, facs[b])
            else:
                r = v
                if a is not None:
                    r = qmul(facs[a], r)
                if b is not None:
                    r = qmul(r, qconj(facs[b]))
        elif kind == "im":
            q = facs[block[1]]
            v4 = _embed_im(v)
            if derivative:
                r = (qmul(q, v4) - qmul(v4, q))[..., 1:]
            else:
                r = qmul(qmul(q, v4), qconj(q))[..., 1:]
        elif kind == "vec":
            r = np.einsum("...ij,...j->...i", facs[0], v)
        elif kind == "cvec":
            r = np.einsum("...ij,...j->...i", _realify_complex(facs[0]), v)
        elif kind == "hvec":
            r = _hmatvec(facs[0], v)
        elif kind == "rot":
            rot = _realify_complex(facs[0])
            r = v.copy() if not derivative else np.zeros_like(v)
            r[..., :2] = np.einsum("...ij,...j->...i", rot, v[..., :2])
        else:
            raise ValueError(kind)
        out[..., pos : pos + w] = r
        pos += w
    return out


# ---------------------------------------------------------------- action specs


@dataclass(frozen=True)
class ActionSpec:
    id: str
    group: str
    space: Space
    apply: Callable[[np.ndarray, np.ndarray], np.ndarray]
    apply_d: Callable[[np.ndarray, np.ndarray], np.ndarray]
    anchor: str = ""
    fixed_points: tuple = ()
    finite_orbit_pi1: bool = True
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dim_group(self) -> int:
        return algebra_dim(self.group)


def block_action(action_id, group, space_id, blocks, anchor="", fixed_points=(), finite_orbit_pi1=True):
    space = get_space(space_id)
    if sum(_block_width(b) for b in blocks) != space.ambient_dim:
        raise ValueError(f"{action_id}: block widths do not match {space_id}")
    return ActionSpec(
        id=action_id,
        group=group,
        space=space,
        apply=lambda g, x: _apply_blocks(blocks, _factors(g, group), x, False),
        apply_d=lambda u, x: _apply_blocks(blocks, _factors(u, group), x, True),
        anchor=anchor,
        fixed_points=tuple(np.asarray(p, float) for p in fixed_points),
        finite_orbit_pi1=finite_orbit_pi1,
        meta={"blocks": blocks},
    )


def apply_rows(spec: ActionSpec, gs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``g_n . x_n`` for stacked group matrices ``gs`` and points ``x`` (rows)."""
    blocks = spec.meta.get("blocks")
    if blocks is not None:
        return _apply_blocks(blocks, _factors(gs, spec.group), x, False)
    if "rows" in spec.meta:
        return spec.meta["rows"](gs, x)
    return np.array([spec.apply(g, r) for g, r in zip(gs, x)])


def _left_matrix_action(action_id, group, space_id, n, embed, anchor, side="left"):
    """``A -> s(g) A`` (or ``A s(g)^{-1}``) on a matrix space, ``s`` a block embedding."""
    fam, _ = parse_group(space_id)

    def act(g, x, deriv):
        s = embed(g, deriv)
        if fam == "Sp":
            a = x.reshape(*x.shape[:-1], n, n, 4)
            if side == "left":
                r = np.zeros_like(a)
                for i in range(n):
                    for j in range(n):
                        for k in range(n):
                            r[..., i, k, :] += qmul(s[i, j], a[..., j, k, :])
            else:
                sc = qconjT(s) if not deriv else -qconjT(s)
                r = np.zeros_like(a)
                for i in range(n):
                    for j in range(n):
                        for k in range(n):
                            r[..., i, k, :] += qmul(a[..., i, j, :], sc[j, k])
            return r.reshape(x.shape)
        if fam == "O":
            a = x.reshape(*x.shape[:-1], n, n)
            r = s @ a if side == "left" else a @ s.T
            return r.reshape(x.shape)
        a = _real_to_c(x).reshape(*x.shape[:-1], n, n)
        r = s @ a if side == "left" else a @ s.conj().T
        return _c_to_real(r.reshape(*x.shape[:-1], n * n))

    return ActionSpec(
        id=action_id,
        group=group,
        space=get_space(space_id),
        apply=lambda g, x: act(g, x, False),
        apply_d=lambda u, x: act(u, x, True),
        anchor=anchor,
    )


def _gm_star_sp2():
    def act(q, x, deriv):
        a = x.reshape(*x.shape[:-1], 2, 2, 4)
        r = np.empty_like(a)
        for row in range(2):
            m0 = a[..., row, 0, :]
            m1 = a[..., row, 1, :]
            if deriv:
                r[..., row, 0, :] = qmul(q, m0) - qmul(m0, q)
            else:
                r[..., row, 0, :] = qmul(qmul(q, m0), qconj(q))
            r[..., row, 1, :] = qmul(q, m1)
        return r.reshape(x.shape)

    return ActionSpec(
        "gm-star-sp2",
        "S3",
        get_space("Sp2"),
        lambda g, x: act(g[0, 0], x, False),
        lambda u, x: act(u[0, 0], x, True),
        anchor="q.[[a,c],[b,d]] = [[q a q^-1, q c], [q b q^-1, q d]]",
    )


def _gm_principal_sp2():
    def act(q, x, deriv):
        a = x.reshape(*x.shape[:-1], 2, 2, 4)
        r = np.zeros_like(a) if deriv else a.copy()
        for row in range(2):
            m1 = a[..., row, 1, :]
            r[..., row, 1, :] = -qmul(m1, q) if deriv else qmul(m1, qconj(q))
        return r.reshape(x.shape)

    return ActionSpec(
        "gm-principal-sp2",
        "S3",
        get_space("Sp2"),
        lambda g, x: act(g[0, 0], x, False),
        lambda u, x: act(u[0, 0], x, True),
        anchor="right multiplication of the second column by q^-1; projection to the first column",
    )


def _conj_group_action(action_id, group, target, rep, drep, anchor):
    """``A -> s(g) A s(g)^{-1}`` on a matrix group ``target`` through a homomorphism ``s``."""
    fam, n = parse_group(target)

    def act(g, x, deriv):
        s = drep(g) if deriv else rep(g)
        if fam == "Sp" or fam == "S3":
            a = x.reshape(*x.shape[:-1], n, n, 4)
            if deriv:
                r = _qmm(s, a) - _qmm_right(a, s)
            else:
                r = _qmm_right(_qmm(s, a), qconjT(s))
            return r.reshape(x.shape)
        if fam == "O":
            a = x.reshape(*x.shape[:-1], n, n)
            r = s @ a - a @ s if deriv else s @ a @ s.T
            return r.reshape(x.shape)
        a = _real_to_c(x).reshape(*x.shape[:-1], n, n)
        r = s @ a - a @ s if deriv else s @ a @ s.conj().T
        return _c_to_real(r.reshape(*x.shape[:-1], n * n))

    def rows(gs, x):
        # one representation matrix per row; quaternionic targets fall back to the pointwise form
        s = rep(gs)
        if fam == "O":
            a = x.reshape(len(x), n, n)
            return (s @ a @ np.swapaxes(s, -1, -2)).reshape(x.shape)
        a = _real_to_c(x).reshape(len(x), n, n)
        return _c_to_real((s @ a @ np.swapaxes(s, -1, -2).conj()).reshape(len(x), n * n))

    space = get_space("S3" if fam == "S3" else target)
    return ActionSpec(
        action_id,
        group,
        space,
        lambda g, x: act(g, x, False),
        lambda u, x: act(u, x, True),
        anchor=anchor,
        meta={"rows": rows} if fam in ("O", "U") else {},
    )


def _qmm(s, a):
    """Constant quaternion matrix times a batch of quaternion matrices."""
    n = s.shape[0]
    r = np.zeros_like(a)
    for i in range(n):
        for j in range(n):
            r[..., i, :, :] += qmul(s[i, j], a[..., j, :, :])
    return r


def _qmm_right(a, s):
    n = s.shape[0]
    r = np.zeros_like(a)
    for j in range(n):
        for k in range(n):
            r[..., :, k, :] += qmul(a[..., :, j, :], s[j, k])
    return r


# ---------------------------------------------------------------- representations used by conjugation targets


def left_rep(q):
    from .algebra.quaternion import left_matrix

    return left_matrix(q)


def right_rep(q):
    """Matrix of ``v -> v conj(q)``; a homomorphism on unit quaternions."""
    from .algebra.quaternion import right_matrix

    return right_matrix(qconj(q))


def ad_rep(q):
    """Matrix of ``v -> q v conj(q)`` on H."""
    return left_rep(q) @ right_rep(q)


def rho1(q):
    """3x3 rotation of Im H induced by ``v -> q v conj(q)``."""
    return ad_rep(q)[..., 1:, 1:]


def i5_rep(q):
    """``rho_1 + 2 rho_0`` as a 5x5 matrix (rotation of the last three coordinates)."""
    r = rho1(q)
    m = np.broadcast_to(np.eye(5), r.shape[:-2] + (5, 5)).copy()
    m[..., 2:, 2:] = r
    return m


def s_embed(r):
    """Upper-left unit embedding ``O(k) -> O(k+1)``."""
    k = r.shape[-1]
    m = np.broadcast_to(np.eye(k + 1, dtype=r.dtype), r.shape[:-2] + (k + 1, k + 1)).copy()
    m[..., 1:, 1:] = r
    return m


def _d_left(u):
    from .algebra.quaternion import left_matrix

    return left_matrix(u)


def _d_right(u):
    from .algebra.quaternion import right_matrix

    return -right_matrix(u)


def _d_rho1(u):
    m = _d_left(u) + _d_right(u)
    return m[1:, 1:]


def _d_i5(u):
    m = np.zeros((5, 5))
    m[2:, 2:] = _d_rho1(u)
    return m


def _d_s_embed(u):
    k = u.shape[0]
    m = np.zeros((k + 1, k + 1), dtype=u.dtype)
    m[1:, 1:] = u
    return m


# ---------------------------------------------------------------- catalog


_PARAMETRIC = {
    "biaxial": re.compile(r"^biaxial-o\((\d+)\)-s\((\d+)\)$"),
    "sn": re.compile(r"^s\((\d+)\)-o\((\d+)\)$"),
    "ostar": re.compile(r"^o\((\d+)\)-star$"),
    "ubiaxial": re.compile(r"^biaxial-u\((\d+)\)-s\((\d+)\)$"),
    "usph": re.compile(r"^s\((\d+)\)-u\((\d+)\)$"),
    "cdom": re.compile(r"^tauc-u\((\d+)\)-s\((\d+)\)$"),
    "hdom": re.compile(r"^tauh-sp\((\d+)\)-s\((\d+)\)$"),
    "oconj": re.compile(r"^o\((\d+)\)-conj$"),
    "uconj": re.compile(r"^u\((\d+)\)-conj$"),
    "spconj": re.compile(r"^sp\((\d+)\)-conj$"),
    "sconj": re.compile(r"^o\((\d+)\)-conj-s$"),
    "ostd": re.compile(r"^o\((\d+)\)-s\((\d+)\)$"),
    "hsph": re.compile(r"^s\((\d+)\)-sp\((\d+)\)$"),
    "rho8m5": re.compile(r"^rho-sp\((\d+)\)-s\((\d+)\)$"),
}


def _fixed(spec_ambient, index=0, sign=1.0):
    p = np.zeros(spec_ambient)
    p[index] = sign
    return p


_STATIC: dict[str, Callable[[], ActionSpec]] = {
    "hopf-principal-s7": lambda: block_action(
        "hopf-principal-s7", "S3", "S7", [("q", None, 0), ("q", None, 0)],
        anchor="(x, y) s^-1 = (x conj(s), y conj(s))",
    ),
    "hopf-star-s7": lambda: block_action(
        "hopf-star-s7", "S3", "S7", [("q", 0, None), ("q", 0, None)], anchor="r.(x, y) = (r x, r y)"
    ),
    "gm-s7": lambda: block_action(
        "gm-s7", "S3", "S7", [("q", 0, 0), ("q", 0, 0)],
        anchor="q.(x, y) = (q x conj(q), q y conj(q))", fixed_points=[_fixed(8, 0), _fixed(8, 0, -1.0)],
    ),
    "s4-conj": lambda: block_action(
        "s4-conj", "S3", "S4", [("fix", 1), ("q", 0, 0)], anchor="q.(l, x) = (l, q x conj(q))",
        fixed_points=[_fixed(5, 0), _fixed(5, 1)],
    ),
    "s4-left": lambda: block_action(
        "s4-left", "S3", "S4", [("fix", 1), ("q", 0, None)], anchor="q.(l, x) = (l, q x)",
        fixed_points=[_fixed(5, 0), _fixed(5, 0, -1.0)],
    ),
    "s3-conj": lambda: block_action(
        "s3-conj", "S3", "S3", [("q", 0, 0)], anchor="q.x = q x conj(q)", fixed_points=[_fixed(4, 0)]
    ),
    "s3-conj-first": lambda: block_action(
        "s3-conj-first", "S3xS3", "S3", [("q", 0, 0)], anchor="(q, r).x = q x conj(q)"
    ),
    "s6-gm": lambda: block_action(
        "s6-gm", "S3", "S6", [("im", 0), ("q", 0, 0)],
        anchor="restriction of the Gromoll-Meyer sphere action to Re x = 0", fixed_points=[_fixed(7, 3)],
    ),
    "s6-so4": lambda: block_action(
        "s6-so4", "S3xS3", "S6", [("im", 1), ("q", 0, 1)], anchor="(q, r).(p, w) = (r p conj(r), q w conj(r))"
    ),
    "s8-rho8": lambda: block_action(
        "s8-rho8", "S3", "S8", [("fix", 1), ("q", 0, None), ("q", 0, 0)],
        anchor="q.(l, x, y) = (l, q x, q y conj(q))", fixed_points=[_fixed(9, 0), _fixed(9, 0, -1.0)],
    ),
    "s10-I": lambda: block_action(
        "s10-I", "S3", "S10", [("fix", 3), ("q", 0, None), ("q", 0, 0)],
        anchor="q.(p, w, x) = (p, q w, q x conj(q))", fixed_points=[_fixed(11, 0)],
    ),
    "s10-II": lambda: block_action(
        "s10-II", "S3", "S10", [("im", 0), ("q", 0, 0), ("q", 0, 0)],
        anchor="q.(p, w, x) = (q p conj(q), q w conj(q), q x conj(q))", fixed_points=[_fixed(11, 3)],
    ),
    "s10-so4": lambda: block_action(
        "s10-so4", "S3xS3", "S10", [("im", 1), ("q", 0, 1), ("q", 0, 0)],
        anchor="(q, r).(p, w, x) = (r p conj(r), q w conj(r), q x conj(q))",
    ),
    "gm-star-sp2": _gm_star_sp2,
    "gm-principal-sp2": _gm_principal_sp2,
    "milnor-pk-star": lambda: block_action(
        "milnor-pk-star", "S3", "D4xS3", [("q", 0, 0), ("q", None, 0)], anchor="r(x, q) = (r x conj(r), q conj(r))"
    ),
    "milnor-pr": lambda: block_action(
        "milnor-pr", "S3", "D4xS3", [("q", 0, 0), ("q", 0, 0)], anchor="r.(x, q) = (r x conj(r), r q conj(r))"
    ),
    "t2-circle": lambda: block_action(
        "t2-circle", "U(1)", "T2", [("rot", 2), ("fix", 2)], anchor="rotation of the first circle factor",
        finite_orbit_pi1=False,
    ),
    "s2xs1-rot": lambda: block_action(
        "s2xs1-rot", "U(1)", "S2xS1", [("fix", 3), ("rot", 2)], anchor="rotation of the circle factor",
        finite_orbit_pi1=False,
    ),
    "o4-conj-left": lambda: _conj_group_action(
        "o4-conj-left", "S3", "O(4)", lambda g: left_rep(g[..., 0, 0, :]), lambda u: _d_left(u[0, 0]),
        "A -> L(q) A L(q)^-1",
    ),
    "o4-conj-right": lambda: _conj_group_action(
        "o4-conj-right", "S3", "O(4)", lambda g: right_rep(g[..., 0, 0, :]), lambda u: _d_right(u[0, 0]),
        "A -> R(q) A R(q)^-1 with R(q) v = v conj(q)",
    ),
    "o4-conj-ad": lambda: _conj_group_action(
        "o4-conj-ad", "S3", "O(4)", lambda g: ad_rep(g[..., 0, 0, :]), lambda u: _d_left(u[0, 0]) + _d_right(u[0, 0]),
        "A -> C(q) A C(q)^-1 with C(q) v = q v conj(q)",
    ),
    "o5-conj-i5": lambda: _conj_group_action(
        "o5-conj-i5", "S3", "O(5)", lambda g: i5_rep(g[..., 0, 0, :]), lambda u: _d_i5(u[0, 0]),
        "A -> I5(q) A I5(q)^-1",
    ),
}


def _parametric(action_id: str) -> ActionSpec | None:
    m = _PARAMETRIC["biaxial"].match(action_id)
    if m:
        n, k = int(m.group(1)), int(m.group(2))
        if k != 2 * n - 1:
            raise UnknownIdError(action_id)
        return block_action(action_id, f"O({n})", f"S{k}", [("vec", n), ("vec", n)], anchor="r.(x, y) = (r x, r y)")
    m = _PARAMETRIC["sn"].match(action_id)
    if m:
        k, n = int(m.group(1)), int(m.group(2))
        if k != n:
            raise UnknownIdError(action_id)
        return block_action(
            action_id, f"O({n})", f"S{n}", [("fix", 1), ("vec", n)], anchor="r.x = s(r) x",
            fixed_points=[_fixed(n + 1, 0), _fixed(n + 1, 0, -1.0)],
        )
    m = _PARAMETRIC["ostar"].match(action_id)
    if m:
        n1 = int(m.group(1))
        g = f"O({n1 - 1})"
        return _left_matrix_action(
            action_id, g, f"O({n1})", n1, lambda r, d: (_d_s_embed if d else s_embed)(r), "r * A = s(r) A"
        )
    m = _PARAMETRIC["ubiaxial"].match(action_id)
    if m:
        mm, k = int(m.group(1)), int(m.group(2))
        if k != 4 * mm + 1:
            raise UnknownIdError(action_id)
        return block_action(
            action_id, f"U({mm})", f"S{k}", [("fix", 1), ("cvec", mm), ("fix", 1), ("cvec", mm)],
            anchor="r.(y1, z1, y2, z2) = (y1, r z1, y2, r z2)",
        )
    m = _PARAMETRIC["usph"].match(action_id)
    if m:
        k, mm = int(m.group(1)), int(m.group(2))
        if k != 2 * mm + 1:
            raise UnknownIdError(action_id)
        return block_action(
            action_id, f"U({mm})", f"S{k}", [("fix", 2), ("cvec", mm)], anchor="r.(z0, z) = (z0, r z)",
            fixed_points=[_fixed(k + 1, 0), _fixed(k + 1, 0, -1.0)],
        )
    m = _PARAMETRIC["cdom"].match(action_id)
    if m:
        mm, k = int(m.group(1)), int(m.group(2))
        if k != 2 * mm:
            raise UnknownIdError(action_id)
        return block_action(action_id, f"U({mm})", f"S{k}", [("fix", 1), ("cvec", mm)], anchor="r.(y, z) = (y, r z)")
    m = _PARAMETRIC["hdom"].match(action_id)
    if m:
        mm, k = int(m.group(1)), int(m.group(2))
        if k != 4 * mm + 2:
            raise UnknownIdError(action_id)
        g = "Sp2" if mm == 2 else f"Sp({mm})"
        return block_action(action_id, g, f"S{k}", [("fix", 3), ("hvec", mm)], anchor="r.(y, z) = (y, r z)")
    m = _PARAMETRIC["ostd"].match(action_id)
    if m:
        n, k = int(m.group(1)), int(m.group(2))
        if k != n - 1:
            raise UnknownIdError(action_id)
        return block_action(action_id, f"O({n})", f"S{k}", [("vec", n)], anchor="r.x = r x")
    m = _PARAMETRIC["hsph"].match(action_id)
    if m:
        k, mm = int(m.group(1)), int(m.group(2))
        if k != 4 * mm + 3:
            raise UnknownIdError(action_id)
        g = "Sp2" if mm == 2 else f"Sp({mm})"
        return block_action(
            action_id, g, f"S{k}", [("fix", 4), ("hvec", mm)], anchor="r.(z0, z) = (z0, r z)",
            fixed_points=[_fixed(k + 1, 0), _fixed(k + 1, 0, -1.0)],
        )
    m = _PARAMETRIC["rho8m5"].match(action_id)
    if m:
        mm, k = int(m.group(1)), int(m.group(2))
        if k != 8 * mm + 5:
            raise UnknownIdError(action_id)
        g = "Sp2" if mm == 2 else f"Sp({mm})"
        return block_action(
            action_id, g, f"S{k}", [("fix", 1), ("hvec", mm), ("hvec", mm), ("fix", 5)],
            anchor="r.(l, z1, z2, u) = (l, r z1, r z2, u)", fixed_points=[_fixed(k + 1, 0)],
        )
    m = _PARAMETRIC["oconj"].match(action_id)
    if m:
        n = int(m.group(1))
        return _conj_group_action(action_id, f"O({n})", f"O({n})", lambda g: g, lambda u: u, "A -> r A r^-1")
    m = _PARAMETRIC["uconj"].match(action_id)
    if m:
        n = int(m.group(1))
        return _conj_group_action(action_id, f"U({n})", f"U({n})", lambda g: g, lambda u: u, "A -> r A r^-1")
    m = _PARAMETRIC["spconj"].match(action_id)
    if m:
        n = int(m.group(1))
        g = "Sp2" if n == 2 else f"Sp({n})"
        return _conj_group_action(action_id, g, f"Sp({n})", lambda g: g, lambda u: u, "A -> r A r^-1")
    m = _PARAMETRIC["sconj"].match(action_id)
    if m:
        n1 = int(m.group(1))
        return _conj_group_action(
            action_id, f"O({n1 - 1})", f"O({n1})", s_embed, _d_s_embed, "A -> s(r) A s(r)^-1"
        )
    return None


@lru_cache(maxsize=None)
def get_action(action_id: str) -> ActionSpec:
    if action_id in _STATIC:
        return _STATIC[action_id]()
    spec = _parametric(action_id)
    if spec is None:
        raise UnknownIdError(f"unknown action {action_id!r}")
    return spec


PARAMETRIC_FAMILIES = (
    "biaxial-o(n)-s(2n-1)",
    "s(n)-o(n)",
    "o(n+1)-star",
    "biaxial-u(m)-s(4m+1)",
    "s(2m+1)-u(m)",
    "tauc-u(m)-s(2m)",
    "tauh-sp(m)-s(4m+2)",
    "o(n)-conj",
    "u(m)-conj",
    "sp(m)-conj",
    "o(n+1)-conj-s",
    "o(n)-s(n-1)",
    "s(4m+3)-sp(m)",
    "rho-sp(m)-s(8m+5)",
)


def catalog() -> list[str]:
    """Static action ids followed by the parametric family patterns."""
    return sorted(_STATIC) + list(PARAMETRIC_FAMILIES)


# ---------------------------------------------------------------- operations


def act(spec: ActionSpec, g: GroupElement, x, check: bool = True) -> np.ndarray:
    if g.group != spec.group:
        raise ValueError(f"{spec.id} needs a {spec.group} element, got {g.group}")
    x = np.asarray(x, dtype=float)
    if check:
        spec.space.check(x)
    return spec.apply(g.matrix, x)


@dataclass(frozen=True)
class TangentVector:
    base: np.ndarray
    vector: np.ndarray

    def tangency_residual(self, space: Space) -> float:
        return space.tangency_residual(self.base, self.vector)


def killing_field(spec: ActionSpec, u: AlgebraVector, p) -> TangentVector:
    """Action field ``U*_p = d/dt|0 exp(tU).p`` in closed form."""
    p = np.asarray(p, dtype=float)
    return TangentVector(p, spec.apply_d(u.matrix, p))


def killing_field_fd(spec: ActionSpec, u: AlgebraVector, p, h: float = 1e-5) -> np.ndarray:
    """Central-difference cross-check of :func:`killing_field`."""
    p = np.asarray(p, dtype=float)
    plus = spec.apply(exp_algebra(u * h).matrix, p)
    minus = spec.apply(exp_algebra(u * -h).matrix, p)
    return (plus - minus) / (2 * h)


def killing_matrix(spec: ActionSpec, p) -> np.ndarray:
    """Columns are the action fields of the Q-orthonormal algebra basis."""
    p = np.asarray(p, dtype=float)
    return np.stack([spec.apply_d(b.matrix, p) for b in algebra_basis(spec.group)], axis=1)


@dataclass(frozen=True)
class IsotropySplit:
    isotropy: list
    complement: list
    singular_values: np.ndarray


def _combine(tag, coeffs):
    basis = algebra_basis(tag)
    return [AlgebraVector(tag, sum(c * b.matrix for c, b in zip(row, basis))) for row in coeffs]


def isotropy_algebra(spec: ActionSpec, p, gram: np.ndarray | None = None) -> IsotropySplit:
    """Kernel of ``U -> U*_p`` and its Q-orthogonal complement ``m_p``.

    ``gram`` optionally replaces the Euclidean inner product of the ambient
    space when measuring the action fields.
    """
    k = killing_matrix(spec, p)
    if gram is not None:
        k = np.linalg.cholesky(gram).T @ k
    _, s, vt = np.linalg.svd(k, full_matrices=True)
    s_full = np.zeros(vt.shape[0])
    s_full[: len(s)] = s
    smax = s_full.max(initial=0.0)
    null = s_full <= ISOTROPY_RTOL * smax if smax > 0 else np.ones_like(s_full, bool)
    return IsotropySplit(
        isotropy=_combine(spec.group, vt[null]),
        complement=_combine(spec.group, vt[~null]),
        singular_values=s_full,
    )


def vertical_basis(spec: ActionSpec, p) -> np.ndarray:
    """Euclidean-orthonormal basis (rows) of the span of the action fields at ``p``."""
    k = killing_matrix(spec, p)
    u, s, _ = np.linalg.svd(k, full_matrices=False)
    smax = s.max(initial=0.0)
    if smax == 0:
        return np.zeros((0, k.shape[0]))
    return u[:, s > ISOTROPY_RTOL * smax].T


def horizontal_basis(spec: ActionSpec, p) -> np.ndarray:
    """Orthonormal basis (rows) of the round-metric complement of the vertical space in ``T_p``."""
    p = np.asarray(p, dtype=float)
    t = spec.space.tangent_basis(p)
    v = vertical_basis(spec, p)
    t_perp = t - (t @ v.T) @ v
    u, s, vt = np.linalg.svd(t_perp, full_matrices=False)
    return vt[s > 1e-8]


def action_matrix(spec: ActionSpec, g: GroupElement) -> np.ndarray:
    """Ambient matrix of ``x -> g.x`` (the actions are linear)."""
    return spec.apply(g.matrix, np.eye(spec.space.ambient_dim)).T


def isometry_residual(spec: ActionSpec, g: GroupElement) -> float:
    a = action_matrix(spec, g)
    return float(np.abs(a.T @ a - np.eye(a.shape[0])).max())


def rows_of(fn: Callable, x: np.ndarray) -> np.ndarray:
    """Apply ``fn`` to the rows of ``x``, through ``fn.batch`` when it exists."""
    b = getattr(fn, "batch", None)
    if b is not None:
        return b(x)
    return np.array([np.asarray(fn(r), dtype=float) for r in x])


def check_equivariance(f, spec_n: ActionSpec, spec_m: ActionSpec, n_samples: int = 1000, seed=0, sampler=None) -> float:
    """``max ||f(g.x) - g.f(x)||`` over Haar-random ``g`` and random ``x``.

    When the two actions use different groups the domain group must be the
    codomain group (both specs share one group tag).
    """
    if spec_n.group != spec_m.group:
        raise ValueError("equivariance needs one group acting on both spaces")
    rng = _rng(seed)
    sample = sampler or spec_n.space.sampler
    gs = haar_batch(spec_n.group, n_samples, rng)
    x = sample_rows(sample, rng, n_samples)
    lhs = rows_of(f, apply_rows(spec_n, gs, x))
    rhs = apply_rows(spec_m, gs, rows_of(f, x))
    return float(np.linalg.norm(lhs - rhs, axis=1).max())
