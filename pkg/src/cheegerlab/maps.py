"""Explicit equivariant maps between the cataloged spaces.

Points are flat arrays in the ambient layouts of :mod:`cheegerlab.actions`.
Group-valued maps return the flattened matrix of the group element, so
they can be compared with conjugation actions on the group itself.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .actions import (
    UnknownIdError,
    _c_to_real,
    _real_to_c,
    get_action,
    i5_rep,
    right_rep,
    s_embed,
)
from .algebra.groups import _rng
from .algebra.quaternion import I as QI
from .algebra.quaternion import left_matrix, qconj, qexp, qmul, qpow, right_matrix

UNIT_TOL = 1e-8


class NonUnitInputError(ValueError):
    pass


def _require_unit(x, what="input"):
    r = abs(float(np.sum(np.asarray(x) ** 2)) - 1.0)
    if r > UNIT_TOL:
        raise NonUnitInputError(f"{what} must have unit norm (residual {r:.3g})")


# ---------------------------------------------------------------- Hopf map


def hopf(point) -> np.ndarray:
    """``(x, y) -> (|x|^2 - |y|^2, 2 x conj(y))`` from S^7 in H^2 to S^4 in R x H."""
    point = np.asarray(point, dtype=float)
    _require_unit(point, "Hopf input")
    x, y = point[:4], point[4:]
    return np.concatenate([[x @ x - y @ y], 2.0 * qmul(x, qconj(y))])


# ---------------------------------------------------------------- Blakers-Massey element


def blakers_massey(p, w) -> np.ndarray:
    """``b(p, w) = (w/|w|) exp(pi p) (conj(w)/|w|)``, and ``-1`` at ``w = 0``.

    ``p`` is an imaginary quaternion given by its three imaginary
    components, ``w`` a quaternion, with ``|p|^2 + |w|^2 = 1``.
    """
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    nw = np.linalg.norm(w)
    if nw == 0.0:
        return np.array([-1.0, 0.0, 0.0, 0.0])
    u = w / nw
    e = qexp(np.concatenate([[0.0], np.pi * p]))
    return qmul(qmul(u, e), qconj(u))


def b_map(point) -> np.ndarray:
    """``b`` on a point of S^6 in Im H x H (7 coordinates)."""
    point = np.asarray(point, dtype=float)
    return blakers_massey(point[:3], point[3:])


# ---------------------------------------------------------------- f8


def f8(point) -> np.ndarray:
    """S^8 in R x H x H to S^7: normalized ``(l + x i conj(x), w)``."""
    point = np.asarray(point, dtype=float)
    lam, x, w = point[0], point[1:5], point[5:]
    top = qmul(qmul(x, QI), qconj(x))
    top[0] += lam
    out = np.concatenate([top, w])
    return out / np.sqrt(lam**2 + (x @ x) ** 2 + w @ w)


# ---------------------------------------------------------------- bump


def _psi(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smooth_step(s):
    """Smooth monotone step: 0 for ``s <= 0``, 1 for ``s >= 1``."""
    a = _psi(s)
    return a / (a + _psi(1.0 - np.asarray(s, dtype=float)))


BUMP_FLAT = 0.05  # width of the constant pieces near 0 and 1


def bump(s, with_flag: bool = False):
    """Smooth non-decreasing map of [0, 1]: 0 near 0, identity on [1/4, 3/4], 1 near 1.

    Out-of-range inputs are clamped; ``with_flag`` also returns whether
    clamping happened.
    """
    s_arr = np.asarray(s, dtype=float)
    clamped = bool(np.any((s_arr < 0) | (s_arr > 1)))
    s_arr = np.clip(s_arr, 0.0, 1.0)
    lo = smooth_step((s_arr - BUMP_FLAT) / (0.25 - BUMP_FLAT))
    hi = smooth_step((s_arr - 0.75) / (1.0 - BUMP_FLAT - 0.75))
    out = np.where(s_arr <= 0.5, lo * s_arr, s_arr + hi * (1.0 - s_arr))
    if np.ndim(s) == 0:
        out = float(out)
    return (out, clamped) if with_flag else out


# ---------------------------------------------------------------- f10


def f10(point) -> np.ndarray:
    """S^10 in Im H x H x H to S^7 built from ``b`` and the bump."""
    point = np.asarray(point, dtype=float)
    xi, w, x = point[:3], point[3:7], point[7:]
    nx = np.linalg.norm(x)
    phi = bump(min(nx, 1.0))
    out = np.zeros(8)
    rho = np.sqrt(xi @ xi + w @ w)
    if phi < 1.0 and rho > 0:
        out[:4] = np.sqrt(1.0 - phi**2) * blakers_massey(xi / rho, w / rho)
    if nx > 0:
        out[4:] = phi * x / nx
    return out


# ---------------------------------------------------------------- tau maps


def tau(n: int, x) -> np.ndarray:
    """Reflection-type transition ``v -> 2<x, v> x - v`` as an n x n matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"tau({n}) needs a vector of length {n}")
    _require_unit(x, "tau input")
    return 2.0 * np.outer(x, x) - np.eye(n)


def tau_c(m: int, y: float, z) -> np.ndarray:
    """``1 - u (1 + e^{pi y}) u^*`` with ``u = z/|z|``; ``y`` is the real coefficient of ``i``.

    At ``z = 0`` (so ``|y| = 1``) the value is the identity, the limit of
    the formula.
    """
    z = np.asarray(z, dtype=complex)
    _require_unit(np.concatenate([[y], z.real, z.imag]), "tau_c input")
    nz = np.linalg.norm(z)
    if nz == 0:
        return np.eye(m, dtype=complex)
    u = z / nz
    return np.eye(m) - (1.0 + np.exp(1j * np.pi * y)) * np.outer(u, u.conj())


def tau_h(m: int, y, z) -> np.ndarray:
    """Quaternionic analogue of :func:`tau_c`; ``y`` in Im H (3 comps), ``z`` an (m, 4) array.

    Returns an (m, m, 4) quaternion matrix ``1 - u (1 + e^{pi y}) u^*``.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float).reshape(m, 4)
    _require_unit(np.concatenate([y, z.ravel()]), "tau_h input")
    out = np.zeros((m, m, 4))
    for a in range(m):
        out[a, a, 0] = 1.0
    nz = np.linalg.norm(z)
    if nz == 0:
        return out
    u = z / nz
    c = qexp(np.concatenate([[0.0], np.pi * y]))
    c[0] += 1.0
    for a in range(m):
        for b in range(m):
            out[a, b] -= qmul(qmul(u[a], c), qconj(u[b]))
    return out


# ---------------------------------------------------------------- J tau maps


def exp_e0(v) -> np.ndarray:
    """Sphere exponential at ``e0 = (1, 0, ..., 0)`` of a vector ``v`` tangent there."""
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v)
    out = np.empty(v.size + 1)
    out[0] = np.cos(r)
    out[1:] = v * (np.sin(r) / r if r > 1e-300 else 1.0)
    return out


def j_tau(n: int, point) -> np.ndarray:
    """``exp_e0(pi tau_n(x2/|x2|) x1)`` from S^{2n-1} in R^n + R^n to S^n.

    At ``x2 = 0`` the axis ``e_1`` stands in for ``x2/|x2|``.
    """
    point = np.asarray(point, dtype=float)
    x1, x2 = point[:n], point[n:]
    nx = np.linalg.norm(x2)
    axis = x2 / nx if nx > 0 else np.eye(n)[0]
    return exp_e0(np.pi * tau(n, axis) @ x1)


def j_tau_c(m: int, point) -> np.ndarray:
    """Complex version from S^{4m+1} to S^{2m+1} in C^{m+1}.

    Layout of the domain: ``(y1, z1, y2, z2)`` with ``y`` real (the ``i``
    coefficient) and ``z`` in C^m interleaved; ``tau_c`` acts on the ``z``
    part of ``x1 = (y1, z1)`` and the result is exponentiated at ``e0``,
    whose tangent space is ``i R + C^m``.
    """
    point = np.asarray(point, dtype=float)
    w = 2 * m + 1
    x1, x2 = point[:w], point[w:]
    nx = np.linalg.norm(x2)
    if nx > 0:
        axis = x2 / nx
    else:
        axis = np.zeros(w)
        axis[1] = 1.0
    t = tau_c(m, axis[0], _real_to_c(axis[1:]))
    v = np.concatenate([[x1[0]], _c_to_real(t @ _real_to_c(x1[1:]))])
    return exp_e0(np.pi * v)


# ---------------------------------------------------------------- row-wise forms
# Vectorized twins of the maps above: inputs are stacks of points (one per
# row), outputs stacks of values.  They skip the unit-norm checks.


def with_rows(fn: Callable, rows: Callable) -> Callable:
    """Attach a row-wise evaluator to ``fn`` as ``fn.batch``."""
    fn.batch = rows
    return fn


def _unit_rows(x, fallback):
    n = np.linalg.norm(x, axis=1)
    out = x / np.where(n > 0, n, 1.0)[:, None]
    out[n == 0] = fallback
    return out


def exp_e0_rows(v):
    r = np.linalg.norm(v, axis=1)
    big = r > 1e-300
    sc = np.where(big, np.sin(r) / np.where(big, r, 1.0), 1.0)
    return np.concatenate([np.cos(r)[:, None], v * sc[:, None]], axis=1)


def blakers_massey_rows(p, w):
    nw = np.linalg.norm(w, axis=1)
    u = w / np.where(nw > 0, nw, 1.0)[:, None]
    e = qexp(np.concatenate([np.zeros((len(p), 1)), np.pi * p], axis=1))
    out = qmul(qmul(u, e), qconj(u))
    out[nw == 0] = [-1.0, 0.0, 0.0, 0.0]
    return out


def b_rows(x):
    return blakers_massey_rows(x[:, :3], x[:, 3:])


def tau_rows(n, x):
    return 2.0 * np.einsum("ni,nj->nij", x, x) - np.eye(n)


def tau_c_rows(m, y, z):
    nz = np.linalg.norm(z, axis=1)
    u = z / np.where(nz > 0, nz, 1.0)[:, None]
    c = (1.0 + np.exp(1j * np.pi * y)) * (nz > 0)
    return np.eye(m) - c[:, None, None] * np.einsum("na,nb->nab", u, u.conj())


def tau_h_rows(m, y, z):
    z = z.reshape(len(z), m, 4)
    nz = np.sqrt(np.sum(z * z, axis=(1, 2)))
    u = z / np.where(nz > 0, nz, 1.0)[:, None, None]
    c = qexp(np.concatenate([np.zeros((len(y), 1)), np.pi * y], axis=1))
    c[:, 0] += 1.0
    c = c * (nz > 0)[:, None]
    uc = qmul(u, c[:, None, :])
    out = -qmul(uc[:, :, None, :], qconj(u)[:, None, :, :])
    out[:, np.arange(m), np.arange(m), 0] += 1.0
    return out


def j_tau_rows(n, x):
    ax = _unit_rows(x[:, n:], np.eye(n)[0])
    return exp_e0_rows(np.pi * np.einsum("nij,nj->ni", tau_rows(n, ax), x[:, :n]))


def j_tau_c_rows(m, x):
    w = 2 * m + 1
    e1 = np.zeros(w)
    e1[1] = 1.0
    ax = _unit_rows(x[:, w:], e1)
    t = tau_c_rows(m, ax[:, 0], _real_to_c(ax[:, 1:]))
    z = _c_to_real(np.einsum("nab,nb->na", t, _real_to_c(x[:, 1:w])))
    return exp_e0_rows(np.pi * np.concatenate([x[:, :1], z], axis=1))


def f8_rows(x):
    lam, q, w = x[:, 0], x[:, 1:5], x[:, 5:]
    top = qmul(qmul(q, QI), qconj(q))
    top[:, 0] += lam
    nq = np.sum(q * q, axis=1)
    out = np.concatenate([top, w], axis=1)
    return out / np.sqrt(lam**2 + nq**2 + np.sum(w * w, axis=1))[:, None]


def f10_rows(x):
    xi, w, y = x[:, :3], x[:, 3:7], x[:, 7:]
    ny = np.linalg.norm(y, axis=1)
    phi = bump(np.minimum(ny, 1.0))
    rho = np.sqrt(np.sum(xi * xi, axis=1) + np.sum(w * w, axis=1))
    out = np.zeros((len(x), 8))
    top = (phi < 1.0) & (rho > 0)
    r = rho[top][:, None]
    out[top, :4] = np.sqrt(1.0 - phi[top] ** 2)[:, None] * blakers_massey_rows(xi[top] / r, w[top] / r)
    bot = ny > 0
    out[bot, 4:] = (phi[bot] / ny[bot])[:, None] * y[bot]
    return out


# ---------------------------------------------------------------- eta family


def eta(point) -> np.ndarray:
    """S^4 in R x H to S^3: ``(l + x i conj(x)) / |l + x i conj(x)|``.

    The numerator never vanishes on S^4: its real part is ``l`` and its
    imaginary part has norm ``|x|^2``.
    """
    point = np.asarray(point, dtype=float)
    lam, x = point[0], point[1:]
    q = qmul(qmul(x, QI), qconj(x))
    q[0] += lam
    return q / np.linalg.norm(q)


def eta_l(point) -> np.ndarray:
    return left_matrix(eta(point)).ravel()


def eta_r(point) -> np.ndarray:
    return right_rep(eta(point)).ravel()


def i5(q) -> np.ndarray:
    return i5_rep(np.asarray(q, float)).ravel()


def s_k(k: int, r) -> np.ndarray:
    r = np.asarray(r, dtype=float).reshape(k, k)
    return s_embed(r).ravel()


def t_mn(m: int, n: int, x) -> np.ndarray:
    """4 x 4 matrix of ``v -> x^m v x^n``."""
    x = np.asarray(x, dtype=float)
    return left_matrix(qpow(x, m)) @ right_matrix(qpow(x, n))


_QBASIS = np.eye(4)


def t_mn_rows(m: int, n: int, x):
    a, b = qpow(x, m), qpow(x, n)
    cols = qmul(qmul(a[:, None, :], _QBASIS[None]), b[:, None, :])  # (N, j, i)
    return np.swapaxes(cols, 1, 2).reshape(len(x), 16)


# ---------------------------------------------------------------- registry


@dataclass(frozen=True)
class NamedMap:
    id: str
    domain: str
    codomain: str
    domain_action: str
    codomain_action: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    singular_loci: tuple[str, ...] = ()
    anchor: str = ""
    sampler: Callable | None = field(default=None, compare=False)

    def __call__(self, x):
        return self.evaluator(x)

    def descriptor(self) -> dict:
        return {
            "id": self.id,
            "domain": self.domain,
            "codomain": self.codomain,
            "action-ids": [self.domain_action, self.codomain_action],
            "singular-loci": list(self.singular_loci),
        }

    def descriptor_json(self) -> str:
        return json.dumps(self.descriptor(), sort_keys=True)


def _nm(mid, dom_act, cod_act, fn, loci=(), anchor="", sampler=None):
    da, ca = get_action(dom_act), get_action(cod_act)
    return NamedMap(mid, da.space.id, ca.space.id, dom_act, cod_act, fn, tuple(loci), anchor, sampler)


_STATIC_MAPS: dict[str, Callable[[], NamedMap]] = {
    "hopf": lambda: _nm("hopf", "hopf-star-s7", "s4-conj", hopf, anchor="(|x|^2-|y|^2, 2 x conj(y))"),
    "b": lambda: _nm(
        "b", "s6-so4", "s3-conj-first", b_map, loci=("w = 0: value -1",),
        anchor="b(r p conj(r), q w conj(r)) = q b(p, w) conj(q)",
    ),
    "b-gm": lambda: _nm("b-gm", "s6-gm", "s3-conj", b_map, loci=("w = 0: value -1",)),
    "f8": lambda: _nm("f8", "s8-rho8", "gm-s7", with_rows(lambda x: f8(x), f8_rows)),
    "f10-I": lambda: _nm(
        "f10-I", "s10-I", "gm-s7", with_rows(lambda x: f10(x), f10_rows), loci=("x = 0", "|xi|^2 + |w|^2 = 0")
    ),
    "f10-II": lambda: _nm(
        "f10-II", "s10-II", "gm-s7", with_rows(lambda x: f10(x), f10_rows), loci=("x = 0", "|xi|^2 + |w|^2 = 0")
    ),
    "eta": lambda: _nm("eta", "s4-left", "s3-conj", eta),
    "eta-L": lambda: _nm("eta-L", "s4-left", "o4-conj-left", eta_l),
    "eta-R": lambda: _nm("eta-R", "s4-left", "o4-conj-right", eta_r),
    "I5": lambda: _nm("I5", "s3-conj", "o5-conj-i5", i5),
}

_MAP_PATTERNS = {
    "tau": re.compile(r"^tau\((\d+)\)$"),
    "j-tau": re.compile(r"^j-tau\((\d+)\)$"),
    "tau-c": re.compile(r"^tau-c\((\d+)\)$"),
    "tau-h": re.compile(r"^tau-h\((\d+)\)$"),
    "j-tau-c": re.compile(r"^j-tau-c\((\d+)\)$"),
    "s": re.compile(r"^s\((\d+)\)$"),
    "t": re.compile(r"^t\((-?\d+),(-?\d+)\)$"),
}


def _tau_c_flat(m):
    def fn(point):
        point = np.asarray(point, float)
        return _c_to_real(tau_c(m, point[0], _real_to_c(point[1:])).ravel())

    return fn


@lru_cache(maxsize=None)
def get_map(map_id: str) -> NamedMap:
    if map_id in _STATIC_MAPS:
        return _STATIC_MAPS[map_id]()
    for kind, pat in _MAP_PATTERNS.items():
        mt = pat.match(map_id)
        if not mt:
            continue
        a = int(mt.group(1))
        if kind == "tau":
            return _nm(map_id, f"o({a})-s({a - 1})", f"o({a})-conj", lambda x, a=a: tau(a, x).ravel())
        if kind == "j-tau":
            return _nm(
                map_id, f"biaxial-o({a})-s({2 * a - 1})", f"s({a})-o({a})",
                with_rows(lambda x, a=a: j_tau(a, x), lambda x, a=a: j_tau_rows(a, x)),
                loci=("x2 = 0: axis e_1",),
            )
        if kind == "tau-c":
            return _nm(map_id, f"tauc-u({a})-s({2 * a})", f"u({a})-conj", _tau_c_flat(a), loci=("z = 0: identity",))
        if kind == "tau-h":
            return _nm(
                map_id, f"tauh-sp({a})-s({4 * a + 2})", f"sp({a})-conj",
                lambda x, a=a: tau_h(a, x[:3], x[3:]).ravel(), loci=("z = 0: identity",),
            )
        if kind == "j-tau-c":
            return _nm(
                map_id, f"biaxial-u({a})-s({4 * a + 1})", f"s({2 * a + 1})-u({a})",
                with_rows(lambda x, a=a: j_tau_c(a, x), lambda x, a=a: j_tau_c_rows(a, x)),
                loci=("x2 = 0: axis i",),
            )
        if kind == "s":
            return _nm(map_id, f"o({a})-conj", f"o({a + 1})-conj-s", lambda x, a=a: s_k(a, x))
        if kind == "t":
            b = int(mt.group(2))
            fn = with_rows(lambda x, a=a, b=b: t_mn(a, b, x).ravel(), lambda x, a=a, b=b: t_mn_rows(a, b, x))
            return _nm(map_id, "s3-conj", "o4-conj-ad", fn)
    raise UnknownIdError(f"unknown map {map_id!r}")


MAP_FAMILIES = ("tau(n)", "j-tau(n)", "tau-c(m)", "tau-h(m)", "j-tau-c(m)", "s(k)", "t(m,n)")


def catalog() -> list[str]:
    return sorted(_STATIC_MAPS) + list(MAP_FAMILIES)


def codomain_residual(nm: NamedMap, n_samples: int = 100, seed=0) -> float:
    """Max defining-equation residual of the images of random domain points."""
    da, ca = get_action(nm.domain_action), get_action(nm.codomain_action)
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        x = da.space.sampler(rng)
        worst = max(worst, ca.space.residual(nm(x)))
    return worst


def map_equivariance(nm: NamedMap, n_samples: int = 1000, seed=0) -> float:
    from .actions import check_equivariance

    return check_equivariance(nm.evaluator, get_action(nm.domain_action), get_action(nm.codomain_action), n_samples, seed, nm.sampler)
