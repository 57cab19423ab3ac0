"""Star-cocycles, adjoint maps, pullbacks and connected-sum bundle data.

A bundle enters only through its gluing data.  Cocycles here are two-region
clutching covers of a sphere ``S^n`` (collars of the two hemispheres
``{+-x[axis] >= 0}``) with a transition function of the equatorial
direction, optionally pulled back along a chain of equivariant maps.  All
data is described by ids and JSON parameters, so a cocycle serializes and
round-trips exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import maps as M
from .actions import (
    ActionSpec,
    UnknownIdError,
    apply_rows,
    check_equivariance,
    get_action,
    rows_of,
    sample_rows,
)
from .algebra.groups import (
    _QT,
    GroupElement,
    _rng,
    haar_batch,
    haar_sample,
    identity,
    inverse,
    is_quaternionic,
    multiply,
    s3,
)
from .algebra.quaternion import I as QI
from .algebra.quaternion import qmul, qpow

PASS_TOL = 1e-10
COLLAR = 0.25


class StructuralError(ValueError):
    pass


class EquivarianceError(ValueError):
    pass


# ---------------------------------------------------------------- references


def _params_key(params: dict | None) -> tuple:
    return tuple(sorted((params or {}).items()))


@dataclass(frozen=True)
class Ref:
    """A map or transition identified by id and JSON parameters."""

    id: str
    params: tuple = ()

    @classmethod
    def make(cls, ident: str, **params) -> "Ref":
        return cls(ident, _params_key(params))

    @property
    def kwargs(self) -> dict:
        return dict(self.params)

    def to_dict(self) -> dict:
        return {"id": self.id, "params": self.kwargs}

    @classmethod
    def from_dict(cls, d: dict) -> "Ref":
        return cls(d["id"], _params_key(d.get("params")))


# ---------------------------------------------------------------- transitions of the equatorial direction


def _kervaire_c(m):
    def fn(u):
        x2 = u[2 * m :]
        n = np.linalg.norm(x2)
        axis = x2 / n if n > 0 else np.eye(2 * m + 1)[0]
        z = axis[1::2] + 1j * axis[2::2]
        return GroupElement(f"U({m})", M.tau_c(m, axis[0], z))

    return fn


def _kervaire_c_rows(m, u):
    ax = M._unit_rows(u[:, 2 * m :], np.eye(2 * m + 1)[0])
    return M.tau_c_rows(m, ax[:, 0], ax[:, 1::2] + 1j * ax[:, 2::2])


def _kervaire_h_rows(m, u):
    v = np.concatenate([u[:, 8 * m : 8 * m + 3], u[:, 4 * m : 8 * m]], axis=1)
    v = M._unit_rows(v, np.eye(v.shape[1])[0])
    return M.tau_h_rows(m, v[:, :3], v[:, 3:])


def _kervaire_h(m):
    tag = "Sp2" if m == 2 else f"Sp({m})"

    def fn(u):
        z2 = u[4 * m : 8 * m]
        y = u[8 * m : 8 * m + 3]
        v = np.concatenate([y, z2])
        n = np.linalg.norm(v)
        if n == 0:
            v = np.eye(v.size)[0]
            n = 1.0
        v = v / n
        return GroupElement(tag, M.tau_h(m, v[:3], v[3:]))

    return fn


def _s3_rows(q: np.ndarray) -> np.ndarray:
    return q[:, None, None, :]


def _constant_rows(m, n):
    return np.broadcast_to(m, (n,) + m.shape)


def _with_batch(fn, batch):
    fn.batch = batch
    return fn


def transition_function(ref: Ref) -> Callable[[np.ndarray], GroupElement]:
    """Resolve a transition id to a function of the unit equatorial vector.

    Functions with a vectorized form carry it as ``fn.batch``: rows of unit
    vectors to a stack of group matrices.
    """
    fn = _transition_pointwise(ref)
    p = ref.kwargs
    batch = {
        "identity": lambda u: _constant_rows(identity(p["group"]).matrix, len(u)),
        "unit-quaternion": lambda u: _s3_rows(u),
        "power": lambda u: _s3_rows(qpow(u, int(p["k"]))),
        "right-i": lambda u: _s3_rows(qmul(u, QI)),
        "b-right-i": lambda u: _s3_rows(qmul(M.b_rows(u), QI)),
        "b": lambda u: _s3_rows(M.b_rows(u)),
        "b-power": lambda u: _s3_rows(qpow(M.b_rows(u), int(p["k"]))),
        "tau": lambda u: M.tau_rows(int(p["n"]), u),
        "tau-c": lambda u: M.tau_c_rows(int(p["m"]), u[:, 0], u[:, 1::2] + 1j * u[:, 2::2]),
        "tau-h": lambda u: M.tau_h_rows(int(p["m"]), u[:, :3], u[:, 3:]),
        "kervaire-c": lambda u: _kervaire_c_rows(int(p["m"]), u),
        "kervaire-h": lambda u: _kervaire_h_rows(int(p["m"]), u),
    }.get(ref.id)
    return _with_batch(fn, batch) if batch is not None else fn


def _transition_pointwise(ref: Ref) -> Callable[[np.ndarray], GroupElement]:
    p = ref.kwargs
    if ref.id == "identity":
        tag = p["group"]
        e = identity(tag)
        return lambda u: e
    if ref.id == "unit-quaternion":
        return lambda u: s3(u)
    if ref.id == "power":
        k = int(p["k"])
        return lambda u: s3(qpow(u, k))
    if ref.id == "right-i":
        return lambda u: s3(qmul(u, QI))
    if ref.id == "b-right-i":
        return lambda u: s3(qmul(M.b_map(u), QI))
    if ref.id == "b":
        return lambda u: s3(M.b_map(u))
    if ref.id == "b-power":
        k = int(p["k"])
        return lambda u: s3(qpow(M.b_map(u), k))
    if ref.id == "tau":
        n = int(p["n"])
        return lambda u: GroupElement(f"O({n})", M.tau(n, u))
    if ref.id == "tau-c":
        m = int(p["m"])
        return lambda u: GroupElement(f"U({m})", M.tau_c(m, u[0], u[1::2] + 1j * u[2::2]))
    if ref.id == "tau-h":
        m = int(p["m"])
        tag = "Sp2" if m == 2 else f"Sp({m})"
        return lambda u: GroupElement(tag, M.tau_h(m, u[:3], u[3:]))
    if ref.id == "kervaire-c":
        return _kervaire_c(int(p["m"]))
    if ref.id == "kervaire-h":
        return _kervaire_h(int(p["m"]))
    raise UnknownIdError(f"unknown transition {ref.id!r}")


TRANSITION_IDS = (
    "identity", "unit-quaternion", "power", "right-i", "b-right-i", "b", "b-power", "tau", "tau-c", "tau-h",
    "kervaire-c", "kervaire-h",
)


# ---------------------------------------------------------------- chain maps (pullbacks)


def geodesic_log(p: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Inverse of the sphere exponential at ``p`` (ambient vector orthogonal to ``p``)."""
    c = float(np.clip(p @ x, -1.0, 1.0))
    theta = np.arccos(c)
    w = x - c * p
    nw = np.linalg.norm(w)
    if nw < 1e-300:
        return np.zeros_like(x)
    return theta * w / nw


def thom_pontryagin_map(action_id: str, axis: int, sign: float, eps: float) -> Callable:
    """Collapse map ``M -> S^n`` around the fixed point ``p = sign * e_axis`` of a sphere.

    ``S^n`` here is the same sphere with the same linear action, viewed as
    ``R x T_pM``: the coordinate ``axis`` plays the role of ``R`` and the
    remaining coordinates those of ``T_pM``.  Points farther than ``eps``
    from ``p`` go to ``-e0``.
    """
    spec = get_action(action_id)
    n1 = spec.space.ambient_dim
    p = np.zeros(n1)
    p[axis] = sign
    rng = np.random.default_rng(0)
    for _ in range(5):
        g = haar_sample(spec.group, rng)
        if np.abs(spec.apply(g.matrix, p) - p).max() > 1e-12:
            raise ValueError(f"{p} is not a fixed point of {action_id}")
    others = [i for i in range(n1) if i != axis]

    def f(x):
        x = np.asarray(x, dtype=float)
        v = geodesic_log(p, x)[others] * sign
        r = np.linalg.norm(v)
        out = np.zeros(n1)
        if r >= eps:
            out[axis] = -1.0
            return out
        if r == 0:
            out[axis] = 1.0
            return out
        e = M.exp_e0(np.pi * M.bump(r / eps) * v / r)
        out[axis] = e[0]
        out[others] = e[1:]
        return out

    def rows(x):
        c = np.clip(x @ p, -1.0, 1.0)
        w = x - c[:, None] * p
        nw = np.linalg.norm(w, axis=1)
        v = (np.where(nw < 1e-300, 0.0, np.arccos(c) / np.where(nw < 1e-300, 1.0, nw))[:, None] * w)[:, others] * sign
        r = np.linalg.norm(v, axis=1)
        out = np.zeros((len(x), n1))
        out[r >= eps, axis] = -1.0
        out[r == 0, axis] = 1.0
        mid = (r > 0) & (r < eps)
        rm = r[mid]
        tv = (np.pi * M.bump(rm / eps) / rm)[:, None] * v[mid]
        rr = np.linalg.norm(tv, axis=1)
        sc = np.where(rr > 1e-300, np.sin(rr) / np.where(rr > 1e-300, rr, 1.0), 1.0)
        block = np.zeros((int(mid.sum()), n1))
        block[:, axis] = np.cos(rr)
        block[:, others] = tv * sc[:, None]
        out[mid] = block
        return out

    return _with_batch(f, rows)


def ball_sampler(action_id: str, axis: int, sign: float, r_lo: float, r_hi: float):
    """Sampler of the geodesic shell ``r_lo < d(p, x) < r_hi`` around ``p = sign e_axis``."""
    n1 = get_action(action_id).space.ambient_dim
    p = np.zeros(n1)
    p[axis] = sign
    others = [i for i in range(n1) if i != axis]

    def sample(rng):
        d = rng.standard_normal(n1 - 1)
        d /= np.linalg.norm(d)
        r = rng.uniform(r_lo, r_hi)
        v = np.zeros(n1)
        v[others] = d
        return np.cos(r) * p + np.sin(r) * v

    def batch(rng, n):
        d = rng.standard_normal((n, n1 - 1))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = rng.uniform(r_lo, r_hi, n)[:, None]
        v = np.zeros((n, n1))
        v[:, others] = d
        return np.cos(r) * p + np.sin(r) * v

    sample.batch = batch
    return sample


@lru_cache(maxsize=256)
def chain_map(ref: Ref) -> tuple[Callable, str, str]:
    """Resolve a chain entry to (function, domain action id, codomain action id)."""
    if ref.id == "thom-pontryagin":
        p = ref.kwargs
        f = thom_pontryagin_map(p["action"], int(p["axis"]), float(p["sign"]), float(p["eps"]))
        return f, p["action"], p["action"]
    if ref.id == "identity":
        a = ref.kwargs["action"]
        return _with_batch(lambda x: np.asarray(x, dtype=float), lambda x: x), a, a
    if ref.id == "milnor-chart":
        return _with_batch(milnor_chart, _milnor_chart_rows), "milnor-pr", "s4-conj"
    nm = M.get_map(ref.id)
    return nm.evaluator, nm.domain_action, nm.codomain_action


def milnor_chart(x) -> np.ndarray:
    """Chart ``D^4 x S^3 -> S^4`` of a principal bundle over the upper hemisphere."""
    d = np.asarray(x, dtype=float)[:4]
    return np.concatenate([[np.sqrt(max(0.0, 1.0 - d @ d))], d])


def _milnor_chart_rows(x):
    d = x[:, :4]
    return np.concatenate([np.sqrt(np.maximum(0.0, 1.0 - np.sum(d * d, axis=1)))[:, None], d], axis=1)


# ---------------------------------------------------------------- batched evaluation


def group_rows(fn: Callable, x: np.ndarray) -> np.ndarray:
    """Stacked group matrices of a group-valued ``fn`` on the rows of ``x``."""
    b = getattr(fn, "batch", None)
    if b is not None:
        return b(x)
    return np.array([fn(r).matrix for r in x])


_QCONJ = np.array([1.0, -1.0, -1.0, -1.0])


def bmultiply(tag: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if is_quaternionic(tag):
        return np.einsum("nabi,ijk,nbcj->nack", a, _QT, b)
    return a @ b


def binverse(tag: str, a: np.ndarray) -> np.ndarray:
    if is_quaternionic(tag):
        return np.swapaxes(a * _QCONJ, 1, 2)
    return np.conj(np.swapaxes(a, 1, 2))


def bdistance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise Frobenius distance of stacked matrices."""
    d = np.abs(a - b) ** 2
    return np.sqrt(d.reshape(len(d), -1).sum(axis=1))


def haar_rows(tag: str, n: int, rng) -> np.ndarray:
    return haar_batch(tag, n, rng)


# ---------------------------------------------------------------- cocycles


@dataclass(frozen=True)
class StarCocycle:
    """Two-region clutching cocycle of a sphere, pulled back along ``chain``.

    ``sphere_action`` acts on the sphere carrying the clutching data. Region
    0 is the collar of the upper hemisphere, region 1 of the lower one. The
    transition ``phi_01`` is ``transition`` evaluated on the normalized
    equatorial part; ``phi_10`` is its pointwise inverse.
    """

    sphere_action: str
    axis: int
    transition: Ref
    chain: tuple = ()
    collar: float = COLLAR
    provenance: str = "hand-built"

    @property
    def action_id(self) -> str:
        if not self.chain:
            return self.sphere_action
        return chain_map(self.chain[0])[1]

    @property
    def action(self) -> ActionSpec:
        return get_action(self.action_id)

    @property
    def group(self) -> str:
        return self.action.group

    # -- evaluation
    def _to_sphere(self, x):
        for ref in self.chain:
            x = _chain_fn(ref)(x)
        return np.asarray(x, dtype=float)

    def _region_y(self, i: int, y) -> bool:
        lam = y[self.axis]
        return bool(lam > -self.collar) if i == 0 else bool(lam < self.collar)

    def in_region(self, i: int, x) -> bool:
        return self._region_y(i, self._to_sphere(x))

    def to_sphere_rows(self, x: np.ndarray) -> np.ndarray:
        for ref in self.chain:
            x = rows_of(_chain_fn(ref), x)
        return x

    def region_rows(self, i: int, y: np.ndarray) -> np.ndarray:
        lam = y[:, self.axis]
        return lam > -self.collar if i == 0 else lam < self.collar

    def transition_rows(self, y: np.ndarray) -> np.ndarray:
        """Stacked ``phi_01`` matrices at sphere points ``y`` (rows)."""
        eq = np.delete(y, self.axis, axis=1)
        n = np.linalg.norm(eq, axis=1)
        if np.any(n == 0):
            raise StructuralError("point lies at a pole, outside every overlap")
        return group_rows(_transition_fn(self.transition), eq / n[:, None])

    def sample_overlap_rows(self, n: int, rng, max_tries: int = 20000) -> np.ndarray:
        """``n`` overlap samples, drawn in chunks and filtered together."""
        draw = self.sampler()
        got, tries = [], 0
        while sum(len(g) for g in got) < n:
            if tries >= max_tries * max(1, n):
                raise StructuralError("no sample found in the overlap of regions (0, 1)")
            k = max(16, n - sum(len(g) for g in got))
            x = sample_rows(draw, rng, k)
            tries += k
            y = self.to_sphere_rows(x)
            got.append(x[self.region_rows(0, y) & self.region_rows(1, y)])
        return np.concatenate(got)[:n]

    def _transition_y(self, y) -> GroupElement:
        eq = np.delete(y, self.axis)
        n = np.linalg.norm(eq)
        if n == 0:
            raise StructuralError("point lies at a pole, outside every overlap")
        return _transition_fn(self.transition)(eq / n)

    def phi(self, i: int, j: int, x) -> GroupElement:
        if i == j:
            return identity(self.group)
        g = self._transition_y(self._to_sphere(x))
        return g if (i, j) == (0, 1) else inverse(g)

    # -- sampling
    def sampler(self) -> Callable:
        if self.chain and self.chain[0].id == "thom-pontryagin":
            p = self.chain[0].kwargs
            eps = float(p["eps"])
            return ball_sampler(p["action"], int(p["axis"]), float(p["sign"]), 0.0, 1.2 * eps)
        return self.action.space.sampler

    def sample_overlap(self, regions, rng, max_tries: int = 20000):
        draw = self.sampler()
        for _ in range(max_tries):
            x = draw(rng)
            y = self._to_sphere(x)
            if all(self._region_y(i, y) for i in regions):
                return x
        raise StructuralError(f"no sample found in the overlap of regions {regions}")

    # -- serialization
    def to_dict(self) -> dict:
        return {
            "space": get_action(self.action_id).space.id,
            "action": self.action_id,
            "sphere-action": self.sphere_action,
            "regions": [
                {"index": 0, "kind": "collar-upper", "axis": self.axis, "collar": self.collar},
                {"index": 1, "kind": "collar-lower", "axis": self.axis, "collar": self.collar},
            ],
            "transitions": [
                {"pair": [0, 1], "map-id": self.transition.id, "params": self.transition.kwargs},
                {"pair": [1, 0], "map-id": self.transition.id, "params": self.transition.kwargs, "inverse": True},
            ],
            "chain": [r.to_dict() for r in self.chain],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StarCocycle":
        t = d["transitions"][0]
        return cls(
            sphere_action=d["sphere-action"],
            axis=int(d["regions"][0]["axis"]),
            transition=Ref(t["map-id"], _params_key(t["params"])),
            chain=tuple(Ref.from_dict(r) for r in d["chain"]),
            collar=float(d["regions"][0]["collar"]),
            provenance=d["provenance"],
        )


@lru_cache(maxsize=256)
def _transition_fn(ref: Ref):
    return transition_function(ref)


@lru_cache(maxsize=256)
def _chain_fn(ref: Ref):
    return chain_map(ref)[0]


def clutching_cocycle(action_id: str, transition: Ref, axis: int = 0, provenance="hand-built") -> StarCocycle:
    spec = get_action(action_id)
    e = np.zeros(spec.space.ambient_dim)
    e[axis] = 1.0
    g = haar_sample(spec.group, 0)
    if np.abs(spec.apply(g.matrix, e) - e).max() > 1e-12:
        raise StructuralError(f"{action_id} does not fix the clutching axis {axis}")
    return StarCocycle(action_id, axis, transition, provenance=provenance)


@dataclass(frozen=True)
class CocycleReport:
    cocycle_residual: float
    equivariance_residual: float
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.cocycle_residual <= PASS_TOL and self.equivariance_residual <= PASS_TOL

    def to_dict(self) -> dict:
        return {
            "cocycle_residual": self.cocycle_residual,
            "equivariance_residual": self.equivariance_residual,
            "n_samples": self.n_samples,
            "passed": self.passed,
        }


def triple_overlap_residual(tag: str, phis: dict) -> float:
    """``max || phi_ij phi_jk phi_ki - e ||`` over index triples, for stacked values ``phis[i, j]``."""
    idx = sorted({i for i, _ in phis})
    e = identity(tag).matrix
    worst = 0.0
    for i in idx:
        for j in idx:
            for k in idx:
                prod = bmultiply(tag, bmultiply(tag, phis[i, j], phis[j, k]), phis[k, i])
                worst = max(worst, float(bdistance(prod, np.broadcast_to(e, prod.shape)).max()))
    return worst


def validate_cocycle(c: StarCocycle, n_samples: int = 1000, seed=0) -> CocycleReport:
    """Cocycle condition on triple overlaps and conjugation equivariance on overlaps."""
    rng = _rng(seed)
    spec = c.action
    tag = c.group
    x = c.sample_overlap_rows(n_samples, rng)
    g01 = c.transition_rows(c.to_sphere_rows(x))
    e = np.broadcast_to(identity(tag).matrix, g01.shape)
    phis = {(0, 0): e, (1, 1): e, (0, 1): g01, (1, 0): binverse(tag, g01)}
    coc = triple_overlap_residual(tag, phis)
    gs = haar_rows(tag, n_samples, rng)
    gy = c.to_sphere_rows(apply_rows(spec, gs, x))
    if not np.all(c.region_rows(0, gy) & c.region_rows(1, gy)):
        raise StructuralError("overlap is not invariant under the action")
    h01 = c.transition_rows(gy)
    eqv = 0.0
    for lhs, pair in ((h01, (0, 1)), (binverse(tag, h01), (1, 0))):
        rhs = bmultiply(tag, bmultiply(tag, gs, phis[pair]), binverse(tag, gs))
        eqv = max(eqv, float(bdistance(lhs, rhs).max()))
    return CocycleReport(coc, eqv, n_samples)


def cocycle_hat_composition(c: StarCocycle, n_samples: int = 1000, seed=0) -> float:
    """``max || hat(phi phi)(x) - hat(phi)(hat(phi)(x)) ||`` for ``phi = phi_01`` on the overlap."""
    rng = _rng(seed)
    spec = c.action
    tag = c.group
    x = c.sample_overlap_rows(n_samples, rng)
    g = c.transition_rows(c.to_sphere_rows(x))
    lhs = apply_rows(spec, bmultiply(tag, g, g), x)
    y = apply_rows(spec, g, x)
    rhs = apply_rows(spec, c.transition_rows(c.to_sphere_rows(y)), y)
    return float(np.linalg.norm(lhs - rhs, axis=1).max())


# ---------------------------------------------------------------- adjoint maps


def hat(theta: Callable, spec: ActionSpec) -> Callable:
    """Adjoint map ``x -> theta(x) . x``."""

    def f(x):
        x = np.asarray(x, dtype=float)
        return spec.apply(theta(x).matrix, x)

    return f


def adjoint_map(c: StarCocycle, pair: tuple[int, int], x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not (c.in_region(pair[0], x) and c.in_region(pair[1], x)):
        raise StructuralError("point is outside the overlap")
    return c.action.apply(c.phi(*pair, x).matrix, x)


def pointwise_product(theta: Callable, theta2: Callable) -> Callable:
    return lambda x: multiply(theta(x), theta2(x))


def pointwise_inverse(theta: Callable) -> Callable:
    return lambda x: inverse(theta(x))


def pointwise_power(theta: Callable, k: int) -> Callable:
    def f(x):
        g = theta(x)
        out = identity(g.group)
        base = g if k >= 0 else inverse(g)
        for _ in range(abs(k)):
            out = multiply(out, base)
        return out

    return f


def hat_composition_check(theta, theta2, spec: ActionSpec, n_samples: int = 1000, seed=0, sampler=None) -> float:
    """``max || hat(theta theta2)(x) - hat(theta2)(hat(theta)(x)) ||``."""
    rng = _rng(seed)
    draw = sampler or spec.space.sampler
    lhs = hat(pointwise_product(theta, theta2), spec)
    h1, h2 = hat(theta, spec), hat(theta2, spec)
    worst = 0.0
    for _ in range(n_samples):
        x = draw(rng)
        worst = max(worst, float(np.linalg.norm(lhs(x) - h2(h1(x)))))
    return worst


def iterate(f: Callable, k: int) -> Callable:
    def g(x):
        for _ in range(k):
            x = f(x)
        return x

    return g


def power_hat_residual(theta, spec: ActionSpec, k: int, n_samples: int = 200, seed=0, sampler=None) -> float:
    """``max || hat(theta^k)(x) - hat(theta)^k(x) ||`` (k-fold connected sums)."""
    rng = _rng(seed)
    draw = sampler or spec.space.sampler
    lhs = hat(pointwise_power(theta, k), spec)
    rhs = iterate(hat(theta, spec), k)
    return max(float(np.linalg.norm(lhs(x) - rhs(x))) for x in (draw(rng) for _ in range(n_samples)))


def cocycle_theta(c: StarCocycle, pair=(0, 1)) -> Callable:
    return lambda x: c.phi(*pair, x)


# ---------------------------------------------------------------- bundle specs (BundleSpec)


@dataclass(frozen=True)
class BundleSpec:
    cocycle: StarCocycle
    provenance: str = "hand-built"

    def adjoint(self, pair=(0, 1)) -> Callable:
        return lambda x: adjoint_map(self.cocycle, pair, x)

    def bijection_residual(self, n_samples: int = 200, seed=0) -> float:
        """Forward-then-inverse residual of the adjoint map on the overlap."""
        rng = _rng(seed)
        c = self.cocycle
        fwd = hat(cocycle_theta(c, (0, 1)), c.action)
        back = hat(cocycle_theta(c, (1, 0)), c.action)
        worst = 0.0
        for _ in range(n_samples):
            x = c.sample_overlap((0, 1), rng)
            worst = max(worst, float(np.linalg.norm(back(fwd(x)) - x)))
        return worst

    def to_json(self) -> str:
        d = self.cocycle.to_dict()
        d["provenance"] = self.provenance
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "BundleSpec":
        d = json.loads(s)
        c = StarCocycle.from_dict(d)
        return cls(c, d["provenance"])


def pullback_cocycle(f: Ref, c: StarCocycle, check_samples: int = 200, seed=0) -> StarCocycle:
    """Cocycle on the domain of ``f``: preimage regions, transitions composed with ``f``."""
    fn, dom, cod = chain_map(f)
    if cod != c.action_id:
        raise EquivarianceError(f"{f.id} lands in {cod}, the cocycle lives on {c.action_id}")
    sampler = None
    if f.id == "thom-pontryagin":
        p = f.kwargs
        sampler = ball_sampler(p["action"], int(p["axis"]), float(p["sign"]), 0.0, 1.2 * float(p["eps"]))
    res = check_equivariance(fn, get_action(dom), get_action(cod), check_samples, seed, sampler)
    if res > 1e-9:
        raise EquivarianceError(f"{f.id} fails equivariance (residual {res:.3g})")
    prov = "connected-sum" if f.id == "thom-pontryagin" else "pullback"
    return StarCocycle(c.sphere_action, c.axis, c.transition, (f,) + c.chain, c.collar, prov)


# ---------------------------------------------------------------- Milnor bundles


def milnor_transition(m: int, n: int) -> Callable[[np.ndarray], GroupElement]:
    """``x -> (v -> x^m v x^n)`` as an O(4)-valued map on S^3."""
    return lambda x: GroupElement("O(4)", M.t_mn(m, n, x))


def milnor_principal_cocycle(k: int) -> StarCocycle:
    """Principal bundle ``P_k`` over S^4 with transition ``x -> x^k`` (conjugation action)."""
    return clutching_cocycle("s4-conj", Ref.make("power", k=k), provenance=f"milnor(0,{k})")


def milnor_glue(k: int, r: int) -> Callable[[np.ndarray], np.ndarray]:
    """Gluing map of the twisted manifold from pulling back ``P_k`` along ``P_r -> S^4``.

    On the boundary ``S^3 x S^3`` it composes the adjoint map of ``(x, q) -> x^k``
    (under ``r.(x, q) = (r x r^-1, r q r^-1)``) with the clutching ``(x, q) -> (x, q x^r)`` of ``P_r``.
    """
    spec = get_action("milnor-pr")
    theta = lambda z: s3(qpow(z[:4], k))
    h = hat(theta, spec)

    def psi(z):
        z = h(np.asarray(z, dtype=float))
        x, q = z[:4], z[4:]
        return np.concatenate([x, qmul(q, qpow(x, r))])

    return psi


def milnor_glue_residual(k: int, r: int, m: int, n: int, n_samples: int = 200, seed=0) -> float:
    """Distance between :func:`milnor_glue` and the linear clutching ``(x, q) -> (x, t_{m,n}(x) q)``."""
    rng = _rng(seed)
    psi = milnor_glue(k, r)
    worst = 0.0
    for _ in range(n_samples):
        x = rng.standard_normal(4)
        q = rng.standard_normal(4)
        x /= np.linalg.norm(x)
        q /= np.linalg.norm(q)
        z = np.concatenate([x, q])
        target = np.concatenate([x, M.t_mn(m, n, x) @ q])
        worst = max(worst, float(np.linalg.norm(psi(z) - target)))
    return worst


# ---------------------------------------------------------------- connected sums

RHO_ACTIONS = {
    "rho7": lambda m: ("gm-s7", 0),
    "rho8": lambda m: ("s8-rho8", 0),
    "rho10": lambda m: ("s10-I", 0),
    "rho10-alt": lambda m: ("s10-II", 7),
    "rho4m+1": lambda m: (f"biaxial-u({m})-s({4 * m + 1})", 0),
    "rho8m+5": lambda m: (f"rho-sp({m})-s({8 * m + 5})", 0),
}


def connected_sum_data(rho: str, transition: Ref, eps: float = 0.5, m: int = 1, check_samples: int = 200) -> BundleSpec:
    """Bundle over a G-sphere with fixed point of isotropy ``rho``, twisted by ``transition``.

    The sphere ``S^n`` in ``R x T_pM`` carries the clutching cocycle ``transition``;
    its pullback along the collapse map around ``p`` has regions
    ``M - D_{eps/2}`` and ``D_{eps/2}`` glued along the ``eps/2``-sphere.
    """
    if rho not in RHO_ACTIONS:
        raise UnknownIdError(f"unknown isotropy representation {rho!r}")
    action_id, axis = RHO_ACTIONS[rho](m)
    c = clutching_cocycle(action_id, transition, axis)
    rep = validate_cocycle(c, check_samples, 1)
    if rep.equivariance_residual > 1e-9:
        raise EquivarianceError(f"transition fails equivariance for {rho}: {rep.equivariance_residual:.3g}")
    f = Ref.make("thom-pontryagin", action=action_id, axis=axis, sign=1.0, eps=eps)
    return BundleSpec(pullback_cocycle(f, c, check_samples), "connected-sum")


# ---------------------------------------------------------------- involutions of S^6


def b_hat(x) -> np.ndarray:
    """Adjoint map of ``b`` on S^6 in Im H x H under the Gromoll-Meyer conjugation action."""
    spec = get_action("s6-gm")
    return spec.apply(s3(M.b_map(x)).matrix, np.asarray(x, dtype=float))


def theta_k(k: int) -> Callable:
    """``alpha o hat(b)^k`` with ``alpha`` the antipodal map."""

    def f(x):
        y = np.asarray(x, dtype=float)
        for _ in range(k):
            y = b_hat(y)
        return -y

    def rows(x):
        spec = get_action("s6-gm")
        for _ in range(k):
            x = apply_rows(spec, _s3_rows(M.b_rows(x)), x)
        return -x

    return _with_batch(f, rows)


def involution_report(k: int, n_samples: int = 1000, seed=0) -> dict:
    rng = _rng(seed)
    th = theta_k(k)
    space = get_action("s6-gm").space
    x = sample_rows(space.sampler, rng, n_samples)
    y = th.batch(x)
    inv = float(np.linalg.norm(th.batch(y) - x, axis=1).max())
    disp = float(np.linalg.norm(y - x, axis=1).min())
    return {"k": k, "involution_residual": inv, "min_displacement": disp, "n_samples": n_samples}


def displacement_oracle(k: int, n_samples: int = 20000, seed=12345) -> float:
    """``delta_k``: half the minimum displacement of ``theta_k`` over a dense independent scan."""
    return 0.5 * involution_report(k, n_samples, seed)["min_displacement"]


# ---------------------------------------------------------------- catalog


def _catalog_entries() -> dict[str, Callable[[], BundleSpec]]:
    e: dict[str, Callable[[], BundleSpec]] = {
        "hopf": lambda: BundleSpec(clutching_cocycle("s4-conj", Ref.make("unit-quaternion"))),
        "sp2": lambda: BundleSpec(clutching_cocycle("gm-s7", Ref.make("b"))),
        "e11": lambda: BundleSpec(pullback_cocycle(Ref.make("f8"), clutching_cocycle("gm-s7", Ref.make("b"))), "pullback"),
        "e13-I": lambda: BundleSpec(
            pullback_cocycle(Ref.make("f10-I"), clutching_cocycle("gm-s7", Ref.make("b"))), "pullback"
        ),
        "e13-II": lambda: BundleSpec(
            pullback_cocycle(Ref.make("f10-II"), clutching_cocycle("gm-s7", Ref.make("b"))), "pullback"
        ),
    }
    for k in range(-3, 4):
        e[f"milnor-p({k})"] = lambda k=k: BundleSpec(milnor_principal_cocycle(k), f"milnor(0,{k})")
    for n in range(2, 7):
        e[f"o({n + 1})"] = lambda n=n: BundleSpec(clutching_cocycle(f"s({n})-o({n})", Ref.make("tau", n=n)))
        e[f"l({n})"] = lambda n=n: BundleSpec(
            pullback_cocycle(Ref.make(f"j-tau({n})"), clutching_cocycle(f"s({n})-o({n})", Ref.make("tau", n=n))),
            "pullback",
        )
    for m in (1, 2, 3):
        e[f"u({m + 1})"] = lambda m=m: BundleSpec(
            clutching_cocycle(f"s({2 * m + 1})-u({m})", Ref.make("tau-c", m=m))
        )
        e[f"l-c({m})"] = lambda m=m: BundleSpec(
            pullback_cocycle(
                Ref.make(f"j-tau-c({m})"), clutching_cocycle(f"s({2 * m + 1})-u({m})", Ref.make("tau-c", m=m))
            ),
            "pullback",
        )
    for m in (1, 2):
        e[f"sp({m + 1})"] = lambda m=m: BundleSpec(
            clutching_cocycle(f"s({4 * m + 3})-sp({m})", Ref.make("tau-h", m=m))
        )
    e["cs-rho7-b"] = lambda: connected_sum_data("rho7", Ref.make("b"))
    e["cs-rho7-trivial"] = lambda: connected_sum_data("rho7", Ref.make("identity", group="S3"))
    e["cs-rho4m+1-kervaire"] = lambda: connected_sum_data("rho4m+1", Ref.make("kervaire-c", m=2), m=2)
    e["cs-rho8m+5-kervaire"] = lambda: connected_sum_data("rho8m+5", Ref.make("kervaire-h", m=1), m=1)
    return e


_CATALOG = _catalog_entries()


def catalog() -> list[str]:
    return sorted(_CATALOG) + ["milnor(m,n)"]


@lru_cache(maxsize=None)
def get_bundle(bundle_id: str) -> BundleSpec:
    if bundle_id not in _CATALOG:
        raise UnknownIdError(f"unknown bundle {bundle_id!r}")
    return _CATALOG[bundle_id]()
