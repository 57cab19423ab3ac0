"""Compact matrix groups, their Lie algebras, and Haar sampling.

Supported group tags::

    "S3"            unit quaternions, stored as a 1x1 quaternion matrix
    "S3xS3"         pairs (q, r), stored as diag(q, r) inside Sp(2)
    "Sp2"           Sp(2) as 2x2 quaternion matrices
    "Sp(m)"         m x m quaternion matrices
    "O(n)"          real orthogonal n x n
    "U(m)"          complex unitary m x m

Quaternion matrices have shape ``(m, n, 4)``.  The inner product on every
Lie algebra is ``Q(X, Y) = Re trace(X^* Y)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .quaternion import from_complex_pair, qconj, qexp, qmul, to_complex_pair

QUATERNIONIC = ("S3", "S3xS3", "Sp")


class GroupTagError(ValueError):
    pass


@lru_cache(maxsize=None)
def parse_group(tag: str) -> tuple[str, int]:
    """Return ``(family, size)`` for a group tag."""
    if tag == "S3":
        return "S3", 1
    if tag == "S3xS3":
        return "S3xS3", 2
    if tag == "Sp2":
        return "Sp", 2
    m = re.fullmatch(r"(O|U|Sp)\((\d+)\)", tag)
    if not m:
        raise GroupTagError(f"unknown group tag {tag!r}")
    n = int(m.group(2))
    if n < 1:
        raise GroupTagError(f"group size must be positive in {tag!r}")
    return m.group(1), n


def is_quaternionic(tag: str) -> bool:
    return parse_group(tag)[0] in QUATERNIONIC


def algebra_dim(tag: str) -> int:
    family, n = parse_group(tag)
    return {
        "S3": 3,
        "S3xS3": 6,
        "Sp": n * (2 * n + 1),
        "O": n * (n - 1) // 2,
        "U": n * n,
    }[family]


# ---------------------------------------------------------------- quaternion matrices


def _structure_tensor() -> np.ndarray:
    # (p q)_k = sum_ij T[i, j, k] p_i q_j
    eye = np.eye(4)
    return np.array([[qmul(eye[i], eye[j]) for j in range(4)] for i in range(4)])


_QT = _structure_tensor()


def qmatmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of quaternion matrices of shapes ``(m, k, 4)`` and ``(k, n, 4)``."""
    m, k = a.shape[:2]
    n = b.shape[1]
    if m == k == n == 1:
        return qmul(a[0, 0], b[0, 0])[None, None]
    # real 4m x 4k matrix of left multiplication by a
    al = np.einsum("abi,ijk->akbj", a, _QT).reshape(4 * m, 4 * k)
    out = al @ b.transpose(0, 2, 1).reshape(4 * k, n)
    return out.reshape(m, 4, n).transpose(0, 2, 1)


def qmatvec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    return qmatmul(a, v[:, None, :])[:, 0, :]


def qconjT(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(qconj(a), 0, 1)


def qmat_to_complex(a: np.ndarray) -> np.ndarray:
    z1, z2 = to_complex_pair(a)
    return np.block([[z1, z2], [-z2.conj(), z1.conj()]])


def complex_to_qmat(c: np.ndarray) -> np.ndarray:
    m = c.shape[0] // 2
    n = c.shape[1] // 2
    return from_complex_pair(c[:m, :n], c[:m, n:])


def qmat_identity(n: int) -> np.ndarray:
    out = np.zeros((n, n, 4))
    for i in range(n):
        out[i, i, 0] = 1.0
    return out


# ---------------------------------------------------------------- elements


@dataclass(frozen=True, eq=False)
class GroupElement:
    group: str
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def quat(self) -> np.ndarray:
        """The unit quaternion of an S3 element."""
        if self.group != "S3":
            raise GroupTagError("quat is only defined for S3 elements")
        return self.matrix[0, 0]

    @property
    def quat_pair(self) -> tuple[np.ndarray, np.ndarray]:
        if self.group != "S3xS3":
            raise GroupTagError("quat_pair is only defined for S3xS3 elements")
        return self.matrix[0, 0], self.matrix[1, 1]

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def __repr__(self):
        return f"GroupElement({self.group}, shape={self.matrix.shape})"


@dataclass(frozen=True, eq=False)
class AlgebraVector:
    group: str
    matrix: np.ndarray

    def __add__(self, other: "AlgebraVector") -> "AlgebraVector":
        _same(self, other)
        return AlgebraVector(self.group, self.matrix + other.matrix)

    def __sub__(self, other: "AlgebraVector") -> "AlgebraVector":
        _same(self, other)
        return AlgebraVector(self.group, self.matrix - other.matrix)

    def __mul__(self, c: float) -> "AlgebraVector":
        return AlgebraVector(self.group, self.matrix * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "AlgebraVector":
        return AlgebraVector(self.group, -self.matrix)

    @property
    def quat(self) -> np.ndarray:
        return self.matrix[0, 0]

    def __repr__(self):
        return f"AlgebraVector({self.group}, shape={self.matrix.shape})"


def _same(x, y):
    if x.group != y.group:
        raise GroupTagError(f"group mismatch: {x.group} vs {y.group}")


def s3(q) -> GroupElement:
    """Wrap a unit quaternion as an S3 element."""
    return GroupElement("S3", np.asarray(q, dtype=float).reshape(1, 1, 4).copy())


def s3xs3(q, r) -> GroupElement:
    m = np.zeros((2, 2, 4))
    m[0, 0] = q
    m[1, 1] = r
    return GroupElement("S3xS3", m)


def identity(tag: str) -> GroupElement:
    family, n = parse_group(tag)
    if family in QUATERNIONIC:
        return GroupElement(tag, qmat_identity(n))
    if family == "O":
        return GroupElement(tag, np.eye(n))
    return GroupElement(tag, np.eye(n, dtype=complex))


def multiply(g: GroupElement, h: GroupElement) -> GroupElement:
    _same(g, h)
    if is_quaternionic(g.group):
        return GroupElement(g.group, qmatmul(g.matrix, h.matrix))
    return GroupElement(g.group, g.matrix @ h.matrix)


def inverse(g: GroupElement) -> GroupElement:
    if is_quaternionic(g.group):
        return GroupElement(g.group, qconjT(g.matrix))
    return GroupElement(g.group, g.matrix.conj().T)


def conjugate(g: GroupElement, h: GroupElement) -> GroupElement:
    """``g h g^{-1}``."""
    return multiply(multiply(g, h), inverse(g))


def distance(g: GroupElement, h: GroupElement) -> float:
    """Frobenius distance of the stored matrices."""
    _same(g, h)
    return float(np.linalg.norm(g.matrix - h.matrix))


def unitarity_residual(g: GroupElement) -> float:
    """``||M^* M - I||`` in the Frobenius norm."""
    family, n = parse_group(g.group)
    if family in QUATERNIONIC:
        prod = qmatmul(qconjT(g.matrix), g.matrix)
        res = float(np.linalg.norm(prod - qmat_identity(n)))
        if family == "S3xS3":
            res += float(np.linalg.norm(g.matrix[0, 1]) + np.linalg.norm(g.matrix[1, 0]))
        return res
    return float(np.linalg.norm(g.matrix.conj().T @ g.matrix - np.eye(n)))


def sp2_column_residual(g: GroupElement) -> float:
    """Residual of the Sp(2) column relations: unit columns and ``c̄a + d̄b = 0``."""
    m = g.matrix
    a, b, c, d = m[0, 0], m[1, 0], m[0, 1], m[1, 1]
    unit = abs(np.sum(a * a) + np.sum(b * b) - 1.0) + abs(np.sum(c * c) + np.sum(d * d) - 1.0)
    rel = qmul(qconj(c), a) + qmul(qconj(d), b)
    return float(unit + np.linalg.norm(rel))


# ---------------------------------------------------------------- Lie algebra


def inner_q(x: AlgebraVector, y: AlgebraVector) -> float:
    """``Q(X, Y) = Re trace(X^* Y)``; for quaternion entries this is the
    sum of componentwise dot products."""
    _same(x, y)
    if is_quaternionic(x.group):
        return float(np.sum(x.matrix * y.matrix))
    return float(np.real(np.sum(x.matrix.conj() * y.matrix)))


def q_norm(x: AlgebraVector) -> float:
    return float(np.sqrt(inner_q(x, x)))


def bracket(x: AlgebraVector, y: AlgebraVector) -> AlgebraVector:
    _same(x, y)
    if is_quaternionic(x.group):
        return AlgebraVector(x.group, qmatmul(x.matrix, y.matrix) - qmatmul(y.matrix, x.matrix))
    return AlgebraVector(x.group, x.matrix @ y.matrix - y.matrix @ x.matrix)


@lru_cache(maxsize=None)
def _basis_arrays(tag: str) -> tuple[np.ndarray, ...]:
    family, n = parse_group(tag)
    out = []
    if family in ("S3", "S3xS3", "Sp"):
        diag_slots = range(n)
        for a in diag_slots:
            for unit in (1, 2, 3):
                m = np.zeros((n, n, 4))
                m[a, a, unit] = 1.0
                out.append(m)
        if family == "Sp":
            for a in range(n):
                for b in range(a + 1, n):
                    for unit in range(4):
                        m = np.zeros((n, n, 4))
                        m[a, b, unit] = 1.0 / np.sqrt(2.0)
                        m[b, a] = -qconj(m[a, b])
                        out.append(m)
    elif family == "O":
        for a in range(n):
            for b in range(a + 1, n):
                m = np.zeros((n, n))
                m[a, b] = 1.0 / np.sqrt(2.0)
                m[b, a] = -1.0 / np.sqrt(2.0)
                out.append(m)
    else:
        for a in range(n):
            m = np.zeros((n, n), dtype=complex)
            m[a, a] = 1j
            out.append(m)
        for a in range(n):
            for b in range(a + 1, n):
                m = np.zeros((n, n), dtype=complex)
                m[a, b] = 1.0 / np.sqrt(2.0)
                m[b, a] = -1.0 / np.sqrt(2.0)
                out.append(m)
                m = np.zeros((n, n), dtype=complex)
                m[a, b] = 1j / np.sqrt(2.0)
                m[b, a] = 1j / np.sqrt(2.0)
                out.append(m)
    for m in out:
        m.setflags(write=False)
    return tuple(out)


def algebra_basis(tag: str) -> list[AlgebraVector]:
    """A Q-orthonormal basis of the Lie algebra."""
    return [AlgebraVector(tag, m) for m in _basis_arrays(tag)]


def from_coords(tag: str, coords) -> AlgebraVector:
    coords = np.asarray(coords, dtype=float)
    basis = _basis_arrays(tag)
    if coords.shape != (len(basis),):
        raise ValueError(f"{tag} needs {len(basis)} coordinates, got {coords.shape}")
    return AlgebraVector(tag, sum(c * m for c, m in zip(coords, basis)))


def to_coords(x: AlgebraVector) -> np.ndarray:
    return np.array([inner_q(u, x) for u in algebra_basis(x.group)])


def skew_residual(x: AlgebraVector) -> float:
    if is_quaternionic(x.group):
        return float(np.linalg.norm(x.matrix + qconjT(x.matrix)))
    return float(np.linalg.norm(x.matrix + x.matrix.conj().T))


def exp_algebra(x: AlgebraVector) -> GroupElement:
    family, n = parse_group(x.group)
    if family in ("S3", "S3xS3"):
        m = np.zeros_like(x.matrix)
        for a in range(n):
            m[a, a] = qexp(x.matrix[a, a])
        return GroupElement(x.group, m)
    if family == "Sp":
        c = scipy.linalg.expm(qmat_to_complex(x.matrix))
        return GroupElement(x.group, complex_to_qmat(c))
    e = scipy.linalg.expm(x.matrix)
    if family == "O":
        e = np.real(e)
    return GroupElement(x.group, e)


# ---------------------------------------------------------------- Haar sampling


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _quaternionic_gram_schmidt(a: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of a quaternion matrix (right H-module)."""
    n = a.shape[1]
    cols = []
    for j in range(n):
        v = a[:, j].copy()
        for u in cols:
            coef = qmul(qconj(u), v).sum(axis=0)  # <u, v> = sum conj(u_i) v_i
            v = v - qmul(u, coef[None, :])
        v = v / np.linalg.norm(v)
        cols.append(v)
    return np.stack(cols, axis=1)


def haar_sample(tag: str, seed) -> GroupElement:
    """Draw one Haar-distributed element.

    ``seed`` is an integer (bitwise reproducible) or a numpy Generator.
    """
    rng = _rng(seed)
    family, n = parse_group(tag)
    if family == "S3":
        q = rng.standard_normal(4)
        return s3(q / np.linalg.norm(q))
    if family == "S3xS3":
        q = rng.standard_normal(4)
        r = rng.standard_normal(4)
        return s3xs3(q / np.linalg.norm(q), r / np.linalg.norm(r))
    if family == "Sp":
        a = rng.standard_normal((n, n, 4))
        return GroupElement(tag, _quaternionic_gram_schmidt(a))
    if family == "O":
        z = rng.standard_normal((n, n))
        q, r = np.linalg.qr(z)
        return GroupElement(tag, q * np.sign(np.diag(r)))
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return GroupElement(tag, q * (d / np.abs(d)))


def haar_batch(tag: str, n: int, seed) -> np.ndarray:
    """``n`` Haar-distributed elements as a stack of group matrices."""
    rng = _rng(seed)
    family, k = parse_group(tag)
    if family in ("S3", "S3xS3"):
        m = 1 if family == "S3" else 2
        q = rng.standard_normal((n, m, 4))
        q /= np.linalg.norm(q, axis=2, keepdims=True)
        out = np.zeros((n, m, m, 4))
        for i in range(m):
            out[:, i, i] = q[:, i]
        return out
    if family == "Sp":
        a = rng.standard_normal((n, k, k, 4))
        cols = []
        for j in range(k):
            v = a[:, :, j].copy()
            for u in cols:
                coef = qmul(qconj(u), v).sum(axis=1)
                v = v - qmul(u, coef[:, None, :])
            v = v / np.sqrt(np.sum(v * v, axis=(1, 2)))[:, None, None]
            cols.append(v)
        return np.stack(cols, axis=2)
    if family == "O":
        z = rng.standard_normal((n, k, k))
    else:
        z = (rng.standard_normal((n, k, k)) + 1j * rng.standard_normal((n, k, k))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def random_algebra(tag: str, seed, scale: float = 1.0) -> AlgebraVector:
    rng = _rng(seed)
    return from_coords(tag, scale * rng.standard_normal(algebra_dim(tag)))


def sp2_from_columns(first, second) -> GroupElement:
    """Gram-Schmidt a pair of quaternion 2-vectors into an Sp(2) element."""
    a = np.stack([np.asarray(first, float), np.asarray(second, float)], axis=1)
    return GroupElement("Sp2", _quaternionic_gram_schmidt(a))
