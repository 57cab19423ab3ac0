"""Quaternion arithmetic on numpy arrays.

A quaternion is stored as a trailing axis of length 4 holding the
components ``(w, x, y, z)`` over the basis ``1, i, j, k``.  Every function
broadcasts over leading axes, so a batch of quaternions is simply an array
of shape ``(..., 4)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ONE = np.array([1.0, 0.0, 0.0, 0.0])
I = np.array([0.0, 1.0, 0.0, 0.0])
J = np.array([0.0, 0.0, 1.0, 0.0])
K = np.array([0.0, 0.0, 0.0, 1.0])


def as_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 4:
        raise ValueError(f"quaternion arrays need a trailing axis of length 4, got {q.shape}")
    return q


def qmul(a, b) -> np.ndarray:
    """Hamilton product ``a * b``."""
    a = as_quat(a)
    b = as_quat(b)
    if a.ndim == 1 and b.ndim == 1:
        aw, ax, ay, az = a.tolist()
        bw, bx, by, bz = b.tolist()
        return np.array([
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ])
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = aw * bw - ax * bx - ay * by - az * bz
    out[..., 1] = aw * bx + ax * bw + ay * bz - az * by
    out[..., 2] = aw * by - ax * bz + ay * bw + az * bx
    out[..., 3] = aw * bz + ax * by - ay * bx + az * bw
    return out


def qconj(q) -> np.ndarray:
    q = as_quat(q)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qnorm(q) -> np.ndarray:
    return np.linalg.norm(as_quat(q), axis=-1)


def qinv(q) -> np.ndarray:
    q = as_quat(q)
    return qconj(q) / np.sum(q * q, axis=-1, keepdims=True)


def qnormalize(q) -> np.ndarray:
    q = as_quat(q)
    return q / qnorm(q)[..., None]


def qreal(q) -> np.ndarray:
    return as_quat(q)[..., 0]


def qimag(q) -> np.ndarray:
    """Imaginary part as a quaternion with zero real component."""
    q = as_quat(q).copy()
    q[..., 0] = 0.0
    return q


def is_imaginary(q, tol: float = 1e-12) -> bool:
    return bool(np.all(np.abs(qreal(q)) <= tol))


def qexp(p) -> np.ndarray:
    """Exponential of a pure imaginary quaternion.

    ``exp(p) = cos|p| + sin|p| p/|p|``; the value at ``p = 0`` is 1.
    Raises ``ValueError`` when ``p`` has a non-zero real part.
    """
    p = as_quat(p)
    if not is_imaginary(p):
        raise ValueError("qexp expects a pure imaginary quaternion")
    theta = qnorm(p)
    # sin(theta)/theta, with the removable singularity filled in
    safe = np.where(theta > 1e-300, theta, 1.0)
    sinc = np.where(theta > 1e-8, np.sin(theta) / safe, 1.0 - theta**2 / 6.0)
    out = p * sinc[..., None]
    out[..., 0] = np.cos(theta)
    return out


def qpow(q, k: int) -> np.ndarray:
    """Integer power of a (nonzero) quaternion by repeated squaring."""
    q = as_quat(q)
    if k < 0:
        return qpow(qinv(q), -k)
    result = np.broadcast_to(ONE, q.shape).copy()
    base = q
    while k:
        if k & 1:
            result = qmul(result, base)
        base = qmul(base, base)
        k >>= 1
    return result


def qconjugate_by(q, v) -> np.ndarray:
    """``q v q^{-1}`` for unit ``q``."""
    return qmul(qmul(q, v), qconj(q))


def _stack4(rows) -> np.ndarray:
    return np.moveaxis(np.array(rows), (0, 1), (-2, -1))


def left_matrix(q) -> np.ndarray:
    """4x4 real matrix of ``v -> q v``; stacks of quaternions give stacks of matrices."""
    w, x, y, z = np.moveaxis(as_quat(q), -1, 0)
    return _stack4(
        [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ]
    )


def right_matrix(q) -> np.ndarray:
    """4x4 real matrix of ``v -> v q``."""
    w, x, y, z = np.moveaxis(as_quat(q), -1, 0)
    return _stack4(
        [
            [w, -x, -y, -z],
            [x, w, z, -y],
            [y, -z, w, x],
            [z, y, -x, w],
        ]
    )


def to_complex_pair(q) -> tuple[np.ndarray, np.ndarray]:
    """Split ``q = z1 + z2 j`` with ``z1 = w + x i`` and ``z2 = y + z i``."""
    q = as_quat(q)
    return q[..., 0] + 1j * q[..., 1], q[..., 2] + 1j * q[..., 3]


def from_complex_pair(z1, z2) -> np.ndarray:
    z1 = np.asarray(z1)
    z2 = np.asarray(z2)
    return np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)


@dataclass(frozen=True)
class Quaternion:
    """Small value type for interactive use; the library works on arrays."""

    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        w, x, y, z = (float(c) for c in as_quat(a))
        return cls(w, x, y, z)

    def array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion.from_array(qmul(self.array(), other.array()))

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion.from_array(self.array() + other.array())

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion.from_array(self.array() - other.array())

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def __abs__(self) -> float:
        return float(qnorm(self.array()))
