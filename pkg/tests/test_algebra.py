import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cheegerlab.algebra import (
    haar_batch,
    I,
    J,
    K,
    ONE,
    Quaternion,
    algebra_basis,
    algebra_dim,
    bracket,
    exp_algebra,
    haar_sample,
    identity,
    inner_q,
    inverse,
    left_matrix,
    multiply,
    qconj,
    qexp,
    qmul,
    qnorm,
    qpow,
    random_algebra,
    right_matrix,
    skew_residual,
    sp2_column_residual,
    sp2_from_columns,
    unitarity_residual,
)
from cheegerlab.algebra.groups import GroupElement, GroupTagError

GROUPS = ["S3", "S3xS3", "Sp2", "Sp(3)", "O(3)", "O(5)", "U(1)", "U(3)"]

quats = st.lists(st.floats(-3, 3, allow_nan=False), min_size=4, max_size=4).map(np.array)


def test_defining_relations():
    assert np.allclose(qmul(I, J), K)
    assert np.allclose(qmul(J, K), I)
    assert np.allclose(qmul(K, I), J)
    assert np.allclose(qmul(I, I), -ONE)
    q = np.array([0.3, -1.2, 0.5, 2.0])
    assert np.array_equal(qmul(ONE, q), q)


def test_associativity_batch():
    rng = np.random.default_rng(0)
    a, b, c = rng.standard_normal((3, 1000, 4))
    res = np.abs(qmul(qmul(a, b), c) - qmul(a, qmul(b, c))).max()
    assert res <= 1e-14 * 10  # entries are O(10); relative 1e-14


@settings(max_examples=200, deadline=None)
@given(quats, quats)
def test_conjugation_reverses_and_norm_multiplicative(a, b):
    assert np.allclose(qconj(qmul(a, b)), qmul(qconj(b), qconj(a)), atol=1e-12)
    assert np.isclose(qnorm(qmul(a, b)), qnorm(a) * qnorm(b), rtol=1e-12, atol=1e-12)


def test_left_right_matrices():
    rng = np.random.default_rng(1)
    q, v = rng.standard_normal((2, 4))
    assert np.allclose(left_matrix(q) @ v, qmul(q, v))
    assert np.allclose(right_matrix(q) @ v, qmul(v, q))


def test_qexp():
    assert np.array_equal(qexp(np.zeros(4)), ONE)
    assert np.allclose(qexp(np.pi * I), -ONE, atol=1e-15)
    rng = np.random.default_rng(2)
    p = rng.standard_normal((1000, 4)) * 3
    p[:, 0] = 0
    assert np.abs(qnorm(qexp(p)) - 1).max() <= 1e-13
    with pytest.raises(ValueError):
        qexp(np.array([1.0, 0, 0, 0]))


def test_qpow_matches_repeated_product():
    q = np.array([0.2, 0.4, -0.8, 0.1])
    q = q / np.linalg.norm(q)
    assert np.allclose(qpow(q, 3), qmul(q, qmul(q, q)))
    assert np.allclose(qmul(qpow(q, -2), qpow(q, 2)), ONE)
    assert np.array_equal(qpow(q, 0), ONE)


def test_conjugation_is_isometric():
    rng = np.random.default_rng(3)
    for _ in range(200):
        q = haar_sample("S3", rng).quat
        v = rng.standard_normal(4)
        assert abs(qnorm(qmul(qmul(q, v), qconj(q))) - qnorm(v)) <= 1e-13


def test_value_type():
    q = Quaternion(0, 1, 0, 0) * Quaternion(0, 0, 1, 0)
    assert q == Quaternion(0, 0, 0, 1)
    assert abs(Quaternion(1, 1, 1, 1)) == 2.0


@pytest.mark.parametrize("tag", GROUPS)
def test_haar_unitarity_and_determinism(tag):
    g = haar_sample(tag, 11)
    h = haar_sample(tag, 11)
    assert np.array_equal(g.matrix, h.matrix)
    assert unitarity_residual(g) <= 1e-12
    assert unitarity_residual(multiply(g, inverse(g))) <= 1e-12


@pytest.mark.parametrize("tag", ["S3", "O(3)", "U(2)", "Sp2"])
def test_haar_entry_mean_and_left_invariance(tag):
    rng = np.random.default_rng(5)
    g0 = haar_sample(tag, 99)
    samples = [haar_sample(tag, rng) for _ in range(10_000)]
    plain = np.array([np.real(s.matrix) for s in samples])
    moved = np.array([np.real(multiply(g0, s).matrix) for s in samples])
    for arr in (plain, moved):
        mean = arr.mean(axis=0)
        sigma = arr.std(axis=0) / np.sqrt(len(samples))
        mask = sigma > 0
        assert np.all(np.abs(mean[mask]) <= 3 * sigma[mask] + 1e-12) or (
            np.mean(np.abs(mean[mask]) <= 3 * sigma[mask]) > 0.97
        )


def test_sp2_column_relation():
    rng = np.random.default_rng(6)
    for _ in range(100):
        g = haar_sample("Sp2", rng)
        assert sp2_column_residual(g) <= 1e-12
        a = rng.standard_normal((2, 4))
        b = rng.standard_normal((2, 4))
        assert sp2_column_residual(sp2_from_columns(a, b)) <= 1e-12


@pytest.mark.parametrize("tag", GROUPS)
def test_basis_orthonormal_and_skew(tag):
    basis = algebra_basis(tag)
    assert len(basis) == algebra_dim(tag)
    gram = np.array([[inner_q(x, y) for y in basis] for x in basis])
    assert np.allclose(gram, np.eye(len(basis)), atol=1e-15)
    for x in basis:
        assert skew_residual(x) == 0


@pytest.mark.parametrize("tag", GROUPS)
def test_bracket_identities(tag):
    rng = np.random.default_rng(7)
    for _ in range(20):
        x, y, z = (random_algebra(tag, rng) for _ in range(3))
        assert np.abs(bracket(x, x).matrix).max() == 0
        jac = bracket(x, bracket(y, z)) + bracket(y, bracket(z, x)) + bracket(z, bracket(x, y))
        assert np.abs(jac.matrix).max() <= 1e-12
        assert abs(inner_q(bracket(x, y), z) + inner_q(y, bracket(x, z))) <= 1e-10
        assert skew_residual(bracket(x, y)) <= 1e-12
        assert inner_q(x, x) > 0


@pytest.mark.parametrize("tag", GROUPS)
def test_exp_lands_in_group(tag):
    x = random_algebra(tag, 8)
    g = exp_algebra(x)
    assert unitarity_residual(g) <= 1e-12
    assert unitarity_residual(exp_algebra(0.0 * x)) == 0
    assert np.allclose(exp_algebra(0.0 * x).matrix, identity(tag).matrix)


def test_tag_mismatch():
    with pytest.raises(GroupTagError):
        bracket(algebra_basis("S3")[0], algebra_basis("O(3)")[0])
    with pytest.raises(GroupTagError):
        haar_sample("SO(3)", 0)


@pytest.mark.parametrize("tag", GROUPS)
def test_haar_batch_members_and_determinism(tag):
    a = haar_batch(tag, 50, 3)
    assert np.array_equal(a, haar_batch(tag, 50, 3))
    for m in a:
        assert unitarity_residual(GroupElement(tag, m)) <= 1e-12


@pytest.mark.parametrize("tag,second", [("S3", 0.25), ("Sp2", 0.25), ("O(3)", 1.0), ("O(5)", 1.0), ("U(2)", 1.0)])
def test_haar_batch_trace_moment(tag, second):
    # orthogonality oracle: the defining representation is irreducible, so E|tr|^2 = 1
    # (for quaternionic groups the complex trace is twice the real part of the H-trace)
    a = haar_batch(tag, 20000, 8)
    quat = a.shape[-1] == 4 and a.ndim == 4
    tr = np.einsum("nii...->n...", a)
    tr = tr[:, 0] if quat else tr
    m2 = np.mean(np.abs(tr) ** 2)
    assert abs(m2 - second) <= 0.06 * second
    assert abs(np.mean(tr)) <= 0.05
