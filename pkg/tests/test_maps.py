import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cheegerlab.actions import act, get_action
from cheegerlab.algebra import haar_sample, qconj, qmul
from cheegerlab.algebra.groups import (
    GroupElement,
    complex_to_qmat,
    qmat_to_complex,
    unitarity_residual,
)
from cheegerlab.maps import (
    NonUnitInputError,
    b_map,
    b_rows,
    blakers_massey,
    bump,
    catalog,
    codomain_residual,
    eta,
    exp_e0,
    f8,
    f10,
    f10_rows,
    get_map,
    hopf,
    j_tau,
    j_tau_c,
    j_tau_rows,
    map_equivariance,
    s_k,
    t_mn,
    tau,
    tau_c,
    tau_h,
)

MAP_IDS = [
    "hopf", "b", "b-gm", "f8", "f10-I", "f10-II", "eta", "eta-L", "eta-R", "I5",
    "tau(3)", "tau(4)", "j-tau(3)", "j-tau(6)", "tau-c(2)", "tau-h(1)", "tau-h(2)",
    "j-tau-c(1)", "j-tau-c(3)", "s(3)", "t(2,-1)", "t(0,3)",
]


def unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def test_hopf_examples():
    assert np.allclose(hopf([1, 0, 0, 0, 0, 0, 0, 0]), [1, 0, 0, 0, 0])
    assert np.allclose(hopf([0, 0, 0, 0, 1, 0, 0, 0]), [-1, 0, 0, 0, 0])
    s = 1 / np.sqrt(2)
    assert np.allclose(hopf([s, 0, 0, 0, s, 0, 0, 0]), [0, 1, 0, 0, 0])
    with pytest.raises(NonUnitInputError):
        hopf(np.ones(8))


def test_hopf_intertwines_gm_action():
    gm = get_action("gm-s7")
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = gm.space.sample(rng)
        q = haar_sample("S3", rng)
        lhs = hopf(act(gm, q, x))
        h = hopf(x)
        assert abs(lhs[0] - h[0]) <= 1e-12
        assert np.abs(lhs[1:] - qmul(qmul(q.quat, h[1:]), qconj(q.quat))).max() <= 1e-12


def test_conjugation_swaps_the_two_hopf_actions():
    # h composed with entrywise conjugation is invariant under the star side and
    # equivariant for the principal side
    rng = np.random.default_rng(1)
    for _ in range(200):
        z = unit(rng.standard_normal(8))
        r, s = unit(rng.standard_normal(4)), unit(rng.standard_normal(4))
        moved = np.concatenate([qmul(qmul(r, z[:4]), qconj(s)), qmul(qmul(r, z[4:]), qconj(s))])
        hc = lambda w: hopf(np.concatenate([qconj(w[:4]), qconj(w[4:])]))
        a, b = hc(moved), hc(z)
        assert abs(a[0] - b[0]) <= 1e-12
        assert np.abs(a[1:] - qmul(qmul(s, b[1:]), qconj(s))).max() <= 1e-12


def test_blakers_massey_examples():
    w = unit([1, 2, -1, 0.5])
    assert np.allclose(blakers_massey(np.zeros(3), w), [1, 0, 0, 0], atol=1e-15)
    assert np.array_equal(blakers_massey(unit([0.3, -1, 2]), np.zeros(4)), [-1, 0, 0, 0])


def test_blakers_massey_decay_near_branch():
    p = unit([0.2, 0.7, -0.4])
    d = unit([1, -1, 2, 0.3])
    for k in range(3, 8):
        s = 10.0**-k
        val = blakers_massey(p * np.sqrt(1 - s * s), s * d)
        assert np.linalg.norm(val - [-1, 0, 0, 0]) <= 10 * s


def test_blakers_massey_so4_symmetry():
    assert map_equivariance(get_map("b"), 1000, 3) <= 1e-12


def test_f8_examples():
    assert np.allclose(f8([1, 0, 0, 0, 0, 0, 0, 0, 0]), [1, 0, 0, 0, 0, 0, 0, 0])
    w = unit([0.5, -1, 0.2, 2])
    assert np.allclose(f8(np.concatenate([[0], np.zeros(4), w])), np.concatenate([np.zeros(4), w]))
    assert map_equivariance(get_map("f8"), 1000, 4) <= 1e-11


def test_bump_fixed_values_and_flag():
    assert bump(0.0) == 0.0 and bump(1.0) == 1.0
    assert bump(0.5) == 0.5
    s = np.linspace(0.25, 0.75, 101)
    assert np.array_equal(bump(s), s)
    assert np.all(bump(np.linspace(0, 0.04, 20)) == 0.0)
    assert np.all(bump(np.linspace(0.96, 1, 20)) == 1.0)
    assert bump(1.5, with_flag=True) == (1.0, True)
    assert bump(0.3, with_flag=True) == (0.3, False)


def test_bump_monotone():
    s = np.sort(np.random.default_rng(5).uniform(0, 1, 10_001))
    vals = bump(s)
    assert np.all(np.diff(vals) >= 0)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_bump_order_preserving(a, b):
    lo, hi = min(a, b), max(a, b)
    assert bump(lo) <= bump(hi)
    assert 0.0 <= bump(lo) <= 1.0


def test_f10_examples():
    x = unit([0.1, 0.3, -1, 0.2]) * 0.97
    rest = unit(np.ones(7)) * np.sqrt(1 - 0.97**2)
    pt = np.concatenate([rest[:3], rest[3:], x])
    out = f10(pt)
    assert np.allclose(out, np.concatenate([np.zeros(4), x / 0.97]), atol=1e-15)
    pw = unit([0.2, -0.5, 0.1, 1, 0, 2, -1])
    out = f10(np.concatenate([pw, np.zeros(4)]))
    assert np.allclose(out[:4], b_map(pw)) and np.array_equal(out[4:], np.zeros(4))


@pytest.mark.parametrize("mid", ["f10-I", "f10-II"])
def test_f10_equivariance(mid):
    assert map_equivariance(get_map(mid), 1000, 6) <= 1e-9


def test_tau_reflection():
    rng = np.random.default_rng(7)
    for n in (2, 3, 5, 6):
        x = unit(rng.standard_normal(n))
        t = tau(n, x)
        assert np.allclose(t @ x, x, atol=1e-15)
        v = rng.standard_normal(n)
        v -= (v @ x) * x
        assert np.allclose(t @ v, -v, atol=1e-14)
    with pytest.raises(NonUnitInputError):
        tau(3, [1.0, 1.0, 0.0])


def test_tau_c_and_tau_h_are_unitary():
    rng = np.random.default_rng(8)
    for m in (1, 2, 3):
        for _ in range(50):
            v = unit(rng.standard_normal(2 * m + 1))
            t = tau_c(m, v[0], v[1::2] + 1j * v[2::2])
            assert np.abs(t.conj().T @ t - np.eye(m)).max() <= 1e-12
            vh = unit(rng.standard_normal(4 * m + 3))
            th = tau_h(m, vh[:3], vh[3:])
            tag = "Sp2" if m == 2 else f"Sp({m})"
            assert unitarity_residual(GroupElement(tag, th)) <= 1e-12
    assert np.array_equal(tau_c(2, 1.0, np.zeros(2)), np.eye(2))


def test_exp_and_j_tau_conventions():
    assert np.array_equal(exp_e0(np.zeros(3)), [1, 0, 0, 0])
    for n in (2, 4, 6):
        x = np.zeros(2 * n)
        x[n] = 1.0
        assert np.array_equal(j_tau(n, x), np.eye(n + 1)[0])
        y = np.zeros(2 * n)
        y[:n] = unit(np.arange(1, n + 1))
        assert np.allclose(j_tau(n, y), -np.eye(n + 1)[0], atol=1e-15)
        # nearly vanishing x2 agrees with the branch value
        z = y.copy()
        z[n + 1] = 1e-9
        z /= np.linalg.norm(z)
        assert np.linalg.norm(j_tau(n, z) - j_tau(n, y)) <= 1e-8
    for m in (1, 2):
        x = np.zeros(4 * m + 2)
        x[2 * m + 1] = 1.0
        assert np.array_equal(j_tau_c(m, x), np.eye(2 * m + 2)[0])


def test_eta_family():
    assert np.allclose(eta([1, 0, 0, 0, 0]), [1, 0, 0, 0])
    assert np.array_equal(s_k(3, np.eye(3).ravel()), np.eye(4).ravel())
    assert map_equivariance(get_map("eta-L"), 1000, 9) <= 1e-10
    assert map_equivariance(get_map("eta-R"), 1000, 9) <= 1e-10


def test_milnor_transition_matrices():
    rng = np.random.default_rng(10)
    x = unit(rng.standard_normal(4))
    assert np.allclose(t_mn(0, 0, x), np.eye(4))
    for m, n in [(2, -1), (3, 1), (-2, 0)]:
        assert np.allclose(t_mn(m, n, [1, 0, 0, 0]), np.eye(4))
    assert abs(np.linalg.det(t_mn(2, -1, x)) - 1.0) <= 1e-12
    v = rng.standard_normal(4)
    direct = qmul(qmul(qmul(x, x), v), qconj(x))
    assert np.allclose(t_mn(2, -1, x) @ v, direct)


@pytest.mark.parametrize("mid", MAP_IDS)
def test_registered_maps(mid):
    nm = get_map(mid)
    assert codomain_residual(nm, 100, 11) <= 1e-10
    assert map_equivariance(nm, 200, 12) <= 1e-9
    d = json.loads(nm.descriptor_json())
    assert d["id"] == mid and len(d["action-ids"]) == 2


def test_catalog_entries():
    assert "hopf" in catalog()
    assert "t(m,n)" in catalog()


def test_complex_rep_roundtrip():
    g = haar_sample("Sp2", 13)
    assert np.allclose(complex_to_qmat(qmat_to_complex(g.matrix)), g.matrix)


def test_row_forms_match_pointwise():
    rng = np.random.default_rng(5)
    for mid in ("f8", "f10-I", "j-tau(3)", "j-tau(5)", "j-tau-c(1)", "j-tau-c(3)"):
        nm = get_map(mid)
        sp = get_action(nm.domain_action).space
        x = np.array([sp.sampler(rng) for _ in range(30)])
        assert np.allclose(nm.evaluator.batch(x), [nm(r) for r in x], atol=1e-13), mid


def test_row_forms_at_special_points():
    x = np.zeros((1, 7))
    x[0, 0] = 1.0
    assert np.allclose(b_rows(x), [b_map(x[0])])
    y = np.zeros((1, 6))
    y[0, 1] = 1.0
    assert np.allclose(j_tau_rows(3, y), [j_tau(3, y[0])])
    z = np.zeros((2, 11))
    z[0, 7] = 1.0
    z[1, 0] = 1.0
    assert np.allclose(f10_rows(z), [f10(r) for r in z])
