import numpy as np
import pytest

from cheegerlab import cheeger as C
from cheegerlab import riemann as R
from cheegerlab.actions import get_action
from cheegerlab.algebra.groups import bracket, from_coords, q_norm

HOPF = get_action("hopf-principal-s7")
STAR = get_action("hopf-star-s7")
ROUND = R.round_metric("S7")


def const(c):
    return lambda x: c * np.ones(np.atleast_2d(x).shape[0])


@pytest.fixture(scope="module")
def state():
    return C.orbit_tensor(ROUND, HOPF, HOPF.space.sample(0))


def test_hopf_orbit_tensor():
    rng = np.random.default_rng(1)
    for _ in range(20):
        st = C.orbit_tensor(ROUND, HOPF, HOPF.space.sampler(rng))
        assert np.abs(st.eigenvalues - 1).max() <= 1e-12
        assert st.relation_residual() <= 1e-9
        assert st.horizontal.shape == (8, 4)


def test_fiber_scaled_orbit_tensor():
    m = R.fiber_scaled_metric(HOPF, const(0.3))
    st = C.orbit_tensor(m, HOPF, HOPF.space.sample(2))
    assert np.abs(st.eigenvalues - 0.3).max() <= 1e-12
    assert st.relation_residual() <= 1e-9


def test_fixed_point_has_empty_spectrum():
    spec = get_action("s4-conj")
    st = C.orbit_tensor(R.round_metric("S4"), spec, np.eye(5)[0])
    assert st.k == 0 and st.horizontal.shape == (5, 4)


def test_nonpositive_orbit_tensor():
    bad = R.AmbientMetric(ROUND.space, lambda x: -np.broadcast_to(np.eye(8), (np.atleast_2d(x).shape[0], 8, 8)))
    with pytest.raises(C.NonPositiveOrbitTensor):
        C.orbit_tensor(bad, HOPF, HOPF.space.sample(3))


def test_deformed_tensors_plugins(state):
    d0 = C.deformed_tensors(state, 0.0)
    assert np.allclose(d0["P_t"], state.eigenvalues) and np.array_equal(d0["C_t"], np.eye(8))
    d1 = C.deformed_tensors(state, 1.0)
    assert np.abs(d1["P_t"] - 0.5).max() <= 1e-12
    assert np.abs(d1["C_t_vertical"] - 0.5).max() <= 1e-12
    with pytest.raises(C.NegativeTError):
        C.deformed_tensors(state, -0.1)


@pytest.mark.parametrize("aid,mid", [("hopf-principal-s7", None), ("s4-conj", "S4"), ("gm-s7", "S7")])
def test_tensor_identities(aid, mid):
    spec = get_action(aid)
    m = R.fiber_scaled_metric(spec, lambda x: 1 + 0.5 * np.atleast_2d(x)[:, 0] ** 2) if mid is None else R.round_metric(mid)
    rng = np.random.default_rng(4)
    for _ in range(10):
        st = C.orbit_tensor(m, spec, spec.space.sampler(rng))
        res = C.tensor_identity_residuals(st, float(rng.uniform(0, 10)), rng)
        assert max(res.values()) <= 1e-12


def test_deformed_metric_eval(state):
    p = state.point
    h = state.horizontal[:, 0]
    v = state.orbit_vectors()[:, 0]
    rng = np.random.default_rng(5)
    for t in (0.0, 0.5, 3.0):
        dm = C.deformed_metric(ROUND, HOPF, t)
        assert abs(C.deformed_metric_eval(dm, p, h, h) - 1) <= 1e-12
        lam = state.eigenvalues[0]
        assert abs(C.deformed_metric_eval(dm, p, v, v) - lam / (1 + t * lam)) <= 1e-12
        a, b = R.random_tangent_pair(HOPF.space, p, rng)
        ab, ba = C.deformed_metric_eval(dm, p, a, b), C.deformed_metric_eval(dm, p, b, a)
        assert abs(ab - ba) <= 1e-12
        # the Woodbury ambient tensor agrees with the decomposition formula
        assert abs(dm.inner(p, a, b) - ab) <= 1e-12


def test_deformed_metric_rejects_non_tangent(state):
    dm = C.deformed_metric(ROUND, HOPF, 1.0)
    with pytest.raises(C.DecompositionError):
        C.deformed_metric_eval(dm, state.point, state.point, state.point)


def test_deformed_metric_positive_definite():
    rng = np.random.default_rng(6)
    for t in (0.0, 0.1, 10.0, 1e4):
        dm = C.deformed_metric(ROUND, HOPF, t)
        for _ in range(5):
            assert dm.field(HOPF.space.sampler(rng)).check() > 0


def test_deformed_sectional_t0(state):
    dm = C.deformed_metric(ROUND, HOPF, 0.0)
    a, b = R.random_tangent_pair(HOPF.space, state.point, np.random.default_rng(7))
    assert abs(C.deformed_sectional(dm, state.point, a, b).K - 1) <= 1e-3


def test_deformed_metric_invariance():
    for t in (0.5, 5.0):
        dm = C.deformed_metric(ROUND, HOPF, t)
        assert R.transport_residual(dm, HOPF, 100, 8) <= 1e-9
        assert R.transport_residual(dm, STAR, 100, 9) <= 1e-9


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_monotonicity(t):
    rng = np.random.default_rng(10)
    dm = C.deformed_metric(ROUND, HOPF, t)
    for _ in range(10):
        p = HOPF.space.sampler(rng)
        tensor_t = R.curvature_tensor(dm.field(p))
        tensor0 = R.curvature_tensor(ROUND.field(p))
        for _ in range(3):
            a, b = R.random_tangent_pair(HOPF.space, p, rng)
            assert C.kappa_t(dm, p, a, b, tensor_t) >= C.kappa_0(ROUND, p, a, b, tensor0) - 1e-3


def test_bracket_lower_bound(state):
    # U, V orthonormal in m_p: round S^7 gives kappa_t = (1 + t)^3 exactly
    u, v = np.eye(3)[0], np.eye(3)[1]
    p = state.point
    for t in (0.1, 1.0, 10.0):
        dm = C.deformed_metric(ROUND, HOPF, t)
        uu, vv = state.field(u), state.field(v)
        k = C.kappa_t(dm, p, uu, vv)
        k0 = C.kappa_0(ROUND, p, uu, vv)
        assert k >= k0 + C.bracket_lower_bound(state, t, u, v) - 1e-3
        assert abs(k - (1 + t) ** 3) <= 1e-3 * (1 + t) ** 3


def test_horizontal_ricci_hopf(state):
    for i in range(4):
        assert abs(C.ricci_horizontal(ROUND, HOPF, state.point, state.horizontal[:, i]) - 3) <= 1e-2


def test_horizontal_ricci_rejects_vertical(state):
    with pytest.raises(ValueError):
        C.ricci_horizontal(ROUND, HOPF, state.point, state.orbit_vectors()[:, 0])


def test_horizontal_ricci_torus():
    spec = get_action("t2-circle")
    m = R.round_metric("T2")
    p = spec.space.sample(11)
    st = C.orbit_tensor(m, spec, p)
    assert abs(C.ricci_horizontal(m, spec, p, st.horizontal[:, 0])) <= 1e-4


def test_horizontal_ricci_basis_invariance():
    m = C.inflated_hopf_metric()
    p = HOPF.space.sample(12)
    st = C.orbit_tensor(m, HOPF, p)
    f = m.field(p)
    tensor = R.curvature_tensor(f)
    x = st.horizontal[:, 0] + 0.5 * st.horizontal[:, 2]
    before = C.ricci_horizontal_form(st, tensor, f.chart, x)
    q, _ = np.linalg.qr(np.random.default_rng(13).standard_normal((4, 4)))
    st.horizontal = st.horizontal @ q
    assert abs(C.ricci_horizontal_form(st, tensor, f.chart, x) - before) <= 1e-6


def test_orbit_ricci_limit_abelian():
    spec = get_action("t2-circle")
    st = C.orbit_tensor(R.round_metric("T2"), spec, spec.space.sample(14))
    assert C.orbit_ricci_limit(st, [1.0]) == 0.0


def test_orbit_ricci_limit_s3(state):
    # bracket oracle: [i, j] = 2k in this Q normalization, so two brackets of norm 2 give 2
    rng = np.random.default_rng(15)
    for _ in range(10):
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        oracle = sum(0.25 * q_norm(bracket(from_coords("S3", e), from_coords("S3", u))) ** 2 for e in np.eye(3))
        assert abs(C.orbit_ricci_limit(state, u) - oracle) <= 1e-12
        assert abs(oracle - 2) <= 1e-12
    with pytest.raises(ValueError):
        C.orbit_ricci_limit(state, [2.0, 0, 0])


def test_vertical_ricci_converges(state):
    u = state.vectors[0]
    lim = C.orbit_ricci_limit(state, u)
    for t in (1e2, 1e3, 1e4):
        assert abs(C.vertical_ricci(ROUND, HOPF, state.point, u, t) - lim) <= 1e-2


def test_limit_terms_inflated():
    m = C.inflated_hopf_metric()
    st = C.orbit_tensor(m, HOPF, HOPF.space.sample(16))
    u = np.array([0.6, 0.8, 0.0])
    out = C.limit_terms(m, HOPF, st.point, st.horizontal[:, 1], u, [1e2, 1e3, 1e4])
    for key in ("slope_a", "slope_b", "slope_c"):
        assert abs(out[key] + 1) <= 0.15


def test_scan_round():
    res = C.ricci_positivity_scan(ROUND, HOPF, [0.25, 1.0, 4.0], 5, 17)
    assert res.certificate["status"] == "certified" and res.certificate["t_star"] == 0.25
    assert all(r["min_ricci"] > 0 for r in res.table)
    lines = res.to_csv().strip().split("\n")
    assert lines[0] == "t,point-id,min_ricci,min_sec,ricH_min" and len(lines) == 16


def test_scan_inflated_certificate():
    m = C.inflated_hopf_metric()
    res = C.ricci_positivity_scan(m, HOPF, [2.0**k for k in range(-3, 3)], 12, 0)
    cert = res.certificate
    assert cert["hypothesis_checks"]["ricH_positive"]
    assert res.table[0]["min_ricci"] < 0
    assert cert["status"] == "certified" and cert["t_star"] is not None
    assert cert["min_ricci_at_t_star"] > 0
    assert cert["hypothesis_checks"]["limit_margin_min"] > 0


def test_scan_torus_negative_control():
    spec = get_action("t2-circle")
    res = C.ricci_positivity_scan(R.round_metric("T2"), spec, [1.0, 10.0], 5, 18)
    assert res.certificate["status"] == "hypothesis-failed" and res.certificate["t_star"] is None


def test_scan_deterministic():
    a = C.ricci_positivity_scan(ROUND, HOPF, [1.0], 3, 19)
    b = C.ricci_positivity_scan(ROUND, HOPF, [1.0], 3, 19)
    assert a.to_csv() == b.to_csv() and a.certificate_json() == b.certificate_json()


def test_fiber_shrink():
    assert C.fiber_shrink_check(ROUND, HOPF, 1.0, 50, 20)["t_required"] == 0.0
    r = C.fiber_shrink_check(ROUND, HOPF, 0.1, 1000, 21)
    assert abs(r["t_required"] - 9) <= 1e-9
    assert r["max_vertical_norm"] <= 0.1 + 1e-9
    assert r["max_bound_ratio"] <= 1 + 1e-9
    lo, hi = r["sharpness_range"]
    assert lo >= 1 - 1e-9 and hi <= 1 + 1e-12
    # independent check against the assembled g_t tensor
    assert C.vertical_norm_fd(ROUND, HOPF, r["t_required"], 200, 22) <= 0.1 + 1e-9


def test_fiber_shrink_scaled():
    m = R.fiber_scaled_metric(HOPF, const(4.0))
    r = C.fiber_shrink_check(m, HOPF, 0.2, 100, 23)
    assert abs(r["lambda"] - 4) <= 1e-9 and abs(r["t_required"] - 1.0) <= 1e-9


def test_comparison_product():
    sub = R.product_submersion()
    bundle = R.GGBundle(sub, sub)
    r = C.curvature_comparison_check(bundle, 0.1, 1.0, 3, 24, check_precondition=False)
    for p in r["planes"]:
        assert abs(p["K_M"] - p["K_Mprime"]) <= 5e-2


def test_comparison_hopf():
    bundle = R.hopf_gg_bundle()
    for t in (0.0, 1.0, 9.0):
        r = C.curvature_comparison_check(bundle, 0.1, t, 4, 25)
        assert r["max_deficit"] <= 5e-2


def test_comparison_precondition_inflated():
    # inflated fibers at t = 0 violate the shrinking precondition; a large t meets it
    m = R.fiber_scaled_metric(HOPF, const(4.0))
    bundle = R.hopf_gg_bundle(m)
    r0 = C.curvature_comparison_check(bundle, 0.1, 0.0, 2, 26)
    assert not r0["precondition"]["satisfied"]
    need = r0["precondition"]["t_min"]
    r1 = C.curvature_comparison_check(bundle, 0.1, need + 1, 2, 26)
    assert r1["precondition"]["satisfied"] and r1["max_deficit"] <= 5e-2


def test_inflation_oracle():
    o = C.inflation_oracle(omega_grid=(2.0, 4.0), n_points=10, seed=0)
    assert o["chosen"] == {"a": 0.25, "omega": 4.0}
    row = o["table"][1]
    assert row["min_ricci_t0"] < 0 < row["ricH_min"]


def test_threads_env(monkeypatch):
    monkeypatch.setenv("CHEEGERLAB_THREADS", "3")
    a = C.ricci_positivity_scan(ROUND, HOPF, [1.0], 4, 27)
    monkeypatch.setenv("CHEEGERLAB_THREADS", "1")
    b = C.ricci_positivity_scan(ROUND, HOPF, [1.0], 4, 27)
    assert a.to_csv() == b.to_csv()
