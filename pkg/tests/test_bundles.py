import numpy as np
import pytest

from cheegerlab import bundles as B
from cheegerlab.actions import check_equivariance, get_action
from cheegerlab.algebra import haar_sample, inverse, multiply, qmul, qpow, s3
from cheegerlab.algebra.groups import GroupElement, identity
from cheegerlab.bundles import Ref
from cheegerlab.maps import b_map

BUNDLE_IDS = [b for b in B.catalog() if b != "milnor(m,n)"]


def unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def test_hopf_cocycle_passes():
    rep = B.validate_cocycle(B.get_bundle("hopf").cocycle, 1000, 0)
    assert rep.passed and rep.cocycle_residual <= 1e-12 and rep.equivariance_residual <= 1e-12


@pytest.mark.parametrize("k", range(-3, 4))
def test_milnor_principal_cocycles(k):
    rep = B.validate_cocycle(B.milnor_principal_cocycle(k), 300, k + 10)
    assert rep.passed


def test_right_translation_is_not_equivariant():
    c = B.clutching_cocycle("s4-conj", Ref.make("right-i"))
    rep = B.validate_cocycle(c, 200, 1)
    assert not rep.passed
    assert rep.cocycle_residual <= 1e-12
    assert rep.equivariance_residual > 0.1


def test_empty_overlap_is_structural_error():
    c = B.StarCocycle("s4-conj", 0, Ref.make("unit-quaternion"), collar=-0.5)
    with pytest.raises(B.StructuralError):
        B.validate_cocycle(c, 5, 0)


def test_clutching_axis_must_be_fixed():
    with pytest.raises(B.StructuralError):
        B.clutching_cocycle("s4-conj", Ref.make("unit-quaternion"), axis=2)


@pytest.mark.parametrize("bid", BUNDLE_IDS)
def test_cataloged_bundles(bid):
    b = B.get_bundle(bid)
    assert B.validate_cocycle(b.cocycle, 100, 2).passed
    assert b.bijection_residual(50, 3) <= 1e-10
    s = b.to_json()
    back = B.BundleSpec.from_json(s)
    assert back == b and back.to_json() == s


def test_adjoint_examples():
    spec = get_action("s3-conj")
    same = B.hat(lambda x: s3(x), spec)
    e = B.hat(lambda x: identity("S3"), spec)
    rng = np.random.default_rng(4)
    for _ in range(100):
        x = spec.space.sampler(rng)
        assert np.abs(same(x) - x).max() <= 1e-14
        assert np.array_equal(e(x), x)


def test_adjoint_map_rejects_off_overlap():
    c = B.get_bundle("hopf").cocycle
    with pytest.raises(B.StructuralError):
        B.adjoint_map(c, (0, 1), np.array([1.0, 0, 0, 0, 0]))


def test_b_hat_jacobian_nonsingular():
    rng = np.random.default_rng(5)
    space = get_action("s6-gm").space
    h = 1e-6
    worst = 0.0
    for _ in range(500):
        x = space.sampler(rng)
        tb = space.tangent_basis(x)
        cols = [(B.b_hat(unit(x + h * t)) - B.b_hat(unit(x - h * t))) / (2 * h) for t in tb]
        jac = np.array(cols).T
        tb_y = space.tangent_basis(B.b_hat(x))
        s = np.linalg.svd(tb_y @ jac, compute_uv=False)
        worst = max(worst, s[0] / s[-1])
    assert np.isfinite(worst) and worst < 1e6


def test_b_hat_bijection():
    gm = get_action("s6-gm")
    bb = lambda x: s3(b_map(x))
    back = B.hat(B.pointwise_inverse(bb), gm)
    rng = np.random.default_rng(6)
    for _ in range(300):
        x = gm.space.sampler(rng)
        assert np.linalg.norm(back(B.b_hat(x)) - x) <= 1e-10


def test_hat_composition():
    spec = get_action("s3-conj")
    th2 = lambda x: s3(qpow(x, 2))
    th3 = lambda x: s3(qpow(x, 3))
    assert B.hat_composition_check(th2, th3, spec, 1000, 7) <= 1e-12
    inv = B.pointwise_inverse(th3)
    rng = np.random.default_rng(7)
    ident = B.hat(B.pointwise_product(th3, inv), spec)
    for _ in range(50):
        x = spec.space.sampler(rng)
        assert np.abs(ident(x) - x).max() <= 1e-14
    gm = get_action("s6-gm")
    bb = lambda x: s3(b_map(x))
    assert B.hat_composition_check(bb, bb, gm, 500, 8) <= 1e-10


@pytest.mark.parametrize("bid", ["hopf", "sp2", "milnor-p(2)", "u(3)", "cs-rho7-b"])
def test_power_hat(bid):
    c = B.get_bundle(bid).cocycle
    sampler = lambda rng: c.sample_overlap((0, 1), rng)
    for k in range(1, 5):
        assert B.power_hat_residual(B.cocycle_theta(c), c.action, k, 50, k, sampler) <= 1e-9


def test_pullback_identity_is_same_cocycle():
    c = B.get_bundle("sp2").cocycle
    pc = B.pullback_cocycle(Ref.make("identity", action="gm-s7"), c)
    assert pc.provenance == "pullback"
    rng = np.random.default_rng(9)
    for _ in range(50):
        x = c.sample_overlap((0, 1), rng)
        assert np.array_equal(pc.phi(0, 1, x).matrix, c.phi(0, 1, x).matrix)


def test_pullback_by_f8_validates():
    c = B.get_bundle("e11").cocycle
    assert c.action_id == "s8-rho8" and c.chain[0].id == "f8"
    assert B.validate_cocycle(c, 500, 10).passed


def test_pullback_rejects_wrong_codomain():
    with pytest.raises(B.EquivarianceError):
        B.pullback_cocycle(Ref.make("f8"), B.get_bundle("hopf").cocycle)


def test_milnor_transition():
    rng = np.random.default_rng(11)
    t00 = B.milnor_transition(0, 0)
    for _ in range(20):
        x = unit(rng.standard_normal(4))
        assert np.allclose(t00(x).matrix, np.eye(4))
        assert abs(np.linalg.det(B.milnor_transition(2, -1)(x).matrix) - 1) <= 1e-12
    for m, n in [(1, 2), (-3, 4)]:
        assert np.allclose(B.milnor_transition(m, n)(np.array([1.0, 0, 0, 0])).matrix, np.eye(4))


@pytest.mark.parametrize("k,r", [(1, 1), (2, 5), (3, -1), (-2, 1)])
def test_milnor_pullback_gluing(k, r):
    # the gluing matches t_{k, r-k}; the transposed labelling does not
    assert B.milnor_glue_residual(k, r, k, r - k, 200, 12) <= 1e-12
    if k != r:
        assert B.milnor_glue_residual(k, r, r, k - r, 200, 12) > 0.1


def test_milnor_chart_lands_on_sphere():
    rng = np.random.default_rng(13)
    for _ in range(20):
        d = rng.standard_normal(4)
        d *= rng.uniform(0, 1) / np.linalg.norm(d)
        assert abs(np.linalg.norm(B.milnor_chart(np.concatenate([d, unit(rng.standard_normal(4))]))) - 1) <= 1e-14


def test_thom_pontryagin_examples():
    f = B.thom_pontryagin_map("s8-rho8", 0, 1.0, 0.5)
    e0 = np.eye(9)[0]
    assert np.array_equal(f(e0), e0)
    sample = B.ball_sampler("s8-rho8", 0, 1.0, 0.5, np.pi)
    rng = np.random.default_rng(14)
    for _ in range(100):
        assert np.array_equal(f(sample(rng)), -e0)
    spec = get_action("s8-rho8")
    inner = B.ball_sampler("s8-rho8", 0, 1.0, 0.0, 0.6)
    assert check_equivariance(f, spec, spec, 1000, 15, inner) <= 1e-9


def test_thom_pontryagin_rejects_moving_point():
    with pytest.raises(ValueError):
        B.thom_pontryagin_map("s8-rho8", 1, 1.0, 0.5)


def test_connected_sum_examples():
    triv = B.connected_sum_data("rho7", Ref.make("identity", group="S3"))
    c = triv.cocycle
    rng = np.random.default_rng(16)
    for _ in range(50):
        x = c.sample_overlap((0, 1), rng)
        assert np.array_equal(B.adjoint_map(c, (0, 1), x), x)
    cs = B.get_bundle("cs-rho7-b")
    assert B.validate_cocycle(cs.cocycle, 300, 17).passed
    assert B.validate_cocycle(B.get_bundle("cs-rho4m+1-kervaire").cocycle, 300, 18).passed


def test_connected_sum_rejects_bad_transition():
    with pytest.raises(B.EquivarianceError):
        B.connected_sum_data("rho7", Ref.make("b-right-i"))
    with pytest.raises(Exception):
        B.connected_sum_data("rho99", Ref.make("b"))


def test_connected_sum_alternative_isotropy():
    for rho, m in [("rho8", 1), ("rho10", 1), ("rho10-alt", 1), ("rho8m+5", 1)]:
        t = Ref.make("identity", group=get_action(B.RHO_ACTIONS[rho](m)[0]).group)
        b = B.connected_sum_data(rho, t, m=m, check_samples=50)
        assert B.validate_cocycle(b.cocycle, 50, 19).passed


@pytest.mark.parametrize("k", [0, 1, 2])
def test_involutions(k):
    rep = B.involution_report(k, 1000, 20)
    assert rep["involution_residual"] <= 1e-9
    delta = B.displacement_oracle(k)
    assert delta > 0 and rep["min_displacement"] > delta


def test_involution_rows_match_pointwise():
    x = np.array([get_action("s6-gm").space.sampler(np.random.default_rng(i)) for i in range(20)])
    for k in (1, 2):
        th = B.theta_k(k)
        assert np.allclose(th.batch(x), [th(r) for r in x], atol=1e-13)


def test_antipodal_displacement_is_two():
    assert abs(B.involution_report(0, 200, 4)["min_displacement"] - 2) <= 1e-12


def test_triple_overlap_detects_wrong_inverse():
    c = B.get_bundle("hopf").cocycle
    x = c.sample_overlap_rows(100, np.random.default_rng(6))
    g = c.transition_rows(c.to_sphere_rows(x))
    e = np.broadcast_to(identity("S3").matrix, g.shape)
    good = {(0, 0): e, (1, 1): e, (0, 1): g, (1, 0): B.binverse("S3", g)}
    assert B.triple_overlap_residual("S3", good) <= 1e-12
    assert B.triple_overlap_residual("S3", {**good, (1, 0): g}) > 0.1


def test_group_element_cocycle_values():
    c = B.get_bundle("sp2").cocycle
    x = c.sample_overlap((0, 1), np.random.default_rng(21))
    g = c.phi(0, 1, x)
    assert isinstance(g, GroupElement) and g.group == "S3"
    assert np.allclose(qmul(g.quat, c.phi(1, 0, x).quat), [1, 0, 0, 0])


@pytest.mark.parametrize("bid", BUNDLE_IDS)
def test_row_forms_match_pointwise(bid):
    c = B.get_bundle(bid).cocycle
    x = c.sample_overlap_rows(40, np.random.default_rng(3))
    y = c.to_sphere_rows(x)
    assert np.allclose(y, [c._to_sphere(r) for r in x], atol=1e-13)
    assert np.allclose(c.transition_rows(y), [c._transition_y(r).matrix for r in y], atol=1e-13)


@pytest.mark.parametrize("bid", ["hopf", "l-c(2)", "sp(2)", "e11", "cs-rho7-b"])
def test_cocycle_hat_composition(bid):
    assert B.cocycle_hat_composition(B.get_bundle(bid).cocycle, 300, 0) < 1e-9


def test_batched_group_ops_match_pointwise():
    rng = np.random.default_rng(0)
    for tag in ("S3", "Sp(2)", "U(3)", "O(4)"):
        a = [haar_sample(tag, rng) for _ in range(5)]
        b = [haar_sample(tag, rng) for _ in range(5)]
        am, bm = np.array([g.matrix for g in a]), np.array([g.matrix for g in b])
        assert np.allclose(B.bmultiply(tag, am, bm), [multiply(p, q).matrix for p, q in zip(a, b)], atol=1e-13)
        assert np.allclose(B.binverse(tag, am), [inverse(p).matrix for p in a], atol=1e-13)
