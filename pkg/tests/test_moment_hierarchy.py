import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relhier import fields as F
from relhier import frame_geometry as FG
from relhier import moment_hierarchy as MH
from relhier import observer_maps as OM
from relhier._numerics import tensor_grid
from relhier.errors import AccuracyError, InvalidFrameError, StructureError

seeds = st.integers(0, 2**31 - 1)
BOX = np.array([[-1.0, 1.0]] * 4)


def integral(zeta, quad_order=10):
    nodes, w = tensor_grid(zeta.support, quad_order)
    return np.tensordot(w, zeta(nodes), axes=1)


# ---------------------------------------------------------------- test functions

def test_bump_vanishes_on_support_boundary_and_has_exact_gradient(rng):
    z = MH.random_test_functions(rng, BOX, 1, 1)[0]
    lo, hi = z.support[:, 0], z.support[:, 1]
    edge = np.array([lo[0], 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2]), 0.5 * (lo[3] + hi[3])])
    np.testing.assert_allclose(z(edge[None]), 0, atol=1e-15)
    np.testing.assert_allclose(z.grad(edge[None]), 0, atol=1e-12)
    y = 0.5 * (lo + hi) + 0.1 * (hi - lo) * rng.uniform(-1, 1, (4, 4))
    fd = F.Field(z.field._value, None, z.field.shape).grad(y)
    np.testing.assert_allclose(z.grad(y), fd, atol=1e-8)


def test_sextic_bump_integral():
    # int_0^1 64 (u(1-u))^3 du = 64/140
    z = MH.bump_test_function(np.array([[0.0, 1.0]] * 4), np.array(1.0))
    assert float(integral(z)) == pytest.approx((64 / 140) ** 4, rel=1e-13)


# ---------------------------------------------------------------- weak and strong residuals

def test_constant_flux_has_zero_residual(rng):
    h = MH.HierarchyFields(1, F.constant(rng.standard_normal((4, 4))), F.constant(np.zeros(4)))
    for z in MH.random_test_functions(rng, BOX, 1, 4):
        assert abs(MH.weak_residual(h, z)) < 1e-10
    assert np.max(np.abs(MH.strong_residual(h, rng.uniform(-1, 1, (3, 4))))) == 0.0


@settings(max_examples=10)
@given(seeds, st.integers(1, 2))
def test_manufactured_systems_have_zero_weak_residual(seed, N):
    r = np.random.default_rng(seed)
    h = MH.manufactured_hierarchy(F.random_field(r, (4,) * (N + 1)))
    for z in MH.random_test_functions(r, BOX, N, 3):
        assert abs(MH.weak_residual(h, z)) < 1e-8
    assert np.max(np.abs(MH.strong_residual(h, r.uniform(-1, 1, (3, 4))))) < 1e-12


def test_perturbed_source_is_linear_in_the_shift(rng):
    pert = np.array([0.0, 0.1, 0.0, 0.0])
    h = MH.manufactured_hierarchy(F.random_field(rng, (4, 4)), pert)
    for z in MH.random_test_functions(rng, BOX, 1, 5):
        assert MH.weak_residual(h, z) == pytest.approx(0.1 * integral(z)[1], abs=1e-8)
    np.testing.assert_allclose(MH.strong_residual(h, rng.uniform(-1, 1, (3, 4))), -np.tile(pert, (3, 1)), atol=1e-12)


def test_residual_convergence_check(rng):
    h = MH.manufactured_hierarchy(F.random_field(rng, (4, 4)))
    z = MH.random_test_functions(rng, BOX, 1, 1)[0]
    MH.weak_residual(h, z, check=True)
    wild = MH.HierarchyFields(1, F.trig(np.zeros((4, 4)), rng.standard_normal((1, 4, 4)), 40 * np.ones((1, 4)),
                                        np.zeros(1)), F.constant(np.zeros(4)))
    with pytest.raises(AccuracyError):
        MH.weak_residual(wild, z, quad_order=4, check=True)


def test_shape_validation():
    with pytest.raises(ValueError):
        MH.HierarchyFields(2, F.constant(np.zeros((4, 4))), F.constant(np.zeros(4)))


# ---------------------------------------------------------------- source rule

def test_lorentz_map_has_no_inhomogeneity(rng):
    hs = MH.HierarchyFields(1, F.random_field(rng, (4, 4)), F.random_field(rng, (4,)))
    rep = MH.source_transform_check(hs, OM.lorentz_map(np.array([0.3, 0.2, 0.0])), rng.uniform(-1, 1, (4, 4)))
    assert rep.passed and rep.details["inhomogeneity"] == 0.0


def test_inhomogeneity_is_the_fictitious_force(rng):
    # direct oracle: Y_k,00 = Xddot_k and Y_k,0j = Qdot_kj for a Newton map
    m = OM.random_newton_map(rng)
    ys = rng.uniform(-1, 1, (5, 4))
    Ts = rng.standard_normal((5, 4, 4))
    got = MH.source_inhomogeneity(Ts, m.jacobian(ys), m.hessian(ys), 1)
    a, Qd = m.acceleration(ys), m.rotation.d1(ys[:, 0])
    ref = np.zeros((5, 4))
    ref[:, 1:] = a * Ts[:, 0, 0, None] + np.einsum("nkj,nj->nk", Qd, Ts[:, 0, 1:] + Ts[:, 1:, 0])
    np.testing.assert_allclose(got, ref, atol=1e-13)
    np.testing.assert_allclose(MH.fictitious_force(m, ys, Ts), ref, atol=1e-13)


@given(seeds, st.integers(1, 2))
def test_source_rule_under_newton_maps(seed, N):
    r = np.random.default_rng(seed)
    hs = MH.HierarchyFields(N, F.random_field(r, (4,) * (N + 1)), F.random_field(r, (4,) * N))
    assert MH.source_transform_check(hs, OM.random_newton_map(r), r.uniform(-1, 1, (3, 4))).passed


def test_pushed_manufactured_system_solves_plain_equation(rng):
    ymap = OM.random_newton_map(rng)
    hs = MH.manufactured_hierarchy(F.random_field(rng, (4, 4)))
    h = MH.push_hierarchy(hs, ymap)
    y = ymap.forward(rng.uniform(-0.5, 0.5, (3, 4)))
    assert np.max(np.abs(MH.strong_residual(h, y))) < 1e-7


# ---------------------------------------------------------------- Coriolis coefficients

def test_split_of_source_without_flux_dependence(rng):
    f = rng.standard_normal(4)
    co = MH.coriolis_split(lambda T: f, 1)
    assert not np.any(co.chi)
    np.testing.assert_array_equal(co.force, f)


def test_split_recovers_identity_probe():
    co = MH.coriolis_split(lambda T: T[:, 0], 1)
    ref = np.zeros((4, 4, 4))
    for k in range(4):
        ref[k, k, 0] = 1.0
    np.testing.assert_array_equal(co.chi, ref)


@given(seeds)
def test_split_recovers_planted_classical_structure(seed):
    r = np.random.default_rng(seed)
    chi = MH.classical_coriolis(r.standard_normal(3), r.standard_normal((3, 3)))
    assert not np.any(chi[0]) and not np.any(chi[1:, 1:, 1:])
    f = r.standard_normal(4)
    co = MH.coriolis_split(lambda T: f + np.tensordot(chi, T, 2), 1)
    np.testing.assert_allclose(co.chi, chi, atol=1e-14)
    np.testing.assert_allclose(co.force, f, atol=1e-14)


def test_nonlinear_source_is_rejected():
    with pytest.raises(StructureError):
        MH.coriolis_split(lambda T: T[:, 0] * T[0, 0], 1)


def test_coriolis_of_metric_source_is_minus_christoffel(rng):
    ymap = OM.ComposedMap(OM.lorentz_map(OM.random_velocity(rng, 1.0, 0.5)), OM.random_newton_map(rng))
    plain = FG.pullback_metric(FG.standard_metric(), ymap.inverse_map())
    zero = MH.CoriolisCoefficients(np.zeros((4, 4, 4)), np.zeros(4), 1)
    for p in rng.uniform(-1, 1, (3, 4)):
        co = MH.plain_coriolis_from_star(zero, ymap, p)
        np.testing.assert_allclose(co.chi, -FG.christoffel(plain, ymap.forward(p)), atol=1e-9)


def test_coriolis_rule_trivial_cases(rng):
    chi = rng.standard_normal((4, 4, 4))
    assert MH.coriolis_transform_check(lambda y: chi, lambda y: chi, OM.identity_map(), np.zeros((2, 4)), 1).deviation == 0
    L = OM.lorentz_map(np.array([0.2, 0.4, 0.0]))
    zero = MH.CoriolisCoefficients(np.zeros((4,) * 5), np.zeros((4, 4)), 2)
    assert np.max(np.abs(MH.plain_coriolis_from_star(zero, L, np.zeros(4)).chi)) < 1e-13


def test_christoffel_obeys_coriolis_rule(rng):
    ymap = OM.random_newton_map(rng)
    plain = FG.standard_metric()
    star = FG.pullback_metric(plain, ymap)
    rep = MH.coriolis_transform_check(lambda y: -FG.christoffel(plain, y), lambda y: -FG.christoffel(star, y),
                                      ymap, rng.uniform(-1, 1, (5, 4)), 1)
    assert rep.passed


@given(seeds)
def test_second_order_coriolis_rule(seed):
    r = np.random.default_rng(seed)
    ymap = OM.random_newton_map(r)
    cs = MH.CoriolisCoefficients(r.standard_normal((4,) * 5), r.standard_normal((4, 4)), 2)
    p = r.uniform(-1, 1, 4)
    cp = MH.plain_coriolis_from_star(cs, ymap, p)
    res = MH.coriolis_rule_residual(cp.chi, cs.chi, ymap.jacobian(p), ymap.hessian(p), 2)
    assert np.max(np.abs(res)) < 1e-7


# ---------------------------------------------------------------- reduction

def test_standard_time_vector_reduction_is_index_zero_slice(rng):
    h = MH.HierarchyFields(2, F.random_field(rng, (4, 4, 4)), F.random_field(rng, (4, 4)))
    hr = MH.reduce(h, FG.standard_time_vector())
    y = rng.uniform(-1, 1, (4, 4))
    np.testing.assert_allclose(hr.T(y), h.T(y)[:, 0], atol=1e-14)
    np.testing.assert_allclose(hr.g(y), h.g(y)[:, 0], atol=1e-14)


def test_mass_flux_of_momentum_system(rng):
    e0p = FG.random_time_vector_field(rng)
    rho = F.random_field(rng, (), 0.1, offset=np.array(1.0))
    v = MH.four_velocity_field(F.random_field(rng, (4,), 0.2, offset=np.array([1.0, 0, 0, 0])), e0p)
    Pi = F.random_field(rng, (4, 4))
    mass = MH.reduce(MH.HierarchyFields(1, MH.decomposed_flux(rho, v, Pi), F.random_field(rng, (4,))), e0p)
    y = rng.uniform(-1, 1, (5, 4))
    np.testing.assert_allclose(np.einsum("na,na->n", e0p(y), v(y)), 1.0, atol=1e-14)
    q = rho(y)[:, None] * v(y) + np.einsum("ni,nij->nj", e0p(y), Pi(y))
    np.testing.assert_allclose(mass.T(y), q, atol=1e-13)


@settings(max_examples=8)
@given(seeds, st.integers(1, 3))
def test_reduction_equals_tensor_test_slice(seed, N):
    r = np.random.default_rng(seed)
    e0p = FG.random_time_vector_field(r)
    h = MH.HierarchyFields(N, F.random_field(r, (4,) * (N + 1)), F.random_field(r, (4,) * N))
    hr = MH.reduce(h, e0p)
    # the integrands agree pointwise, so a coarse rule suffices
    for eta in MH.random_test_functions(r, BOX, N - 1, 2):
        a = MH.weak_residual(hr, eta, quad_order=6)
        assert a == pytest.approx(MH.weak_residual(h, MH.tensor_test_function(e0p, eta), quad_order=6), abs=1e-10)


def test_double_reduction_matches_direct(rng):
    e0p = FG.random_time_vector_field(rng)
    h = MH.HierarchyFields(2, F.random_field(rng, (4, 4, 4)), F.random_field(rng, (4, 4)))
    y = rng.uniform(-1, 1, (5, 4))
    a, b = MH.reduce(MH.reduce(h, e0p), e0p), MH.reduce_power(h, e0p, 2)
    np.testing.assert_allclose(a.T(y), b.T(y), atol=1e-10)
    np.testing.assert_allclose(a.g(y), b.g(y), atol=1e-10)
    with pytest.raises(ValueError):
        MH.reduce_power(h, e0p, 3)


def test_reduced_force_examples():
    e0, e0p = F.constant(np.array([1.0, 0, 0, 0])), FG.standard_time_vector()
    T = F.constant(np.zeros((4, 4)))
    y = np.zeros((1, 4))
    parts = MH.reduced_momentum_split(MH.HierarchyFields(1, T, F.constant(np.array([1.0, 2, 0, 0]))), e0, e0p)
    np.testing.assert_allclose(parts["reduced"].g(y), [[0, 2, 0, 0]])
    np.testing.assert_allclose(parts["mass"].g(y), [1.0])
    parts = MH.reduced_momentum_split(MH.HierarchyFields(1, T, F.constant(np.array([3.0, 0, 0, 0]))), e0, e0p)
    np.testing.assert_allclose(parts["reduced"].g(y), 0)


def test_momentum_split_recombines(rng):
    e0p = FG.random_time_vector_field(rng)
    e0 = F.scale(F.einsum_field("ab,b->a", FG.standard_metric().field, e0p), -1.0)
    h = MH.HierarchyFields(1, F.random_field(rng, (4, 4)), F.random_field(rng, (4,)))
    parts = MH.reduced_momentum_split(h, e0, e0p)
    y = rng.uniform(-1, 1, (4, 4))
    np.testing.assert_allclose(np.einsum("na,na->n", parts["reduced"].g(y), e0p(y)), 0, atol=1e-13)
    for z in MH.random_test_functions(rng, BOX, 1, 3):
        eta, tilde = MH.split_test_function(z, e0, e0p)
        np.testing.assert_allclose(np.einsum("na,na->n", tilde(y), e0(y)), 0, atol=1e-13)
        split = MH.weak_residual(parts["mass"], eta) + MH.weak_residual(parts["reduced"], tilde)
        assert split == pytest.approx(MH.weak_residual(h, z), abs=1e-10)


# ---------------------------------------------------------------- scalar laws and diffusion

def test_scalar_law_examples(rng):
    assert MH.scalar_law_check(F.constant(rng.standard_normal(4)), F.constant(np.array(0.0)), BOX).deviation < 1e-12
    rho = F.random_field(rng, (), 0.1, offset=np.array(1.0))
    v = F.random_field(rng, (4,), 0.3)
    q = F.einsum_field(",a->a", rho, v)
    assert MH.scalar_law_check(q, F.Field(q.divergence, None, ()), BOX, rng).passed


def test_diffusion_flux_is_spatial_for_standard_frame(rng):
    G = OM.standard_metric_matrix(2.0)
    e0 = np.array([1.0, 0, 0, 0])
    C = rng.standard_normal((4, 4))
    for y in rng.uniform(-1, 1, (5, 4)):
        grad_mu = (C + C.T) @ y + rng.standard_normal(4)
        J = MH.diffusion_flux_scalar(G, e0, grad_mu, 2.0)
        assert J[0] == 0.0
        Jfull = MH.diffusion_flux_scalar(G, e0, grad_mu, 2.0, space=False)
        assert Jfull[0] == pytest.approx(grad_mu[0] / 4.0, rel=1e-14)


def test_flux_orthogonality_gap_vanishes_for_spatial_flux(rng):
    e0p = np.array([1.0, 0, 0, 0])
    v = np.array([1.0, 0.2, -0.1, 0.3])
    J = np.concatenate([[0.0], rng.standard_normal(3)])
    dot, gap = MH.flux_orthogonality_gap(1.7, v, J, e0p)
    assert dot == 0.0 and gap == pytest.approx(0.0, abs=1e-15)


# ---------------------------------------------------------------- velocity conventions

@given(seeds)
def test_velocity_conventions_round_trip(seed):
    r = np.random.default_rng(seed)
    V = OM.random_velocity(r, 1.0, 0.9)
    fr = FG.lorentz_frame(np.zeros(3))
    u = OM.gamma_factor(V, 1.0) * np.concatenate([[1.0], V])
    v = MH.standard_to_normalized_velocity(u, fr.ep[0], np.linalg.inv(OM.standard_metric_matrix(1.0)))
    np.testing.assert_allclose(v, np.concatenate([[1.0], V]), atol=1e-14)
    np.testing.assert_allclose(MH.normalized_to_standard_velocity(v, fr.ep[1:]), u, atol=1e-12)


def test_velocity_convention_errors():
    with pytest.raises(InvalidFrameError):
        MH.standard_to_normalized_velocity(np.array([-1.0, 0, 0, 0]), np.array([1.0, 0, 0, 0]))
    with pytest.raises(InvalidFrameError):
        MH.standard_to_normalized_velocity(np.array([1.0, 0.5, 0, 0]), np.array([1.0, 0, 0, 0]), np.diag([-1.0, 1, 1, 1]))
    with pytest.raises(InvalidFrameError):
        MH.normalized_to_standard_velocity(np.array([1.0, 1.0, 0, 0]), np.eye(4)[1:])
