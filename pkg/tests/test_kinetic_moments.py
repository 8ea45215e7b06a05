import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relhier import kinetic_moments as KM
from relhier import observer_maps as OM
from relhier.errors import AccuracyError, VacuumError

seeds = st.integers(0, 2**31 - 1)
ORIGIN = np.zeros(4)


def rel(a, b):
    return np.max(np.abs(np.asarray(a) - np.asarray(b))) / max(1e-300, np.max(np.abs(b)))


# ---------------------------------------------------------------- closed-form oracle

def test_closed_form_gaussian_moments_by_hand():
    # E[c1^4] = v^4 + 6 v^2 theta + 3 theta^2, E[c1^2 c2^2] = (v1^2 + theta)(v2^2 + theta)
    v, th = np.array([0.3, -0.5, 0.2]), 0.7
    F4 = KM.maxwellian_moments_closed_form(4, 2.0, v, th, 1.5)[4]
    assert F4[1, 1, 1, 1] == pytest.approx(3.0 * (v[0] ** 4 + 6 * v[0] ** 2 * th + 3 * th * th), rel=1e-14)
    assert F4[1, 1, 2, 2] == pytest.approx(3.0 * (v[0] ** 2 + th) * (v[1] ** 2 + th), rel=1e-14)
    assert F4[1, 2, 3, 0] == pytest.approx(3.0 * v[0] * v[1] * v[2], rel=1e-14)
    assert F4[2, 2, 2, 0] == pytest.approx(3.0 * (v[1] ** 3 + 3 * v[1] * th), rel=1e-14)


def test_centered_maxwellian_moments():
    m, n, th = 1.3, 0.8, 0.6
    F = KM.compute_moments(KM.maxwellian_scenario(n, np.zeros(3), th, m), ORIGIN, 2)
    assert F.value(()) == pytest.approx(m * n, rel=1e-13)
    np.testing.assert_allclose(F.tensor(1)[1:], 0, atol=1e-14)
    np.testing.assert_allclose(F.tensor(2)[1:, 1:], m * n * th * np.eye(3), rtol=1e-12, atol=1e-14)


def test_shifted_maxwellian_first_moment():
    F = KM.compute_moments(KM.maxwellian_scenario(1.0, np.array([0.3, 0, 0]), 1.0, 2.0), ORIGIN, 1)
    assert F.value((1,)) == pytest.approx(2.0 * 0.3, rel=1e-13)


def test_zero_distribution():
    s = KM.KineticScenario(lambda t, x, c: np.zeros(np.shape(c)[:-1]))
    F = KM.compute_moments(s, ORIGIN, 3)
    assert all(not np.any(T) for T in F.tensors)
    with pytest.raises(VacuumError):
        KM.classical_quantities(s, ORIGIN)


@given(seeds)
def test_quadrature_matches_closed_form_to_order_four(seed):
    r = np.random.default_rng(seed)
    n, th, v = r.uniform(0.5, 2), r.uniform(0.3, 2), r.uniform(-1, 1, 3)
    got = KM.compute_moments(KM.maxwellian_scenario(n, v, th, 1.7), ORIGIN, 4).tensors
    ref = KM.maxwellian_moments_closed_form(4, n, v, th, 1.7)
    for a, b in zip(got, ref):
        assert rel(a, b) < 1e-9


def test_doubling_hermite_order_changes_little(rng):
    s = KM.maxwellian_scenario(1.2, rng.uniform(-1, 1, 3), 0.9)
    coarse = KM.compute_moments(s, ORIGIN, 4).tensors
    fine = KM.compute_moments(s, ORIGIN, 4, KM.QuadratureSpec(order=48)).tensors
    for a, b in zip(coarse, fine):
        assert rel(a, b) < 1e-10


def test_convergence_check_raises_for_underresolved_rule():
    s = KM.maxwellian_scenario(1.0, np.zeros(3), 1.0, quad=KM.QuadratureSpec(order=24))
    heavy = KM.KineticScenario(lambda t, x, c: 1.0 / (1.0 + np.sum(c * c, axis=-1)) ** 3, spread=1.0)
    with pytest.raises(AccuracyError):
        KM.compute_moments(heavy, ORIGIN, 2, KM.QuadratureSpec(order=4, check_convergence=True))
    KM.compute_moments(s, ORIGIN, 2, KM.QuadratureSpec(order=24, check_convergence=True))


# ---------------------------------------------------------------- moment set invariants

@given(seeds)
def test_moments_symmetric_and_index_zero_is_identity(seed):
    r = np.random.default_rng(seed)
    s = KM.streaming_maxwellian_scenario(1.0, r.uniform(-0.5, 0.5, 3), 0.8, 0.3, r.uniform(-1, 1, 3))
    F = KM.compute_moments(s, r.uniform(-1, 1, 4), 3)
    T3 = F.tensor(3)
    for perm in itertools.permutations(range(3)):
        np.testing.assert_allclose(np.transpose(T3, perm), T3, atol=1e-12)
    np.testing.assert_allclose(T3[..., 0], F.tensor(2), atol=1e-12)
    np.testing.assert_allclose(F.tensor(2)[..., 0], F.tensor(1), atol=1e-12)
    assert F.tensor(1)[0] == pytest.approx(F.value(()), abs=1e-12)


# ---------------------------------------------------------------- classical quantities

def test_classical_quantities_of_centered_maxwellian():
    m, n, th = 1.5, 2.0, 0.4
    cq = KM.classical_quantities(KM.maxwellian_scenario(n, np.zeros(3), th, m), ORIGIN)
    np.testing.assert_allclose(cq.Pi, m * n * th * np.eye(3), rtol=1e-12, atol=1e-14)
    assert cq.eps == pytest.approx(1.5 * m * n * th, rel=1e-12)
    np.testing.assert_allclose(cq.q, 0, atol=1e-13)
    np.testing.assert_allclose(cq.force, 0)
    assert cq.g_rate == 0


@given(seeds)
def test_energy_identity_for_shifted_maxwellian(seed):
    r = np.random.default_rng(seed)
    cq = KM.classical_quantities(KM.maxwellian_scenario(r.uniform(0.5, 2), r.uniform(-1, 1, 3), r.uniform(0.3, 2)),
                                 ORIGIN)
    assert cq.e == pytest.approx(cq.e_moments, rel=1e-8)


def test_heat_flux_of_skewed_distribution(rng):
    # mixture of two Maxwellians: compare the heat flux with direct quadrature of the closed forms
    v1, v2 = np.array([0.4, 0, 0]), np.array([-0.2, 0.3, 0])
    f = lambda t, x, c: 0.6 * KM.maxwellian(c, 1.0, v1, 0.5) + 0.4 * KM.maxwellian(c, 1.0, v2, 0.8)
    s = KM.KineticScenario(f, 1.0, spread=0.9)
    cq = KM.classical_quantities(s, ORIGIN, KM.QuadratureSpec(order=40))
    F = [0.6 * a + 0.4 * b for a, b in zip(KM.maxwellian_moments_closed_form(3, 1.0, v1, 0.5),
                                            KM.maxwellian_moments_closed_form(3, 1.0, v2, 0.8))]
    rho, mom = F[0], F[1][1:]
    v = mom / rho
    F2, F3 = F[2][1:, 1:], F[3][1:, 1:, 1:]
    # q_i = sum_k int (c_k - v_k)^2 (c_i - v_i) f, expanded in raw moments
    q = np.array([sum(F3[k, k, i] - 2 * v[k] * F2[k, i] + v[k] ** 2 * mom[i]
                      - v[i] * (F2[k, k] - 2 * v[k] * mom[k] + v[k] ** 2 * rho) for k in range(3)) for i in range(3)])
    np.testing.assert_allclose(cq.q, q, atol=1e-10)
    np.testing.assert_allclose(cq.v, v, atol=1e-12)


def test_force_and_work_rates_for_constant_acceleration():
    g0 = np.array([0.1, -0.2, 0.3])
    s = KM.maxwellian_scenario(1.0, np.array([0.5, 0, 0]), 1.0, 2.0)
    s.accel = lambda t, x, c: np.broadcast_to(g0, np.shape(c)).copy()
    cq = KM.classical_quantities(s, ORIGIN)
    np.testing.assert_allclose(cq.force, 2.0 * g0, atol=1e-12)
    assert cq.g_rate == pytest.approx(0.0, abs=1e-12)


def test_validate_scenario():
    s = KM.maxwellian_scenario()
    B = np.array([0.0, 0.0, 1.0])
    s.accel = lambda t, x, c: np.cross(c, B)
    assert KM.validate_scenario(s, ORIGIN) < 1e-8
    s.accel = lambda t, x, c: np.asarray(c)
    with pytest.raises(ValueError):
        KM.validate_scenario(s, ORIGIN)
    neg = KM.KineticScenario(lambda t, x, c: -KM.maxwellian(c))
    with pytest.raises(ValueError):
        KM.validate_scenario(neg, ORIGIN)


# ---------------------------------------------------------------- balance laws

def test_static_maxwellian_balances_vanish(rng):
    s = KM.maxwellian_scenario(1.0, np.zeros(3), 1.0)
    pts = rng.uniform(-1, 1, (3, 4))
    assert KM.classical_balance_residual(s, pts)["max"] < 1e-9
    assert KM.moment_pde_residual(s, 2, pts)["max"] < 1e-8


@given(seeds)
def test_streaming_maxwellian_balances(seed):
    r = np.random.default_rng(seed)
    s = KM.streaming_maxwellian_scenario(1.0, r.uniform(-0.5, 0.5, 3), r.uniform(0.5, 1.5), 0.3, r.uniform(-1, 1, 3))
    pts = r.uniform(-1, 1, (2, 4))
    assert KM.classical_balance_residual(s, pts)["max"] < 1e-8
    assert KM.moment_pde_residual(s, 2, pts)["max"] < 1e-8


def test_balance_with_finite_differences(rng):
    s = KM.streaming_maxwellian_scenario(1.0, np.array([0.2, 0, 0]), 1.0, 0.3, np.array([0.5, 0.2, 0]))
    pts = rng.uniform(-1, 1, (2, 4))
    assert KM.classical_balance_residual(s, pts, derivative="fd")["max"] < 1e-6


def test_manufactured_source_is_recovered():
    alpha, m, n = 0.3, 1.4, 0.9
    s = KM.scaled_maxwellian_scenario(alpha, n, np.array([0.1, 0.2, 0]), 1.0, m)
    pt = np.array([[0.5, 0.1, 0.2, -0.3]])
    res = KM.classical_balance_residual(s, pt)
    assert res["mass"] == pytest.approx(alpha * m * n, abs=1e-6)
    pde = KM.moment_pde_residual(s, 0, pt)
    assert pde["max"] == pytest.approx(alpha * m * n, abs=1e-6)


def test_collision_without_mass_moment():
    s = KM.maxwellian_scenario(1.0, np.zeros(3), 1.0)
    s.collision = lambda t, x, c: (np.sum(np.asarray(c) ** 2, axis=-1) - 3.0) * KM.maxwellian(c)
    assert KM.moment_pde_residual(s, 0, np.zeros((1, 4)))["max"] < 1e-8


def test_acceleration_source_product_rule():
    # closed form: R_{0i} = m n g_i, R_{ij} = m n (g_i v_j + v_i g_j) for constant g
    m, n, v, g0 = 1.2, 0.7, np.array([0.3, -0.1, 0.2]), np.array([0.5, 0.0, -0.4])
    s = KM.maxwellian_scenario(n, v, 1.0, m)
    s.accel = lambda t, x, c: np.broadcast_to(g0, np.shape(c)).copy()
    R = -KM.moment_pde_residual(s, 2, np.zeros((1, 4)))["residual"][0]
    vt, gt = np.concatenate([[1.0], v]), np.concatenate([[0.0], g0])
    np.testing.assert_allclose(R, m * n * (np.outer(gt, vt) + np.outer(vt, gt)), atol=1e-12)


# ---------------------------------------------------------------- transformation rule

def test_identity_map_transform():
    s = KM.streaming_maxwellian_scenario(1.0, np.array([0.1, 0, 0]), 0.8)
    assert KM.moment_transform_check(s, OM.newton_map(), 2, np.zeros((1, 4)), tol=1e-12).passed


def test_rotation_and_acceleration_transform(rng):
    s = KM.streaming_maxwellian_scenario(1.0, np.array([0.2, -0.1, 0.3]), 0.9, 0.3, np.array([0.4, 0.1, -0.2]))
    pts = rng.uniform(-1, 1, (2, 4))
    rot = OM.newton_map(Q=OM.RotationPath(rng.standard_normal(3), (0.3, 0.5)))
    assert KM.moment_transform_check(s, rot, 1, pts, tol=1e-8).passed
    acc = OM.newton_map(xdiff=OM.PolynomialPath([[0, 0, 0], [0, 0, 0], [0.5, 0, 0]]))
    assert KM.moment_transform_check(s, acc, 2, pts, tol=1e-6).passed


@given(seeds)
def test_galilean_consistency_of_density_and_velocity(seed):
    r = np.random.default_rng(seed)
    s = KM.maxwellian_scenario(1.0, r.uniform(-0.5, 0.5, 3), 0.7)
    ymap = OM.newton_map(r.uniform(-1, 1), OM.PolynomialPath([r.uniform(-1, 1, 3), r.uniform(-1, 1, 3)]),
                         OM.RotationPath(Q0=OM.random_rotation(r)))
    ys = r.uniform(-1, 1, 4)
    star = KM.classical_quantities(KM.transform_scenario(s, ymap), ys)
    plain = KM.classical_quantities(s, ymap.forward(ys))
    assert star.rho == pytest.approx(plain.rho, rel=1e-8)
    np.testing.assert_allclose(plain.v, ymap.velocity(ys) + ymap.rotation.value(ys[0]) @ star.v, atol=1e-8)


def test_transformed_acceleration_includes_fictitious_terms():
    # a particle at rest in a uniformly accelerated frame sees -a; the rotating part adds -2 Qdot c*
    s = KM.maxwellian_scenario()
    s.accel = lambda t, x, c: np.zeros(np.shape(c))
    ymap = OM.newton_map(xdiff=OM.PolynomialPath([[0, 0, 0], [0, 0, 0], [0.5, 0, 0]]))
    st_ = KM.transform_scenario(s, ymap)
    np.testing.assert_allclose(st_.accel(0.3, np.zeros(3), np.zeros((1, 3))), [[-1.0, 0, 0]], atol=1e-14)


def test_tabulated_distribution_moments():
    ax = np.linspace(-6, 6, 61)
    C = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
    s = KM.tabulated_scenario([ax] * 3, KM.maxwellian(C, 1.0, np.array([0.2, 0, 0]), 1.0))
    F = KM.compute_moments(s, ORIGIN, 2, KM.QuadratureSpec("legendre", 64, 1.0))
    assert F.value(()) == pytest.approx(1.0, rel=1e-2)
    assert F.value((1,)) == pytest.approx(0.2, abs=1e-2)
    assert F.value((2, 2)) == pytest.approx(1.0, rel=3e-2)
