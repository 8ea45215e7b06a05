import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relhier import fields as F
from relhier import fluid_closure as FC
from relhier import frame_geometry as FG
from relhier import moment_hierarchy as MH
from relhier import observer_maps as OM

seeds = st.integers(0, 2**31 - 1)
BOX = np.array([[-1.0, 1.0]] * 4)


def fd_rate(v, G, y, h=1e-5):
    """Oracle: S_il = sum_j (d_j v_i G_jl + d_j v_l G_ij) - sum_k v_k d_k G_il by central differences."""
    Dv = np.stack([(v(y + h * e) - v(y - h * e)) / (2 * h) for e in np.eye(4)], axis=-1)
    dG = np.stack([(G(y + h * e) - G(y - h * e)) / (2 * h) for e in np.eye(4)], axis=-1)
    A = Dv @ G(y)
    return A + A.T - np.einsum("k,ilk->il", v(y), dG)


def test_constant_velocity_and_metric_give_zero_rate():
    st_ = FC.linear_shear_state(alpha=0.0)
    assert not np.any(FC.rate_tensor(st_, FC.RateVariant.SPACE_G, np.zeros((2, 4))))
    assert not np.any(FC.rate_tensor(st_, FC.RateVariant.FULL_G, np.zeros((2, 4))))


def test_linear_shear_rate():
    alpha = 0.3
    st_ = FC.linear_shear_state(alpha)
    y = np.array([[0.1, 0.4, -0.2, 0.3]])
    S = FC.rate_tensor(st_, FC.RateVariant.SPACE_G, y)[0]
    assert S[1, 1] == pytest.approx(2 * alpha, abs=1e-15)
    S[1, 1] = 0
    assert not np.any(S)


@given(seeds)
def test_rate_matches_finite_difference_oracle(seed):
    r = np.random.default_rng(seed)
    e0p = FG.random_time_vector_field(r)
    metric = FG.pullback_metric(FG.standard_metric(), OM.random_newton_map(r))
    st_ = FC.random_fluid_state(r, metric, FG.pullback_time_vector(e0p, OM.identity_map()))
    y = r.uniform(-0.5, 0.5, 4)
    for variant in FC.RateVariant:
        G = st_.metric.field if variant is FC.RateVariant.FULL_G else FC.space_metric_field(st_)
        S = FC.rate_tensor(st_, variant, y[None])[0]
        np.testing.assert_allclose(S, fd_rate(lambda p: st_.v(p[None])[0], lambda p: G(p[None])[0], y),
                                   atol=1e-7 * max(1, np.abs(S).max()))


@settings(max_examples=10)
@given(seeds)
def test_rate_is_contravariant_under_newton_maps(seed):
    r = np.random.default_rng(seed)
    st_ = FC.random_fluid_state(r, e0p=FG.random_time_vector_field(r))
    pts = r.uniform(-0.8, 0.8, (5, 4))
    ymap = OM.random_newton_map(r)
    for variant in FC.RateVariant:
        assert FC.rate_contravariance_check(st_, ymap, pts, variant).passed


def test_velocity_normalization(rng):
    st_ = FC.random_fluid_state(rng, e0p=FG.random_time_vector_field(rng))
    assert st_.check_velocity(rng.uniform(-1, 1, (5, 4)))


# ---------------------------------------------------------------- diffusion flux

def test_constant_time_covector_gives_zero_flux(rng):
    st_ = FC.random_fluid_state(rng, e0p=FG.boosted_time_vector(np.array([0.3, 0, 0])))
    y = rng.uniform(-1, 1, (4, 4))
    np.testing.assert_allclose(FC.diffusion_flux(st_, y), 0, atol=1e-13)
    np.testing.assert_allclose(FC.diffusion_flux_closed(st_, y), 0, atol=1e-15)


def test_small_rotation_pattern_time_covector():
    delta = 0.05
    w = F.polynomial(np.array([1.0, 0, 0, 0]), delta * np.array([[0, 0, 0, 0], [0, 0, 1, 0], [0, -1, 0, 0], [0, 0, 0, 0]]))
    e0p = FG.normalized_time_vector(w, FG.standard_metric())
    st_ = FC.random_fluid_state(np.random.default_rng(3), e0p=e0p)
    y = np.random.default_rng(4).uniform(-1, 1, (6, 4))
    J1, J2 = FC.diffusion_flux(st_, y), FC.diffusion_flux_closed(st_, y)
    assert np.max(np.abs(J1)) > 1e-3
    np.testing.assert_allclose(J1, J2, atol=1e-9)


@given(seeds)
def test_flux_formulas_agree_and_flux_is_spatial(seed):
    r = np.random.default_rng(seed)
    e0p = FG.random_time_vector_field(r)
    st_ = FC.random_fluid_state(r, e0p=e0p)
    y = r.uniform(-0.8, 0.8, (5, 4))
    J = FC.diffusion_flux(st_, y)
    np.testing.assert_allclose(J, FC.diffusion_flux_closed(st_, y), atol=1e-9)
    np.testing.assert_allclose(np.einsum("na,na->n", e0p(y), J), 0, atol=1e-9)


# ---------------------------------------------------------------- closure

def test_classical_block(rng):
    u = F.random_field(rng, (3,), 0.5)
    assert FC.classical_block_check(u, 1.3, 0.4, rng=rng).passed


def test_classical_block_by_hand():
    # u = (a y2, 0, 0): shear stress mu a in the (1, 2) slot, no divergence
    a, mu = 0.7, 1.1
    u = F.polynomial(np.zeros(3), np.array([[0, 0, a, 0], [0, 0, 0, 0], [0, 0, 0, 0.0]]))
    rep = FC.classical_block_check(u, mu, 0.5)
    assert rep.passed
    st_ = FC.FluidState(F.constant(np.array(1.0)),
                        F.polynomial(np.array([1.0, 0, 0, 0]), np.array([[0, 0, 0, 0], [0, 0, a, 0], [0] * 4, [0] * 4])),
                        F.constant(np.array(0.0)), F.constant(np.array(mu)), F.constant(np.array(0.5)),
                        FG.standard_metric(), FG.standard_time_vector())
    S = FC.assemble_fluid_system(st_)["S"](np.zeros((1, 4)))[0]
    assert S[1, 2] == pytest.approx(mu * a) and S[2, 1] == pytest.approx(mu * a)


def test_rest_state_is_divergence_free():
    st_ = FC.linear_shear_state(alpha=0.0, rho=1.3, p=2.0)
    sysd = FC.assemble_fluid_system(st_)
    y = np.random.default_rng(0).uniform(-1, 1, (4, 4))
    np.testing.assert_allclose(sysd["system"].T.divergence(y), 0, atol=1e-12)
    np.testing.assert_allclose(MH.strong_residual(sysd["system"], y), 0, atol=1e-12)


def test_shear_state_mass_flux():
    st_ = FC.linear_shear_state(alpha=0.4, rho=1.5, p=3.0, mu=0.2, lam=0.1)
    sysd = FC.assemble_fluid_system(st_)
    y = np.random.default_rng(1).uniform(-1, 1, (4, 4))
    # e'0 annihilates G^space, so the pressure does not enter the mass flux
    np.testing.assert_allclose(sysd["J"](y), 0, atol=1e-14)
    np.testing.assert_allclose(sysd["mass"].T(y), 1.5 * st_.v(y), atol=1e-14)


def test_contained_mass_equation(rng):
    e0p = FG.random_time_vector_field(rng)
    st_ = FC.random_fluid_state(rng, e0p=e0p)
    sysd = FC.assemble_fluid_system(st_)
    mass = sysd["mass"]
    y = rng.uniform(-0.8, 0.8, (5, 4))
    np.testing.assert_allclose(mass.T(y), sysd["q"](y), atol=1e-12)
    np.testing.assert_allclose(mass.T.divergence(y), mass.g(y), atol=1e-6)
    assert MH.scalar_law_check(mass.T, mass.g, BOX, rng, count=1, quad_order=8, tol=1e-6).passed
    # the closed rate expression carries the extra term sum d_j e'0_i v_i J_j
    De = e0p.grad(y)
    extra = np.einsum("nij,ni,nj->n", De, st_.v(y), sysd["J"](y))
    np.testing.assert_allclose(sysd["rate_closed"](y) - mass.g(y), extra, atol=1e-6)


# ---------------------------------------------------------------- exercise flux

def test_exercise_flux_examples(rng):
    e0p = FG.random_time_vector_field(rng)
    Gs = FG.space_metric(FG.standard_metric(), e0p)
    y = rng.uniform(-1, 1, (5, 4))
    J = FC.exercise_flux(e0p(y), Gs(y))
    np.testing.assert_allclose(np.einsum("na,na->n", e0p(y), J), 0, atol=1e-13)
    L = OM.lorentz_map(OM.random_velocity(rng, 1.0, 0.7), OM.random_rotation(rng))
    w = F.random_field(rng, (4,))
    G = FG.standard_metric().field
    rep = FC.exercise_flux_check(w, G, L, y, e0p=e0p)
    assert rep.passed
    assert rep.details["projected"] < 1e-10
