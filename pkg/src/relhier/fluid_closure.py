"""Objective rate tensor of a fluid, the induced diffusion flux, and the
assembled fluid momentum system with its contained mass equation."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import fields as F
from .frame_geometry import MetricField, pullback_metric, pullback_time_vector, space_metric
from .moment_hierarchy import HierarchyFields, decomposed_flux, reduce
from .tensor_core import CO, CONTRA, CheckReport, max_dev, pullback_field

__all__ = [
    "RateVariant",
    "FluidState",
    "space_metric_field",
    "rate_tensor",
    "rate_tensor_field",
    "rate_contravariance_check",
    "diffusion_flux",
    "diffusion_flux_closed",
    "assemble_fluid_system",
    "pullback_state",
    "classical_block_check",
    "exercise_flux",
    "exercise_flux_check",
    "project_orthogonal",
    "linear_shear_state",
    "random_fluid_state",
]


class RateVariant(Enum):
    FULL_G = "full"
    SPACE_G = "space"


@dataclass
class FluidState:
    """Fluid fields on R^4; ``v`` must satisfy e'0 . v = 1."""

    rho: F.Field
    v: F.Field
    p: F.Field
    mu: F.Field
    lam: F.Field
    metric: MetricField
    e0p: F.Field

    @property
    def c(self):
        return self.metric.c

    def check_velocity(self, points, tol=1e-10):
        return max_dev(np.einsum("...a,...a->...", self.e0p(points), self.v(points)), 1.0) <= tol


def space_metric_field(state: FluidState) -> F.Field:
    return space_metric(state.metric, state.e0p)


def _rate_from(Dv, v, G, dG):
    """Dv G + (Dv G)^T - (v . grad) G with (Dv)_ij = d_j v_i, arrays with leading batch dims."""
    A = np.einsum("...ij,...jl->...il", Dv, G)
    return A + np.swapaxes(A, -1, -2) - np.einsum("...k,...ilk->...il", v, dG)


def _metric_of(state, variant):
    return state.metric.field if RateVariant(variant) is RateVariant.FULL_G else space_metric_field(state)


def rate_tensor(state: FluidState, variant, points):
    """Rate tensor S at the given points for the chosen metric variant."""
    y = np.atleast_2d(np.asarray(points, dtype=float))
    G = _metric_of(state, variant)
    return _rate_from(state.v.grad(y), state.v(y), G(y), G.grad(y))


def rate_tensor_field(state: FluidState, variant=RateVariant.SPACE_G) -> F.Field:
    return F.Field(lambda y: rate_tensor(state, variant, y), None, (4, 4))


def pullback_state(state: FluidState, ymap) -> FluidState:
    """Starred fluid state: objective scalars composed, v contravariant, e'0 covariant, G contravariant."""
    return FluidState(
        rho=F.compose(state.rho, ymap),
        v=pullback_field(state.v, ymap, (CONTRA,)),
        p=F.compose(state.p, ymap),
        mu=F.compose(state.mu, ymap),
        lam=F.compose(state.lam, ymap),
        metric=pullback_metric(state.metric, ymap),
        e0p=pullback_time_vector(state.e0p, ymap),
    )


def rate_contravariance_check(state: FluidState, ymap, points, variant=RateVariant.SPACE_G, tol=1e-7) -> CheckReport:
    """S o Y = DY S* DY^T at starred points."""
    ys = np.atleast_2d(np.asarray(points, dtype=float))
    star = pullback_state(state, ymap)
    S_star = rate_tensor(star, variant, ys)
    J = ymap.jacobian(ys)
    pushed = np.einsum("...ia,...ab,...jb->...ij", J, S_star, J)
    direct = rate_tensor(state, variant, ymap.forward(ys))
    scale = max(1.0, float(np.max(np.abs(direct))))
    return CheckReport("rate_contravariance", max_dev(direct, pushed) / scale, tol, {"variant": RateVariant(variant).value})


def diffusion_flux(state: FluidState, points):
    """J = e'0^T S with S the rate tensor built on G^space."""
    y = np.atleast_2d(np.asarray(points, dtype=float))
    return np.einsum("...i,...il->...l", state.e0p(y), rate_tensor(state, RateVariant.SPACE_G, y))


def diffusion_flux_closed(state: FluidState, points):
    """J_l = sum_ik E_ik (v_k Gs_il - v_i Gs_kl) with E the antisymmetric part of d_k e'0_i."""
    y = np.atleast_2d(np.asarray(points, dtype=float))
    D = state.e0p.grad(y)  # [i, k] = d_k e'0_i
    E = 0.5 * (D - np.swapaxes(D, -1, -2))
    v = state.v(y)
    Gs = space_metric_field(state)(y)
    return np.einsum("...ik,...k,...il->...l", E, v, Gs) - np.einsum("...ik,...i,...kl->...l", E, v, Gs)


def _closure_stress(state: FluidState):
    """Pi = p G^space - S with S = mu S~ + lambda (div v) G^space."""
    Gs = space_metric_field(state)
    S_rate = rate_tensor_field(state, RateVariant.SPACE_G)
    divv = F.Field(state.v.divergence, None, ())
    S = F.add(F.einsum_field(",ij->ij", state.mu, S_rate), F.einsum_field(",,ij->ij", state.lam, divv, Gs))
    Pi = F.add(F.einsum_field(",ij->ij", state.p, Gs), F.scale(S, -1.0))
    return Pi, S


def assemble_fluid_system(state: FluidState, force: F.Field = None) -> dict:
    """Momentum system T = rho v v^T + Pi with its contained mass equation.

    Without ``force`` the source is manufactured as tau := div T. Returns the
    system, Pi, S, J = e'0^T Pi, q = rho v + J, the mass-equation rate obtained
    by reduction and the rate in the alternative closed expression.
    """
    Pi, S = _closure_stress(state)
    T = decomposed_flux(state.rho, state.v, Pi)
    tau = force if force is not None else F.Field(T.divergence, None, (4,))
    system = HierarchyFields(1, T, tau, decomposition={"rho": state.rho, "v": state.v, "Pi": Pi})
    J = F.einsum_field("i,ij->j", state.e0p, Pi)
    q = F.add(F.einsum_field(",j->j", state.rho, state.v), J)
    mass = reduce(system, state.e0p)

    def rate_closed(y):
        Dp = state.e0p.grad(y)
        X = np.einsum("...i,...j->...ij", state.v(y), q(y)) + Pi(y)
        return np.einsum("...i,...i->...", state.e0p(y), tau(y)) + np.einsum("...ij,...ij->...", Dp, X)

    return {
        "system": system,
        "Pi": Pi,
        "S": S,
        "J": J,
        "q": q,
        "mass": mass,
        "rate_closed": F.Field(rate_closed, None, ()),
    }


def classical_block_check(u_field: F.Field, mu=1.0, lam=0.5, points=None, tol=1e-9, rng=None) -> CheckReport:
    """Standard constant frame: spatial block of mu S~ + lambda div v G^space is the classical shear stress."""
    from .frame_geometry import standard_metric, standard_time_vector

    v = F.Field(lambda y: np.concatenate([np.ones(y.shape[:-1] + (1,)), u_field(y)], axis=-1),
                lambda y: np.concatenate([np.zeros(y.shape[:-1] + (1, 4)), u_field.grad(y)], axis=-2), (4,))
    st = FluidState(F.constant(np.array(1.0)), v, F.constant(np.array(0.0)), F.constant(np.array(float(mu))),
                    F.constant(np.array(float(lam))), standard_metric(1.0), standard_time_vector())
    rng = np.random.default_rng(0) if rng is None else rng
    y = rng.uniform(-1, 1, (10, 4)) if points is None else np.atleast_2d(points)
    _, S = _closure_stress(st)
    Sfull = S(y)
    grad_u = u_field.grad(y)[..., 1:]  # [i, j] = d_j u_i, spatial only
    div_u = np.trace(grad_u, axis1=-2, axis2=-1)
    ref = mu * (grad_u + np.swapaxes(grad_u, -1, -2)) + lam * div_u[..., None, None] * np.eye(3)
    dev = max(max_dev(Sfull[..., 1:, 1:], ref), max_dev(Sfull[..., 0, :], 0.0))
    return CheckReport("classical_block", dev, tol)


def exercise_flux(w, G):
    """J_i = sum_k w_k G_ki."""
    return np.einsum("...k,...ki->...i", w, G)


def project_orthogonal(w, G, e0p):
    """Shift w along e'0 so that e'0 . (G w) = 0."""
    a = np.einsum("...i,...ij,...j->...", e0p, G, w)
    b = np.einsum("...i,...ij,...j->...", e0p, G, e0p)
    return w - (a / b)[..., None] * e0p


def exercise_flux_check(w: F.Field, Gt: F.Field, ymap, points, e0p: F.Field = None, tol=1e-9) -> CheckReport:
    """Contravariance of J = G w for covariant w and contravariant symmetric G.

    When e'0 is given, also reports the size of e'0 . J after projecting w and for G^space.
    """
    ys = np.atleast_2d(np.asarray(points, dtype=float))
    w_star = pullback_field(w, ymap, (CO,))
    G_star = pullback_field(Gt, ymap, (CONTRA, CONTRA))
    J_star = exercise_flux(w_star(ys), G_star(ys))
    y = ymap.forward(ys)
    direct = exercise_flux(w(y), Gt(y))
    pushed = np.einsum("...ia,...a->...i", ymap.jacobian(ys), J_star)
    details = {}
    if e0p is not None:
        ep = e0p(y)
        G = Gt(y)
        wp = project_orthogonal(w(y), G, ep)
        details["projected"] = float(np.max(np.abs(np.einsum("...i,...i->...", ep, exercise_flux(wp, G)))))
    return CheckReport("exercise_flux", max_dev(direct, pushed), tol, details)


def linear_shear_state(alpha=0.3, metric=None, e0p=None, rho=1.0, p=1.0, mu=0.0, lam=0.0):
    """v = (1, alpha y1, 0, 0) in the standard frame with constant scalars."""
    from .frame_geometry import standard_metric, standard_time_vector

    B = np.zeros((4, 4))
    B[1, 1] = alpha
    v = F.polynomial(np.array([1.0, 0, 0, 0]), B)
    return FluidState(F.constant(np.array(rho)), v, F.constant(np.array(p)), F.constant(np.array(mu)),
                      F.constant(np.array(lam)), metric or standard_metric(1.0), e0p or standard_time_vector())


def random_fluid_state(rng, metric=None, e0p=None, strength=0.2):
    """Smooth random state with e'0 . v = 1 enforced by normalization."""
    from .frame_geometry import standard_metric, standard_time_vector
    from .moment_hierarchy import four_velocity_field

    metric = metric or standard_metric(1.0)
    e0p = e0p or standard_time_vector()
    u = F.random_field(rng, (4,), strength, offset=np.array([1.0, 0.1, -0.1, 0.05]))
    v = four_velocity_field(u, e0p)

    def positive(base):
        return F.random_field(rng, (), 0.1, offset=np.array(base))

    return FluidState(positive(1.0), v, positive(1.0), positive(0.5), positive(0.3), metric, e0p)
