"""Divergence systems of order N: sum_j d_j T_{alpha j} = g_alpha, alpha in {0..3}^N.

Weak residuals against compactly supported covariant test tensors, the
transformation rules for flux and source, Coriolis coefficients, and the
reduction of an order-N system to order N-1 by contraction with e'0.
"""
from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fields as F
from ._numerics import bump, bump_deriv, tensor_grid
from .errors import AccuracyError, InvalidFrameError, StructureError
from .tensor_core import CONTRA, CheckReport, apply_matrix, max_dev, pushforward_field

__all__ = [
    "HierarchyFields",
    "TestFunction",
    "CoriolisCoefficients",
    "manufactured_hierarchy",
    "decomposed_flux",
    "four_velocity_field",
    "bump_test_function",
    "random_test_functions",
    "tensor_test_function",
    "weak_residual",
    "strong_residual",
    "rule_g",
    "source_inhomogeneity",
    "push_hierarchy",
    "source_transform_check",
    "fictitious_force",
    "coriolis_split",
    "classical_coriolis",
    "coriolis_rule_residual",
    "coriolis_transform_check",
    "plain_coriolis_from_star",
    "reduce",
    "reduce_power",
    "split_test_function",
    "reduced_momentum_split",
    "scalar_law_check",
    "flux_orthogonality_gap",
    "diffusion_flux_scalar",
    "standard_to_normalized_velocity",
    "normalized_to_standard_velocity",
]

_LOW = string.ascii_lowercase


@dataclass
class HierarchyFields:
    """Flux T (rank N+1) and source g (rank N) of an order-N system."""

    order: int
    T: F.Field
    g: F.Field
    decomposition: Optional[dict] = None
    symmetric: bool = False

    def __post_init__(self):
        N = self.order
        if self.T.shape != (4,) * (N + 1) or self.g.shape != (4,) * N:
            raise ValueError(f"field shapes {self.T.shape}, {self.g.shape} do not match order {N}")


@dataclass
class TestFunction:
    """Covariant test tensor with compact support inside ``support`` (box of shape (4, 2))."""

    field: F.Field
    support: np.ndarray

    def __call__(self, y):
        return self.field(y)

    def grad(self, y):
        return self.field.grad(y)

    @property
    def rank(self):
        return len(self.field.shape)


@dataclass
class CoriolisCoefficients:
    """g = force + chi : T, chi[alpha..., beta...] with len(alpha) = N, len(beta) = N + 1."""

    chi: np.ndarray
    force: np.ndarray
    order: int


def manufactured_hierarchy(T: F.Field, perturbation=None):
    """System whose source is the exact divergence of T (plus an optional constant shift)."""
    N = len(T.shape) - 1
    shift = np.zeros((4,) * N) if perturbation is None else np.asarray(perturbation, dtype=float)
    g = F.Field(lambda y: T.divergence(y) + shift, None, (4,) * N)
    return HierarchyFields(N, T, g)


def decomposed_flux(rho: F.Field, v: F.Field, Pi: F.Field):
    """T = rho v (x) ... (x) v + Pi with rank of Pi fixing the number of factors."""
    M = len(Pi.shape)
    letters = _LOW[:M]
    spec = "," + ",".join(letters) + "->" + letters
    vv = F.einsum_field(spec, rho, *([v] * M))
    return F.add(vv, Pi)


def four_velocity_field(u: F.Field, e0p: F.Field):
    """v = u / (e'0.u), so that e'0.v = 1."""
    dot = F.einsum_field("a,a->", e0p, u)
    inv = F.map_elementwise(dot, lambda s: 1.0 / s, lambda s: -1.0 / (s * s))
    return F.einsum_field("a,->a", u, inv)


def bump_test_function(support, coeff):
    """coeff (x) prod_d b((y_d - lo_d)/(hi_d - lo_d)) with the C2 bump b."""
    support = np.asarray(support, dtype=float)
    coeff = np.asarray(coeff, dtype=float)
    lo, length = support[:, 0], support[:, 1] - support[:, 0]
    S = coeff.shape

    def _profile(y):
        u = (y - lo) / length
        return bump(u), bump_deriv(u) / length

    def _value(y):
        b, _ = _profile(y)
        p = np.prod(b, axis=-1)
        return p.reshape(p.shape + (1,) * len(S)) * coeff

    def _grad(y):
        b, db = _profile(y)
        cols = []
        for d in range(4):
            others = np.prod(np.delete(b, d, axis=-1), axis=-1)
            cols.append(others * db[..., d])
        gp = np.stack(cols, axis=-1)  # (..., 4)
        return coeff[..., None] * gp.reshape(gp.shape[:-1] + (1,) * len(S) + (4,))

    return TestFunction(F.Field(_value, _grad, S), support)


def random_test_functions(rng, box, rank, count=10, min_fraction=0.4):
    """Seeded family of bump test tensors with random sub-box supports."""
    box = np.asarray(box, dtype=float)
    out = []
    for _ in range(count):
        length = box[:, 1] - box[:, 0]
        frac = rng.uniform(min_fraction, 1.0, 4)
        lo = box[:, 0] + rng.uniform(0, 1, 4) * (1 - frac) * length
        sub = np.stack([lo, lo + frac * length], axis=-1)
        out.append(bump_test_function(sub, rng.standard_normal((4,) * rank)))
    return out


def tensor_test_function(e0p: F.Field, eta: TestFunction, copies=1):
    """zeta = e'0 (x) ... (x) e'0 (x) eta, the test family used for reduction."""
    r = eta.rank
    lead = _LOW[:copies]
    tail = _LOW[copies:copies + r]
    spec = ",".join(list(lead) + [tail]) + "->" + lead + tail
    return TestFunction(F.einsum_field(spec, *([e0p] * copies), eta.field), eta.support)


def _integrand(h: HierarchyFields, zeta: TestFunction, y):
    n = y.shape[0]
    gz = zeta.grad(y).reshape(n, -1)
    T = h.T(y).reshape(n, -1)
    z = zeta(y).reshape(n, -1)
    g = h.g(y).reshape(n, -1)
    return np.sum(gz * T, axis=-1) + np.sum(z * g, axis=-1)


def weak_residual(h: HierarchyFields, zeta: TestFunction, box=None, quad_order=10, check=False, rtol=1e-8):
    """int sum_alpha (sum_j d_j zeta_alpha T_{alpha j} + zeta_alpha g_alpha) dL^4 over the support."""
    box = zeta.support if box is None else np.asarray(box, dtype=float)
    nodes, w = tensor_grid(box, quad_order)
    val = float(w @ _integrand(h, zeta, nodes))
    if check:
        nodes2, w2 = tensor_grid(box, quad_order + 4)
        val2 = float(w2 @ _integrand(h, zeta, nodes2))
        scale = max(abs(val2), float(np.sum(np.abs(w2 * _integrand(h, zeta, nodes2)))), 1e-300)
        if abs(val - val2) > rtol * scale:
            raise AccuracyError(f"weak residual quadrature not converged ({val} vs {val2})")
    return val


def strong_residual(h: HierarchyFields, points):
    """Pointwise div T - g, shape (npoints, (4,)*N)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return h.T.divergence(points) - h.g(points)


def source_inhomogeneity(T_star, J, H, N):
    """sum_{kbar, j} d_j (Y_{k1,kbar1} ... Y_{kN,kbarN}) T*_{kbar j} (derivatives in y*)."""
    if N == 0:
        return np.zeros(np.shape(T_star)[:-1])
    a = _LOW[:N]
    total = 0.0
    for r in range(N):
        dst = a[:r] + "Z" + a[r + 1:]
        term = np.einsum(f"...Z{a[r]}z,...{a}z->...{dst}", H, T_star)
        for s in range(N):
            if s != r:
                term = apply_matrix(term, J, s, N)
        total = total + term
    return total


def _push(T, J, N):
    for s in range(N):
        T = apply_matrix(T, J, s, N)
    return T


def rule_g(g_star, T_star, J, H, N):
    """Plain source at Y(y*) from starred flux and source."""
    return source_inhomogeneity(T_star, J, H, N) + _push(g_star, J, N)


def push_hierarchy(h_star: HierarchyFields, ymap) -> HierarchyFields:
    """Plain system (functions of y) from a starred one via the transformation rules."""
    N = h_star.order
    T = pushforward_field(h_star.T, ymap, (CONTRA,) * (N + 1))

    def _g(y):
        ys = ymap.inverse(y)
        return rule_g(h_star.g(ys), h_star.T(ys), ymap.jacobian(ys), ymap.hessian(ys), N)

    return HierarchyFields(N, T, F.Field(_g, None, (4,) * N))


def source_transform_check(h_star: HierarchyFields, ymap, points, tol=1e-8) -> CheckReport:
    """Check that (div T - g) o Y = DY..DY (div* T* - g*) with g given by the source rule.

    T o Y = DY..DY T* is differentiated exactly in y* and converted to
    plain derivatives with DY^{-1}; this is independent of the formula for g.
    """
    N = h_star.order
    ys = np.atleast_2d(np.asarray(points, dtype=float))
    Jf = F.jacobian_field(ymap)
    a = _LOW[:N + 1]
    A = a.upper()
    spec = ",".join([A] + [a[s] + A[s] for s in range(N + 1)]) + "->" + a
    TY = F.einsum_field(spec, h_star.T, *([Jf] * (N + 1)))
    gTY = TY.grad(ys)
    J = ymap.jacobian(ys)
    H = ymap.hessian(ys)
    Ainv = np.linalg.inv(J)
    div_plain = np.einsum(f"...{a}m,...mz->...{a}z", gTY, Ainv)
    div_plain = np.trace(div_plain, axis1=-2, axis2=-1)
    g_plain = rule_g(h_star.g(ys), h_star.T(ys), J, H, N)
    lhs = div_plain - g_plain
    rhs = _push(h_star.T.divergence(ys) - h_star.g(ys), J, N)
    inh = source_inhomogeneity(h_star.T(ys), J, H, N)
    return CheckReport("source_transform", max_dev(lhs, rhs), tol,
                       {"inhomogeneity": float(np.max(np.abs(inh))) if np.size(inh) else 0.0})


def fictitious_force(ymap, ys, T_star):
    """Xddot_k T*_00 + sum_j Qdot_kj (T*_0j + T*_j0) for a Newton map (component 0 is zero)."""
    ys = np.asarray(ys, dtype=float)
    T_star = np.asarray(T_star, dtype=float)
    Xdd = ymap.acceleration(ys)
    Qd = ymap.rotation.d1(ys[..., 0])
    sym = T_star[..., 0, 1:] + T_star[..., 1:, 0]
    out = np.zeros(ys.shape[:-1] + (4,))
    out[..., 1:] = Xdd * T_star[..., 0, 0][..., None] + np.einsum("...kj,...j->...k", Qd, sym)
    return out


def coriolis_split(g_of_T, order, rng=None, tol=1e-12, symmetrize=False) -> CoriolisCoefficients:
    """Extract force and chi from a source that is affine in T, by unit-tensor probes."""
    N = int(order)
    shapeT = (4,) * (N + 1)
    force = np.asarray(g_of_T(np.zeros(shapeT)), dtype=float)
    nT = 4 ** (N + 1)
    cols = []
    for k in range(nT):
        E = np.zeros(nT)
        E[k] = 1.0
        cols.append(np.asarray(g_of_T(E.reshape(shapeT)), dtype=float).ravel() - force.ravel())
    chi = np.stack(cols, axis=-1).reshape((4,) * N + shapeT)
    if symmetrize and N >= 1:
        chi = 0.5 * (chi + np.swapaxes(chi, -1, -2))
    rng = np.random.default_rng(12345) if rng is None else rng
    Tr = rng.standard_normal(shapeT)
    direct = np.asarray(g_of_T(Tr), dtype=float)
    recon = force + np.tensordot(chi, Tr, axes=N + 1)
    scale = max(1.0, float(np.max(np.abs(direct))), float(np.max(np.abs(chi))) * float(np.sum(np.abs(Tr))))
    if np.max(np.abs(direct - recon)) > tol * scale:
        raise StructureError(f"source is not affine in T (mismatch {np.max(np.abs(direct - recon)):.3e})")
    return CoriolisCoefficients(chi, force, N)


def classical_coriolis(a, d):
    """chi_0 = 0, chi_k = [[a_k, d_k^T], [d_k, 0]] for k = 1..3 (array chi[k, p, q])."""
    a = np.asarray(a, dtype=float)
    d = np.asarray(d, dtype=float)
    chi = np.zeros((4, 4, 4))
    for k in range(1, 4):
        chi[k, 0, 0] = a[k - 1]
        chi[k, 0, 1:] = d[k - 1]
        chi[k, 1:, 0] = d[k - 1]
    return chi


def _hessian_power_term(J, H, N):
    """(Y_{k1,m1} ... Y_{kN,mN})_{,m_{N+1}} as array [k..., m1..m_{N+1}]."""
    k = _LOW[:N]
    m = _LOW[N:2 * N + 1]
    total = 0.0
    for r in range(N):
        ops = []
        subs = []
        for s in range(N):
            if s == r:
                subs.append(k[s] + m[s] + m[N])
                ops.append(H)
            else:
                subs.append(k[s] + m[s])
                ops.append(J)
        spec = ",".join("..." + x for x in subs) + "->..." + k + m
        total = total + np.einsum(spec, *ops)
    return total


def coriolis_rule_residual(chi, chi_star, J, H, N):
    """LHS - RHS of the Coriolis transformation law at one or more points."""
    R = 2 * N + 1
    lhs = np.asarray(chi, dtype=float)
    JT = np.swapaxes(J, -1, -2)
    for ax in range(N, R):
        lhs = apply_matrix(lhs, JT, ax, R)
    rhs = np.asarray(chi_star, dtype=float)
    for ax in range(N):
        rhs = apply_matrix(rhs, J, ax, R)
    return lhs - (rhs + _hessian_power_term(J, H, N))


def coriolis_transform_check(chi_fn, chi_star_fn, ymap, points, order, tol=1e-7) -> CheckReport:
    """Check the Coriolis law with chi_fn evaluated at Y(y*) and chi_star_fn at y*."""
    ys = np.atleast_2d(np.asarray(points, dtype=float))
    dev = 0.0
    for p in ys:
        r = coriolis_rule_residual(chi_fn(ymap.forward(p)), chi_star_fn(p), ymap.jacobian(p), ymap.hessian(p), order)
        dev = max(dev, float(np.max(np.abs(r))))
    return CheckReport("coriolis_transform", dev, tol)


def plain_coriolis_from_star(coeff_star: CoriolisCoefficients, ymap, ys):
    """Coriolis coefficients of the plain source built by the source rule from g* = f* + chi*:T*."""
    N = coeff_star.order
    J = ymap.jacobian(ys)
    H = ymap.hessian(ys)
    Ainv = np.linalg.inv(J)

    def g_plain(T):
        Ts = T
        for s in range(N + 1):
            Ts = apply_matrix(Ts, Ainv, s, N + 1)
        gs = coeff_star.force + np.tensordot(coeff_star.chi, Ts, axes=N + 1)
        return rule_g(gs, Ts, J, H, N)

    return coriolis_split(g_plain, N, tol=1e-10)


def reduce(h: HierarchyFields, e0p: F.Field) -> HierarchyFields:
    """Order N-1 system T'_{alpha j} = e'0_i T_{i alpha j}, g'_alpha = d_j e'0_i T_{i alpha j} + e'0_i g_{i alpha}."""
    return reduce_power(h, e0p, 1)


def reduce_power(h: HierarchyFields, e0p: F.Field, k: int) -> HierarchyFields:
    """k-fold reduction in one step, contracting with e'0 (x) ... (x) e'0."""
    N = h.order
    if not 1 <= k <= N:
        raise ValueError(f"cannot reduce order {N} by {k}")
    lead = _LOW[:k]
    rest = _LOW[k:N + 1]  # alpha' and j
    E = F.einsum_field(",".join(lead) + "->" + lead, *([e0p] * k)) if k > 1 else e0p
    T = F.einsum_field(f"{lead + rest},{lead}->{rest}", h.T, E)
    alpha = _LOW[k:N]

    def _g(y):
        dE = E.grad(y)
        Ev = E(y)
        jl = "z"
        val = np.einsum(f"...{lead}{jl},...{lead}{alpha}{jl}->...{alpha}", dE, h.T(y))
        if N > 0:
            val = val + np.einsum(f"...{lead},...{lead}{alpha}->...{alpha}", Ev, h.g(y))
        return val

    return HierarchyFields(N - k, T, F.Field(_g, None, (4,) * (N - k)))


def split_test_function(zeta: TestFunction, e0: F.Field, e0p: F.Field):
    """zeta = eta e'0 + zeta~ with eta = zeta.e0 and zeta~.e0 = 0."""
    eta = F.einsum_field("a,a->", zeta.field, e0)
    tilde = F.add(zeta.field, F.scale(F.einsum_field(",a->a", eta, e0p), -1.0))
    return TestFunction(eta, zeta.support), TestFunction(tilde, zeta.support)


def reduced_momentum_split(h: HierarchyFields, e0: F.Field, e0p: F.Field):
    """Mass equation (q, rate) and reduced system (T, f = r - (r.e'0) e0) of an order-1 system."""
    if h.order != 1:
        raise ValueError("reduced momentum split needs an order-1 system")
    mass = reduce(h, e0p)
    r = h.g
    rdot = F.einsum_field("a,a->", r, e0p)
    f = F.add(r, F.scale(F.einsum_field(",a->a", rdot, e0), -1.0))
    return {"mass": mass, "reduced": HierarchyFields(1, h.T, f)}


def scalar_law_check(q: F.Field, rate: F.Field, box, rng=None, count=10, quad_order=10, tol=1e-8) -> CheckReport:
    """max over scalar bumps eta of |int (grad eta . q + eta rate) dL^4|."""
    rng = np.random.default_rng(0) if rng is None else rng
    h = HierarchyFields(0, q, rate)
    dev = 0.0
    for eta in random_test_functions(rng, box, 0, count):
        dev = max(dev, abs(weak_residual(h, eta, quad_order=quad_order)))
    return CheckReport("scalar_law", dev, tol)


def flux_orthogonality_gap(rho, v, J, e0p):
    """Returns (e'0.J, rho - e'0.q) for q = rho v + J."""
    rho = np.asarray(rho, dtype=float)
    q = rho[..., None] * v + J
    return np.einsum("...a,...a->...", e0p, J), rho - np.einsum("...a,...a->...", e0p, q)


def diffusion_flux_scalar(G, e0, grad_mu, c, space=True):
    """J = -G^space grad mu (space=True) or the full-metric J~ = -G grad mu."""
    G = np.asarray(G, dtype=float)
    if space:
        G = G + np.einsum("...a,...b->...ab", e0, e0) / (c * c)
    return -np.einsum("...ab,...b->...a", G, grad_mu)


def standard_to_normalized_velocity(u, e0p, Ginv=None, c=1.0, tol=1e-9):
    """v = u / (e'0.u) for u with u.G^{-1}u = -c^2 (checked when Ginv is given) and e'0.u > 0."""
    u = np.asarray(u, dtype=float)
    e0p = np.asarray(e0p, dtype=float)
    if Ginv is not None:
        norm = u @ np.asarray(Ginv, float) @ u
        if abs(norm + c * c) > tol * c * c:
            raise InvalidFrameError(f"u.G^-1 u = {norm}, expected {-c * c}")
    s = float(e0p @ u)
    if s <= 0:
        raise InvalidFrameError("e'0.u must be positive")
    return u / s


def normalized_to_standard_velocity(v, ep_spatial, c=1.0):
    """u = gamma_v v with gamma_v = (1 - |v|^2/c^2)^{-1/2}, |v|^2 = sum_i (e'_i.v)^2."""
    v = np.asarray(v, dtype=float)
    n2 = float(np.sum((np.asarray(ep_spatial, float) @ v) ** 2))
    if n2 >= c * c:
        raise InvalidFrameError("frame speed reaches c")
    return v / np.sqrt(1.0 - n2 / (c * c))
