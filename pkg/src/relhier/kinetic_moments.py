"""Velocity moments of kinetic distributions and their balance laws.

F_{k1..kM}(t, x) = int m c~_{k1}..c~_{kM} f(t, x, c) dc with c~ = (1, c).
Integrals use a tensor Gauss-Hermite rule centred on the nominal mean of the
distribution and scaled by its nominal spread; tabulated distributions use a
truncated Gauss-Legendre rule instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ._numerics import gauss_legendre, hermite_nodes
from .errors import AccuracyError, VacuumError
from .tensor_core import CheckReport, push_components, CONTRA

__all__ = [
    "QuadratureSpec",
    "KineticScenario",
    "MomentSet",
    "ClassicalQuantities",
    "maxwellian",
    "maxwellian_scenario",
    "maxwellian_moments_closed_form",
    "streaming_maxwellian_scenario",
    "scaled_maxwellian_scenario",
    "tabulated_scenario",
    "validate_scenario",
    "compute_moments",
    "classical_quantities",
    "classical_balance_residual",
    "moment_pde_residual",
    "transform_scenario",
    "moment_transform_check",
]


@dataclass(frozen=True)
class QuadratureSpec:
    kind: str = "hermite"  # "hermite" or "legendre"
    order: int = 24
    half_width: float = 9.0  # legendre box half width in units of spread
    check_convergence: bool = False
    rtol: float = 1e-10

    def refined(self):
        return replace(self, order=2 * self.order, check_convergence=False)


@dataclass
class KineticScenario:
    """Distribution f(t, x, c) plus particle mass, acceleration and collision data.

    ``df`` optionally returns the derivatives (d_t f, d_x1 f, d_x2 f, d_x3 f)
    stacked on a trailing axis. ``mean`` and ``spread`` are the quadrature
    centre and width, either constants or functions of (t, x).
    """

    f: Callable
    m_part: float = 1.0
    accel: Optional[Callable] = None
    collision: Optional[Callable] = None
    df: Optional[Callable] = None
    mean: object = field(default_factory=lambda: np.zeros(3))
    spread: object = 1.0
    name: str = "custom"
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def center(self, t, x):
        return np.asarray(self.mean(t, x) if callable(self.mean) else self.mean, dtype=float)

    def width(self, t, x):
        return float(self.spread(t, x) if callable(self.spread) else self.spread)


@dataclass
class MomentSet:
    """Moment tensors F^(r) of shape (4,)*r for r = 0..order."""

    order: int
    tensors: list

    def value(self, idx):
        idx = tuple(idx)
        return float(self.tensors[len(idx)][idx]) if idx else float(self.tensors[0])

    def tensor(self, r):
        return self.tensors[r]


@dataclass
class ClassicalQuantities:
    rho: float
    v: np.ndarray
    Pi: np.ndarray
    eps: float
    e: float
    e_moments: float
    q: np.ndarray
    force: np.ndarray
    g_rate: float


def maxwellian(c, n=1.0, v=(0.0, 0.0, 0.0), theta=1.0):
    c = np.asarray(c, dtype=float)
    d = c - np.asarray(v, dtype=float)
    return n * (2 * np.pi * theta) ** -1.5 * np.exp(-np.sum(d * d, axis=-1) / (2 * theta))


def _gaussian_product_mean(idx, v, theta):
    """E[prod_k c_{idx_k}] for c ~ N(v, theta I) via E[c_a X] = v_a E[X] + theta sum_b delta_ab E[X / c_b]."""
    if not idx:
        return 1.0
    a, rest = idx[0], idx[1:]
    total = v[a] * _gaussian_product_mean(rest, v, theta)
    for j, b in enumerate(rest):
        if b == a:
            total += theta * _gaussian_product_mean(rest[:j] + rest[j + 1:], v, theta)
    return total


def maxwellian_moments_closed_form(order, n=1.0, v=(0.0, 0.0, 0.0), theta=1.0, m_part=1.0):
    """Exact moment tensors of m n M_{v,theta} up to ``order`` (no quadrature)."""
    v = np.asarray(v, dtype=float)
    out = []
    for r in range(order + 1):
        T = np.zeros((4,) * r)
        for idx in np.ndindex(*T.shape):
            spatial = tuple(k - 1 for k in idx if k > 0)
            T[idx] = m_part * n * _gaussian_product_mean(spatial, v, theta)
        out.append(T if r else np.array(m_part * n))
    return out


def maxwellian_scenario(n=1.0, v=(0.0, 0.0, 0.0), theta=1.0, m_part=1.0, quad=None):
    """Spatially uniform, stationary Maxwellian."""
    v = np.asarray(v, dtype=float)

    def f(t, x, c):
        return maxwellian(c, n, v, theta)

    def df(t, x, c):
        return np.zeros(np.shape(c)[:-1] + (4,))

    return KineticScenario(f, m_part, df=df, mean=v, spread=np.sqrt(theta), name="maxwellian",
                           quad=quad or QuadratureSpec())


def streaming_maxwellian_scenario(n=1.0, v=(0.0, 0.0, 0.0), theta=1.0, amp=0.3, k=(0.5, 0.0, 0.0), m_part=1.0,
                                  quad=None):
    """Collisionless exact solution f = n (1 + amp sin(k.(x - c t))) M(c)."""
    v = np.asarray(v, dtype=float)
    k = np.asarray(k, dtype=float)

    def f(t, x, c):
        arg = (np.asarray(x) - np.asarray(c) * t) @ k
        return (1.0 + amp * np.sin(arg)) * maxwellian(c, n, v, theta)

    def df(t, x, c):
        c = np.asarray(c)
        arg = (np.asarray(x) - c * t) @ k
        base = amp * np.cos(arg) * maxwellian(c, n, v, theta)
        dt = -base * (c @ k)
        dx = base[..., None] * k
        return np.concatenate([dt[..., None], dx], axis=-1)

    return KineticScenario(f, m_part, df=df, mean=v, spread=np.sqrt(theta), name="streaming_maxwellian",
                           quad=quad or QuadratureSpec())


def scaled_maxwellian_scenario(alpha, n=1.0, v=(0.0, 0.0, 0.0), theta=1.0, m_part=1.0, quad=None):
    """Manufactured f = (1 + alpha t) M(c), not a solution unless a source is added."""
    v = np.asarray(v, dtype=float)

    def f(t, x, c):
        return (1.0 + alpha * t) * maxwellian(c, n, v, theta)

    def df(t, x, c):
        out = np.zeros(np.shape(c)[:-1] + (4,))
        out[..., 0] = alpha * maxwellian(c, n, v, theta)
        return out

    return KineticScenario(f, m_part, df=df, mean=v, spread=np.sqrt(theta), name="scaled_maxwellian",
                           quad=quad or QuadratureSpec())


def tabulated_scenario(axes, values, m_part=1.0, order=32):
    """Uniform distribution tabulated on a velocity grid, trilinearly interpolated."""
    axes = [np.asarray(a, dtype=float) for a in axes]
    interp = RegularGridInterpolator(axes, np.asarray(values, dtype=float), method="linear",
                                     bounds_error=False, fill_value=0.0)
    lo = np.array([a[0] for a in axes])
    hi = np.array([a[-1] for a in axes])
    mean = 0.5 * (lo + hi)
    half = float(np.max(0.5 * (hi - lo)))

    def f(t, x, c):
        c = np.asarray(c, dtype=float)
        return interp(c.reshape(-1, 3)).reshape(c.shape[:-1])

    return KineticScenario(f, m_part, mean=mean, spread=half, name="custom",
                           quad=QuadratureSpec("legendre", order, 1.0))


def _velocity_rule(s: KineticScenario, t, x, quad: QuadratureSpec):
    mean = s.center(t, x)
    width = s.width(t, x)
    if quad.kind == "hermite":
        x1, w1 = hermite_nodes(quad.order)
    elif quad.kind == "legendre":
        x1, w1 = gauss_legendre(quad.order, -quad.half_width, quad.half_width)
    else:
        raise ValueError(f"unknown quadrature kind {quad.kind!r}")
    X, Y, Z = np.meshgrid(x1, x1, x1, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
    weights = (w1[:, None, None] * w1[None, :, None] * w1[None, None, :]).ravel()
    return mean + width * nodes, weights * width ** 3


def validate_scenario(s: KineticScenario, point, quad: QuadratureSpec = None, h=1e-4, tol=1e-8):
    """Check f >= 0 on the velocity nodes at ``point`` and div_c accel = 0 there (central differences).

    Returns the largest |div_c accel|; raises ValueError on a violation.
    """
    quad = quad or s.quad
    point = np.asarray(point, dtype=float)
    t, x = point[0], point[1:]
    c, _ = _velocity_rule(s, t, x, quad)
    if np.any(s.f(t, x, c) < 0):
        raise ValueError("distribution takes negative values")
    if s.accel is None:
        return 0.0
    div = np.zeros(c.shape[0])
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        div += (s.accel(t, x, c + e)[..., i] - s.accel(t, x, c - e)[..., i]) / (2 * h)
    worst = float(np.max(np.abs(div)))
    if worst > tol * max(1.0, float(np.max(np.abs(s.accel(t, x, c))))):
        raise ValueError(f"acceleration is not divergence free in c (max {worst:.3e})")
    return worst


def _ctilde(c):
    return np.concatenate([np.ones(c.shape[:-1] + (1,)), c], axis=-1)


def _outer_nodes(factors):
    """Per-node outer product of a list of (n, 4) factors, flattened to (n, 4**len)."""
    n = factors[0].shape[0] if factors else 0
    out = np.ones((n, 1))
    for fac in factors:
        out = (out[:, :, None] * fac[:, None, :]).reshape(n, -1)
    return out


def _tensors(weights, ct, order):
    """[sum_n w_n, sum_n w_n ct_n, sum_n w_n ct_n ct_n, ...] (weights may carry extra axes)."""
    out = []
    P = np.ones((ct.shape[0], 1))
    for r in range(order + 1):
        if r:
            P = (P[:, :, None] * ct[:, None, :]).reshape(ct.shape[0], -1)
        T = np.tensordot(weights, P, axes=([0], [0]))
        out.append(T.reshape(weights.shape[1:] + (4,) * r))
    return out


def _moments_with(s, t, x, order, quad):
    c, w = _velocity_rule(s, t, x, quad)
    fv = s.f(t, x, c)
    return _tensors(s.m_part * w * fv, _ctilde(c), order)


def compute_moments(s: KineticScenario, point, order: int = 2, quad: QuadratureSpec = None) -> MomentSet:
    """Moment tensors up to ``order`` at point = (t, x1, x2, x3)."""
    quad = quad or s.quad
    point = np.asarray(point, dtype=float)
    t, x = point[0], point[1:]
    tens = _moments_with(s, t, x, order, quad)
    if quad.check_convergence:
        fine = _moments_with(s, t, x, order, quad.refined())
        for a, b in zip(tens, fine):
            scale = max(float(np.max(np.abs(b))), 1e-300)
            if np.max(np.abs(a - b)) > quad.rtol * scale:
                raise AccuracyError(f"moment quadrature not converged at order {quad.order}")
    return MomentSet(order, tens)


def classical_quantities(s: KineticScenario, point, quad: QuadratureSpec = None) -> ClassicalQuantities:
    quad = quad or s.quad
    point = np.asarray(point, dtype=float)
    t, x = point[0], point[1:]
    c, w = _velocity_rule(s, t, x, quad)
    mw = s.m_part * w * s.f(t, x, c)
    rho = float(np.sum(mw))
    if rho <= 0:
        raise VacuumError(f"rho = {rho} <= 0")
    v = (mw @ c) / rho
    d = c - v
    Pi = np.einsum("n,ni,nj->ij", mw, d, d)
    eps = 0.5 * float(np.trace(Pi))
    F2 = np.einsum("n,ni,nj->ij", mw, c, c)
    q = np.einsum("n,n,ni->i", mw, np.sum(d * d, axis=-1), d)
    if s.accel is not None:
        g = s.accel(t, x, c)
        force = mw @ g
        g_rate = float(np.sum(mw * np.sum(g * d, axis=-1)))
    else:
        force = np.zeros(3)
        g_rate = 0.0
    return ClassicalQuantities(rho, v, Pi, eps, eps + 0.5 * rho * float(v @ v), 0.5 * float(np.trace(F2)), q, force,
                               g_rate)


def _moment_derivatives(s, point, order, quad, derivative, h):
    """d_a F^(r) for r <= order, as tensors with a trailing derivative axis."""
    t, x = point[0], point[1:]
    if derivative == "auto":
        derivative = "analytic" if s.df is not None else "fd"
    if derivative == "analytic":
        c, w = _velocity_rule(s, t, x, quad)
        dfv = s.df(t, x, c)  # (n, 4)
        tens = _tensors(s.m_part * w[:, None] * dfv, _ctilde(c), order)
        return [np.moveaxis(T, 0, -1) for T in tens]
    out = None
    for a in range(4):
        e = np.zeros(4)
        e[a] = 1.0

        def central(step):
            hi = _moments_with(s, *(_split(point + step * e)), order, quad)
            lo = _moments_with(s, *(_split(point - step * e)), order, quad)
            return [(p - m) / (2 * step) for p, m in zip(hi, lo)]

        d1, d2 = central(h), central(0.5 * h)
        col = [(4 * b - a_) / 3.0 for a_, b in zip(d1, d2)]
        out = [[cc] for cc in col] if out is None else [o + [cc] for o, cc in zip(out, col)]
    return [np.stack(o, axis=-1) for o in out]


def _split(y):
    return y[0], y[1:]


def classical_balance_residual(s: KineticScenario, points, quad: QuadratureSpec = None, derivative="auto", h=1e-3):
    """Residuals of the classical mass, momentum and energy balances at sample points.

    The densities and fluxes rho, rho v, rho v v^T + Pi, e and e v + Pi^T v + q
    coincide with the moments F_0, F_i, F_ij, F_kk/2 and F_kkj/2, so their
    derivatives are moments of the derivatives of f.
    """
    quad = quad or s.quad
    rows = []
    for y in np.atleast_2d(np.asarray(points, dtype=float)):
        dF = _moment_derivatives(s, y, 3, quad, derivative, h)
        cq = classical_quantities(s, y, quad)
        d0, d1, d2, d3 = dF
        mass = d0[0] + sum(d1[j, j] for j in range(1, 4))
        mom = np.array([d1[i, 0] + sum(d2[i, j, j] for j in range(1, 4)) for i in range(1, 4)]) - cq.force
        energy_t = 0.5 * sum(d2[k, k, 0] for k in range(1, 4))
        energy_x = 0.5 * sum(d3[k, k, j, j] for k in range(1, 4) for j in range(1, 4))
        energy = energy_t + energy_x - (float(cq.v @ cq.force) + cq.g_rate)
        rows.append((abs(mass), float(np.max(np.abs(mom))), abs(energy), mass, mom, energy))
    arr = np.array([r[:3] for r in rows])
    return {
        "mass": float(arr[:, 0].max()),
        "momentum": float(arr[:, 1].max()),
        "energy": float(arr[:, 2].max()),
        "max": float(arr.max()),
        "pointwise": [{"mass": float(r[3]), "momentum": r[4].tolist(), "energy": float(r[5])} for r in rows],
    }


def _source_tensor(s, t, x, N, quad):
    """R_alpha = int m c~_alpha Q dc + sum_i int m g_i d_{c_i}(c~_alpha) f dc."""
    c, w = _velocity_rule(s, t, x, quad)
    ct = _ctilde(c)
    mw = s.m_part * w
    R = np.zeros((4,) * N)
    if s.collision is not None:
        R = R + _tensors(mw * s.collision(t, x, c), ct, N)[N]
    if s.accel is not None and N > 0:
        g = s.accel(t, x, c)
        gt = np.concatenate([np.zeros(c.shape[:-1] + (1,)), g], axis=-1)
        fv = mw * s.f(t, x, c)
        acc = np.zeros(4 ** N)
        for r in range(N):
            facs = [gt if j == r else ct for j in range(N)]
            acc = acc + fv @ _outer_nodes(facs)
        R = R + acc.reshape((4,) * N)
    return R


def moment_pde_residual(s: KineticScenario, order: int, points, quad: QuadratureSpec = None, derivative="auto",
                        h=1e-3):
    """max over alpha and points of |d_t F_alpha + sum_{i=1..3} d_{x_i} F_{alpha i} - R_alpha|."""
    quad = quad or s.quad
    N = int(order)
    res = []
    for y in np.atleast_2d(np.asarray(points, dtype=float)):
        dF = _moment_derivatives(s, y, N + 1, quad, derivative, h)
        lhs = dF[N][..., 0] + sum(dF[N + 1][..., i, i] for i in range(1, 4))
        res.append(lhs - _source_tensor(s, y[0], y[1:], N, quad))
    res = np.array(res)
    return {"max": float(np.max(np.abs(res))), "residual": res}


def transform_scenario(s: KineticScenario, ymap) -> KineticScenario:
    """Starred scenario f*(t*, x*, c*) = f(T(t*), X(t*, x*), Xdot + Q c*) under a Newton map."""

    def parts(t, x):
        ys = np.concatenate([[t], np.asarray(x, float)])
        y = ymap.forward(ys)
        Q = ymap.rotation.value(np.asarray(t, float))
        return y[0], y[1:], ymap.velocity(ys), Q, ys

    def f(t, x, c):
        tt, X, Xd, Q, _ = parts(t, x)
        return s.f(tt, X, Xd + np.asarray(c) @ Q.T)

    def mean(t, x):
        tt, X, Xd, Q, _ = parts(t, x)
        return Q.T @ (s.center(tt, X) - Xd)

    def spread(t, x):
        tt, X, *_ = parts(t, x)
        return s.width(tt, X)

    accel = None
    if s.accel is not None:
        def accel(t, x, c):
            tt, X, Xd, Q, ys = parts(t, x)
            cc = Xd + np.asarray(c) @ Q.T
            Qd = ymap.rotation.d1(np.asarray(t, float))
            rel = s.accel(tt, X, cc) - ymap.acceleration(ys) - 2.0 * np.asarray(c) @ Qd.T
            return rel @ Q

    collision = None
    if s.collision is not None:
        def collision(t, x, c):
            tt, X, Xd, Q, _ = parts(t, x)
            return s.collision(tt, X, Xd + np.asarray(c) @ Q.T)

    return KineticScenario(f, s.m_part, accel, collision, None, mean, spread, f"{s.name}*", s.quad)


def moment_transform_check(s: KineticScenario, ymap, order: int, points, tol=1e-6, quad=None) -> CheckReport:
    """F o Y = DY...DY F* for moments up to ``order`` at starred points (relative deviation)."""
    quad = quad or s.quad
    s_star = transform_scenario(s, ymap)
    dev = 0.0
    for ys in np.atleast_2d(np.asarray(points, dtype=float)):
        y = ymap.forward(ys)
        F = compute_moments(s, y, order, quad)
        Fs = compute_moments(s_star, ys, order, quad)
        J = ymap.jacobian(ys)
        for r in range(order + 1):
            pushed = push_components(Fs.tensor(r), J, (CONTRA,) * r)
            scale = max(1.0, float(np.max(np.abs(F.tensor(r)))))
            dev = max(dev, float(np.max(np.abs(pushed - F.tensor(r)))) / scale)
    return CheckReport("moment_transform", dev, tol)
