"""Evolving points: worldlines, their curve measure, distributional mass and
momentum equations along the curve, and the Dirac approximation by smooth
densities concentrated in a tube around the worldline.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import fields as F
from ._numerics import ball_rule, gauss_legendre, hermite_nodes, radial_bump, rk4
from .errors import AccuracyError, InvalidFrameError, NonEvolvingCurveError
from .frame_geometry import pullback_time_vector
from .observer_maps import PolynomialPath, gamma_factor
from .tensor_core import CheckReport, max_dev

__all__ = [
    "Worldline",
    "DiracFamily",
    "polynomial_worldline",
    "uniform_worldline",
    "accelerated_worldline",
    "constant_time_vector",
    "lorentz_time_vector",
    "inverse_speed",
    "curve_velocity",
    "velocity_split",
    "curve_integral",
    "support_breakpoints",
    "reparametrize",
    "map_worldline",
    "s_reparametrize",
    "distributional_mass_residual",
    "distributional_momentum_residual",
    "ode_residual",
    "manufactured_force",
    "dirac_density",
    "dirac_integral",
    "dirac_limit_check",
    "g_gamma_frame",
    "g_gamma_orthonormal",
    "wedge_identity_gap",
    "compact_profile",
    "gaussian_profile",
]


@dataclass
class Worldline:
    """Curve gamma(s) in R^4 with first and second parameter derivatives.

    ``point``, ``tangent`` and ``second`` map an array of parameters (n,) to
    arrays (n, 4). ``e0p`` is the time covector field of the observer.
    """

    point: Callable
    tangent: Callable
    second: Callable
    e0p: F.Field
    s_range: tuple
    name: str = "worldline"


def constant_time_vector(e0p):
    return F.constant(np.asarray(e0p, dtype=float))


def lorentz_time_vector(V, c=1.0):
    """Constant e'0 = (gamma, -gamma V / c^2) of an observer moving with velocity V."""
    V = np.asarray(V, dtype=float)
    g = gamma_factor(V, c)
    return constant_time_vector(np.concatenate([[g], -g * V / (c * c)]))


def polynomial_worldline(coeffs, e0p=None, s_range=(-3.0, 3.0), name="polynomial"):
    """gamma(t) = (t, xi(t)) with xi(t) = sum_k coeffs[k] t^k."""
    path = PolynomialPath(coeffs)
    e0p = constant_time_vector([1.0, 0, 0, 0]) if e0p is None else e0p

    def point(t):
        t = np.asarray(t, dtype=float)
        return np.concatenate([t[..., None], path.value(t)], axis=-1)

    def tangent(t):
        t = np.asarray(t, dtype=float)
        return np.concatenate([np.ones(t.shape + (1,)), path.d1(t)], axis=-1)

    def second(t):
        t = np.asarray(t, dtype=float)
        return np.concatenate([np.zeros(t.shape + (1,)), path.d2(t)], axis=-1)

    return Worldline(point, tangent, second, e0p, tuple(s_range), name)


def uniform_worldline(x0, u, e0p=None, s_range=(-3.0, 3.0)):
    """xi(t) = x0 + u t."""
    return polynomial_worldline([x0, u], e0p, s_range, "uniform")


def accelerated_worldline(x0, u, f_over_m, e0p=None, s_range=(-3.0, 3.0)):
    """xi(t) = x0 + u t + f/m t^2 / 2, the constant-force solution."""
    return polynomial_worldline([x0, u, 0.5 * np.asarray(f_over_m, float)], e0p, s_range, "accelerated")


def _dot_tangent(wl, s):
    s = np.asarray(s, dtype=float)
    y = wl.point(s)
    return np.einsum("...a,...a->...", wl.e0p(y), wl.tangent(s))


def inverse_speed(wl: Worldline, s):
    """lambda = 1 / (e'0 . gamma'), positive on an evolving curve."""
    d = _dot_tangent(wl, s)
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise NonEvolvingCurveError(f"e'0 . gamma' = {np.min(d)} is not positive")
    return 1.0 / d


def curve_velocity(wl: Worldline, s):
    """v = lambda gamma', normalized so that e'0 . v = 1."""
    lam = inverse_speed(wl, s)
    return lam[..., None] * wl.tangent(s)


def velocity_split(v, e0p, G, c=1.0):
    """Decompose v = e0 + w with e0 = -c^2 G e'0 and w in W (returns e0, w)."""
    e0 = -c * c * np.einsum("...ab,...b->...a", G, e0p)
    return e0, np.asarray(v, float) - e0


def support_breakpoints(wl: Worldline, box, s_range=None, samples=400):
    """Parameter values where the curve crosses a face of an axis-aligned box."""
    s0, s1 = wl.s_range if s_range is None else s_range
    box = np.asarray(box, dtype=float)
    grid = np.linspace(s0, s1, samples + 1)
    pts = wl.point(grid)
    cuts = [s0, s1]
    for d in range(4):
        for bound in box[d]:
            f = pts[:, d] - bound
            idx = np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]
            for i in idx:
                cuts.append(brentq(lambda s: wl.point(np.array([s]))[0, d] - bound, grid[i], grid[i + 1], xtol=1e-15))
    return np.unique(np.clip(cuts, s0, s1))


def _curve_rule(wl, s_range=None, box=None, panels=8, order=16):
    s0, s1 = wl.s_range if s_range is None else s_range
    cuts = np.array([s0, s1]) if box is None else support_breakpoints(wl, box, (s0, s1))
    xs, ws = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0:
            continue
        edges = np.linspace(lo, hi, panels + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(order, a, b)
            xs.append(x)
            ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _values(fn, y):
    return np.asarray(fn(y), dtype=float)


def curve_integral(g, wl: Worldline, s_range=None, panels=8, order=16, box=None):
    """int g dmu_Gamma = int g(gamma(s)) (e'0 . gamma'(s)) ds, for g a function of y."""
    s, w = _curve_rule(wl, s_range, box, panels, order)
    weight = 1.0 / inverse_speed(wl, s)
    return float(np.sum(w * weight * _values(g, wl.point(s))))


def reparametrize(wl: Worldline, phi, dphi, ddphi, s_range):
    """Curve sigma -> gamma(phi(sigma)) for an increasing phi."""
    def point(u):
        return wl.point(phi(u))

    def tangent(u):
        return np.asarray(dphi(u))[..., None] * wl.tangent(phi(u))

    def second(u):
        p = phi(u)
        d1 = np.asarray(dphi(u))[..., None]
        return np.asarray(ddphi(u))[..., None] * wl.tangent(p) + d1 * d1 * wl.second(p)

    return Worldline(point, tangent, second, wl.e0p, tuple(s_range), wl.name + "/reparam")


def map_worldline(wl: Worldline, ymap):
    """Image Y(gamma_*) of a starred curve together with the plain time covector."""
    def point(s):
        return ymap.forward(wl.point(s))

    def tangent(s):
        return np.einsum("...ab,...b->...a", ymap.jacobian(wl.point(s)), wl.tangent(s))

    def second(s):
        y = wl.point(s)
        t = wl.tangent(s)
        return (np.einsum("...ab,...b->...a", ymap.jacobian(y), wl.second(s))
                + np.einsum("...abc,...b,...c->...a", ymap.hessian(y), t, t))

    e0p = pullback_time_vector(wl.e0p, ymap.inverse_map())
    return Worldline(point, tangent, second, e0p, wl.s_range, wl.name + "/mapped")


def s_reparametrize(wl: Worldline, step=1e-3):
    """Parametrize by s with t'(s) = lambda(t), so that e'0 . d gamma/ds = 1.

    t(s) is integrated with RK4 at the given step on a grid and evaluated
    between grid points by cubic Hermite interpolation (slope lambda).
    """
    t0, t1 = wl.s_range

    def rate(s, t):
        return inverse_speed(wl, np.array([t]))[0]

    ts = [t0]
    ss = [0.0]
    s = 0.0
    t = t0
    while t < t1:
        t_new = rk4(rate, s, t, s + step, max_step=step)
        s += step
        t = t_new
        ts.append(t)
        ss.append(s)
    ts = np.array(ts)
    ss = np.array(ss)
    # trim to the range where t stays inside the original parameter interval
    keep = ts <= t1
    ts, ss = ts[keep], ss[keep]
    spline = CubicHermiteSpline(ss, ts, inverse_speed(wl, ts))

    def phi(u):
        return spline(u)

    def dphi(u):
        return inverse_speed(wl, spline(u))

    def ddphi(u):
        # d lambda/ds = (d lambda/dt) lambda with d lambda/dt = -lambda^2 d(e'0.gamma')/dt
        t = spline(u)
        lam = inverse_speed(wl, t)
        y = wl.point(t)
        tan = wl.tangent(t)
        de = np.einsum("...ab,...b,...a->...", wl.e0p.grad(y), tan, tan) + np.einsum(
            "...a,...a->...", wl.e0p(y), wl.second(t))
        return -lam ** 3 * de

    return reparametrize(wl, phi, dphi, ddphi, (ss[0], ss[-1]))


def distributional_mass_residual(wl: Worldline, mass, rate, etas, s_range=None, panels=8, order=16):
    """<grad eta . m v + eta r>_{mu_Gamma} for each scalar test function.

    With v = lambda gamma' and dmu = ds / lambda this is the parameter integral
    of m grad eta . gamma' + eta r / lambda. ``mass`` and ``rate`` map points y to scalars.
    """
    out = []
    for eta in etas:
        s, w = _curve_rule(wl, s_range, eta.support, panels, order)
        y = wl.point(s)
        lam = inverse_speed(wl, s)
        ge = eta.grad(y)
        dens = _values(mass, y) * np.einsum("...a,...a->...", ge, wl.tangent(s)) + eta(y) * _values(rate, y) / lam
        out.append(float(np.sum(w * dens)))
    return np.array(out)


def distributional_momentum_residual(wl: Worldline, mass, force, zetas, s_range=None, panels=8, order=16):
    """<D zeta : m v v^T + zeta . r>_{mu_Gamma} for covariant test vectors zeta."""
    out = []
    for zeta in zetas:
        s, w = _curve_rule(wl, s_range, zeta.support, panels, order)
        y = wl.point(s)
        lam = inverse_speed(wl, s)
        tan = wl.tangent(s)
        Dz = zeta.grad(y)  # [i, j] = d_j zeta_i
        quad = np.einsum("...i,...ij,...j->...", tan, Dz, tan)
        dens = _values(mass, y) * lam * quad + np.einsum("...i,...i->...", zeta(y), _values(force, y)) / lam
        out.append(float(np.sum(w * dens)))
    return np.array(out)


def _momentum_rate(wl, mass: F.Field, s):
    """d/ds (m lambda gamma') along the curve."""
    y = wl.point(s)
    tan = wl.tangent(s)
    sec = wl.second(s)
    lam = inverse_speed(wl, s)
    de = np.einsum("...ab,...b,...a->...", wl.e0p.grad(y), tan, tan) + np.einsum("...a,...a->...", wl.e0p(y), sec)
    dlam = -lam * lam * de
    m = mass(y)
    dm = np.einsum("...a,...a->...", mass.grad(y), tan)
    return (dm * lam + m * dlam)[..., None] * tan + (m * lam)[..., None] * sec


def ode_residual(wl: Worldline, mass: F.Field, force, s):
    """lambda d/ds(m lambda gamma') - r at parameters s."""
    s = np.asarray(s, dtype=float)
    lam = inverse_speed(wl, s)
    return lam[..., None] * _momentum_rate(wl, mass, s) - _values(force, wl.point(s))


def manufactured_force(wl: Worldline, mass: F.Field):
    """Force r = lambda d/dt(m lambda gamma') for a curve that is a graph over y0 = t.

    The returned callable takes points y on the curve and recovers t = y0.
    """
    def force(y):
        t = np.asarray(y, float)[..., 0]
        lam = inverse_speed(wl, t)
        return lam[..., None] * _momentum_rate(wl, mass, t)

    return force


# Dirac approximation ---------------------------------------------------------

def compact_profile(total=1.0):
    """Radial bump (1 - |a|^2)^3 on the unit ball scaled to integral ``total``."""
    norm = total * 315.0 / (64.0 * np.pi)
    return lambda a: norm * radial_bump(np.sum(np.asarray(a) ** 2, axis=-1))


def gaussian_profile(total=1.0, width=1.0):
    """(2 pi)^{-3/2} width^{-3} exp(-|a|^2 / (2 width^2)), scaled to integral ``total``."""
    norm = total / ((2 * np.pi) ** 1.5 * width ** 3)
    return lambda a: norm * np.exp(-0.5 * np.sum(np.asarray(a) ** 2, axis=-1) / width ** 2)


@dataclass
class DiracFamily:
    """Densities g_eps concentrated in an eps-tube around a worldline with constant e'0.

    ``frame`` is a DualFrame; ``profile`` maps frame coordinates a (..., 3) of
    z in W to densities and is supported in the unit ball when ``radius`` = 1.
    """

    worldline: Worldline
    frame: object
    profile: Callable
    radius: float = 1.0
    eps_sequence: tuple = (0.2, 0.1, 0.05)

    def __post_init__(self):
        y = self.worldline.point(np.array(self.worldline.s_range))
        if max_dev(self.worldline.e0p.grad(y), 0.0) > 1e-14:
            raise InvalidFrameError("tube decomposition needs a constant time covector")


def _project_to_curve(d: DiracFamily, y, iters=30):
    """Parameter s and transverse part z in W with y = gamma(s) + z."""
    wl = d.worldline
    ep = d.frame.ep[0]
    y = np.atleast_2d(np.asarray(y, dtype=float))
    s0, s1 = wl.s_range
    s = np.clip((y @ ep - wl.point(np.array([s0]))[0] @ ep) * inverse_speed(wl, np.array([s0]))[0] + s0, s0, s1)
    for _ in range(iters):
        f = (y - wl.point(s)) @ ep
        step = f / _dot_tangent(wl, s)
        s = s + step
        if np.max(np.abs(step)) < 1e-15:
            break
    return s, y - wl.point(s)


def dirac_density(d: DiracFamily, eps, y):
    """g_eps(y) = eps^-3 |e'0| / |e1 ^ e2 ^ e3| profile(a / eps), a_i = e'_i . z."""
    _, z = _project_to_curve(d, y)
    a = z @ d.frame.ep[1:].T
    scale = np.linalg.norm(d.frame.ep[0]) / d.frame.spatial_wedge()
    return scale * eps ** -3 * d.profile(a / eps)


def dirac_integral(d: DiracFamily, eta, eps, s_range=None, panels=8, order=12, ball=(16, 16, 24)):
    """int eta g_eps dL^4 over the tube around the curve segment.

    The tube is parametrized by y = gamma(s) + eps sum_i a_i e_i with Lebesgue
    jacobian |det[gamma', eps e1, eps e2, eps e3]|; g_eps itself is evaluated
    at the resulting points from their own curve decomposition.
    """
    wl = d.worldline
    s0, s1 = wl.s_range if s_range is None else s_range
    edges = np.linspace(s0, s1, panels + 1)
    a_nodes, a_w = ball_rule(d.radius, *ball)
    E = d.frame.e[1:]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        s, ws = gauss_legendre(order, lo, hi)
        base = wl.point(s)
        tan = wl.tangent(s)
        for k in range(s.size):
            M = np.vstack([tan[k], eps * E]).T
            jac = abs(np.linalg.det(M))
            y = base[k] + eps * a_nodes @ E
            total += ws[k] * jac * float(a_w @ (_values(eta, y) * dirac_density(d, eps, y)))
    return total


def g_gamma_frame(d: DiracFamily):
    """Integral of the profile over frame coordinates, i.e. the limit density g_Gamma."""
    a, w = ball_rule(d.radius, 24, 24, 32)
    return float(w @ d.profile(a))


def _w_basis(e0p):
    """Euclidean-orthonormal basis of W = ker e'0 (rows)."""
    _, _, vt = np.linalg.svd(np.asarray(e0p, float)[None, :])
    return vt[1:]


def g_gamma_orthonormal(density_on_w, e0p, spatial_e, coords=None, n=40):
    """int_W g dH^3 / |e1 ^ e2 ^ e3| with H^3 integrated in an orthonormal basis of W.

    ``density_on_w`` maps vectors z (..., 4) in W to values and should decay
    like a Gaussian in the coordinates ``coords @ z`` (default: Euclidean).
    """
    B = _w_basis(e0p)
    x, w = hermite_nodes(n)
    scale = 1.0
    if coords is not None:
        M = np.asarray(coords, float) @ B.T
        scale = 1.0 / float(np.min(np.linalg.svd(M, compute_uv=False)))
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3) * scale
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel() * scale ** 3
    S = np.asarray(spatial_e, float)
    wedge = float(np.sqrt(max(np.linalg.det(S @ S.T), 0.0)))
    return float(W @ _values(density_on_w, X @ B)) / wedge


def dirac_limit_check(d: DiracFamily, eta, tol=1e-4, s_range=None, refine_check=True) -> CheckReport:
    """Richardson-extrapolated int eta g_eps dL^4 against int eta g_Gamma dmu_Gamma.

    Extrapolation removes an O(eps) term first and then an O(eps^2) term.
    """
    wl = d.worldline
    eps = tuple(d.eps_sequence)
    if len(eps) != 3 or not np.allclose([eps[0] / eps[1], eps[1] / eps[2]], 2.0):
        raise ValueError("eps sequence must halve twice, e.g. (0.2, 0.1, 0.05)")
    vals = [dirac_integral(d, eta, e, s_range) for e in eps]
    if refine_check:
        fine = dirac_integral(d, eta, eps[-1], s_range, panels=12, order=14, ball=(20, 20, 32))
        if abs(fine - vals[-1]) > 1e-3 * tol * max(abs(fine), 1e-300):
            raise AccuracyError(f"tube quadrature not resolved ({vals[-1]} vs {fine})")
    r1 = [2 * vals[1] - vals[0], 2 * vals[2] - vals[1]]
    extrap = (4 * r1[1] - r1[0]) / 3.0
    target = g_gamma_frame(d) * curve_integral(eta, wl, s_range)
    rel = abs(extrap - target) / max(abs(target), 1e-300)
    gap = wedge_identity_gap(d.frame)
    return CheckReport("dirac_limit", float(rel), tol, {"levels": [float(v) for v in vals], "extrapolated": float(extrap),
                                                         "target": float(target), "wedge_gap": float(gap)})


def wedge_identity_gap(frame):
    """| |det[e0..e3]| - |e1 ^ e2 ^ e3| / |e'0| |."""
    return abs(frame.full_wedge() - frame.spatial_wedge() / np.linalg.norm(frame.ep[0]))
