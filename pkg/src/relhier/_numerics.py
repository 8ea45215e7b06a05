"""Quadrature rules, finite differences and bump profiles shared by the modules."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import hermite_e, legendre


@lru_cache(maxsize=64)
def _legendre_ref(n):
    x, w = legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n, a=-1.0, b=1.0):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _legendre_ref(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@lru_cache(maxsize=16)
def hermite_nodes(n):
    """Probabilists' Gauss-Hermite rule with the Gaussian weight divided out.

    Returns nodes x and weights w such that sum(w * g(x)) ~ int g(x) dx for g
    decaying like exp(-x**2/2).
    """
    x, w = hermite_e.hermegauss(int(n))
    w = w * np.exp(0.5 * x * x)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def tensor_grid(box, n):
    """Tensor-product Gauss-Legendre rule on an axis-aligned box of shape (d, 2)."""
    box = np.asarray(box, dtype=float)
    d = box.shape[0]
    rules = [gauss_legendre(n, box[k, 0], box[k, 1]) for k in range(d)]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return nodes, weights


def panel_rule(a, b, panels=8, order=12):
    """Composite Gauss-Legendre rule on [a, b]."""
    edges = np.linspace(a, b, panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(order, lo, hi)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def ball_rule(radius, n_r=16, n_theta=16, n_phi=24):
    """Product rule on the 3-ball in spherical coordinates (nodes (n, 3), weights)."""
    r, wr = gauss_legendre(n_r, 0.0, radius)
    ct, wt = gauss_legendre(n_theta, -1.0, 1.0)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2.0 * np.pi / n_phi)
    R, CT, PH = np.meshgrid(r, ct, phi, indexing="ij")
    W = (wr[:, None, None] * r[:, None, None] ** 2) * wt[None, :, None] * wphi[None, None, :]
    ST = np.sqrt(1.0 - CT * CT)
    nodes = np.stack([R * ST * np.cos(PH), R * ST * np.sin(PH), R * CT], axis=-1)
    return nodes.reshape(-1, 3), W.ravel()


def fd_gradient(fn, y, h=1e-4):
    """Central difference gradient with one Richardson step.

    fn maps (..., d) -> (..., *shape); the result has shape (..., *shape, d).
    """
    y = np.asarray(y, dtype=float)
    d = y.shape[-1]
    cols = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0

        def central(step):
            return (fn(y + step * e) - fn(y - step * e)) / (2.0 * step)

        d1 = central(h)
        d2 = central(0.5 * h)
        cols.append((4.0 * d2 - d1) / 3.0)
    return np.stack(cols, axis=-1)


def bump(u):
    """C2 polynomial bump 64 (u(1-u))^3 on [0, 1], zero outside, peak value 1."""
    u = np.asarray(u, dtype=float)
    s = u * (1.0 - u)
    return np.where((u > 0.0) & (u < 1.0), 64.0 * s ** 3, 0.0)


def bump_deriv(u):
    u = np.asarray(u, dtype=float)
    s = u * (1.0 - u)
    return np.where((u > 0.0) & (u < 1.0), 192.0 * s * s * (1.0 - 2.0 * u), 0.0)


def radial_bump(r2):
    """Isotropic C2 bump (1 - |a|^2)^3 in terms of r2 = |a|^2, zero for r2 >= 1."""
    r2 = np.asarray(r2, dtype=float)
    return np.where(r2 < 1.0, (1.0 - r2) ** 3, 0.0)


def loglog_slope(x, y):
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def rk4(fun, t0, y0, t1, max_step=1e-3):
    """Classical RK4 from t0 to t1 with uniform steps no larger than max_step."""
    n = max(1, int(np.ceil(abs(t1 - t0) / max_step - 1e-12)))
    h = (t1 - t0) / n
    t, y = t0, y0
    for _ in range(n):
        k1 = fun(t, y)
        k2 = fun(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = fun(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = fun(t + h, y + h * k3)
        y = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        t = t + h
    return y
