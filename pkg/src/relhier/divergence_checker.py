"""General systems div q^k = r^k, k = 0..M, and their invariance under observer
maps when fluxes and sources transform with an invertible matrix field Z."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fields as F
from ._numerics import tensor_grid
from .errors import TransformationError
from .moment_hierarchy import HierarchyFields, TestFunction
from .tensor_core import CheckReport

__all__ = [
    "DivergenceSystem",
    "identity_Z",
    "jacobian_Z",
    "jacobian_power_Z",
    "reshape_field",
    "scalar_system",
    "momentum_system",
    "hierarchy_system",
    "transform_system",
    "starred_test_function",
    "weak_integral",
    "weak_equality_check",
    "z_condition",
]


@dataclass
class DivergenceSystem:
    """Fluxes q[k, i] (shape (M+1, 4)) and sources r[k] (shape (M+1,))."""

    q: F.Field
    r: F.Field
    name: str = "system"

    def __post_init__(self):
        n = self.q.shape[0]
        if self.q.shape != (n, 4) or self.r.shape != (n,):
            raise ValueError(f"inconsistent shapes {self.q.shape}, {self.r.shape}")

    @property
    def M(self):
        return self.q.shape[0] - 1


def reshape_field(field: F.Field, shape):
    """Same field with components reshaped (gradient axis kept last)."""
    shape = tuple(shape)
    old = field.shape

    def _value(y):
        v = field(y)
        return v.reshape(v.shape[: v.ndim - len(old)] + shape)

    def _grad(y):
        g = field.grad(y)
        return g.reshape(g.shape[: g.ndim - len(old) - 1] + shape + (g.shape[-1],))

    return F.Field(_value, _grad if field.analytic else None, shape)


def identity_Z(M):
    return F.constant(np.eye(M + 1))


def jacobian_Z(ymap):
    return F.jacobian_field(ymap)


def jacobian_power_Z(ymap, N):
    """Z_{(i1..iN)(j1..jN)} = Y_{i1,j1} ... Y_{iN,jN} as a (4^N, 4^N) matrix field."""
    if N == 0:
        return identity_Z(0)
    J = F.jacobian_field(ymap)
    up = "abcdef"[:N]
    lo = "ABCDEF"[:N]
    spec = ",".join(u + l for u, l in zip(up, lo)) + "->" + up + lo
    return reshape_field(F.einsum_field(spec, *([J] * N)), (4 ** N, 4 ** N))


def scalar_system(q: F.Field, rate: F.Field):
    return DivergenceSystem(reshape_field(q, (1, 4)), reshape_field(rate, (1,)), "scalar")


def momentum_system(T: F.Field, r: F.Field):
    """q^k_i = T_ki, r^k = r_k."""
    return DivergenceSystem(T, r, "momentum")


def hierarchy_system(h: HierarchyFields):
    """Flatten alpha in {0..3}^N to k in 0..4^N - 1."""
    n = 4 ** h.order
    return DivergenceSystem(reshape_field(h.T, (n, 4)), reshape_field(h.g, (n,)), f"hierarchy{h.order}")


def z_condition(Z: F.Field, points):
    """Largest condition number of Z over the sample points."""
    return float(np.max(np.linalg.cond(Z(np.atleast_2d(points)))))


def transform_system(sys_star: DivergenceSystem, ymap, Z: F.Field, min_det=1e-12) -> DivergenceSystem:
    """Plain system from a starred one, as functions of y:

    q^k_i o Y = (1/J) sum Y_{i,j} Z_kl q*^l_j and
    r^k o Y = (1/J) (sum d_j Z_kl q*^l_j + sum Z_kl r*^l) with J = det DY.
    """
    def _pre(y):
        ys = ymap.inverse(y)
        Jm = ymap.jacobian(ys)
        det = np.linalg.det(Jm)
        if np.any(det <= min_det):
            raise TransformationError(f"det DY must be positive, got {np.min(det)}")
        Zv = Z(ys)
        if np.any(np.abs(np.linalg.det(Zv)) < min_det):
            raise TransformationError("Z is singular")
        return ys, Jm, det, Zv

    def _q(y):
        ys, Jm, det, Zv = _pre(y)
        out = np.einsum("...ij,...kl,...lj->...ki", Jm, Zv, sys_star.q(ys))
        return out / det[..., None, None]

    def _r(y):
        ys, Jm, det, Zv = _pre(y)
        dZ = Z.grad(ys)  # [k, l, j]
        out = np.einsum("...klj,...lj->...k", dZ, sys_star.q(ys)) + np.einsum("...kl,...l->...k", Zv, sys_star.r(ys))
        return out / det[..., None]

    n = sys_star.M + 1
    return DivergenceSystem(F.Field(_q, None, (n, 4)), F.Field(_r, None, (n,)), sys_star.name + "/plain")


def starred_test_function(zeta: F.Field, ymap, Z: F.Field) -> F.Field:
    """zeta*_l = sum_k Z_kl zeta_k o Y, with the exact chain-rule gradient."""
    return F.einsum_field("kl,k->l", Z, F.compose(zeta, ymap))


def _integrand(sys, zeta, y):
    return np.einsum("...ki,...ki->...", zeta.grad(y), sys.q(y)) + np.einsum("...k,...k->...", zeta(y), sys.r(y))


def weak_integral(sys: DivergenceSystem, zeta: F.Field, nodes, weights):
    """sum_n w_n (sum_k grad zeta_k . q^k + zeta_k r^k)(y_n)."""
    return float(np.asarray(weights) @ _integrand(sys, zeta, nodes))


def weak_equality_check(sys_star: DivergenceSystem, ymap, Z: F.Field, zetas, quad_order=8, tol=1e-7,
                        sys_plain: Optional[DivergenceSystem] = None) -> CheckReport:
    """Plain weak integral over the support box of zeta against the starred one over its preimage.

    Each zeta is a TestFunction of the plain frame with vector values of
    length M+1. The starred integral uses nodes Y^{-1}(y_n) with weights
    w_n / det DY, i.e. integration over the preimage box.
    """
    sys_plain = transform_system(sys_star, ymap, Z) if sys_plain is None else sys_plain
    dev = 0.0
    pairs = []
    for zeta in zetas:
        zf = zeta.field if isinstance(zeta, TestFunction) else zeta
        box = zeta.support
        nodes, w = tensor_grid(box, quad_order)
        plain = weak_integral(sys_plain, zf, nodes, w)
        ys = ymap.inverse(nodes)
        det = np.linalg.det(ymap.jacobian(ys))
        zs = starred_test_function(zf, ymap, Z)
        starred = weak_integral(sys_star, zs, ys, w / det)
        pairs.append((plain, starred))
        dev = max(dev, abs(plain - starred))
    return CheckReport("weak_equality", dev, tol, {"integrals": [list(p) for p in pairs]})
