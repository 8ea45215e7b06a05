"""Smooth tensor fields on spacetime with value and gradient.

A field maps points of shape (..., 4) to components of shape (..., *shape)
and its gradient has shape (..., *shape, 4) with the derivative direction
last. Products and contractions carry exact product-rule gradients, so
analytic derivatives propagate through every construction built here.
"""
from __future__ import annotations

import string

import numpy as np

from ._numerics import fd_gradient

__all__ = [
    "Field",
    "constant",
    "polynomial",
    "trig",
    "random_field",
    "einsum_field",
    "add",
    "scale",
    "map_elementwise",
    "compose",
    "jacobian_field",
    "inverse_jacobian_field",
]


class Field:
    """Vectorised tensor field with an optional analytic gradient.

    Without an analytic gradient, ``grad`` falls back to central differences
    with one Richardson step at ``fd_step``.
    """

    def __init__(self, value, grad=None, shape=(), fd_step=1e-3):
        self._value = value
        self._grad = grad
        self.shape = tuple(shape)
        self.fd_step = fd_step

    @property
    def analytic(self):
        return self._grad is not None

    def __call__(self, y):
        return self._value(np.asarray(y, dtype=float))

    def grad(self, y):
        y = np.asarray(y, dtype=float)
        if self._grad is not None:
            return self._grad(y)
        return fd_gradient(self._value, y, self.fd_step)

    def divergence(self, y):
        """Trace of the gradient over the last component slot and the derivative."""
        return np.trace(self.grad(y), axis1=-2, axis2=-1)


def _batch(y):
    return np.asarray(y).shape[:-1]


def constant(arr):
    arr = np.asarray(arr, dtype=float)
    shape = arr.shape
    return Field(
        lambda y: np.broadcast_to(arr, _batch(y) + shape).copy(),
        lambda y: np.zeros(_batch(y) + shape + (4,)),
        shape,
    )


def polynomial(const, lin=None, quad=None):
    """Quadratic field A + B.y + 1/2 y.C.y with B shape (*S, 4) and C shape (*S, 4, 4)."""
    A = np.asarray(const, dtype=float)
    S = A.shape
    B = np.zeros(S + (4,)) if lin is None else np.asarray(lin, dtype=float)
    C = np.zeros(S + (4, 4)) if quad is None else np.asarray(quad, dtype=float)
    C = 0.5 * (C + np.swapaxes(C, -1, -2))
    Bf = B.reshape(-1, 4)
    Cf = C.reshape(-1, 4, 4)

    def _value(y):
        lin_part = y @ Bf.T
        quad_part = 0.5 * np.einsum("...a,pab,...b->...p", y, Cf, y)
        return A + (lin_part + quad_part).reshape(_batch(y) + S)

    def _grad(y):
        g = Bf + np.einsum("pab,...b->...pa", Cf, y)
        return g.reshape(_batch(y) + S + (4,))

    return Field(_value, _grad, S)


def trig(const, amps, waves, phases):
    """Field A + sum_m B_m sin(k_m.y + phi_m).

    amps has shape (m, *S), waves (m, 4), phases (m,).
    """
    A = np.asarray(const, dtype=float)
    S = A.shape
    Bm = np.asarray(amps, dtype=float)
    flat = Bm.reshape(Bm.shape[0], -1)
    K = np.asarray(waves, dtype=float)
    ph = np.asarray(phases, dtype=float)

    def _value(y):
        s = np.sin(y @ K.T + ph)
        return A + (s @ flat).reshape(_batch(y) + S)

    def _grad(y):
        c = np.cos(y @ K.T + ph)
        g = np.einsum("...m,mp,ma->...pa", c, flat, K)
        return g.reshape(_batch(y) + S + (4,))

    return Field(_value, _grad, S)


def random_field(rng, shape=(), scale=1.0, modes=2, wave_scale=0.7, quad_scale=0.3, offset=None):
    """Random smooth field: quadratic polynomial plus a few sine modes."""
    shape = tuple(shape)
    A = scale * rng.standard_normal(shape) if offset is None else np.asarray(offset, float)
    B = 0.5 * scale * rng.standard_normal(shape + (4,))
    C = quad_scale * scale * rng.standard_normal(shape + (4, 4))
    poly = polynomial(A, B, C)
    if modes == 0:
        return poly
    amps = 0.3 * scale * rng.standard_normal((modes,) + shape)
    waves = wave_scale * rng.standard_normal((modes, 4))
    phases = rng.uniform(0, 2 * np.pi, modes)
    tr = trig(np.zeros(shape), amps, waves, phases)
    return add(poly, tr)


def _parse(spec):
    lhs, out = spec.replace(" ", "").split("->")
    ins = lhs.split(",")
    return ins, out


def einsum_field(spec, *fields):
    """Einsum of fields with the product rule applied to the gradient.

    ``spec`` uses plain letters for component slots only, e.g. ``"ij,j->i"``.
    """
    ins, out = _parse(spec)
    if len(ins) != len(fields):
        raise ValueError("operand count mismatch")
    used = set("".join(ins) + out)
    dl = next(ch for ch in string.ascii_letters if ch not in used)
    vspec = ",".join("..." + s for s in ins) + "->..." + out
    dims = {}
    for s, f in zip(ins, fields):
        if len(s) != len(f.shape):
            raise ValueError(f"subscripts {s!r} do not match field shape {f.shape}")
        dims.update(zip(s, f.shape))
    out_shape = tuple(dims[ch] for ch in out)
    gspecs = []
    for k in range(len(fields)):
        parts = ["..." + s + (dl if j == k else "") for j, s in enumerate(ins)]
        gspecs.append(",".join(parts) + "->..." + out + dl)

    def _value(y):
        return np.einsum(vspec, *[f(y) for f in fields], optimize=True)

    analytic = all(f.analytic for f in fields)

    def _grad(y):
        vals = [f(y) for f in fields]
        total = None
        for k, f in enumerate(fields):
            ops = list(vals)
            ops[k] = f.grad(y)
            term = np.einsum(gspecs[k], *ops, optimize=True)
            total = term if total is None else total + term
        return total

    return Field(_value, _grad if analytic else None, out_shape)


def add(*fields):
    shape = fields[0].shape
    analytic = all(f.analytic for f in fields)
    return Field(
        lambda y: sum(f(y) for f in fields),
        (lambda y: sum(f.grad(y) for f in fields)) if analytic else None,
        shape,
    )


def scale(field, factor):
    return Field(
        lambda y: factor * field(y),
        (lambda y: factor * field.grad(y)) if field.analytic else None,
        field.shape,
    )


def map_elementwise(field, fn, dfn):
    """Apply a scalar function elementwise, with chain-rule gradient."""
    return Field(
        lambda y: fn(field(y)),
        (lambda y: dfn(field(y))[..., None] * field.grad(y)) if field.analytic else None,
        field.shape,
    )


def compose(field, ymap):
    """The field evaluated along a map, as a function of the starred point."""
    S = field.shape

    def _value(ys):
        return field(ymap.forward(ys))

    def _grad(ys):
        y = ymap.forward(ys)
        g = field.grad(y)
        J = ymap.jacobian(ys)
        b = _batch(ys)
        flat = g.reshape(b + (-1, 4))
        return (flat @ J).reshape(b + S + (4,))

    return Field(_value, _grad if field.analytic else None, S)


def jacobian_field(ymap):
    """DY as a field of the starred point; its gradient is the hessian."""
    return Field(ymap.jacobian, ymap.hessian, (4, 4))


def inverse_jacobian_field(ymap):
    def _value(ys):
        return np.linalg.inv(ymap.jacobian(ys))

    def _grad(ys):
        A = np.linalg.inv(ymap.jacobian(ys))
        H = ymap.hessian(ys)
        return -np.einsum("...ka,...abl,...bj->...kjl", A, H, A)

    return Field(_value, _grad, (4, 4))
