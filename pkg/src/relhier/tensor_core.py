"""Spacetime tensors with variance tags and their transformation laws.

Components are dense arrays of shape (4,)*rank, index 0 is the time slot and
the last index varies fastest. A contravariant slot picks up one Jacobian
factor DY when moving from starred to plain coordinates, a covariant slot
picks up the inverse transpose.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np

from .errors import AlignmentError, SingularMapError
from .fields import Field, compose, einsum_field, inverse_jacobian_field, jacobian_field

__all__ = [
    "CONTRA",
    "CO",
    "Direction",
    "Tensor",
    "CheckReport",
    "transform",
    "contract",
    "variance_check",
    "apply_matrix",
    "push_components",
    "pull_components",
    "pullback_field",
    "pushforward_field",
    "max_dev",
]

CONTRA = "CONTRA"
CO = "CO"


class Direction(Enum):
    STAR_TO_PLAIN = "star_to_plain"
    PLAIN_TO_STAR = "plain_to_star"


@dataclass(frozen=True)
class Tensor:
    components: np.ndarray
    signature: tuple = ()
    base: np.ndarray = dc_field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        comp = np.asarray(self.components, dtype=float)
        sig = tuple(self.signature)
        if comp.shape != (4,) * len(sig):
            raise ValueError(f"components shape {comp.shape} does not match rank {len(sig)}")
        for tag in sig:
            if tag not in (CONTRA, CO):
                raise ValueError(f"unknown variance tag {tag!r}")
        base = np.asarray(self.base, dtype=float)
        if base.shape != (4,) or not np.all(np.isfinite(base)):
            raise ValueError("base point must be 4 finite coordinates")
        object.__setattr__(self, "components", comp)
        object.__setattr__(self, "signature", sig)
        object.__setattr__(self, "base", base)

    @property
    def rank(self):
        return len(self.signature)

    @property
    def flat(self):
        return self.components.ravel()


@dataclass
class CheckReport:
    """Outcome of a numerical identity check."""

    name: str
    deviation: float
    tolerance: float
    details: dict = dc_field(default_factory=dict)

    @property
    def passed(self):
        return bool(np.isfinite(self.deviation) and self.deviation <= self.tolerance)

    def __bool__(self):
        return self.passed


def max_dev(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def apply_matrix(T, M, axis, rank):
    """Contract matrix M[..., a, b] with slot ``axis`` of T (..., (4,)*rank): result slot a."""
    letters = string.ascii_lowercase[:rank]
    src = letters
    dst = letters[:axis] + "z" + letters[axis + 1:]
    return np.einsum(f"...z{letters[axis]},...{src}->...{dst}", M, T)


def push_components(T, J, signature):
    """Starred components to plain: CONTRA slots via J, CO slots via J^{-T}."""
    out = np.asarray(T, dtype=float)
    rank = len(signature)
    Jinv_T = None
    for ax, tag in enumerate(signature):
        if tag == CONTRA:
            out = apply_matrix(out, J, ax, rank)
        else:
            if Jinv_T is None:
                Jinv_T = np.swapaxes(np.linalg.inv(J), -1, -2)
            out = apply_matrix(out, Jinv_T, ax, rank)
    return out


def pull_components(T, J, signature):
    """Plain components to starred: CONTRA slots via J^{-1}, CO slots via J^T."""
    out = np.asarray(T, dtype=float)
    rank = len(signature)
    Jinv = None
    for ax, tag in enumerate(signature):
        if tag == CONTRA:
            if Jinv is None:
                Jinv = np.linalg.inv(J)
            out = apply_matrix(out, Jinv, ax, rank)
        else:
            out = apply_matrix(out, np.swapaxes(J, -1, -2), ax, rank)
    return out


def _checked_jacobian(ymap, ystar):
    J = ymap.jacobian(ystar)
    d = np.linalg.det(J)
    if not np.all(np.isfinite(d)) or np.any(np.abs(d) < 1e-14):
        raise SingularMapError(f"jacobian determinant {d} at {ystar}")
    return J


def transform(t: Tensor, ymap, direction=Direction.STAR_TO_PLAIN) -> Tensor:
    """Move a tensor between the starred and plain observers of ``ymap``."""
    direction = Direction(direction)
    if direction is Direction.STAR_TO_PLAIN:
        ystar = t.base
        J = _checked_jacobian(ymap, ystar)
        comp = push_components(t.components, J, t.signature)
        return Tensor(comp, t.signature, ymap.forward(ystar))
    ystar = ymap.inverse(t.base)
    J = _checked_jacobian(ymap, ystar)
    comp = pull_components(t.components, J, t.signature)
    return Tensor(comp, t.signature, ystar)


def contract(a: Tensor, b: Tensor, slot_a: int, slot_b: int) -> Tensor:
    """Sum over slot_a of a and slot_b of b."""
    if not np.allclose(a.base, b.base, rtol=0.0, atol=1e-12):
        raise AlignmentError(f"base points differ: {a.base} vs {b.base}")
    if not (0 <= slot_a < a.rank and 0 <= slot_b < b.rank):
        raise IndexError("contraction slot out of range")
    comp = np.tensordot(a.components, b.components, axes=([slot_a], [slot_b]))
    sig = a.signature[:slot_a] + a.signature[slot_a + 1:] + b.signature[:slot_b] + b.signature[slot_b + 1:]
    return Tensor(comp, sig, a.base)


def variance_check(field, starred_field, ymap, points, tol=1e-10) -> CheckReport:
    """Compare field(Y(y*)) with the transformed starred_field(y*) at starred points."""
    dev = 0.0
    for ys in np.atleast_2d(points):
        ts = starred_field(ys)
        pushed = transform(ts, ymap, Direction.STAR_TO_PLAIN)
        direct = field(pushed.base)
        dev = max(dev, max_dev(direct.components, pushed.components))
    return CheckReport("variance", dev, tol)


def _transport_spec(signature):
    """einsum spec for pulling back a field with the given variance signature."""
    rank = len(signature)
    src = string.ascii_lowercase[:rank]
    dst = string.ascii_uppercase[:rank]
    ops = [src]
    for s, d, tag in zip(src, dst, signature):
        # CONTRA: Ainv[d, s]; CO: J[s, d]
        ops.append(d + s if tag == CONTRA else s + d)
    return ",".join(ops) + "->" + dst


def pullback_field(field: Field, ymap, signature) -> Field:
    """Starred field determined by the transformation law, as a function of y*."""
    signature = tuple(signature)
    if len(signature) != len(field.shape):
        raise ValueError("signature does not match field rank")
    comp = compose(field, ymap)
    if not signature:
        return comp
    mats = []
    Ainv = J = None
    for tag in signature:
        if tag == CONTRA:
            Ainv = Ainv or inverse_jacobian_field(ymap)
            mats.append(Ainv)
        else:
            J = J or jacobian_field(ymap)
            mats.append(J)
    return einsum_field(_transport_spec(signature), comp, *mats)


def pushforward_field(field_star: Field, ymap, signature) -> Field:
    """Plain field obtained from a starred field, as a function of y."""
    return pullback_field(field_star, ymap.inverse_map(), signature)
