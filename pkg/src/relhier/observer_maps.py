"""Observer transformations y = Y(y*) with exact first and second derivatives.

Families: affine Lorentz maps, classical Newton maps (time shift, rotating and
accelerating frames), unit-triangular shear maps as nonlinear test maps, plus
composition and inversion. Hessians are stored as H[..., k, i, j] =
d^2 Y_k / dy*_i dy*_j.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.transform import Rotation

from ._numerics import loglog_slope
from .errors import (
    ConvergenceError,
    FrameIncompatibilityError,
    InvalidFrameError,
    SingularMapError,
    SuperluminalError,
)

__all__ = [
    "C_SI",
    "MapKind",
    "ObserverMap",
    "AffineMap",
    "NewtonMap",
    "ShearMap",
    "ComposedMap",
    "InverseMap",
    "PolynomialPath",
    "TrigPath",
    "RotationPath",
    "MatrixPath",
    "LorentzParams",
    "identity_map",
    "lorentz_matrix",
    "lorentz_map",
    "galilei_matrix",
    "check_lorentz_invariance",
    "newton_map",
    "velocity_addition",
    "galilei_limit",
    "gamma_factor",
    "boost_block",
    "standard_metric_matrix",
    "random_rotation",
    "random_velocity",
    "random_newton_map",
    "random_shear_map",
    "invert_point",
    "fd_jacobian",
]

C_SI = 2.99792458e8


class MapKind(Enum):
    LORENTZ_AFFINE = "lorentz_affine"
    NEWTON = "newton"
    NONLINEAR_ANALYTIC = "nonlinear_analytic"
    COMPOSED = "composed"


def standard_metric_matrix(c):
    """G_c = diag(-1/c^2, 1, 1, 1); c = inf gives the degenerate classical limit."""
    G = np.eye(4)
    G[0, 0] = 0.0 if np.isinf(c) else -1.0 / (c * c)
    return G


def invert_point(ymap, y, guess=None, tol=1e-12, maxiter=50):
    """Solve Y(y*) = y by damped Newton iteration, vectorised over points."""
    y = np.asarray(y, dtype=float)
    ys = y.copy() if guess is None else np.array(guess, dtype=float)
    scale = 1.0 + np.max(np.abs(y))
    for _ in range(maxiter):
        res = ymap.forward(ys) - y
        err = np.max(np.abs(res)) if res.size else 0.0
        if err <= tol * scale:
            return ys
        step = np.linalg.solve(ymap.jacobian(ys), res[..., None])[..., 0]
        damp = 1.0
        for _ in range(30):
            trial = ys - damp * step
            if np.max(np.abs(ymap.forward(trial) - y)) < err:
                break
            damp *= 0.5
        ys = trial
    res = ymap.forward(ys) - y
    if np.max(np.abs(res)) > tol * scale:
        raise ConvergenceError(f"point inversion did not converge (residual {np.max(np.abs(res)):.3e})")
    return ys


class ObserverMap:
    """Base class. Subclasses implement forward, jacobian and hessian."""

    kind = MapKind.NONLINEAR_ANALYTIC
    name = "map"

    def forward(self, ystar):
        raise NotImplementedError

    def jacobian(self, ystar):
        raise NotImplementedError

    def hessian(self, ystar):
        raise NotImplementedError

    def inverse(self, y):
        return invert_point(self, y)

    def inverse_map(self):
        return InverseMap(self)

    def __call__(self, ystar):
        return self.forward(ystar)

    def det(self, ystar):
        return np.linalg.det(self.jacobian(ystar))

    def check_unimodular(self, points, tol=1e-10):
        d = self.det(np.asarray(points, dtype=float))
        return float(np.max(np.abs(d - 1.0)))


class AffineMap(ObserverMap):
    """y = L y* + shift."""

    kind = MapKind.LORENTZ_AFFINE

    def __init__(self, L, shift=None, name="affine"):
        self.L = np.asarray(L, dtype=float)
        self.shift = np.zeros(4) if shift is None else np.asarray(shift, dtype=float)
        d = np.linalg.det(self.L)
        if abs(d) < 1e-14:
            raise SingularMapError("affine map matrix is singular")
        self._Linv = np.linalg.inv(self.L)
        self.name = name

    def forward(self, ystar):
        return np.asarray(ystar, dtype=float) @ self.L.T + self.shift

    def jacobian(self, ystar):
        b = np.asarray(ystar).shape[:-1]
        return np.broadcast_to(self.L, b + (4, 4)).copy()

    def hessian(self, ystar):
        b = np.asarray(ystar).shape[:-1]
        return np.zeros(b + (4, 4, 4))

    def inverse(self, y):
        return (np.asarray(y, dtype=float) - self.shift) @ self._Linv.T

    def inverse_map(self):
        return AffineMap(self._Linv, -self._Linv @ self.shift, name=f"inv({self.name})")


def identity_map():
    return AffineMap(np.eye(4), name="identity")


class PolynomialPath:
    """x(t) = sum_k coeffs[k] t^k with vector coefficients of shape (K, 3)."""

    def __init__(self, coeffs):
        self.coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))

    def _eval(self, t, der):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (3,))
        for k, ck in enumerate(self.coeffs):
            if k < der:
                continue
            fac = 1.0
            for j in range(der):
                fac *= k - j
            out = out + fac * (t[..., None] ** (k - der)) * ck
        return out

    def value(self, t):
        return self._eval(t, 0)

    def d1(self, t):
        return self._eval(t, 1)

    def d2(self, t):
        return self._eval(t, 2)


class TrigPath:
    """x(t) = amp * sin(freq t + phase), componentwise."""

    def __init__(self, amp, freq, phase=None):
        self.amp = np.asarray(amp, dtype=float)
        self.freq = np.asarray(freq, dtype=float)
        self.phase = np.zeros(3) if phase is None else np.asarray(phase, dtype=float)

    def value(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return self.amp * np.sin(self.freq * t + self.phase)

    def d1(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return self.amp * self.freq * np.cos(self.freq * t + self.phase)

    def d2(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return -self.amp * self.freq ** 2 * np.sin(self.freq * t + self.phase)


def _skew(a):
    return np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])


class RotationPath:
    """Q(t) = R(axis, theta(t)) Q0 with theta a polynomial in t."""

    def __init__(self, axis=(0.0, 0.0, 1.0), theta_coeffs=(0.0,), Q0=None):
        axis = np.asarray(axis, dtype=float)
        n = np.linalg.norm(axis)
        if n == 0:
            raise InvalidFrameError("rotation axis must be nonzero")
        self.axis = axis / n
        self.K = _skew(self.axis)
        self.theta_coeffs = np.asarray(theta_coeffs, dtype=float)
        self.Q0 = np.eye(3) if Q0 is None else np.asarray(Q0, dtype=float)
        if not (np.allclose(self.Q0.T @ self.Q0, np.eye(3), atol=1e-12) and np.linalg.det(self.Q0) > 0):
            raise InvalidFrameError("Q0 is not a rotation")

    def _theta(self, t, der):
        p = np.polynomial.Polynomial(self.theta_coeffs)
        return p.deriv(der)(t) if der else p(t)

    def _R(self, th):
        s = np.sin(th)[..., None, None]
        c = np.cos(th)[..., None, None]
        K = self.K
        return np.eye(3) + s * K + (1.0 - c) * (K @ K)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return self._R(self._theta(t, 0)) @ self.Q0

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        w = self._theta(t, 1)[..., None, None]
        return w * (self.K @ self.value(t))

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        w = self._theta(t, 1)[..., None, None]
        a = self._theta(t, 2)[..., None, None]
        KR = self.K @ self.value(t)
        return a * KR + w * w * (self.K @ KR)


class MatrixPath:
    """User supplied rotation path given by three callables."""

    def __init__(self, value, d1, d2):
        self.value, self.d1, self.d2 = value, d1, d2


class NewtonMap(ObserverMap):
    """(t*, x*) -> (t* + tdiff, Q(t*) x* + xdiff(t*))."""

    kind = MapKind.NEWTON

    def __init__(self, tdiff=0.0, xdiff=None, rotation=None, name="newton", check_times=None):
        self.tdiff = float(tdiff)
        self.xdiff = PolynomialPath(np.zeros((1, 3))) if xdiff is None else xdiff
        self.rotation = RotationPath() if rotation is None else rotation
        self.name = name
        times = np.linspace(-5.0, 5.0, 11) if check_times is None else np.asarray(check_times, float)
        Q = self.rotation.value(times)
        orth = np.max(np.abs(np.swapaxes(Q, -1, -2) @ Q - np.eye(3)))
        if orth > 1e-10 or np.any(np.linalg.det(Q) <= 0):
            raise InvalidFrameError("Q(t*) is not a rotation at sampled times")

    def _split(self, ystar):
        ystar = np.asarray(ystar, dtype=float)
        return ystar[..., 0], ystar[..., 1:]

    def forward(self, ystar):
        t, x = self._split(ystar)
        Q = self.rotation.value(t)
        xs = np.einsum("...ij,...j->...i", Q, x) + self.xdiff.value(t)
        return np.concatenate([(t + self.tdiff)[..., None], xs], axis=-1)

    def velocity(self, ystar):
        """Xdot = Qdot x* + xdiff'."""
        t, x = self._split(ystar)
        return np.einsum("...ij,...j->...i", self.rotation.d1(t), x) + self.xdiff.d1(t)

    def acceleration(self, ystar):
        """Xddot = Qddot x* + xdiff''."""
        t, x = self._split(ystar)
        return np.einsum("...ij,...j->...i", self.rotation.d2(t), x) + self.xdiff.d2(t)

    def jacobian(self, ystar):
        t, x = self._split(ystar)
        J = np.zeros(t.shape + (4, 4))
        J[..., 0, 0] = 1.0
        J[..., 1:, 0] = self.velocity(ystar)
        J[..., 1:, 1:] = self.rotation.value(t)
        return J

    def hessian(self, ystar):
        t, x = self._split(ystar)
        H = np.zeros(t.shape + (4, 4, 4))
        H[..., 1:, 0, 0] = self.acceleration(ystar)
        Qd = self.rotation.d1(t)
        H[..., 1:, 0, 1:] = Qd
        H[..., 1:, 1:, 0] = Qd
        return H

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        ts = y[..., 0] - self.tdiff
        Q = self.rotation.value(ts)
        xs = np.einsum("...ji,...j->...i", Q, y[..., 1:] - self.xdiff.value(ts))
        return np.concatenate([ts[..., None], xs], axis=-1)


def newton_map(tdiff=0.0, xdiff=None, Q=None, name="newton"):
    return NewtonMap(tdiff, xdiff, Q, name=name)


class ShearMap(ObserverMap):
    """y = y* + e_k phi(y*) with phi independent of y*_k, hence det DY = 1.

    phi(y) = amp sin(w.y) + b.y + 1/2 y.A.y where w_k = b_k = 0 and A has a zero
    k-th row and column.
    """

    kind = MapKind.NONLINEAR_ANALYTIC

    def __init__(self, k, amp=0.0, wave=None, lin=None, quad=None, name="shear"):
        self.k = int(k)
        self.amp = float(amp)
        self.wave = np.zeros(4) if wave is None else np.array(wave, dtype=float)
        self.lin = np.zeros(4) if lin is None else np.array(lin, dtype=float)
        A = np.zeros((4, 4)) if quad is None else np.array(quad, dtype=float)
        A = 0.5 * (A + A.T)
        self.wave[self.k] = 0.0
        self.lin[self.k] = 0.0
        A[self.k, :] = 0.0
        A[:, self.k] = 0.0
        self.quad = A
        self.name = name

    def _phi(self, y):
        return self.amp * np.sin(y @ self.wave) + y @ self.lin + 0.5 * np.einsum("...a,ab,...b->...", y, self.quad, y)

    def _dphi(self, y):
        return self.amp * np.cos(y @ self.wave)[..., None] * self.wave + self.lin + y @ self.quad

    def _ddphi(self, y):
        s = -self.amp * np.sin(y @ self.wave)[..., None, None]
        return s * np.outer(self.wave, self.wave) + self.quad

    def forward(self, ystar):
        ystar = np.asarray(ystar, dtype=float)
        out = ystar.copy()
        out[..., self.k] += self._phi(ystar)
        return out

    def jacobian(self, ystar):
        ystar = np.asarray(ystar, dtype=float)
        J = np.broadcast_to(np.eye(4), ystar.shape[:-1] + (4, 4)).copy()
        J[..., self.k, :] += self._dphi(ystar)
        return J

    def hessian(self, ystar):
        ystar = np.asarray(ystar, dtype=float)
        H = np.zeros(ystar.shape[:-1] + (4, 4, 4))
        H[..., self.k, :, :] = self._ddphi(ystar)
        return H

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        out = y.copy()
        out[..., self.k] -= self._phi(y)
        return out


class ComposedMap(ObserverMap):
    """outer o inner, with the exact chain rule for jacobian and hessian."""

    kind = MapKind.COMPOSED

    def __init__(self, outer, inner, name=None):
        self.outer = outer
        self.inner = inner
        self.name = name or f"{outer.name}o{inner.name}"

    def forward(self, ystar):
        return self.outer.forward(self.inner.forward(ystar))

    def jacobian(self, ystar):
        u = self.inner.forward(ystar)
        return self.outer.jacobian(u) @ self.inner.jacobian(ystar)

    def hessian(self, ystar):
        u = self.inner.forward(ystar)
        J2 = self.inner.jacobian(ystar)
        H1 = self.outer.hessian(u)
        H2 = self.inner.hessian(ystar)
        J1 = self.outer.jacobian(u)
        return np.einsum("...kab,...ai,...bj->...kij", H1, J2, J2) + np.einsum("...ka,...aij->...kij", J1, H2)

    def inverse(self, y):
        return self.inner.inverse(self.outer.inverse(y))


class InverseMap(ObserverMap):
    """Y^{-1} as an observer map; derivatives follow from differentiating Y^{-1} o Y = id."""

    def __init__(self, base):
        self.base = base
        self.kind = base.kind
        self.name = f"inv({base.name})"

    def forward(self, y):
        return self.base.inverse(y)

    def jacobian(self, y):
        return np.linalg.inv(self.base.jacobian(self.base.inverse(y)))

    def hessian(self, y):
        ys = self.base.inverse(y)
        A = np.linalg.inv(self.base.jacobian(ys))
        H = self.base.hessian(ys)
        return -np.einsum("...km,...mpq,...pa,...qb->...kab", A, H, A, A)

    def inverse(self, ystar):
        return self.base.forward(ystar)

    def inverse_map(self):
        return self.base


@dataclass(frozen=True)
class LorentzParams:
    V: np.ndarray
    Q: np.ndarray
    c: float = 1.0

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        if self.c <= 0:
            raise ValueError("c must be positive")
        if np.linalg.norm(V) >= self.c:
            raise SuperluminalError(f"|V| = {np.linalg.norm(V)} >= c = {self.c}")
        if np.max(np.abs(Q.T @ Q - np.eye(3))) > 1e-12 or np.linalg.det(Q) <= 0:
            raise InvalidFrameError("Q is not a rotation")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "Q", Q)


def gamma_factor(V, c):
    v2 = float(np.dot(V, V))
    if v2 >= c * c:
        raise SuperluminalError(f"|V| = {np.sqrt(v2)} >= c = {c}")
    return 1.0 / np.sqrt(1.0 - v2 / (c * c))


def boost_block(V, c):
    """B_c(V) = Id + gamma^2/(c^2 (gamma + 1)) V V^T."""
    V = np.asarray(V, dtype=float)
    g = gamma_factor(V, c)
    return np.eye(3) + (g * g / (c * c * (g + 1.0))) * np.outer(V, V)


def lorentz_matrix(V, Q=None, c=1.0):
    """L_c(V, Q) = [[gamma, gamma/c^2 V^T Q], [gamma V, B_c(V) Q]]."""
    if isinstance(V, LorentzParams):
        V, Q, c = V.V, V.Q, V.c
    p = LorentzParams(V, np.eye(3) if Q is None else Q, c)
    g = gamma_factor(p.V, c)
    M = np.empty((4, 4))
    M[0, 0] = g
    M[0, 1:] = (g / (c * c)) * (p.V @ p.Q)
    M[1:, 0] = g * p.V
    M[1:, 1:] = boost_block(p.V, c) @ p.Q
    return M


def galilei_matrix(V, Q=None):
    M = np.eye(4)
    M[1:, 0] = np.asarray(V, dtype=float)
    M[1:, 1:] = np.eye(3) if Q is None else np.asarray(Q, dtype=float)
    return M


def lorentz_map(V, Q=None, c=1.0, shift=None, name="lorentz"):
    return AffineMap(lorentz_matrix(V, Q, c), shift, name=name)


def check_lorentz_invariance(M, c=1.0, tol=1e-11):
    """True iff M G_c M^T = G_c within tol, M_00 >= 0 and det M > 0."""
    M = np.asarray(M, dtype=float)
    G = standard_metric_matrix(c)
    dev = np.max(np.abs(M @ G @ M.T - G))
    return bool(dev <= tol and M[0, 0] >= 0 and np.linalg.det(M) > 0)


def velocity_addition(V, Q, u_star, c=1.0):
    """Velocity seen by the plain observer of a point moving with u* in the starred frame."""
    V = np.asarray(V, dtype=float)
    Q = np.eye(3) if Q is None else np.asarray(Q, dtype=float)
    Qu = Q @ np.asarray(u_star, dtype=float)
    denom = 1.0 + float(V @ Qu) / (c * c)
    if denom <= 0:
        raise FrameIncompatibilityError(f"velocity addition denominator {denom} <= 0")
    g = gamma_factor(V, c)
    return (V + boost_block(V, c) @ Qu / g) / denom


def galilei_limit(V, Q=None, c_sequence=(10.0, 100.0, 1000.0)):
    """Max-norm distance between L_c(V, Q) and the Galilei matrix, with log-log slope."""
    Gal = galilei_matrix(V, Q)
    devs = [float(np.max(np.abs(lorentz_matrix(V, Q, c) - Gal))) for c in c_sequence]
    slope = loglog_slope(c_sequence, devs) if all(d > 0 for d in devs) else float("nan")
    return {"c": list(map(float, c_sequence)), "deviation": devs, "slope": slope}


def random_rotation(rng):
    return Rotation.random(random_state=rng).as_matrix()


def random_velocity(rng, c=1.0, max_fraction=0.9):
    d = rng.standard_normal(3)
    d /= np.linalg.norm(d)
    return d * rng.uniform(0.0, max_fraction) * c


def random_newton_map(rng, accelerating=True, rotating=True, name="newton"):
    tdiff = rng.uniform(-1, 1)
    coeffs = np.zeros((4, 3))
    coeffs[0] = rng.uniform(-1, 1, 3)
    coeffs[1] = rng.uniform(-0.5, 0.5, 3)
    if accelerating:
        coeffs[2] = rng.uniform(-0.5, 0.5, 3)
        coeffs[3] = rng.uniform(-0.2, 0.2, 3)
    if rotating:
        rot = RotationPath(rng.standard_normal(3), (rng.uniform(-1, 1), rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3)), random_rotation(rng))
    else:
        rot = RotationPath(Q0=random_rotation(rng))
    return NewtonMap(tdiff, PolynomialPath(coeffs), rot, name=name)


def random_shear_map(rng, k=None, strength=0.2):
    k = int(rng.integers(0, 4)) if k is None else k
    return ShearMap(
        k,
        amp=strength * rng.uniform(-1, 1),
        wave=rng.uniform(-1, 1, 4),
        lin=strength * rng.uniform(-1, 1, 4),
        quad=strength * rng.uniform(-1, 1, (4, 4)),
        name=f"shear{k}",
    )


def fd_jacobian(fn, ystar, h=1e-5):
    """Plain central-difference Jacobian, used as an oracle in tests."""
    ystar = np.asarray(ystar, dtype=float)
    cols = []
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        cols.append((fn(ystar + e) - fn(ystar - e)) / (2 * h))
    return np.stack(cols, axis=-1)
