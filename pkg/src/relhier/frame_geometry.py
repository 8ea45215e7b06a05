"""Hyperbolic metrics, time covectors, dual frames and Christoffel symbols.

Sign convention for the Christoffel symbols: the metric used is
g^{kl} = -G_{kl} with lower form g_{kl} = -(G^{-1})_{kl}. With this choice
-Gamma obeys the same transformation law as the Coriolis coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fields as F
from .errors import (
    BasisDegeneracyError,
    DegenerateSeedError,
    GeometryViolationError,
    InvalidFrameError,
    NonInvertibleMetricError,
)
from .observer_maps import gamma_factor, lorentz_matrix, standard_metric_matrix
from .tensor_core import CO, CONTRA, CheckReport, max_dev, pullback_field

__all__ = [
    "MetricField",
    "standard_metric",
    "classical_limit_metric",
    "pullback_metric",
    "metric_signature",
    "standard_time_vector",
    "boosted_time_vector",
    "pullback_time_vector",
    "normalized_time_vector",
    "random_time_vector_field",
    "time_vector_residual",
    "DualFrame",
    "build_dual_frame",
    "dual_from_nu",
    "lorentz_frame",
    "classical_frame",
    "project_to_w",
    "christoffel",
    "christoffel_transform_check",
    "christoffel_identity_check",
    "frame_transform_check",
    "space_metric",
]


@dataclass
class MetricField:
    """G as a field of shape (4, 4) together with the speed of light."""

    field: F.Field
    c: float = 1.0
    name: str = "metric"

    def __call__(self, y):
        return self.field(y)

    def grad(self, y):
        return self.field.grad(y)

    @property
    def analytic(self):
        return self.field.analytic


def standard_metric(c=1.0):
    return MetricField(F.constant(standard_metric_matrix(c)), c, "standard_c")


def classical_limit_metric():
    """G_inf = diag(0, 1, 1, 1); degenerate, used only as a limit reference."""
    return MetricField(F.constant(standard_metric_matrix(np.inf)), np.inf, "classical_limit")


def pullback_metric(metric: MetricField, ymap):
    """Starred metric with G o Y = DY G* DY^T, as a field of y*."""
    fld = pullback_field(metric.field, ymap, (CONTRA, CONTRA))
    return MetricField(fld, metric.c, f"pullback({getattr(ymap, 'name', 'map')})")


def metric_signature(G):
    """Counts of (negative, positive) eigenvalues of symmetric G (..., 4, 4)."""
    w = np.linalg.eigvalsh(0.5 * (G + np.swapaxes(G, -1, -2)))
    return np.sum(w < 0, axis=-1), np.sum(w > 0, axis=-1)


def standard_time_vector():
    return F.constant(np.array([1.0, 0.0, 0.0, 0.0]))


def boosted_time_vector(V, c=1.0):
    """Time covector (gamma, -gamma V / c^2) of an observer moving with V."""
    V = np.asarray(V, dtype=float)
    g = gamma_factor(V, c)
    return F.constant(np.concatenate([[g], -g * V / (c * c)]))


def pullback_time_vector(e0p: F.Field, ymap):
    """e'0* = DY^T e'0 o Y."""
    return pullback_field(e0p, ymap, (CO,))


def normalized_time_vector(w: F.Field, metric: MetricField):
    """Rescale a covector field so that e'0.G e'0 = -1/c^2 holds exactly."""
    c = metric.c
    n = F.einsum_field("a,ab,b->", w, metric.field, w)  # w.G w < 0
    inv = F.map_elementwise(n, lambda s: 1.0 / (c * np.sqrt(-s)), lambda s: 0.5 / (c * (-s) ** 1.5))
    return F.einsum_field("a,->a", w, inv)


def random_time_vector_field(rng, metric: MetricField = None, strength=0.15):
    """Normalized e'0 field from a random perturbation of the standard covector."""
    metric = standard_metric() if metric is None else metric
    w = F.random_field(rng, (4,), strength, offset=np.array([1.0, 0.0, 0.0, 0.0]))
    return normalized_time_vector(w, metric)


def time_vector_residual(e0p, G, c):
    """e'0.G e'0 + 1/c^2 for arrays."""
    return np.einsum("...a,...ab,...b->...", e0p, G, e0p) + 1.0 / (c * c)


def space_metric(metric: MetricField, e0p: F.Field):
    """G^space = G + (1/c^2) e0 e0^T with e0 = -c^2 G e'0, as a field."""
    c = metric.c
    e0 = F.scale(F.einsum_field("ab,b->a", metric.field, e0p), -c * c)
    return F.add(metric.field, F.scale(F.einsum_field("a,b->ab", e0, e0), 1.0 / (c * c)))


@dataclass
class DualFrame:
    """Bases e_k (rows of ``e``) and dual covectors e'_k (rows of ``ep``)."""

    e: np.ndarray
    ep: np.ndarray
    c: float = 1.0
    base: np.ndarray = None

    def __post_init__(self):
        self.e = np.asarray(self.e, dtype=float)
        self.ep = np.asarray(self.ep, dtype=float)
        if self.base is None:
            self.base = np.zeros(4)

    @property
    def e0(self):
        return self.e[0]

    @property
    def e0p(self):
        return self.ep[0]

    def duality_error(self):
        return max_dev(self.ep @ self.e.T, np.eye(4))

    def metric(self):
        """-(1/c^2) e0 e0^T + sum_i e_i e_i^T."""
        c2 = self.c * self.c
        return -np.outer(self.e[0], self.e[0]) / c2 + self.e[1:].T @ self.e[1:]

    def inverse_metric(self):
        """-c^2 e'0 e'0^T + sum_i e'_i e'_i^T."""
        c2 = self.c * self.c
        return -c2 * np.outer(self.ep[0], self.ep[0]) + self.ep[1:].T @ self.ep[1:]

    def frame_norm(self, w):
        """sqrt(sum_{i>=1} (e'_i.w)^2)."""
        return float(np.linalg.norm(self.ep[1:] @ np.asarray(w, float)))

    def spatial_wedge(self):
        """|e1 ^ e2 ^ e3| as the square root of the Euclidean Gram determinant."""
        S = self.e[1:]
        return float(np.sqrt(max(np.linalg.det(S @ S.T), 0.0)))

    def full_wedge(self):
        return float(abs(np.linalg.det(self.e)))


def _at(x, base):
    if callable(x):
        return np.asarray(x(base), dtype=float)
    return np.asarray(x, dtype=float)


def project_to_w(e0p, e0, z):
    """Project z onto W = {e'0.z = 0} along e0."""
    z = np.asarray(z, dtype=float)
    return z - np.outer(z @ e0p, e0) if z.ndim == 2 else z - (e0p @ z) * e0


def build_dual_frame(metric, e0p, spatial_seed, base=None, c=None, tol=1e-10):
    """Dual frame from G, e'0 and three seed vectors.

    e0 = -c^2 G e'0; the seeds are projected onto W along e0 and then
    orthonormalised in the given order with respect to z.G^{-1} w.
    """
    base = np.zeros(4) if base is None else np.asarray(base, dtype=float)
    if c is None:
        c = getattr(metric, "c", 1.0)
    G = _at(metric, base)
    ep0 = _at(e0p, base)
    try:
        if np.linalg.cond(G) > 1e14:
            raise np.linalg.LinAlgError
        Ginv = np.linalg.inv(G)
    except np.linalg.LinAlgError:
        raise NonInvertibleMetricError("metric is singular") from None
    res = time_vector_residual(ep0, G, c)
    if abs(res) > tol * max(1.0, 1.0 / c ** 2):
        raise InvalidFrameError(f"e'0.G e'0 + 1/c^2 = {res:.3e}")
    e0 = -c * c * (G @ ep0)
    seeds = project_to_w(ep0, e0, np.asarray(spatial_seed, dtype=float))
    if seeds.shape != (3, 4):
        raise DegenerateSeedError("need exactly three seed vectors")
    sv = np.linalg.svd(seeds, compute_uv=False)
    if sv[-1] <= 1e-10 * max(sv[0], 1e-300):
        raise DegenerateSeedError("seed vectors do not span W")
    gram = seeds @ Ginv @ seeds.T
    if np.linalg.eigvalsh(0.5 * (gram + gram.T))[0] <= 0:
        raise GeometryViolationError("G^{-1} is not positive definite on W")
    es = []
    for z in seeds:
        for q in es:
            z = z - (q @ Ginv @ z) * q
        nrm2 = z @ Ginv @ z
        if nrm2 <= 0:
            raise GeometryViolationError("G^{-1} is not positive definite on W")
        es.append(z / np.sqrt(nrm2))
    e = np.vstack([e0] + es)
    ep = np.vstack([ep0] + [Ginv @ z for z in es])
    return DualFrame(e, ep, c, base)


def dual_from_nu(e0p, spatial_basis, nu, c=1.0, base=None):
    """Dual frame with prescribed spatial basis and velocity parameters nu.

    e0 = mu e'0 + sum nu_j e_j with mu = 1/|e'0|^2 and
    e'_i = -nu_i e'0 + sum_k A_ik e_k, A = E^{-1}, E_kj = e_k.e_j.
    """
    ep0 = np.asarray(e0p, dtype=float)
    S = np.asarray(spatial_basis, dtype=float)
    nu = np.asarray(nu, dtype=float)
    E = S @ S.T
    if abs(np.linalg.det(E)) < 1e-14 * max(1.0, np.max(np.abs(E))) ** 3:
        raise BasisDegeneracyError("spatial basis Gram matrix is singular")
    if np.max(np.abs(S @ ep0)) > 1e-10 * np.linalg.norm(ep0) * max(1.0, np.max(np.abs(S))):
        raise BasisDegeneracyError("spatial basis is not contained in W")
    A = np.linalg.inv(E)
    mu = 1.0 / (ep0 @ ep0)
    e0 = mu * ep0 + nu @ S
    eps = -nu[:, None] * ep0[None, :] + A @ S
    return DualFrame(np.vstack([e0, S]), np.vstack([ep0, eps]), c, base)


def lorentz_frame(V, Q=None, c=1.0):
    """Frame of the observer moving with V in the standard metric.

    Built from e'0 = (gamma, -gamma V/c^2) with the columns L_c(V, Q) e_i as
    seeds; the result reproduces the columns of L_c(V, Q).
    """
    L = lorentz_matrix(V, Q, c)
    G = standard_metric_matrix(c)
    g = gamma_factor(np.asarray(V, float), c)
    ep0 = np.concatenate([[g], -g * np.asarray(V, float) / (c * c)])
    return build_dual_frame(G, ep0, L[:, 1:].T, c=c)


def classical_frame(V, Q=None):
    """c -> infinity limit: e0 = (1, V), e'0 = (1, 0), e_i = (0, Q e_i), e'_i = (-V.Q e_i, Q e_i)."""
    V = np.asarray(V, dtype=float)
    Q = np.eye(3) if Q is None else np.asarray(Q, dtype=float)
    e = np.zeros((4, 4))
    ep = np.zeros((4, 4))
    e[0] = np.concatenate([[1.0], V])
    ep[0] = [1.0, 0.0, 0.0, 0.0]
    for i in range(3):
        qi = Q[:, i]
        e[i + 1] = np.concatenate([[0.0], qi])
        ep[i + 1] = np.concatenate([[-V @ qi], qi])
    return DualFrame(e, ep, np.inf)


def _metric_and_lower_derivs(metric, y):
    G = metric(y)
    dG = metric.grad(y)
    if np.any(np.linalg.cond(G) > 1e14):
        raise NonInvertibleMetricError("metric is singular")
    Ginv = np.linalg.inv(G)
    # d_m(-G^{-1}) = G^{-1} (d_m G) G^{-1}
    dg = np.einsum("...ka,...abm,...bl->...klm", Ginv, dG, Ginv)
    return G, Ginv, dg


def christoffel(metric: MetricField, y):
    """Gamma[..., k, i, j] = 1/2 sum_l g^{kl}(d_i g_jl + d_j g_il - d_l g_ij)."""
    y = np.asarray(y, dtype=float)
    G, _, dg = _metric_and_lower_derivs(metric, y)
    gup = -G
    # dg[..., a, b, m] = d_m g_ab; bracket B[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    B = np.einsum("...jli->...lij", dg) + np.einsum("...ilj->...lij", dg) - np.einsum("...ijl->...lij", dg)
    return 0.5 * np.einsum("...kl,...lij->...kij", gup, B)


def christoffel_identity_check(metric: MetricField, points, tol=1e-7):
    """d_l g_ik = sum_m (g_mk Gamma^m_il + g_im Gamma^m_kl)."""
    points = np.atleast_2d(points)
    G, Ginv, dg = _metric_and_lower_derivs(metric, points)
    g = -Ginv
    Gam = christoffel(metric, points)
    rhs = np.einsum("...mk,...mil->...ikl", g, Gam) + np.einsum("...im,...mkl->...ikl", g, Gam)
    return CheckReport("christoffel_identity", max_dev(dg, rhs), tol)


def christoffel_transform_check(metric: MetricField, ymap, points, tol=1e-7):
    """-Gamma obeys the Coriolis rule between the metric and its pull-back.

    sum_pq Y_p,a Y_q,b (-Gamma^i_pq)(Y) = sum_n Y_i,n (-Gamma*^n_ab) + Y_i,ab
    at the starred sample points.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    star = pullback_metric(metric, ymap)
    J = ymap.jacobian(points)
    H = ymap.hessian(points)
    chi = -christoffel(metric, ymap.forward(points))
    chi_star = -christoffel(star, points)
    lhs = np.einsum("...pa,...qb,...ipq->...iab", J, J, chi)
    rhs = np.einsum("...in,...nab->...iab", J, chi_star) + H
    return CheckReport("christoffel_transform", max_dev(lhs, rhs), tol, {"scale": float(np.max(np.abs(lhs)))})


def frame_transform_check(frame_star: DualFrame, ymap, frame: DualFrame, tol=1e-10):
    """e_k o Y = DY e*_k, e'*_k = DY^T e'_k o Y and DY G* DY^T = G."""
    J = ymap.jacobian(frame_star.base)
    contra = np.max(np.linalg.norm(frame.e - frame_star.e @ J.T, axis=1))
    co = np.max(np.linalg.norm(frame_star.ep - frame.ep @ J, axis=1))
    base_dev = max_dev(ymap.forward(frame_star.base), frame.base)
    metric_dev = max_dev(J @ frame_star.metric() @ J.T, frame.metric())
    dev = max(contra, co, metric_dev, base_dev)
    return CheckReport(
        "frame_transform",
        float(dev),
        tol,
        {"contra": float(contra), "co": float(co), "metric": metric_dev, "base": base_dev},
    )
