"""Verification suites run by the command-line front end.

Every suite takes its configuration block and a seeded generator and returns
check records (check_id, anchor, deviation, tolerance).
"""
from __future__ import annotations

import numpy as np

from . import divergence_checker as DC
from . import fields as F
from . import fluid_closure as FC
from . import frame_geometry as FG
from . import kinetic_moments as KM
from . import moment_hierarchy as MH
from . import observer_maps as OM
from . import particle_dynamics as PD
from ._numerics import loglog_slope, tensor_grid

__all__ = ["SUITES", "suite_names", "record"]

UNIT_BOX = np.array([[-1.0, 1.0]] * 4)


def record(check_id, anchor, deviation, tolerance):
    return {"check_id": check_id, "anchor": anchor, "deviation": float(deviation), "tolerance": float(tolerance)}


# ---------------------------------------------------------------- lorentz

def suite_lorentz(cfg, rng):
    c = float(cfg.get("c", 1.0))
    n = int(cfg.get("samples", 100))
    frac = float(cfg.get("max_fraction", 0.9))
    G = OM.standard_metric_matrix(c)
    inv_dev, det_dev = 0.0, 0.0
    for _ in range(n):
        M = OM.lorentz_matrix(OM.random_velocity(rng, c, frac), OM.random_rotation(rng), c)
        inv_dev = max(inv_dev, float(np.max(np.abs(M @ G @ M.T - G))))
        det_dev = max(det_dev, abs(np.linalg.det(M) - 1.0))
    half = OM.velocity_addition(np.array([0.5 * c, 0, 0]), np.eye(3), np.array([0.5 * c, 0, 0]), c)
    light = OM.velocity_addition(OM.random_velocity(rng, c, frac), OM.random_rotation(rng),
                                 c * np.array([0.0, 0.6, 0.8]), c)
    lim = OM.galilei_limit(OM.random_velocity(rng, 1.0, 0.9), OM.random_rotation(rng))
    return [
        record("lorentz.metric_invariance", "invariance of G_c under L_c(V,Q)", inv_dev, 1e-11),
        record("lorentz.unit_determinant", "det L_c(V,Q) = 1", det_dev, 1e-11),
        record("lorentz.addition_half", "velocity addition 0.5c + 0.5c", abs(half[0] - 0.8 * c), 1e-12),
        record("lorentz.addition_light", "velocity addition keeps c fixed", abs(np.linalg.norm(light) - c) / c, 1e-12),
        record("lorentz.galilei_slope", "Galilei limit of L_c", abs(lim["slope"] + 2.0), 0.1),
    ]


# ---------------------------------------------------------------- frames

def _random_pulled_frame(rng, c):
    """Frame over a pulled-back metric at a random base point, with the metric matrix there."""
    ymap = OM.ComposedMap(OM.lorentz_map(OM.random_velocity(rng, c, 0.6), OM.random_rotation(rng), c),
                          OM.random_newton_map(rng, True, True))
    metric = FG.pullback_metric(FG.standard_metric(c), ymap)
    e0p = FG.pullback_time_vector(FG.boosted_time_vector(OM.random_velocity(rng, c, 0.6), c), ymap)
    base = rng.uniform(-1, 1, 4)
    frame = FG.build_dual_frame(metric, e0p, rng.standard_normal((3, 4)), base=base, c=c)
    return frame, metric(base[None])[0]


def suite_frames(cfg, rng):
    c = float(cfg.get("c", 1.0))
    n = int(cfg.get("samples", 50))
    Gc = OM.standard_metric_matrix(c)
    dev = 0.0
    for k in range(n):
        if k % 2 == 0:
            e0p = FG.boosted_time_vector(OM.random_velocity(rng, c, 0.9), c)(np.zeros((1, 4)))[0]
            fr, G = FG.build_dual_frame(Gc, e0p, rng.standard_normal((3, 4)), c=c), Gc
        else:
            fr, G = _random_pulled_frame(rng, c)
        scale = max(1.0, float(np.max(np.abs(G))))
        dev = max(dev, fr.duality_error(), float(np.max(np.abs(fr.metric() - G))) / scale,
                  float(np.max(np.abs(fr.inverse_metric() @ G - np.eye(4)))))
    col_dev = 0.0
    for _ in range(10):
        V, Q = OM.random_velocity(rng, c, 0.9), OM.random_rotation(rng)
        L = OM.lorentz_matrix(V, Q, c)
        fr = FG.lorentz_frame(V, Q, c)
        col_dev = max(col_dev, float(np.max(np.abs(fr.e - L.T))), float(np.max(np.abs(fr.ep - np.linalg.inv(L)))))
    V, Q = OM.random_velocity(rng, 1.0, 0.9), OM.random_rotation(rng)
    cl = FG.classical_frame(V, Q)
    cs = (10.0, 100.0, 1000.0)
    devs = [max(float(np.max(np.abs(FG.lorentz_frame(V, Q, cc).e - cl.e))),
                float(np.max(np.abs(FG.lorentz_frame(V, Q, cc).ep - cl.ep)))) for cc in cs]
    return [
        record("frames.dual_basis", "unique dual basis and metric representations", dev, 1e-9),
        record("frames.lorentz_columns", "frames of Lorentz observers", col_dev, 1e-11),
        record("frames.classical_slope", "classical limit frames", abs(loglog_slope(cs, devs) + 2.0), 0.1),
    ]


# ---------------------------------------------------------------- christoffel

def suite_christoffel(cfg, rng):
    c = float(cfg.get("c", 1.0))
    n = int(cfg.get("points", 20))
    ymap = OM.random_newton_map(rng, True, True)
    pts = rng.uniform(-1, 1, (n, 4))
    metric = FG.pullback_metric(FG.standard_metric(c), ymap)
    tr = FG.christoffel_transform_check(FG.standard_metric(c), ymap, pts)
    inner = OM.random_newton_map(rng, True, True)
    tr2 = FG.christoffel_transform_check(metric, inner, pts)
    idc = FG.christoffel_identity_check(metric, pts)
    return [
        record("christoffel.transform_standard", "Christoffel symbols as Coriolis coefficients", tr.deviation, 1e-7),
        record("christoffel.transform_pulled", "Christoffel symbols as Coriolis coefficients", tr2.deviation, 1e-7),
        record("christoffel.identity", "metric derivative identity", idc.deviation, 1e-7),
    ]


# ---------------------------------------------------------------- kinetic

def suite_kinetic(cfg, rng):
    order = int(cfg.get("max_order", 4))
    npts = int(cfg.get("points", 3))
    dev = 0.0
    for _ in range(3):
        n, theta = rng.uniform(0.5, 2.0), rng.uniform(0.3, 2.0)
        v = rng.uniform(-1, 1, 3)
        s = KM.maxwellian_scenario(n, v, theta, m_part=1.5)
        got = KM.compute_moments(s, np.zeros(4), order)
        ref = KM.maxwellian_moments_closed_form(order, n, v, theta, 1.5)
        for a, b in zip(got.tensors, ref):
            dev = max(dev, float(np.max(np.abs(a - b)) / np.max(np.abs(b))))
    stream = KM.streaming_maxwellian_scenario(1.0, rng.uniform(-0.5, 0.5, 3), 0.8, 0.3, rng.uniform(-0.6, 0.6, 3))
    pts = rng.uniform(-1, 1, (npts, 4))
    rot = KM.moment_transform_check(stream, OM.random_newton_map(rng, accelerating=False, rotating=True), 3, pts)
    acc = KM.moment_transform_check(stream, OM.random_newton_map(rng, accelerating=True, rotating=True), 3, pts)
    bal = KM.classical_balance_residual(stream, pts)
    return [
        record("kinetic.maxwellian_moments", "moments of drifting Maxwellians", dev, 1e-9),
        record("kinetic.transform_rotating", "moment transformation rule", rot.deviation, 1e-6),
        record("kinetic.transform_accelerating", "moment transformation rule", acc.deviation, 1e-6),
        record("kinetic.classical_balance", "classical mass momentum energy balances", bal["max"], 1e-8),
    ]


# ---------------------------------------------------------------- hierarchy

def suite_hierarchy(cfg, rng):
    count = int(cfg.get("test_functions", 10))
    qo = int(cfg.get("quad_order", 10))
    weak = 0.0
    for N in (1, 2):
        h = MH.manufactured_hierarchy(F.random_field(rng, (4,) * (N + 1), 1.0))
        for z in MH.random_test_functions(rng, UNIT_BOX, N, count):
            weak = max(weak, abs(MH.weak_residual(h, z, quad_order=qo)))
    T = F.random_field(rng, (4, 4), 1.0)
    pert = np.zeros(4)
    pert[1] = 0.1
    hp = MH.manufactured_hierarchy(T, pert)
    lin = 0.0
    for z in MH.random_test_functions(rng, UNIT_BOX, 1, 3):
        nodes, w = tensor_grid(z.support, qo)
        lin = max(lin, abs(MH.weak_residual(hp, z, quad_order=qo) - 0.1 * float(w @ z(nodes)[:, 1])))
    newton = OM.random_newton_map(rng, True, True)
    pts = rng.uniform(-1, 1, (5, 4))
    src = 0.0
    for N, ymap in ((1, newton), (2, OM.random_newton_map(rng, accelerating=False, rotating=True))):
        hs = MH.HierarchyFields(N, F.random_field(rng, (4,) * (N + 1)), F.random_field(rng, (4,) * N))
        src = max(src, MH.source_transform_check(hs, ymap, pts).deviation)
    Ts = rng.standard_normal((5, 4, 4))
    fict = float(np.max(np.abs(MH.fictitious_force(newton, pts, Ts)
                               - MH.source_inhomogeneity(Ts, newton.jacobian(pts), newton.hessian(pts), 1))))
    return [
        record("hierarchy.weak_manufactured", "weak form of the order-N system", weak, 1e-8),
        record("hierarchy.weak_linearity", "weak form of the order-N system", lin, 1e-8),
        record("hierarchy.source_rule", "transformation rule for sources", src, 1e-8),
        record("hierarchy.fictitious_forces", "inhomogeneity as fictitious forces", fict, 1e-8),
    ] + _coriolis_records(rng)


def _coriolis_records(rng):
    a, d = rng.standard_normal(3), rng.standard_normal((3, 3))
    chi = MH.classical_coriolis(a, d)
    force = rng.standard_normal(4)
    got = MH.coriolis_split(lambda T: force + np.tensordot(chi, T, 2), 1)
    planted = max(float(np.max(np.abs(got.chi - chi))), float(np.max(np.abs(got.force - force))))
    ymap = OM.ComposedMap(OM.lorentz_map(OM.random_velocity(rng, 1.0, 0.6), OM.random_rotation(rng)),
                          OM.random_newton_map(rng, True, True))
    pts = rng.uniform(-1, 1, (5, 4))
    plain_metric = FG.pullback_metric(FG.standard_metric(1.0), ymap.inverse_map())
    zero = MH.CoriolisCoefficients(np.zeros((4, 4, 4)), np.zeros(4), 1)
    gam = 0.0
    for p in pts:
        cp = MH.plain_coriolis_from_star(zero, ymap, p)
        gam = max(gam, float(np.max(np.abs(cp.chi + FG.christoffel(plain_metric, ymap.forward(p))))))
    chis = MH.CoriolisCoefficients(rng.standard_normal((4,) * 5), rng.standard_normal((4, 4)), 2)
    rule2 = 0.0
    for p in pts:
        cp = MH.plain_coriolis_from_star(chis, ymap, p)
        r = MH.coriolis_rule_residual(cp.chi, chis.chi, ymap.jacobian(p), ymap.hessian(p), 2)
        rule2 = max(rule2, float(np.max(np.abs(r))))
    return [
        record("hierarchy.coriolis_planted", "classical Coriolis structure", planted, 1e-12),
        record("hierarchy.coriolis_christoffel", "Coriolis coefficients equal minus Christoffel symbols", gam, 1e-9),
        record("hierarchy.coriolis_rule_order2", "transformation rule for Coriolis coefficients", rule2, 1e-7),
    ]


# ---------------------------------------------------------------- reduction

def suite_reduction(cfg, rng):
    count = int(cfg.get("test_functions", 4))
    e0p = FG.random_time_vector_field(rng)
    y = rng.uniform(-1, 1, (6, 4))
    slice_dev, double_dev, classical_dev = 0.0, 0.0, 0.0
    for N in (1, 2, 3):
        h = MH.HierarchyFields(N, F.random_field(rng, (4,) * (N + 1)), F.random_field(rng, (4,) * N))
        hr = MH.reduce(h, e0p)
        for eta in MH.random_test_functions(rng, UNIT_BOX, N - 1, count):
            a = MH.weak_residual(hr, eta)
            b = MH.weak_residual(h, MH.tensor_test_function(e0p, eta))
            slice_dev = max(slice_dev, abs(a - b))
        hc = MH.reduce(h, FG.standard_time_vector())
        classical_dev = max(classical_dev, float(np.max(np.abs(hc.T(y) - h.T(y)[:, 0]))),
                            float(np.max(np.abs(hc.g(y) - h.g(y)[:, 0]))))
        if N >= 2:
            twice = MH.reduce(hr, e0p)
            direct = MH.reduce_power(h, e0p, 2)
            double_dev = max(double_dev, float(np.max(np.abs(twice.T(y) - direct.T(y)))),
                             float(np.max(np.abs(twice.g(y) - direct.g(y)))))
    # momentum split recombination
    metric = FG.standard_metric(1.0)
    e0 = F.scale(F.einsum_field("ab,b->a", metric.field, e0p), -1.0)
    h1 = MH.HierarchyFields(1, F.random_field(rng, (4, 4)), F.random_field(rng, (4,)))
    parts = MH.reduced_momentum_split(h1, e0, e0p)
    rec = 0.0
    for z in MH.random_test_functions(rng, UNIT_BOX, 1, count):
        eta, tilde = MH.split_test_function(z, e0, e0p)
        full = MH.weak_residual(h1, z)
        split = MH.weak_residual(parts["mass"], eta) + MH.weak_residual(parts["reduced"], tilde)
        rec = max(rec, abs(full - split))
    return [
        record("reduction.test_function_slice", "reduction by contraction with the time vector", slice_dev, 1e-10),
        record("reduction.classical_slice", "classical reduction by the index-0 slice", classical_dev, 1e-10),
        record("reduction.double", "reduction applied twice", double_dev, 1e-10),
        record("reduction.momentum_recombination", "mass and reduced momentum split", rec, 1e-10),
    ]


# ---------------------------------------------------------------- particle

def suite_particle(cfg, rng):
    count = int(cfg.get("test_functions", 6))
    zetas = MH.random_test_functions(rng, UNIT_BOX, 1, count)
    f = rng.uniform(-0.3, 0.3, 3)
    m = 1.7
    wl1 = PD.accelerated_worldline(rng.uniform(-0.2, 0.2, 3), rng.uniform(-0.3, 0.3, 3), f / m)
    const_force = lambda y: np.tile(np.concatenate([[0.0], f]), (len(y), 1))
    case1 = float(np.max(np.abs(PD.distributional_momentum_residual(wl1, F.constant(np.array(m)), const_force, zetas))))
    e0p = PD.lorentz_time_vector(OM.random_velocity(rng, 1.0, 0.5))
    coeffs = np.vstack([rng.uniform(-0.2, 0.2, 3), rng.uniform(-0.2, 0.2, 3), rng.uniform(-0.1, 0.1, 3)])
    wl2 = PD.polynomial_worldline(coeffs, e0p, (-2.0, 2.0))
    mass = F.polynomial(1.0, np.concatenate([[0.05], rng.uniform(-0.05, 0.05, 3)]))
    force = PD.manufactured_force(wl2, mass)
    t_form = PD.distributional_momentum_residual(wl2, mass, force, zetas)
    s_form = PD.distributional_momentum_residual(PD.s_reparametrize(wl2), mass, force, zetas)
    etas = MH.random_test_functions(rng, UNIT_BOX, 0, count)
    m_lin = F.polynomial(1.0, np.array([0.1, 0, 0, 0]))
    wl0 = PD.uniform_worldline(rng.uniform(-0.2, 0.2, 3), rng.uniform(-0.3, 0.3, 3))
    mass_res = float(np.max(np.abs(PD.distributional_mass_residual(wl0, m_lin, lambda y: np.full(len(y), 0.1), etas))))
    L = OM.lorentz_map(OM.random_velocity(rng, 1.0, 0.6), OM.random_rotation(rng))
    wls = PD.map_worldline(wl0, L.inverse_map())
    g = lambda y: np.exp(-np.sum(y * y, axis=-1))
    meas = abs(PD.curve_integral(g, wl0, (-2, 2)) - PD.curve_integral(lambda ys: g(L.forward(ys)), wls, (-2, 2)))
    half = OM.velocity_addition(np.array([0.5, 0, 0]), np.eye(3), np.array([0.5, 0, 0]), 1.0)
    return [
        record("particle.case1_momentum", "distributional momentum equation and ODE", case1, 1e-9),
        record("particle.case2_momentum", "distributional momentum equation and ODE",
               float(np.max(np.abs(t_form))), 1e-9),
        record("particle.case2_reparametrized", "reparametrization invariance of the curve measure",
               float(np.max(np.abs(s_form - t_form))), 1e-9),
        record("particle.mass", "distributional mass equation", mass_res, 1e-9),
        record("particle.measure_invariance", "frame invariance of the curve measure", meas, 1e-9),
        record("particle.velocity_addition", "addition of velocities", abs(half[0] - 0.8), 1e-12),
    ]


# ---------------------------------------------------------------- dirac

def suite_dirac(cfg, rng):
    eps = tuple(cfg.get("eps", (0.2, 0.1, 0.05)))
    total = float(cfg.get("total", 1.0))
    V = OM.random_velocity(rng, 1.0, 0.5)
    fr = FG.lorentz_frame(V, OM.random_rotation(rng), 1.0)
    wl = PD.uniform_worldline(rng.uniform(-0.2, 0.2, 3), rng.uniform(-0.3, 0.3, 3),
                              PD.constant_time_vector(fr.ep[0]), (-1.0, 1.0))
    fam = PD.DiracFamily(wl, fr, PD.compact_profile(total), eps_sequence=eps)
    k = rng.uniform(-0.5, 0.5, 4)
    eta = lambda y: np.exp(-0.5 * np.sum(y * y, axis=-1)) * (1.0 + np.sin(y @ k))
    lim = PD.dirac_limit_check(fam, eta)
    prof = PD.gaussian_profile(total)
    L = OM.lorentz_map(OM.random_velocity(rng, 1.0, 0.6), OM.random_rotation(rng))
    J = L.jacobian(np.zeros(4))
    star = FG.DualFrame(fr.e @ np.linalg.inv(J).T, fr.ep @ J, 1.0)
    g1 = PD.g_gamma_orthonormal(lambda z: prof(z @ fr.ep[1:].T), fr.ep[0], fr.e[1:], fr.ep[1:])
    g2 = PD.g_gamma_orthonormal(lambda z: prof(z @ star.ep[1:].T), star.ep[0], star.e[1:], star.ep[1:])
    wedge = max(PD.wedge_identity_gap(fr), PD.wedge_identity_gap(star), abs(fr.full_wedge() - star.full_wedge()))
    return [
        record("dirac.limit", "Dirac sequence limit on a worldline", lim.deviation, 1e-4),
        record("dirac.objectivity", "objectivity of the limit density", abs(g1 - g2) / abs(g1), 1e-6),
        record("dirac.wedge", "wedge identities of the frame", wedge, 1e-10),
    ]


# ---------------------------------------------------------------- fluid

def suite_fluid(cfg, rng):
    nmaps = int(cfg.get("maps", 5))
    npts = int(cfg.get("points", 20))
    e0p = FG.random_time_vector_field(rng)
    st = FC.random_fluid_state(rng, e0p=e0p)
    pts = rng.uniform(-0.8, 0.8, (npts, 4))
    contra = 0.0
    for _ in range(nmaps):
        ymap = OM.random_newton_map(rng, True, True)
        for variant in FC.RateVariant:
            contra = max(contra, FC.rate_contravariance_check(st, ymap, pts, variant).deviation)
    J1, J2 = FC.diffusion_flux(st, pts), FC.diffusion_flux_closed(st, pts)
    dual = float(np.max(np.abs(J1 - J2)))
    ortho = float(np.max(np.abs(np.einsum("...a,...a->...", e0p(pts), J1))))
    block = FC.classical_block_check(F.random_field(rng, (3,), 0.5), 1.3, 0.4, rng=rng).deviation
    sysd = FC.assemble_fluid_system(st)
    mass = sysd["mass"]
    q_dev = float(np.max(np.abs(mass.T(pts) - sysd["q"](pts))))
    return [
        record("fluid.rate_contravariance", "objective rate tensor", contra, 1e-7),
        record("fluid.diffusion_dual_formula", "diffusion flux formula", dual, 1e-9),
        record("fluid.diffusion_orthogonal", "diffusion flux lies in W", ortho, 1e-9),
        record("fluid.classical_block", "classical limit of the viscous stress", block, 1e-9),
        record("fluid.mass_flux", "mass equation contained in the fluid system", q_dev, 1e-10),
    ]


# ---------------------------------------------------------------- divergence

def _vector_bumps(rng, n, count):
    out = []
    for _ in range(count):
        lo = rng.uniform(-1.0, -0.2, 4)
        hi = lo + rng.uniform(0.6, 1.2, 4)
        out.append(MH.bump_test_function(np.stack([lo, hi], axis=-1), rng.standard_normal(n)))
    return out


def suite_divergence(cfg, rng):
    count = int(cfg.get("test_functions", 3))
    maps = {
        "identity": OM.identity_map(),
        "lorentz": OM.lorentz_map(OM.random_velocity(rng, 1.0, 0.8), OM.random_rotation(rng)),
        "newton": OM.random_newton_map(rng, True, True),
    }
    out = []
    for mname, ymap in maps.items():
        s0 = DC.scalar_system(F.random_field(rng, (4,)), F.random_field(rng, ()))
        r0 = DC.weak_equality_check(s0, ymap, DC.identity_Z(0), _vector_bumps(rng, 1, count))
        s1 = DC.momentum_system(F.random_field(rng, (4, 4)), F.random_field(rng, (4,)))
        r1 = DC.weak_equality_check(s1, ymap, DC.jacobian_Z(ymap), _vector_bumps(rng, 4, count))
        h = MH.HierarchyFields(2, F.random_field(rng, (4, 4, 4)), F.random_field(rng, (4, 4)))
        r2 = DC.weak_equality_check(DC.hierarchy_system(h), ymap, DC.jacobian_power_Z(ymap, 2),
                                    _vector_bumps(rng, 16, count))
        anchor = "invariance of divergence systems"
        out += [record(f"divergence.scalar.{mname}", anchor, r0.deviation, 1e-7),
                record(f"divergence.momentum.{mname}", anchor, r1.deviation, 1e-7),
                record(f"divergence.order2.{mname}", anchor, r2.deviation, 1e-7)]
    return out


SUITES = {
    "lorentz": ("Lorentz matrices and velocity addition", suite_lorentz),
    "frames": ("dual frames of time vectors", suite_frames),
    "christoffel": ("Christoffel symbols and their transformation", suite_christoffel),
    "kinetic": ("velocity moments of kinetic distributions", suite_kinetic),
    "hierarchy": ("order-N divergence systems and Coriolis coefficients", suite_hierarchy),
    "reduction": ("reduction of order-N systems", suite_reduction),
    "particle": ("evolving points and their distributional equations", suite_particle),
    "dirac": ("Dirac approximation of evolving points", suite_dirac),
    "fluid": ("fluid rate tensor and diffusion flux", suite_fluid),
    "divergence": ("frame invariance of general divergence systems", suite_divergence),
}


def suite_names():
    return list(SUITES)
