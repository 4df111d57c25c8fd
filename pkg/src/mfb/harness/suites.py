"""Suite orchestration: every identity check over a scenario's sample cloud."""

from __future__ import annotations

import datetime
import math
from functools import lru_cache

import jax
import jax.numpy as jnp
import numpy as np

from .. import __version__
from ..atlas import (
    atlas_to_bundle,
    bundle_to_atlas,
    check_w_atlas,
    demo_atlases,
    demo_samples,
    punctured_plane_atlas,
    punctured_plane_samples,
)
from ..charts import Signature, evaluate
from ..errors import (
    AtlasInconsistent,
    Degenerate,
    NonHausdorffQuotient,
    NotFluidForm,
    NotRoundSphere,
    ValidationError,
)
from ..kaluza.dynamics import (
    base_fields,
    calibrate_lorentz_sign,
    compare_geodesic_lorentz,
    larmor_closed_form,
    lorentz_integrate,
    measured_radius_error,
    unit_base_velocity,
)
from ..kaluza.fiberspec import fiber_spectrum, frame_pullback
from ..kaluza.fluid import (
    LORENTZ_SIGN,
    FluidFields,
    decompose,
    law_terms,
    random_fluid,
    synthetic_fields,
    charged_dust_residuals,
)
from ..kaluza.potential import average_metric, build_potential
from ..multifiber import (
    adapted_chart,
    certify_fiber_diffeomorphism,
    check_compatibility,
    hausdorff,
    horizontal_projector,
    horizontal_projector_fn,
    splitting,
)
from ..report import ResidualReport
from ..tensor import (
    _curvature_kernel,
    christoffel_fn,
    divergence_contra_fn,
    einstein_contra_fn,
    exterior_d1_fn,
    exterior_d2_fn,
    lie_metric_fn,
    riemann_fn,
)
from .scenarios import Scenario

SUITES = ("curvature", "bianchi", "fibers", "atlas", "kaluza", "dynamics", "spectrum")
DEFAULT_SEED = 0
POINTS = 50

CALIBRATION = {
    "curvature": "round S^3 of radius 1 gives Ric = +2g and G = -g",
    "lorentz_sign": LORENTZ_SIGN,
    "lorentz_convention": "mu nabla_X0 X0 = sign * e * eF(X0), eF(v)^i = g^ik F_kj v^j, F = d(Y_flat)",
}


def _guard(rep: ResidualReport, name: str, reference: str, tol: float, fn):
    """Run one check; any exception becomes a failed entry carrying the error."""
    try:
        out = fn()
    except Exception as exc:  # recorded, never aborts the suite
        rep.add_error(name, reference, tol, exc)
        return None
    residual, note = out if isinstance(out, tuple) else (out, "")
    rep.add(name, reference, residual, tol, note)
    return residual


def _maxabs(a) -> float:
    return float(np.max(np.abs(np.asarray(a)), initial=0.0))


# ----------------------------------------------------------------- curvature

@lru_cache(maxsize=None)
def _batched_curvature(g):
    return jax.jit(jax.vmap(_curvature_kernel(g)))


def curvature_suite(sc: Scenario, rng, rep: ResidualReport, count: int = POINTS):
    g = sc.metric.components
    n = sc.dimension
    pts = sc.samples(rng, count)
    gx, gam, riem, ric, s, ein, endo = (np.asarray(a) for a in _batched_curvature(g)(jnp.asarray(pts)))
    low = np.einsum("pam,pmijk->paijk", gx, riem)
    tol = sc.tol
    if sc.flat:
        rep.add("Riemann vanishes", "flat metric", _maxabs(riem), tol("flat"))
        rep.add("Einstein vanishes", "flat metric", _maxabs(ein), tol("flat"))
    if sc.constant_curvature is not None:
        k = sc.constant_curvature
        rep.add("Ric = (n-1) K g", "constant curvature calibration", _maxabs(ric - (n - 1) * k * gx), tol("calibration"))
        rep.add("G = -(n-1)(n-2)/2 K g", "constant curvature calibration",
                _maxabs(ein + 0.5 * (n - 1) * (n - 2) * k * gx), tol("calibration"))
    rep.add("R antisymmetric in the derivative pair", "Riemann symmetries",
            _maxabs(low + low.transpose(0, 1, 3, 2, 4)), tol("riemann_symmetry"))
    rep.add("R antisymmetric in the outer slots", "Riemann symmetries",
            _maxabs(low + low.transpose(0, 4, 2, 3, 1)), tol("riemann_symmetry"))
    rep.add("R pair symmetry", "Riemann symmetries", _maxabs(low - low.transpose(0, 3, 4, 1, 2)), tol("riemann_symmetry"))
    rep.add("Christoffel symmetry", "Levi-Civita connection", _maxabs(gam - gam.transpose(0, 1, 3, 2)),
            tol("christoffel_symmetry"))
    rep.add("trace G = (1 - n/2) S", "Einstein tensor", _maxabs(np.einsum("pii->p", endo) - (1 - n / 2) * s),
            tol("einstein_trace"))
    bad = 0
    for m in gx:
        try:
            bad += Signature.of(m) != sc.metric.declared_signature
        except Degenerate:
            bad += 1
    rep.add("declared signature at samples", "plumbing", bad, 0.0, note=f"{bad} of {count} samples disagree")

    def fd_check():
        worst = 0.0
        for x in pts[:5]:
            dual = evaluate(sc.metric.tensor, x, 1).d1
            fd = evaluate(sc.metric.tensor, x, 1, method="fd").d1
            worst = max(worst, _maxabs(dual - fd))
        return worst

    _guard(rep, "metric derivative: dual vs central difference", "plumbing", tol("derivative_fd"), fd_check)


# ------------------------------------------------------------------- bianchi

@lru_cache(maxsize=None)
def _bianchi_kernel(g, step: float = 1e-5):
    def g_up(x):
        return einstein_contra_fn(g, x)

    def omega(x):
        return g(x)[0]

    def run(x):
        ad = divergence_contra_fn(g, g_up, x)
        n = x.shape[0]
        eye = jnp.eye(n)
        dt = jnp.stack([(g_up(x + step * eye[k]) - g_up(x - step * eye[k])) / (2 * step) for k in range(n)], axis=-1)
        gam = christoffel_fn(g, x)
        t = g_up(x)
        fd = jnp.einsum("iji->j", dt) + jnp.einsum("iik,kj->j", gam, t) + jnp.einsum("jik,ik->j", gam, t)
        dd = exterior_d2_fn(lambda y: exterior_d1_fn(omega, y), x)
        return ad, fd, dd

    return jax.jit(jax.vmap(run))


def bianchi_suite(sc: Scenario, rng, rep: ResidualReport, count: int = POINTS):
    pts = jnp.asarray(sc.samples(rng, count))
    ad, fd, dd = (np.asarray(a) for a in _bianchi_kernel(sc.metric.components)(pts))
    rep.add("div G = 0 (automatic differentiation)", "contracted Bianchi identity", _maxabs(ad), sc.tol("bianchi"))
    rep.add("div G = 0 (central differences)", "contracted Bianchi identity", _maxabs(fd), sc.tol("bianchi_fd"))
    rep.add("d(d omega) = 0", "exterior derivative squares to zero", _maxabs(dd), sc.tol("dF"))


# -------------------------------------------------------------------- fibers

@lru_cache(maxsize=None)
def _image_kernel(bundle, piece, which, per_axis):
    factor = bundle.s_factor if which == "S" else bundle.w_factor
    grid = jnp.asarray(factor.grid(per_axis))

    def run(x):
        b = piece.pi(x)
        s = bundle.s_factor.coords(piece.h(x))
        w = bundle.w_factor.coords(piece.f(x))
        if which == "S":
            return jax.vmap(lambda t: piece.phi_inv(b, t, w))(grid)
        return jax.vmap(lambda t: piece.phi_inv(b, s, t))(grid)

    return jax.jit(run)


def fiber_image(bundle, x, which, per_axis=None):
    factor = bundle.s_factor if which == "S" else bundle.w_factor
    per_axis = per_axis or (32 if factor.dimension == 1 else 5)
    x = jnp.asarray(bundle.coords(x))
    return np.asarray(_image_kernel(bundle, bundle.piece_at(x), which, per_axis)(x))


def _chart(bundle):
    return bundle.total.chart(bundle.total.home)


def _point_on_fiber(bundle, x, which, t):
    x = jnp.asarray(x)
    piece = bundle.piece_at(x)
    b = piece.pi(x)
    s = bundle.s_factor.coords(piece.h(x))
    w = bundle.w_factor.coords(piece.f(x))
    t = jnp.asarray(t, dtype=float)
    return np.asarray(piece.phi_inv(b, t, w) if which == "S" else piece.phi_inv(b, s, t))


def fiber_well_definedness(bundle, points, rng, partners: int = 5) -> float:
    """Largest Hausdorff distance between the fiber through p and the fiber through p' in it."""
    worst = 0.0
    chart = _chart(bundle)
    for which in ("S", "W"):
        factor = bundle.s_factor if which == "S" else bundle.w_factor
        if factor.dimension == 0:
            continue
        for x in points:
            img = fiber_image(bundle, x, which)
            for t in factor.sample(rng, partners):
                y = _point_on_fiber(bundle, x, which, t)
                worst = max(worst, hausdorff(img, fiber_image(bundle, y, which), chart))
    return worst


def splitting_round_trip(bundle, points, rng, per_point: int = 10) -> float:
    worst = 0.0
    chart = _chart(bundle)
    for x in points:
        psi, psi_inv = splitting(bundle, x)
        piece = bundle.piece_at(x)
        b = piece.pi(jnp.asarray(x))
        for s, w in zip(bundle.s_factor.sample(rng, per_point), bundle.w_factor.sample(rng, per_point)):
            y = np.asarray(piece.phi_inv(b, jnp.asarray(s), jnp.asarray(w)))
            a, c = psi(y)
            worst = max(worst, _maxabs(chart.delta(psi_inv(a, c), y)))
    return worst


@lru_cache(maxsize=None)
def _projector_kernel(bundle, piece, g):
    proj = horizontal_projector_fn(bundle, g, piece)

    def run(x):
        p = proj(x)
        gp = g(x) @ p
        return jnp.max(jnp.abs(p @ p - p)), jnp.max(jnp.abs(gp - gp.T)), p

    return jax.jit(run)


def projector_checks(bundle, metric, points):
    idem, adj, rank_gap = 0.0, 0.0, 0
    for x in points:
        x = jnp.asarray(x)
        i, a, p = _projector_kernel(bundle, bundle.piece_at(x), metric.components)(x)
        idem, adj = max(idem, float(i)), max(adj, float(a))
        rank_gap = max(rank_gap, abs(int(np.linalg.matrix_rank(np.asarray(p), tol=1e-8)) - bundle.base_dimension))
    return idem, adj, rank_gap


def adapted_round_trip(bundle, points, rng, per_point: int = 3) -> float:
    worst = 0.0
    chart = _chart(bundle)
    for x in points:
        ac = adapted_chart(bundle, x)
        for _ in range(per_point):
            y = chart.wrap(np.asarray(x) + 0.01 * rng.normal(size=len(x)))
            back = np.asarray(ac.inverse(ac.forward(jnp.asarray(y))))
            worst = max(worst, _maxabs(chart.delta(back, y)))
    return worst


def fibers_suite(sc: Scenario, rng, rep: ResidualReport):
    b = sc.bundle
    pts = sc.samples(rng, 20)
    tol = sc.tol("fiber")
    _guard(rep, "splitting round trip", "canonical splitting of a fiber", tol,
           lambda: splitting_round_trip(b, pts[:10], rng))
    _guard(rep, "fiber well-definedness", "sub-fibers through every point", tol,
           lambda: fiber_well_definedness(b, pts, rng))

    def proj():
        idem, adj, gap = projector_checks(b, sc.metric, pts)
        rep.add("pr_H idempotent", "horizontal projector", idem, tol)
        rep.add("pr_H g-self-adjoint", "horizontal projector", adj, tol)
        return gap, "rank of pr_H minus base dimension"

    _guard(rep, "pr_H rank", "horizontal projector", 0.0, proj)

    def certificate():
        worst, notes = 0.0, []
        for x in pts[:2]:
            cert = certify_fiber_diffeomorphism(b, x, per_axis=3)
            ok = cert["min_singular_value"] > 1e-6 and cert["min_separation"] > 1e-9
            worst = max(worst, cert["inverse_error"] if ok else math.inf)
            notes.append(f"sv {cert['min_singular_value']:.3g}, sep {cert['min_separation']:.3g}")
        return worst, "; ".join(notes)

    _guard(rep, "Phi restricted to fibers is a diffeomorphism", "multi-fiber bundle", tol, certificate)

    def compat():
        report = check_compatibility(b, sc.metric, pts[:8])
        return (0.0 if report.passed else 1.0), report.message

    _guard(rep, "metric compatibility (constant fiber signatures)", "compatible metric", 0.0, compat)
    _guard(rep, "adapted chart round trip", "adapted charts", tol, lambda: adapted_round_trip(b, pts[:5], rng))


# --------------------------------------------------------------------- atlas

def _fired(fn, error) -> tuple:
    try:
        fn()
    except error as exc:
        return 0.0, f"raised {type(exc).__name__}"
    return 1.0, "did not raise"


@lru_cache(maxsize=None)
def demo_atlas_results(seed: int = DEFAULT_SEED) -> tuple:
    """Verdicts on the constructed atlases: (name, reference, residual, tolerance, note)."""
    rng = np.random.default_rng(seed)
    atlases = demo_atlases()
    pts, expected = demo_samples(rng)
    out = []
    expectations = {"consistent": (True, True, True), "wa_only": (True, True, False), "mixing": (True, False, False)}
    for name, want in expectations.items():
        verdict = check_w_atlas(atlases[name], pts)
        got = tuple(verdict.passed[c] for c in ("W", "a", "b"))
        out.append((f"atlas verdicts on '{name}'", "observation atlas conditions", float(got != want), 0.0,
                    f"(W, a, b) = {got}, expected {want}"))
    labels = atlas_to_bundle(atlases["consistent"], pts).fiber_labels
    out.append(("quotient class count", "atlas to bundle", float(abs(len(set(labels)) - expected)), 0.0,
                f"{len(set(labels))} classes"))
    res, note = _fired(lambda: atlas_to_bundle(atlases["inconsistent"], pts), AtlasInconsistent)
    out.append(("inconsistency detector fires", "atlas to bundle", res, 0.0, note))
    res, note = _fired(lambda: atlas_to_bundle(punctured_plane_atlas(), punctured_plane_samples(), multi=False),
                       NonHausdorffQuotient)
    out.append(("non-Hausdorff detector fires", "atlas to bundle", res, 0.0, note))
    return tuple(out)


def atlas_round_trip(bundle, points, per_axis: int = 4):
    """(overlap verdict of the bundle's atlas, fiber distance after atlas -> bundle)."""
    atlas = bundle_to_atlas(bundle)
    verdict = check_w_atlas(atlas, points, per_axis=per_axis)
    rebuilt = atlas_to_bundle(atlas, points, per_axis=per_axis)
    chart = _chart(bundle)
    worst = 0.0
    for x in points:
        for which in ("S", "W"):
            if (bundle.s_factor if which == "S" else bundle.w_factor).dimension:
                worst = max(worst, hausdorff(fiber_image(bundle, x, which), fiber_image(rebuilt, x, which), chart))
    return verdict, worst


def atlas_suite(sc: Scenario, rng, rep: ResidualReport):
    if sc.bundle is not None:
        pts = sc.samples(rng, 6)

        def run():
            verdict, dist = atlas_round_trip(sc.bundle, pts)
            for c in ("W", "a", "b"):
                rep.add(f"bundle atlas overlap condition {c}", "bundle to atlas", verdict.residual[c], sc.tol("atlas"))
            return dist

        _guard(rep, "atlas to bundle preserves fibers", "atlas and bundle equivalence", sc.tol("fiber"), run)
    try:
        results = demo_atlas_results()
    except Exception as exc:
        rep.add_error("constructed atlases", "observation atlas conditions", 0.0, exc)
        return
    for name, ref, res, tol, note in results:
        rep.add(name, ref, res, tol, note)


# -------------------------------------------------------------------- kaluza

@lru_cache(maxsize=None)
def _em_kernel(g, pot_Y, pot_F):
    def F_up(x):
        gi = jnp.linalg.inv(g(x))
        return gi @ pot_F(x) @ gi

    def run(x):
        gx = g(x)
        y = pot_Y(x)
        f = pot_F(x)
        ric = jnp.einsum("iijk->jk", riemann_fn(g, x))
        bridge = divergence_contra_fn(g, F_up, x) + 2 * jnp.linalg.solve(gx, ric @ y)
        return {
            "unit": y @ gx @ y + 1,
            "dF": exterior_d2_fn(pot_F, x),
            "antisym": f + f.T,
            "killing": lie_metric_fn(g, pot_Y, x),
            "geodesic": jax.jacfwd(pot_Y)(x) @ y + jnp.einsum("kij,i,j->k", christoffel_fn(g, x), y, y),
            "bridge": bridge,
        }

    return jax.jit(jax.vmap(run))


@lru_cache(maxsize=None)
def _tangency_kernel(bundle, piece, Y):
    def run(x):
        y = Y(x)
        return jnp.concatenate([jax.jacfwd(piece.pi)(x) @ y, jax.jacfwd(piece.f)(x) @ y])

    return jax.jit(run)


def has_circle_potential(sc: Scenario) -> bool:
    return sc.bundle is not None and sc.bundle.s_factor.kind == "s1"


def expects_killing(sc: Scenario) -> bool:
    return bool(sc.killing)


def electromagnetic_checks(sc: Scenario, pot, pts, rep: ResidualReport):
    t = {k: np.asarray(v) for k, v in _em_kernel(sc.metric.components, pot.Y, pot.F)(jnp.asarray(pts)).items()}
    rep.add("g(Y, Y) = -1", "unit fiber tangent", _maxabs(t["unit"]), sc.tol("unit"))
    rep.add("F antisymmetric", "F = d(Y_flat)", _maxabs(t["antisym"]), 0.0)
    rep.add("dF = 0", "Maxwell equations, homogeneous part", _maxabs(t["dF"]), sc.tol("dF"))

    def tangency():
        worst = 0.0
        for x in pts:
            x = jnp.asarray(x)
            worst = max(worst, _maxabs(_tangency_kernel(sc.bundle, sc.bundle.piece_at(x), pot.Y)(x)))
        return worst

    _guard(rep, "Y tangent to the S-fiber", "unit fiber tangent", sc.tol("fiber"), tangency)
    if expects_killing(sc):
        rep.add("L_Y g = 0", "Y is a Killing field", _maxabs(t["killing"]), sc.tol("killing"))
        rep.add("nabla_Y Y = 0", "Killing and unit implies geodesic", _maxabs(t["geodesic"]), sc.tol("geodesic_Y"))
        rep.add("(div F)^# + 2 eRic(Y) = 0", "Killing-Maxwell identity", _maxabs(t["bridge"]), sc.tol("maxwell_bridge"))
        worst = 0.0
        for n, K in enumerate(sc.killing):
            kern = jax.jit(jax.vmap(lambda x, K=K: lie_metric_fn(sc.metric.components, K, x)))
            worst = max(worst, _maxabs(kern(jnp.asarray(pts))))
        rep.add("declared Killing fields", "Killing fields", worst, sc.tol("killing"))


def averaging_checks(sc: Scenario, pot, pts, rep: ResidualReport):
    for i, x in enumerate(pts):
        def run(x=x):
            avg = average_metric(sc.bundle, sc.metric, x, potential=pot)
            rep.add(f"averaged metric: gbar(Y, Y) = -1 [{i}]", "averaging along the fiber", avg.norm_residual,
                    sc.tol("average_unit"))
            rep.add(f"averaged metric: L_Y gbar = 0 [{i}]", "averaging along the fiber", avg.killing_residual,
                    sc.tol("average_killing"))
            if sc.averaged is not None:
                expected = np.asarray(sc.averaged(jnp.asarray(x)))
            elif expects_killing(sc):
                expected = np.asarray(sc.metric.components(jnp.asarray(x)))
            else:
                return 0.0, "no reference value"
            return _maxabs(avg.value - expected)

        _guard(rep, f"averaged metric value [{i}]", "averaging along the fiber", sc.tol("average_value"), run)


def decomposition_checks(sc: Scenario, pot, rng, rep: ResidualReport, count: int = 100, scale: float = 2.7):
    b = sc.bundle
    pts = sc.samples(rng, 10)
    ref = np.asarray(sc.time_reference(jnp.asarray(pts[0]))) if sc.time_reference else np.eye(sc.dimension)[0]
    rt, eq = 0.0, 0.0
    for k in range(count):
        x = pts[k % len(pts)]
        gx = sc.metric.matrix(x)
        y = pot.at(x)["Y"]
        proj = horizontal_projector(b, sc.metric, x).projector_matrix
        G, mu, e, gamma, x0 = random_fluid(rng, gx, y, proj, ref, pressure=bool(k % 2))
        d = decompose(G, y, gx, proj, ref)
        rt = max(rt, abs(d.mu - mu), abs(d.e - e), abs(d.gamma - gamma), _maxabs(d.X0 - x0))
        c = decompose(scale * G, y, gx, proj, ref)
        eq = max(eq, abs(c.mu - scale * d.mu), abs(c.e - scale * d.e), abs(c.gamma - scale * d.gamma),
                 _maxabs(c.X0 - d.X0))
    tol = sc.tol("decomposition")
    rep.add("decomposition round trip", "fluid form of the Einstein tensor", rt, tol)
    rep.add("decomposition scale equivariance", "fluid form of the Einstein tensor", eq, tol)

    def metric_is_not_fluid():
        x = pts[0]
        gx = sc.metric.matrix(x)
        proj = horizontal_projector(b, sc.metric, x).projector_matrix
        return _fired(lambda: decompose(gx, pot.at(x)["Y"], gx, proj, ref), NotFluidForm)

    _guard(rep, "G = g is rejected", "fluid form of the Einstein tensor", sc.tol("detector"), metric_is_not_fluid)


def recombination_checks(sc: Scenario, pot, rng, rep: ResidualReport, count: int = POINTS):
    ref = sc.time_reference(jnp.zeros(sc.dimension)) if sc.time_reference else None
    for pressure in (False, True):
        label = "with P" if pressure else "without P"

        def run(pressure=pressure):
            fields = synthetic_fields(sc.bundle, sc.metric, rng, pressure, ref)
            t = law_terms(sc.metric.components, pot.Y, pot.F, fields, sc.samples(rng, count))
            if not pressure:
                rep.add("free fall / Lorentz identity", "free fall is equivalent to the Lorentz equation",
                        _maxabs(t["free_fall_identity"]), sc.tol("recombination"))
            return _maxabs(t["div_G"] - t["recombined"])

        _guard(rep, f"recombination identity {label}", "projections of div G onto Y, X0 and T-perp",
               sc.tol("recombination"), run)


def flat_dust_checks(sc: Scenario, pot, rng, rep: ResidualReport):
    n = sc.dimension
    e0 = jnp.eye(n)[0]
    fields = FluidFields(lambda x: 1.3 + 0.0 * x[0], lambda x: 0.0 * x[0], lambda x: 0.0 * x[0], lambda x: e0 + 0.0 * x)
    sub = charged_dust_residuals(sc.metric, pot, fields, sc.samples(rng, 5), sc.name, sc.tol("flat") * 100)
    for e in sub.entries:
        if e.name.startswith("Maxwell (stated") or e.name.startswith("Maxwell (derived"):
            e.note = (e.note + "; constant dust on a flat product").strip("; ")
        rep.entries.append(e)


def kaluza_suite(sc: Scenario, rng, rep: ResidualReport):
    if not has_circle_potential(sc):
        raise ValidationError(f"{sc.name}: no S^1 fiber to carry the potential", "bundle")
    pts = sc.samples(rng, POINTS)
    try:
        pot = build_potential(sc.bundle, sc.metric, samples=pts[:5])
    except Exception as exc:
        rep.add_error("electromagnetic potential", "unit fiber tangent", sc.tol("unit"), exc)
        return
    electromagnetic_checks(sc, pot, pts, rep)
    averaging_checks(sc, pot, pts[:2], rep)
    try:
        decomposition_checks(sc, pot, rng, rep)
    except Exception as exc:
        rep.add_error("decomposition", "fluid form of the Einstein tensor", sc.tol("decomposition"), exc)
    if expects_killing(sc):
        # the recombination uses antisymmetry of nabla Y, i.e. Y Killing
        recombination_checks(sc, pot, rng, rep)
    if sc.flat:
        flat_dust_checks(sc, pot, rng, rep)


# ------------------------------------------------------------------ dynamics

def dynamics_suite(sc: Scenario, rng, rep: ResidualReport):
    if not has_circle_potential(sc) or not expects_killing(sc):
        raise ValidationError(f"{sc.name}: dynamics needs a Killing S^1 potential", "bundle")
    pot = build_potential(sc.bundle, sc.metric)
    n = sc.dimension
    x0 = np.zeros(n)
    u0 = unit_base_velocity(0.01, (1.0, 0.0, 0.0)) if sc.bundle.base_dimension == 4 else np.eye(sc.bundle.base_dimension)[0]
    q = 0.5
    B = sc.parameters.get("B")
    t_end, step = (20.0, 1e-3) if B is not None else (5.0, 5e-3)

    def calibration():
        cal = calibrate_lorentz_sign(sc.bundle, sc.metric, pot, x0, u0, q)
        rep.metadata["lorentz_calibration"] = cal
        return min(cal["deviation_plus"], cal["deviation_minus"]), f"best sign {cal['sign']:+g}"

    _guard(rep, "Lorentz sign calibration", "free fall is equivalent to the Lorentz equation", sc.tol("trajectory"), calibration)

    def comparison():
        cmp = compare_geodesic_lorentz(sc.bundle, sc.metric, pot, x0, u0, q, t_end, step, manifold=sc.manifold)
        rep.add("conserved charge g(v, Y)", "Killing conservation", cmp.charge_drift, sc.tol("conservation"))
        rep.add("conserved speed g(v, v)", "geodesics preserve speed", cmp.geodesic.drift("g(v,v)"), sc.tol("conservation"))
        if B is not None:
            rep.add("Larmor radius", "closed-form gyration", measured_radius_error(cmp.lorentz, B, q, x0[:4], u0),
                    sc.tol("larmor"))
        return cmp.deviation, f"t in [0, {t_end:g}], step {step:g}"

    _guard(rep, "projected geodesic vs Lorentz trajectory", "free fall is equivalent to the Lorentz equation",
           sc.tol("trajectory"), comparison)
    if B is not None:
        def ratio():
            r = step_halving_ratio(sc, pot, B, q, x0, u0)
            return abs(r - 16.0), f"ratio {r:.3f}"

        _guard(rep, "RK4 step-halving error ratio", "fourth-order integrator", sc.tol("step_ratio"), ratio)


def step_halving_ratio(sc, pot, B, q, x0, u0, coarse: float = 0.4, t_end: float = 20.0) -> float:
    """Error ratio of the Lorentz integrator against the closed form at steps h and h/2."""
    bf = base_fields(sc.bundle, sc.metric, pot, x0)
    b0 = np.asarray(bf.project(jnp.asarray(x0)))
    errs = []
    for h in (coarse, coarse / 2):
        tr = lorentz_integrate(bf.metric, bf.F, q, b0, u0, t_end, h)
        errs.append(_maxabs(tr.coords - larmor_closed_form(B, q, b0, u0, tr.times)))
    return errs[0] / errs[1]


# ------------------------------------------------------------------ spectrum

def spectrum_suite(sc: Scenario, rng, rep: ResidualReport):
    b = sc.bundle
    if b is None:
        raise ValidationError(f"{sc.name}: no bundle", "bundle")
    x = sc.samples(rng, 1)[0]
    ran = False
    if b.w_factor.kind == "s1":
        ran = True

        def s1():
            coarse = fiber_spectrum(b, sc.metric, x, "s1", 256, which="W")
            fine = fiber_spectrum(b, sc.metric, x, "s1", 512, which="W")
            exact = (2 * math.pi / coarse.length) ** 2
            e1, e2 = abs(coarse.eigenvalues[1] - exact), abs(fine.eigenvalues[1] - exact)
            rep.add("lambda_0 = 0", "fiber Laplacian spectrum", abs(coarse.eigenvalues[0]), 1e-8)
            rep.add("S^1 convergence ratio", "fiber Laplacian spectrum", abs(e1 / e2 - 4.0), sc.tol("spectrum_ratio"))
            return e1 / exact, f"length {coarse.length:.6f}"

        _guard(rep, "S^1 lambda_1 relative error", "fiber Laplacian spectrum", sc.tol("spectrum_s1"), s1)
    if b.w_factor.kind == "s3":
        ran = True

        def s3():
            spec = fiber_spectrum(b, sc.metric, x, "s3", 4)
            r = spec.radius
            return (abs(spec.eigenvalues[1] - 3 / r ** 2) + abs(spec.multiplicities[1] - 4)), f"radius {r:.6f}"

        _guard(rep, "S^3 first level 3/r^2 with multiplicity 4", "fiber Laplacian spectrum", 1e-12, s3)

        def not_round():
            g = sc.metric.components

            def bumped(y):
                return g(y).at[-3, -3].add(1e-3 * jnp.cos(y[-2]))

            return _fired(lambda: fiber_spectrum(b, bumped, x, "s3", 4), NotRoundSphere)

        _guard(rep, "roundness gate fires on a bumped fiber", "fiber Laplacian spectrum", sc.tol("detector"), not_round)

        def frame():
            fp = frame_pullback(b, sc.metric, sc.samples(rng, 30), sc.frame)
            rep.add("pulled frame Gram determinant", "frame pulled back to S^3 fibers",
                    max(0.0, sc.tol("gram") - fp.gram_min), 0.0, note=f"min Gram determinant {fp.gram_min:.6g}")
            return fp.residual

        _guard(rep, "pulled frame solves Tf v = X_j", "frame pulled back to S^3 fibers", sc.tol("frame"), frame)
    if not ran:
        raise ValidationError(f"{sc.name}: no S^1 or S^3 W-fiber for spectra", "bundle")


# --------------------------------------------------------------------- entry

RUNNERS = {
    "curvature": curvature_suite,
    "bianchi": bianchi_suite,
    "fibers": fibers_suite,
    "atlas": atlas_suite,
    "kaluza": kaluza_suite,
    "dynamics": dynamics_suite,
    "spectrum": spectrum_suite,
}


def applicable(sc: Scenario, suite: str) -> bool:
    if suite in ("curvature", "bianchi", "atlas"):
        return True
    if suite == "fibers":
        return sc.bundle is not None
    if suite == "kaluza":
        return has_circle_potential(sc)
    if suite == "dynamics":
        return has_circle_potential(sc) and expects_killing(sc)
    if suite == "spectrum":
        return sc.bundle is not None and sc.bundle.w_factor.kind in ("s1", "s3")
    return False


def run_suite(scenario: Scenario, suite: str = "all", tolerances=None, seed: int = DEFAULT_SEED,
              timestamp: bool = True) -> ResidualReport:
    """Run one suite (or all applicable ones); deterministic for a given seed."""
    if tolerances:
        scenario = scenario.with_tolerances(tolerances)
    if suite != "all" and suite not in RUNNERS:
        raise ValidationError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)} or all", "suite")
    names = [s for s in SUITES if applicable(scenario, s)] if suite == "all" else [suite]
    if suite != "all" and not applicable(scenario, suite):
        raise ValidationError(f"suite {suite!r} does not apply to {scenario.name}", "suite")
    rep = ResidualReport(scenario.name, suite)
    rep.metadata.update({"seed": seed, "version": __version__, "calibration": dict(CALIBRATION),
                         "suites": names, "tolerances": dict(scenario.tolerances)})
    for n, name in enumerate(names):
        rng = np.random.default_rng([seed, n])
        sub = ResidualReport(scenario.name, name)
        try:
            RUNNERS[name](scenario, rng, sub)
        except Exception as exc:
            sub.add_error(f"{name} suite", "plumbing", 0.0, exc)
        for e in sub.entries:
            if suite == "all":
                e.name = f"{name}: {e.name}"
            rep.entries.append(e)
        rep.metadata.update(sub.metadata)
    if timestamp:
        rep.metadata["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return rep
