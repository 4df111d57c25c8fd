"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math
from functools import lru_cache

import jax.numpy as jnp
import numpy as np
import pytest

from mfb.errors import NotRoundSphere
from mfb.harness import suites
from mfb.harness.scenarios import KILLING_SCENARIOS, builtin
from mfb.kaluza import build_potential, fiber_spectrum, frame_pullback
from mfb.report import ResidualReport

from conftest import ACCEPTANCE_LINES


def record(number, title, rep, names=None):
    entries = [e for e in rep.entries if names is None or any(e.name.startswith(n) for n in names)]
    assert entries, f"criterion {number}: nothing was measured"
    bad = [e for e in entries if not e.passed]
    worst = max(entries, key=lambda e: e.residual / e.tolerance if e.tolerance else e.residual)
    status = "FAIL" if bad else "PASS"
    ACCEPTANCE_LINES.append(f"criterion {number}: {status}  {title}  "
                            f"(worst: {worst.name} = {worst.residual:.3e}, tol {worst.tolerance:.1e})")
    print(ACCEPTANCE_LINES[-1])
    assert not bad, "; ".join(f"{e.name}: {e.residual:.3e} > {e.tolerance:.1e} {e.note}" for e in bad)


@lru_cache(maxsize=None)
def scenario(name):
    return builtin(name)


@lru_cache(maxsize=None)
def potential(name):
    sc = scenario(name)
    return build_potential(sc.bundle, sc.metric)


def rng(n):
    return np.random.default_rng([2024, n])


def test_criterion_01_flatness():
    sc = scenario("minkowski5")
    rep = ResidualReport(sc.name, "curvature")
    suites.curvature_suite(sc, rng(1), rep, count=50)
    record(1, "minkowski5 Riemann and Einstein vanish", rep, ["Riemann vanishes", "Einstein vanishes"])
    assert all(e.tolerance == 1e-12 for e in rep.entries[:2])


def test_criterion_02_constant_curvature():
    sc = scenario("round_s3")
    rep = ResidualReport(sc.name, "curvature")
    suites.curvature_suite(sc, rng(2), rep, count=30)
    record(2, "round S^3: Ric = 2g, G = -g", rep, ["Ric = ", "G = "])


def test_criterion_03_bianchi():
    rep = ResidualReport("bianchi", "bianchi")
    for name in ("warped_kk", "product_r13_s1_s3"):
        sub = ResidualReport(name, "bianchi")
        suites.bianchi_suite(scenario(name), rng(3), sub, count=50)
        for e in sub.entries:
            e.name = f"{name}: {e.name}"
        rep.extend(sub)
    tols = {e.name.split(": ", 1)[1]: e.tolerance for e in rep.entries}
    assert tols["div G = 0 (automatic differentiation)"] == 1e-6
    assert tols["div G = 0 (central differences)"] == 1e-4
    record(3, "div G = 0 on warped_kk and product (AD and finite differences)", rep)


def _em(name, n):
    sc = scenario(name)
    rep = ResidualReport(name, "kaluza")
    suites.electromagnetic_checks(sc, potential(name), sc.samples(rng(n), 50), rep)
    for e in rep.entries:
        e.name = f"{name}: {e.name}"
    return rep


def test_criterion_04_electromagnetic_structure():
    rep = ResidualReport("em", "kaluza")
    for name in ("flat_kk", "warped_kk"):
        rep.extend(_em(name, 4))
    wanted = ["dF = 0", "g(Y, Y) = -1", "L_Y g = 0", "nabla_Y Y = 0"]
    names = [f"{s}: {w}" for s in ("flat_kk", "warped_kk") for w in wanted]
    assert {e.name for e in rep.entries} >= set(names)
    record(4, "dF = 0, unit Y, Y Killing and geodesic on flat_kk and warped_kk", rep, names)


def test_criterion_05_killing_maxwell_bridge():
    rep = ResidualReport("bridge", "kaluza")
    for name in KILLING_SCENARIOS:
        rep.extend(_em(name, 5))
    names = [f"{s}: (div F)^# + 2 eRic(Y) = 0" for s in KILLING_SCENARIOS]
    assert sum(e.name in names for e in rep.entries) == len(KILLING_SCENARIOS)
    record(5, "(div F)^# + 2 eRic(Y) = 0 on every Killing scenario", rep, names)


def test_criterion_06_averaging():
    sc = scenario("u_periodic")
    rep = ResidualReport(sc.name, "kaluza")
    suites.averaging_checks(sc, potential("u_periodic"), sc.samples(rng(6), 4), rep)
    assert sum(e.name.startswith("averaged metric value") for e in rep.entries) == 4
    record(6, "u_periodic averaged metric: unit Y, Killing, perturbation averages out", rep)


def test_criterion_07_decomposition():
    sc = scenario("flat_kk")
    rep = ResidualReport(sc.name, "kaluza")
    suites.decomposition_checks(sc, potential("flat_kk"), rng(7), rep, count=100)
    record(7, "fluid decomposition round trip and scale equivariance (100 fluids)", rep)


def test_criterion_08_recombination():
    rep = ResidualReport("recombination", "kaluza")
    for name in ("flat_kk", "warped_kk"):
        sub = ResidualReport(name, "kaluza")
        suites.recombination_checks(scenario(name), potential(name), rng(8), sub, count=50)
        for e in sub.entries:
            e.name = f"{name}: {e.name}"
        rep.extend(sub)
    assert sum("recombination identity" in e.name for e in rep.entries) == 4
    record(8, "div G equals the recombined law terms, with and without P", rep)


def test_criterion_09_dynamics():
    sc = builtin("flat_kk(B=1)")
    assert sc.parameters["B"] == 1
    rep = ResidualReport(sc.name, "dynamics")
    suites.dynamics_suite(sc, rng(9), rep)
    ratio_entry = rep.entry("RK4 step-halving error ratio")
    ratio = float(ratio_entry.note.split()[-1])
    assert 12 <= ratio <= 20, ratio
    record(9, "flat_kk B=1 q=0.5: geodesic vs Lorentz, Larmor radius, charge, RK4 order", rep,
           ["projected geodesic", "Larmor radius", "conserved charge", "RK4 step-halving"])


def test_criterion_10_fibers_and_atlases():
    sc = scenario("twisted_phi")
    rep = ResidualReport(sc.name, "fibers")
    r = rng(10)
    pts = sc.samples(r, 10)
    rep.add("splitting round trip (100 samples)", "splitting", suites.splitting_round_trip(sc.bundle, pts, r, 10),
            1e-9)
    rep.add("fiber well-definedness", "sub-fibers", suites.fiber_well_definedness(sc.bundle, pts, r), 1e-9)
    rep.extend(_suite(sc, "atlas"))
    record(10, "splitting, well-definedness, atlas verdicts, atlas-bundle round trip, detectors", rep)


def _suite(sc, name):
    rep = ResidualReport(sc.name, name)
    suites.RUNNERS[name](sc, rng(100), rep)
    return rep


def test_criterion_11_spectra():
    rep = ResidualReport("spectra", "spectrum")
    warped = scenario("warped_kk")
    x = np.array([0.0, math.pi / 2, 0.0, 0.0, 0.0, 0.0])
    coarse = fiber_spectrum(warped.bundle, warped.metric, x, "s1", 256)
    fine = fiber_spectrum(warped.bundle, warped.metric, x, "s1", 512)
    rep.add("S^1 length 2 pi", "fiber length", abs(coarse.length - 2 * math.pi), 1e-9)
    e1, e2 = abs(coarse.eigenvalues[1] - 1.0), abs(fine.eigenvalues[1] - 1.0)
    rep.add("|lambda_1 - 1| at 256 nodes", "S^1 spectrum", e1, 1e-3)
    rep.add("convergence ratio 4 +- 0.2", "S^1 spectrum", abs(e1 / e2 - 4.0), 0.2, note=f"ratio {e1 / e2:.4f}")

    prod = scenario("product_r13_s1_s3")
    x0 = np.zeros(prod.dimension)
    s3 = fiber_spectrum(prod.bundle, prod.metric, x0, "s3", 4)
    rep.add("S^3 radius 2", "round fiber", abs(s3.radius - 2.0), 1e-9)
    rep.add("lambda_1 = 3/4", "S^3 spectrum", abs(s3.eigenvalues[1] - 0.75), 1e-9)
    rep.add("multiplicity 4", "S^3 spectrum", abs(int(s3.multiplicities[1]) - 4), 0.0)

    g = prod.metric.components

    def bumped(y):
        return g(y).at[-3, -3].add(1e-3 * jnp.cos(y[-2]))

    with pytest.raises(NotRoundSphere):
        fiber_spectrum(prod.bundle, bumped, x0, "s3", 4)
    rep.add("NotRoundSphere fires", "detector", 0.0, 0.0)
    record(11, "S^1 length 2pi and S^3 radius 2 spectra, roundness gate", rep)


def test_criterion_12_frame_pullback():
    sc = scenario("twisted_phi")
    fp = frame_pullback(sc.bundle, sc.metric, sc.samples(rng(12), 30), sc.frame)
    assert len(fp.points) == 30
    rep = ResidualReport(sc.name, "spectrum")
    rep.add("Tf(pulled X_j) = X_j", "frame pullback", fp.residual, 1e-8)
    rep.add("Gram determinant > 1e-8", "frame pullback", 0.0 if fp.gram_min > 1e-8 else 1.0, 0.0,
            note=f"min Gram {fp.gram_min:.4g}")
    record(12, "twisted_phi frame pullback residual and Gram determinant (30 points)", rep)
