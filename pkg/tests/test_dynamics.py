import csv
import math
from functools import lru_cache

import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfb.charts import Chart, ChartManifold
from mfb.errors import LeftAllCharts
from mfb.harness.scenarios import builtin
from mfb.kaluza import build_potential, calibrate_lorentz_sign, geodesic_integrate, larmor_closed_form, lorentz_integrate
from mfb.kaluza.dynamics import larmor_center, larmor_radius, measured_radius_error, unit_base_velocity

ETA = jnp.diag(jnp.array([-1.0, 1.0, 1.0, 1.0]))


def eta(x):
    return ETA + 0.0 * x[0]


def magnetic(B):
    F = jnp.zeros((4, 4)).at[1, 2].set(-B).at[2, 1].set(B)
    return lambda x: F + 0.0 * x[0]


@lru_cache(maxsize=None)
def flat_kk():
    sc = builtin("flat_kk")
    return sc, build_potential(sc.bundle, sc.metric)


def test_flat_geodesic_is_a_straight_line():
    x0 = np.array([0.0, 1.0, 2.0, 3.0])
    v0 = unit_base_velocity(0.3, (1.0, 2.0, 0.0))
    tr = geodesic_integrate(eta, x0, v0, 2.0, 0.1)
    assert np.max(np.abs(tr.coords - (x0 + np.outer(tr.times, v0)))) < 1e-13
    assert abs(tr.conserved["g(v,v)"][0] + 1) < 1e-12
    assert tr.drift("g(v,v)") < 1e-13


def test_step_validation():
    with pytest.raises(ValueError):
        geodesic_integrate(eta, np.zeros(4), np.eye(4)[0], 1.0, 0.0)
    with pytest.raises(ValueError):
        geodesic_integrate(eta, np.zeros(4), np.eye(4)[0], 1.0, 0.3)


def test_leaving_every_chart_raises():
    m = ChartManifold("interval", (Chart("home", 1, (-1.0,), (1.0,)),))
    with pytest.raises(LeftAllCharts):
        geodesic_integrate(lambda x: jnp.eye(1) + 0.0 * x[0], [0.0], [1.0], 2.0, 0.1, manifold=m)


@settings(max_examples=6, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0.05, 0.5), st.floats(0.1, 0.8))
def test_lorentz_matches_larmor_closed_form(B, q, speed):
    x0 = np.array([0.0, 0.2, -0.1, 0.0])
    u0 = unit_base_velocity(speed, (1.0, 0.5, 0.2))
    tr = lorentz_integrate(eta, magnetic(B), q, x0, u0, 5.0, 1e-2)
    exact = larmor_closed_form(B, q, x0, u0, tr.times)
    assert np.max(np.abs(tr.coords - exact)) < 1e-7
    assert measured_radius_error(tr, B, q, x0, u0) < 1e-7
    r = abs(larmor_center(B, q, x0, u0) - complex(x0[1], x0[2]))
    assert abs(r - larmor_radius(B, q, u0)) < 1e-12


def test_zero_field_closed_form_is_straight():
    x0 = np.zeros(4)
    u0 = unit_base_velocity(0.5)
    out = larmor_closed_form(1.0, 0.0, x0, u0, [0.0, 2.0])
    assert np.allclose(out[1], 2.0 * u0)


def test_sign_calibration_prefers_default():
    sc, pot = flat_kk()
    cal = calibrate_lorentz_sign(sc.bundle, sc.metric, pot, np.zeros(5), unit_base_velocity(0.3), 0.5)
    assert cal["sign"] == 1.0 and cal["matches_default"]
    assert cal["deviation_plus"] < 1e-9 < cal["deviation_minus"]


def test_killing_conservation_and_csv(tmp_path):
    sc, _ = flat_kk()
    v0 = np.array([1.2, 0.3, -0.2, 0.1, 0.5])
    tr = geodesic_integrate(sc.metric, np.zeros(5), v0, 3.0, 0.01, {"du": sc.killing[0]}, sc.manifold)
    assert tr.drift("g(v,du)") < 1e-10
    path = tmp_path / "traj.csv"
    tr.to_csv(path, sc.coordinates)
    rows = list(csv.reader(open(path)))
    assert rows[0][:7] == ["t", "chart", "t", "x", "y", "z", "u"]
    assert len(rows) == 302
    assert all(-math.pi <= float(r[6]) < math.pi for r in rows[1:])
