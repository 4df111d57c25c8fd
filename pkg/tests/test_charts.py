import math

import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfb.charts import (
    CO,
    CONTRA,
    Chart,
    ChartManifold,
    ManifoldPoint,
    MetricField,
    Signature,
    TensorFieldSpec,
    TransitionMap,
    circle,
    evaluate,
    round_trip_error,
    signature_at,
    sphere3,
    stereographic,
    stereographic_inverse,
    transition,
)
from mfb.errors import (
    Degenerate,
    NoTransitionPath,
    NotInOverlap,
    PointOutsideDomain,
    SignatureMismatch,
)

angles = st.floats(-3.1, 3.1, allow_nan=False)


def plane_polar():
    cart = Chart("cart", 2, predicate=lambda x: x[1] != 0 or x[0] > 0)
    polar = Chart("polar", 2, (0.0, -math.pi), (math.inf, math.pi))

    def to_cart(p):
        return jnp.array([p[0] * jnp.cos(p[1]), p[0] * jnp.sin(p[1])])

    def to_polar(x):
        return jnp.array([jnp.hypot(x[0], x[1]), jnp.arctan2(x[1], x[0])])

    return ChartManifold("plane", (cart, polar),
                         (TransitionMap("polar", "cart", to_cart), TransitionMap("cart", "polar", to_polar)))


def test_chart_validation():
    with pytest.raises(ValueError):
        Chart("bad", 1, (1.0,), (0.0,))
    with pytest.raises(ValueError):
        Chart("bad", 1, periods=(0.0,))
    with pytest.raises(ValueError):
        Chart("bad", 2, (0.0,), (1.0,))


@given(angles, st.integers(-3, 3))
def test_wrap_and_delta_periodic(u, k):
    c = Chart("a", 1, (-math.pi,), (math.pi,), (2 * math.pi,))
    w = c.wrap([u + 2 * math.pi * k])
    assert -math.pi <= w[0] < math.pi
    assert abs(c.delta(w, [u])[0]) < 1e-9


def test_contains_is_open():
    c = Chart("a", 1, (0.0,), (1.0,))
    assert c.contains([0.5])
    assert not c.contains([0.0]) and not c.contains([1.0]) and not c.contains([np.nan])


@given(angles)
def test_circle_round_trip(u):
    m = circle()
    p = ManifoldPoint("a", [u])
    if abs(u) > 1e-12:
        assert round_trip_error(m, p, "b") < 1e-12


def test_circle_chart_seam_not_in_overlap():
    with pytest.raises(NotInOverlap):
        transition(ManifoldPoint("a", [0.0]), "b", circle())


@settings(max_examples=30)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3))
def test_sphere3_charts_agree(sigma):
    s = np.array(sigma)
    if np.sum(s * s) < 1e-6:
        return
    m = sphere3()
    south = transition(ManifoldPoint("north", s), "south", m)
    a = np.asarray(stereographic_inverse(jnp.asarray(s), 1))
    b = np.asarray(stereographic_inverse(jnp.asarray(south.coords), -1))
    assert np.allclose(a, b, atol=1e-12)
    assert abs(np.linalg.norm(a) - 1) < 1e-12
    assert np.allclose(np.asarray(stereographic(jnp.asarray(a))), s, atol=1e-9 * max(1, np.sum(s * s)))


def test_missing_chart_and_transition():
    m = circle()
    with pytest.raises(NoTransitionPath):
        m.chart("zzz")
    with pytest.raises(NoTransitionPath):
        m.transition_map("a", "a")
    with pytest.raises(PointOutsideDomain):
        m.point([4.0], "b")


def test_locate_falls_back_to_neighbour_chart():
    m = plane_polar()
    p = ManifoldPoint("polar", [2.0, 0.3])
    assert m.locate(p) is p
    assert m.locate(ManifoldPoint("polar", [-1.0, 0.3])) is None


def test_metric_pulled_back_to_polar():
    m = plane_polar()
    euclid = TensorFieldSpec((CO, CO), lambda x: jnp.eye(2) + 0.0 * x[0], "cart", 2)
    r, th = 1.7, 0.4
    val = evaluate(euclid, ManifoldPoint("polar", [r, th]), 1, m)
    assert np.allclose(val.value, np.diag([1.0, r * r]), atol=1e-12)
    # d/dr of g_thth = 2r, everything else constant
    expect = np.zeros((2, 2, 2))
    expect[1, 1, 0] = 2 * r
    assert np.allclose(val.d1, expect, atol=1e-12)


def test_vector_transport_to_polar():
    m = plane_polar()
    # the Cartesian field d/dx at angle th has polar components (cos th, -sin th / r)
    ex = TensorFieldSpec((CONTRA,), lambda x: jnp.array([1.0, 0.0]) + 0.0 * x[0], "cart", 2)
    r, th = 2.0, 0.7
    v = evaluate(ex, ManifoldPoint("polar", [r, th]), 0, m).value
    assert np.allclose(v, [math.cos(th), -math.sin(th) / r], atol=1e-12)


def test_evaluate_needs_manifold_for_foreign_chart():
    f = TensorFieldSpec((CO,), lambda x: x, "cart", 2)
    with pytest.raises(NoTransitionPath):
        evaluate(f, ManifoldPoint("polar", [1.0, 0.0]))


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_dual_matches_finite_difference(a, b):
    f = TensorFieldSpec((CO, CO), lambda x: jnp.array([[jnp.sin(x[0]) * x[1], x[0] ** 3],
                                                       [x[0] ** 3, jnp.exp(0.3 * x[1])]]), "c", 2)
    dual = evaluate(f, [a, b], 2)
    fd = evaluate(f, [a, b], 2, method="fd")
    assert np.allclose(dual.d1, fd.d1, atol=1e-7)
    assert np.allclose(dual.d2, fd.d2, atol=1e-7)
    # oracle: d/dx0 of sin(x0) x1
    assert abs(dual.d1[0, 0, 0] - math.cos(a) * b) < 1e-12
    assert abs(dual.d2[0, 1, 0, 0] - 6 * a) < 1e-12


def test_evaluate_shape_and_order_checks():
    f = TensorFieldSpec((CO, CO), lambda x: x, "c", 2)
    with pytest.raises(ValueError):
        evaluate(f, [0.0, 0.0])
    with pytest.raises(ValueError):
        evaluate(f, [0.0, 0.0], 3)
    with pytest.raises(ValueError):
        TensorFieldSpec(("up",), lambda x: x, "c", 2)


def test_signature_and_metric_checks():
    assert Signature.of(np.diag([-1.0, 1, 1, 1])) == Signature(1, 3)
    with pytest.raises(Degenerate):
        Signature.of(np.diag([1.0, 0.0]))
    spec = TensorFieldSpec((CO, CO), lambda x: jnp.diag(jnp.array([-1.0, 1.0])) + 0.0 * x[0], "c", 2)
    g = MetricField(spec, (1, 1))
    assert signature_at(g, [0.0, 0.0]) == (1, 1)
    with pytest.raises(SignatureMismatch):
        MetricField(spec, (0, 2)).matrix([0.0, 0.0])
    with pytest.raises(ValueError):
        MetricField(spec, (0, 3))
    skew = TensorFieldSpec((CO, CO), lambda x: jnp.array([[1.0, 0.5], [0.0, 1.0]]) + 0.0 * x[0], "c", 2)
    with pytest.raises(ValueError):
        MetricField(skew, (0, 2)).matrix([0.0, 0.0])
