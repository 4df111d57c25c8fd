import math

import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfb.charts import CO, MetricField, TensorFieldSpec
from mfb.errors import Degenerate
from mfb.tensor import (
    covariant_accel,
    curvature,
    divergence2,
    divergence_vector,
    einstein_field,
    exterior_d_1form,
    exterior_d_2form,
    lie_metric,
    musical,
)


def metric(fn, n, sig):
    return MetricField(TensorFieldSpec((CO, CO), fn, "c", n), sig)


def sphere2(r=1.0):
    return metric(lambda x: jnp.diag(jnp.array([r * r, (r * jnp.sin(x[0])) ** 2])), 2, (0, 2))


MASS = 1.0


def schwarzschild():
    def g(x):
        f = 1 - 2 * MASS / x[1]
        return jnp.diag(jnp.array([-f, 1 / f, x[1] ** 2, (x[1] * jnp.sin(x[2])) ** 2]))

    return metric(g, 4, (1, 3))


thetas = st.floats(0.3, 2.8)


@settings(max_examples=15, deadline=None)
@given(thetas, st.floats(0.5, 3.0))
def test_sphere2_christoffel_and_curvature(th, r):
    c = curvature(sphere2(r), [th, 0.2])
    assert abs(c.christoffel[0, 1, 1] + math.sin(th) * math.cos(th)) < 1e-12
    assert abs(c.christoffel[1, 0, 1] - 1 / math.tan(th)) < 1e-12
    assert abs(c.christoffel[1, 1, 0] - 1 / math.tan(th)) < 1e-12
    # Gauss curvature 1/r^2 in two dimensions: S = 2/r^2, G = 0
    assert abs(c.scalar - 2 / r ** 2) < 1e-10
    assert np.max(np.abs(c.einstein)) < 1e-10


@settings(max_examples=10, deadline=None)
@given(st.floats(2.5, 10.0), thetas)
def test_schwarzschild_ricci_flat_with_kretschmann(r, th):
    c = curvature(schwarzschild(), [0.0, r, th, 0.1])
    assert np.max(np.abs(c.ricci)) < 1e-10
    low = c.riemann_lowered
    up = np.einsum("ai,bj,ck,dl,ijkl->abcd", *(np.linalg.inv(c.metric),) * 4, low)
    assert abs(np.sum(low * up) - 48 * MASS ** 2 / r ** 6) < 1e-9


def test_riemann_symmetries_on_schwarzschild():
    low = curvature(schwarzschild(), [0.0, 3.3, 1.1, 0.0]).riemann_lowered
    assert np.max(np.abs(low + low.transpose(0, 2, 1, 3))) < 1e-12  # derivative pair
    assert np.max(np.abs(low + low.transpose(3, 1, 2, 0))) < 1e-12  # outer slots
    assert np.max(np.abs(low - low.transpose(2, 3, 0, 1))) < 1e-12  # pair symmetry
    cyc = low + low.transpose(0, 2, 3, 1) + low.transpose(0, 3, 1, 2)
    assert np.max(np.abs(cyc)) < 1e-12


def test_degenerate_metric_rejected():
    g = metric(lambda x: jnp.diag(jnp.array([1.0, 0.0])) + 0.0 * x[0], 2, (0, 2))
    with pytest.raises(Degenerate):
        curvature(g, [0.0, 0.0])


def test_musical_round_trip():
    g = schwarzschild()
    x = [0.0, 4.0, 1.0, 0.0]
    v = np.array([1.0, 2.0, -0.5, 0.3])
    low = musical(g, x, v, 0, "lower")
    f = 1 - 2 / 4.0
    assert np.allclose(low, [-f, 2 / f, -0.5 * 16, 0.3 * 16 * math.sin(1.0) ** 2])
    assert np.allclose(musical(g, x, low, 0, "raise"), v)
    with pytest.raises(IndexError):
        musical(g, x, v, 1, "raise")
    with pytest.raises(ValueError):
        musical(g, x, v, 0, "sideways")


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_exterior_derivative_oracle(a, b):
    def omega(x):
        return jnp.array([x[0] * x[1], x[0] ** 2, jnp.sin(x[1])])

    d = exterior_d_1form(omega, [a, b, 0.0])
    assert abs(d[0, 1] - a) < 1e-12  # 2x - x
    assert abs(d[1, 2] - math.cos(b)) < 1e-12
    assert np.allclose(d, -d.T)
    assert np.max(np.abs(exterior_d_2form(lambda x: exterior_d_1form_fn(omega, x), [a, b, 0.3]))) < 1e-12


def exterior_d_1form_fn(omega, x):
    from mfb.tensor import exterior_d1_fn

    return exterior_d1_fn(omega, x)


def test_lie_derivative_rotation_and_dilation():
    flat = metric(lambda x: jnp.eye(2) + 0.0 * x[0], 2, (0, 2))
    x = [0.7, -1.2]
    assert np.max(np.abs(lie_metric(flat, lambda y: jnp.array([-y[1], y[0]]), x))) < 1e-14
    assert np.allclose(lie_metric(flat, lambda y: y, x), 2 * np.eye(2))


def test_geodesic_accel_and_divergence():
    s2 = sphere2()
    # the equator's tangent d/dphi is geodesic there; a latitude circle is not
    assert np.max(np.abs(covariant_accel(s2, lambda y: jnp.array([0.0, 1.0]), [math.pi / 2, 0.0]))) < 1e-14
    th = 0.8
    acc = covariant_accel(s2, lambda y: jnp.array([0.0, 1.0]), [th, 0.0])
    assert abs(acc[0] + math.sin(th) * math.cos(th)) < 1e-12
    # div of d/dtheta on the sphere is cot(theta)
    assert abs(divergence_vector(s2, lambda y: jnp.array([1.0, 0.0]), [th, 0.0]) - 1 / math.tan(th)) < 1e-12


def test_contracted_bianchi_on_warped_product():
    def g(x):
        a = 1 + 0.3 * jnp.sin(x[0]) + 0.1 * x[1] ** 2
        return jnp.diag(jnp.array([-1.0, a, a * jnp.cosh(x[0]), 2 + jnp.cos(x[1])]))

    m = metric(g, 4, (1, 3))
    for x in ([0.1, 0.2, 0.0, 0.0], [0.7, -0.4, 1.0, 2.0]):
        assert np.max(np.abs(divergence2(m, x, einstein_field(m)))) < 1e-10
