import math
from functools import lru_cache

import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfb.errors import FiberMetricNotPositive, NotRoundSphere
from mfb.harness.scenarios import builtin
from mfb.kaluza import fiber_spectrum, frame_pullback
from mfb.kaluza.fiberspec import circle_laplacian, round_radius


@lru_cache(maxsize=None)
def sc(name):
    return builtin(name)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 20.0), st.integers(8, 64))
def test_circle_laplacian_discrete_oracle(length, n):
    vals = np.sort(np.linalg.eigvalsh(circle_laplacian(length, n)))
    h = length / n
    exact = np.sort(4 / h ** 2 * np.sin(np.pi * np.arange(n) / n) ** 2)
    assert np.allclose(vals, exact, atol=1e-9 * exact.max())


@settings(max_examples=5, deadline=None)
@given(st.floats(-1.0, 1.0))
def test_s1_spectrum_on_warped_circle(X):
    s = sc("warped_kk")
    x = [0.0, X, 0.0, 0.0, 0.0, 0.0]
    spec = fiber_spectrum(s.bundle, s.metric, x, "s1", 256)
    length = 2 * math.pi * (1 + 0.2 * math.cos(X))
    assert abs(spec.length - length) < 1e-12
    assert spec.eigenvalues[0] == 0.0
    assert list(spec.multiplicities[:3]) == [1, 2, 2]
    assert abs(spec.eigenvalues[1] / (2 * math.pi / length) ** 2 - 1) < 1e-3


def test_timelike_circle_rejected():
    s = sc("warped_kk")
    with pytest.raises(FiberMetricNotPositive):
        fiber_spectrum(s.bundle, s.metric, np.zeros(6), "s1", 64, which="S")
    with pytest.raises(ValueError):
        fiber_spectrum(s.bundle, s.metric, np.zeros(6), "s3")


@settings(max_examples=5, deadline=None)
@given(st.floats(-1.0, 1.0))
def test_s3_levels(X):
    s = sc("product_r13_s1_s3")
    x = np.zeros(8)
    x[1] = X
    r = 2 + 0.2 * math.sin(X)
    spec = fiber_spectrum(s.bundle, s.metric, x, "s3", 5)
    assert abs(spec.radius - r) < 1e-9
    k = np.arange(5)
    assert np.allclose(spec.eigenvalues, k * (k + 2) / r ** 2)
    assert list(spec.multiplicities) == [1, 4, 9, 16, 25]


def test_roundness_gate():
    s = sc("product_r13_s1_s3")
    g = s.metric.components
    squashed = lambda y: g(y).at[5, 5].multiply(1.01)
    with pytest.raises(NotRoundSphere):
        round_radius(s.bundle, squashed, np.zeros(8))


def test_frame_pullback_product_and_twisted():
    for name in ("product_r13_s1_s3", "twisted_phi"):
        s = sc(name)
        fp = frame_pullback(s.bundle, s.metric, s.samples(np.random.default_rng(0), 5), s.frame)
        assert fp.passed and fp.residual < 1e-8 and fp.gram_min > 1e-8
        assert fp.pulled.shape == (5, 3, 8)
    with pytest.raises(ValueError):
        frame_pullback(sc("warped_kk").bundle, sc("warped_kk").metric, np.zeros((1, 6)))
