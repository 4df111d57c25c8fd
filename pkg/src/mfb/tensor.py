"""Levi-Civita calculus at points, driven by forward-mode differentiation.

Conventions (fixed once, calibrated by Ric = +2g on the unit 3-sphere):

    Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij)
    R^l_ijk    = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik
    Ric_jk     = R^i_ijk
    G          = Ric - S/2 g,   eG = g^-1 G

The ``*_fn`` helpers are pure jax functions of ``(metric components, x)``;
they compose under further differentiation and are what the physics layer
builds on.  The public operators wrap them for a single point.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import jax
import jax.numpy as jnp
import numpy as np

from .charts import (
    CO,
    CONTRA,
    ChartManifold,
    ManifoldPoint,
    MetricField,
    TensorFieldSpec,
    check_metric_matrix,
    pulled_back,
)
from .errors import NoTransitionPath


# ---------------------------------------------------------------- jax kernels

def christoffel_fn(g: Callable, x):
    dg = jax.jacfwd(g)(x)  # dg[i, j, k] = d_k g_ij
    low = 0.5 * (jnp.einsum("ljk->lkj", dg) + dg - jnp.einsum("jkl->ljk", dg))
    # low[l, i, j] = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
    return jnp.einsum("kl,lij->kij", jnp.linalg.inv(g(x)), low)


def riemann_fn(g: Callable, x):
    gam = christoffel_fn(g, x)
    dgam = jax.jacfwd(lambda y: christoffel_fn(g, y))(x)  # dgam[l, j, k, i] = d_i Gamma^l_jk
    d_term = jnp.einsum("ljki->lijk", dgam)
    return (
        d_term
        - jnp.einsum("lijk->ljik", d_term)
        + jnp.einsum("lim,mjk->lijk", gam, gam)
        - jnp.einsum("ljm,mik->lijk", gam, gam)
    )


def ricci_fn(g: Callable, x):
    return jnp.einsum("iijk->jk", riemann_fn(g, x))


def einstein_fn(g: Callable, x):
    gx = g(x)
    ric = ricci_fn(g, x)
    s = jnp.einsum("ij,ij->", jnp.linalg.inv(gx), ric)
    return ric - 0.5 * s * gx


def einstein_contra_fn(g: Callable, x):
    gi = jnp.linalg.inv(g(x))
    return gi @ einstein_fn(g, x) @ gi


def divergence_contra_fn(g: Callable, t_contra: Callable, x):
    """(div T)^j = d_i T^ij + Gamma^i_ik T^kj + Gamma^j_ik T^ik."""
    gam = christoffel_fn(g, x)
    t = t_contra(x)
    dt = jax.jacfwd(t_contra)(x)  # dt[i, j, k] = d_k T^ij
    return jnp.einsum("iji->j", dt) + jnp.einsum("iik,kj->j", gam, t) + jnp.einsum("jik,ik->j", gam, t)


def divergence_vector_fn(g: Callable, v: Callable, x):
    """div V = d_i V^i + Gamma^i_ik V^k."""
    gam = christoffel_fn(g, x)
    return jnp.trace(jax.jacfwd(v)(x)) + jnp.einsum("iik,k->", gam, v(x))


def covariant_derivative_fn(g: Callable, v: Callable, x):
    """(nabla V)[k, i] = nabla_i V^k."""
    return jax.jacfwd(v)(x) + jnp.einsum("kij,j->ki", christoffel_fn(g, x), v(x))


def accel_fn(g: Callable, v: Callable, x):
    return covariant_derivative_fn(g, v, x) @ v(x)


def lie_metric_fn(g: Callable, v: Callable, x):
    dg = jax.jacfwd(g)(x)
    gx = g(x)
    dv = jax.jacfwd(v)(x)  # dv[k, i] = d_i V^k
    vx = v(x)
    return jnp.einsum("k,ijk->ij", vx, dg) + jnp.einsum("kj,ki->ij", gx, dv) + jnp.einsum("ik,kj->ij", gx, dv)


def exterior_d1_fn(omega: Callable, x):
    d = jax.jacfwd(omega)(x)  # d[j, i] = d_i omega_j
    return d.T - d


def exterior_d2_fn(form: Callable, x):
    d = jax.jacfwd(form)(x)  # d[j, k, i] = d_i F_jk
    return jnp.einsum("jki->ijk", d) + jnp.einsum("kij->ijk", d) + jnp.einsum("ijk->ijk", d)


def bracket_fn(a: Callable, b: Callable, x):
    """[A, B]^k = A^i d_i B^k - B^i d_i A^k."""
    return jax.jacfwd(b)(x) @ a(x) - jax.jacfwd(a)(x) @ b(x)


# ------------------------------------------------------------ point wrappers

@dataclass(frozen=True)
class CurvatureBundle:
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    einstein: np.ndarray
    einstein_endo: np.ndarray
    metric: np.ndarray

    @property
    def riemann_lowered(self) -> np.ndarray:
        return np.einsum("am,mijk->aijk", self.metric, self.riemann)


@lru_cache(maxsize=None)
def _curvature_kernel(g: Callable):
    def run(x):
        gx = g(x)
        gi = jnp.linalg.inv(gx)
        gam = christoffel_fn(g, x)
        riem = riemann_fn(g, x)
        ric = jnp.einsum("iijk->jk", riem)
        s = jnp.einsum("ij,ij->", gi, ric)
        ein = ric - 0.5 * s * gx
        return gx, gam, riem, ric, s, ein, gi @ ein

    return jax.jit(run)


def _resolve(field, point, manifold: Optional[ChartManifold]):
    """Component function and coordinates for evaluating ``field`` at ``point``."""
    spec = field.tensor if isinstance(field, MetricField) else field
    if isinstance(spec, TensorFieldSpec):
        if isinstance(point, ManifoldPoint) and point.chart != spec.chart:
            if manifold is None:
                raise NoTransitionPath(f"field in chart {spec.chart!r}, point in {point.chart!r}")
            manifold.transition(point, spec.chart)
            spec = pulled_back(spec, manifold, point.chart)
        fn = spec.components
    else:
        fn = field
    coords = point.coords if isinstance(point, ManifoldPoint) else point
    return fn, jnp.asarray(coords, dtype=float)


def _metric_at(metric, point, manifold):
    g, x = _resolve(metric, point, manifold)
    gx = np.asarray(_jitted(g)(x))
    sig = metric.declared_signature if isinstance(metric, MetricField) else None
    check_metric_matrix(gx, sig)
    return g, x, gx


@lru_cache(maxsize=None)
def _jitted(fn: Callable):
    return jax.jit(fn)


@lru_cache(maxsize=None)
def _jitted2(kernel: Callable, a: Callable, b: Callable):
    return jax.jit(lambda x: kernel(a, b, x))


def curvature(metric, point, manifold: Optional[ChartManifold] = None) -> CurvatureBundle:
    """Christoffel symbols, Riemann, Ricci, scalar and Einstein curvature."""
    g, x, _ = _metric_at(metric, point, manifold)
    gx, gam, riem, ric, s, ein, endo = (np.asarray(a) for a in _curvature_kernel(g)(x))
    return CurvatureBundle(gam, riem, ric, float(s), ein, endo, gx)


def musical(metric, point, tensor, slot: int, direction: str, manifold: Optional[ChartManifold] = None):
    """Raise or lower one slot of a component array with g^-1 or g."""
    _, _, gx = _metric_at(metric, point, manifold)
    t = np.asarray(tensor, dtype=float)
    if not 0 <= slot < t.ndim:
        raise IndexError(f"slot {slot} out of range for rank {t.ndim}")
    if direction == "lower":
        mat = gx
    elif direction == "raise":
        mat = np.linalg.inv(gx)
    else:
        raise ValueError("direction must be 'raise' or 'lower'")
    return np.moveaxis(np.tensordot(mat, t, axes=([1], [slot])), 0, slot)


def _as_contra2(field, g):
    """Component function of a 2-tensor field with both slots raised."""
    if isinstance(field, TensorFieldSpec):
        fn, var = field.components, field.variance
    else:
        fn, var = field, (CONTRA, CONTRA)
    if len(var) != 2:
        raise ValueError("divergence2 needs a 2-tensor")

    def contra(x):
        t = fn(x)
        gi = jnp.linalg.inv(g(x))
        if var[0] == CO:
            t = gi @ t
        if var[1] == CO:
            t = t @ gi
        return t

    return contra


def divergence2(metric, point, T, manifold: Optional[ChartManifold] = None) -> np.ndarray:
    """Vector ``(div T)^j = nabla_i T^ij``.

    ``T`` is a :class:`TensorFieldSpec` (any variance) in the metric's chart
    or a bare callable returning contravariant components.
    """
    g, x, _ = _metric_at(metric, point, manifold)
    return np.asarray(_jitted2(divergence_contra_fn, g, _contra_cached(T, g))(x))


@lru_cache(maxsize=None)
def _contra_cached(T, g):
    return _as_contra2(T, g)


def exterior_d_1form(omega, point, manifold: Optional[ChartManifold] = None) -> np.ndarray:
    """``(d omega)_ij = d_i omega_j - d_j omega_i``."""
    fn, x = _resolve(omega, point, manifold)
    return np.asarray(_jitted_d1(fn)(x))


@lru_cache(maxsize=None)
def _jitted_d1(fn):
    return jax.jit(lambda x: exterior_d1_fn(fn, x))


def exterior_d_2form(form, point, manifold: Optional[ChartManifold] = None) -> np.ndarray:
    """Cyclic sum ``d_i F_jk + d_j F_ki + d_k F_ij`` (zero for closed F)."""
    fn, x = _resolve(form, point, manifold)
    return np.asarray(jax.jit(lambda y: exterior_d2_fn(fn, y))(x))


def _vector_fn(V):
    return V.components if isinstance(V, TensorFieldSpec) else V


def lie_metric(metric, V, point, manifold: Optional[ChartManifold] = None) -> np.ndarray:
    """``(L_V g)_ij``; vanishes exactly when V is Killing at the point."""
    g, x, _ = _metric_at(metric, point, manifold)
    return np.asarray(_jitted2(lie_metric_fn, g, _vector_fn(V))(x))


def covariant_accel(metric, X, point, manifold: Optional[ChartManifold] = None) -> np.ndarray:
    """``(nabla_X X)^k``."""
    g, x, _ = _metric_at(metric, point, manifold)
    return np.asarray(_jitted2(accel_fn, g, _vector_fn(X))(x))


def divergence_vector(metric, V, point, manifold: Optional[ChartManifold] = None) -> float:
    g, x, _ = _metric_at(metric, point, manifold)
    return float(_jitted2(divergence_vector_fn, g, _vector_fn(V))(x))


def einstein_field(metric: MetricField, name: str = "G") -> TensorFieldSpec:
    """The Einstein tensor as a covariant field in the metric's chart."""
    g = metric.components
    return TensorFieldSpec((CO, CO), lambda x: einstein_fn(g, x), metric.chart, metric.dimension, name)
