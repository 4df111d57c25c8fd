"""Electromagnetic potential of an S^1-fibered spacetime and metric averaging."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import jax
import jax.numpy as jnp
import numpy as np

from ..charts import MetricField
from ..errors import FiberTangentDegenerate, FlowNotPeriodic
from ..multifiber import BundlePiece, MultiFiberBundle
from ..tensor import exterior_d1_fn, exterior_d2_fn, lie_metric_fn

LENGTH_NODES = 128
FLOW_STEPS = 512
CLOSURE_TOL = 1e-6


def _fiber_direction(bundle: MultiFiberBundle, piece: BundlePiece):
    """x -> d/ds Phi^-1(pi(x), s, w) at the parameters of x (S-fiber tangent)."""
    sf, wf = bundle.s_factor, bundle.w_factor

    def tangent(x):
        b = piece.pi(x)
        s = sf.coords(piece.h(x))
        w = wf.coords(piece.f(x))
        return jax.jacfwd(lambda t: piece.phi_inv(b, t, w))(s)[:, 0]

    return tangent


@dataclass(frozen=True, eq=False)
class Potential:
    """Unit oriented S^1-fiber tangent ``Y`` with ``Y_flat`` and ``F = d(Y_flat)``.

    All three are jax callables of home-chart coordinates.
    """

    bundle: MultiFiberBundle
    metric: MetricField
    orientation: int
    Y: Callable
    Y_flat: Callable
    F: Callable
    killing_residual: Optional[float] = None

    @property
    def is_killing(self) -> Optional[bool]:
        return None if self.killing_residual is None else self.killing_residual < 1e-9

    def at(self, x) -> dict:
        x = jnp.asarray(x, dtype=float)
        return {k: np.asarray(v) for k, v in _potential_kernel(self)(x).items()}

    def fiber_length(self, x, nodes: int = LENGTH_NODES) -> float:
        return fiber_length(self.bundle, self.metric, x, nodes)


@lru_cache(maxsize=None)
def _potential_kernel(pot: Potential):
    g = pot.metric.components

    def run(x):
        return {
            "Y": pot.Y(x),
            "Y_flat": pot.Y_flat(x),
            "F": pot.F(x),
            "dF": exterior_d2_fn(pot.F, x),
            "norm": pot.Y(x) @ g(x) @ pot.Y(x),
            "killing": lie_metric_fn(g, pot.Y, x),
        }

    return jax.jit(run)


def build_potential(bundle: MultiFiberBundle, metric: MetricField, orientation: int = 1, samples=None) -> Potential:
    """Electromagnetic potential; ``samples`` (optional) fixes the Killing verdict.

    Raises FiberTangentDegenerate if the S-fiber tangent is not timelike at a
    sample (the normalization g(Y, Y) = -1 is then impossible).
    """
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    g = metric.components
    piece = bundle.pieces[0]
    tangent = _fiber_direction(bundle, piece)
    sign = float(orientation * bundle.s_orientation)

    def Y(x):
        t = tangent(x)
        return sign * t / jnp.sqrt(-(t @ g(x) @ t))

    def Y_flat(x):
        return g(x) @ Y(x)

    def F(x):
        return exterior_d1_fn(Y_flat, x)

    pot = Potential(bundle, metric, orientation, Y, Y_flat, F)
    if samples is None:
        return pot
    worst = 0.0
    check = jax.jit(lambda x: (tangent(x) @ g(x) @ tangent(x)))
    for x in samples:
        x = bundle.coords(x)
        norm = float(check(jnp.asarray(x)))
        if not norm < -1e-10:
            raise FiberTangentDegenerate(f"S-fiber tangent not timelike at {x} (g(T, T) = {norm:.3e})")
        worst = max(worst, float(np.max(np.abs(pot.at(x)["killing"]))))
    return Potential(bundle, metric, orientation, Y, Y_flat, F, worst)


def fiber_length(bundle: MultiFiberBundle, metric: MetricField, x, nodes: int = LENGTH_NODES, which: str = "S") -> float:
    """Length of the S^1 fiber through x: periodic trapezoid in the angle.

    Uses sqrt(|g(T, T)|), so it also measures timelike fibers.
    """
    x = jnp.asarray(bundle.coords(x))
    piece = bundle.piece_at(x)
    factor = bundle.s_factor if which == "S" else bundle.w_factor
    if factor.kind != "s1":
        raise ValueError(f"{which}-factor is not a circle")
    return float(_length_kernel(bundle, piece, metric, nodes, which)(x))


@lru_cache(maxsize=None)
def _length_kernel(bundle, piece, metric, nodes, which):
    g = metric.components
    sf, wf = bundle.s_factor, bundle.w_factor
    angles = jnp.asarray(-math.pi + 2 * math.pi * np.arange(nodes) / nodes)

    def run(x):
        b = piece.pi(x)
        s = sf.coords(piece.h(x))
        w = wf.coords(piece.f(x))
        if which == "S":
            curve = lambda t: piece.phi_inv(b, jnp.reshape(t, (1,)), w)  # noqa: E731
        else:
            curve = lambda t: piece.phi_inv(b, s, jnp.reshape(t, (1,)))  # noqa: E731

        def speed(t):
            v = jax.jacfwd(curve)(t)
            return jnp.sqrt(jnp.abs(v @ g(curve(t)) @ v))

        return 2 * math.pi * jnp.mean(jax.vmap(speed)(angles))

    return jax.jit(run)


# -------------------------------------------------------------- averaging

@dataclass(frozen=True)
class AveragedMetric:
    value: np.ndarray  # averaged metric at x
    fiber_length: float
    closure_error: float
    norm_residual: float  # |gbar(Y, Y) + 1|
    killing_residual: float  # max |L_Y gbar|


def averaged_metric_fn(potential: Potential, length: float, nodes: int = LENGTH_NODES, steps: int = FLOW_STEPS) -> Callable:
    """``x -> gbar(x)``: mean over the flow of Y of the pulled-back metric.

    The flow and its Jacobian are integrated together with RK4 over one
    fiber length; the metric pullback is sampled at ``nodes`` equally spaced
    flow times (periodic trapezoid).  Differentiable in x.
    """
    if steps % nodes:
        raise ValueError("steps must be a multiple of nodes")
    g = potential.metric.components
    Y = potential.Y
    dY = jax.jacfwd(Y)
    h = length / steps
    sub = steps // nodes

    def rhs(state):
        y, J = state
        return Y(y), dY(y) @ J

    def rk4(state):
        k1 = rhs(state)
        k2 = rhs(jax.tree_util.tree_map(lambda s, k: s + 0.5 * h * k, state, k1))
        k3 = rhs(jax.tree_util.tree_map(lambda s, k: s + 0.5 * h * k, state, k2))
        k4 = rhs(jax.tree_util.tree_map(lambda s, k: s + h * k, state, k3))
        return jax.tree_util.tree_map(lambda s, a, b, c, d: s + h / 6 * (a + 2 * b + 2 * c + d), state, k1, k2, k3, k4)

    def node(carry, _):
        state, acc = carry
        y, J = state
        acc = acc + J.T @ g(y) @ J
        state = jax.lax.fori_loop(0, sub, lambda i, s: rk4(s), state)
        return (state, acc), None

    def gbar_and_end(x):
        n = x.shape[0]
        init = ((x, jnp.eye(n)), jnp.zeros((n, n)))
        (state, acc), _ = jax.lax.scan(node, init, None, length=nodes)
        return acc / nodes, state[0]

    return gbar_and_end


def average_metric(bundle: MultiFiberBundle, metric: MetricField, p, quadrature_nodes: int = LENGTH_NODES,
                   potential: Optional[Potential] = None) -> AveragedMetric:
    """Averaged metric at p with its diagnostics.

    Raises FlowNotPeriodic if the flow of Y does not return to p within
    1e-6 after one fiber length.
    """
    x = jnp.asarray(bundle.coords(p))
    pot = potential or build_potential(bundle, metric)
    length = fiber_length(bundle, metric, x)
    steps = FLOW_STEPS if FLOW_STEPS % quadrature_nodes == 0 else quadrature_nodes * max(1, FLOW_STEPS // quadrature_nodes)
    fn = averaged_metric_fn(pot, length, quadrature_nodes, steps)
    gbar, end = jax.jit(fn)(x)
    closure = bundle.distance(np.asarray(end), np.asarray(x))
    if closure > CLOSURE_TOL:
        raise FlowNotPeriodic(f"flow of Y misses its start by {closure:.2e} after length {length:.6f}")

    def gbar_only(y):
        return fn(y)[0]

    killing = np.asarray(jax.jit(lambda y: lie_metric_fn(gbar_only, pot.Y, y))(x))
    yx = np.asarray(pot.Y(x))
    gbar = np.asarray(gbar)
    return AveragedMetric(gbar, length, closure, abs(float(yx @ gbar @ yx) + 1.0), float(np.max(np.abs(killing))))
