"""Geodesic and Lorentz-force integrators (fixed-step RK4)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import jax
import jax.numpy as jnp
import numpy as np

from ..charts import ChartManifold, ManifoldPoint, MetricField
from ..errors import LeftAllCharts
from ..multifiber import MultiFiberBundle, horizontal_projector_fn
from ..tensor import christoffel_fn
from .fluid import LORENTZ_SIGN

CHUNK = 2000


@dataclass
class Trajectory:
    times: np.ndarray
    coords: np.ndarray  # unwrapped coordinates, one row per time
    velocities: np.ndarray
    chart: str = "home"
    conserved: dict = field(default_factory=dict)
    manifold: Optional[ChartManifold] = None

    def drift(self, name: str) -> float:
        c = self.conserved[name]
        return float(np.max(np.abs(c - c[0]), initial=0.0))

    def wrapped(self) -> np.ndarray:
        if self.manifold is None:
            return self.coords
        chart = self.manifold.chart(self.chart)
        return np.array([chart.wrap(x) for x in self.coords])

    def to_csv(self, path, names=None):
        n = self.coords.shape[1]
        names = list(names or [f"x{i}" for i in range(n)])
        keys = list(self.conserved)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(["t", "chart"] + names + [f"d{c}" for c in names] + keys)
            for i, (x, v) in enumerate(zip(self.wrapped(), self.velocities)):
                row = [repr(float(self.times[i])), self.chart]
                row += [repr(float(a)) for a in x] + [repr(float(a)) for a in v]
                row += [repr(float(self.conserved[k][i])) for k in keys]
                out.writerow(row)


def _fn(metric):
    return metric.components if isinstance(metric, MetricField) else metric


def _rk4_runner(accel: Callable, step: float, count: int):
    def rhs(state):
        x, v = state
        return v, accel(x, v)

    def one(state, _):
        k1 = rhs(state)
        k2 = rhs(jax.tree_util.tree_map(lambda s, k: s + 0.5 * step * k, state, k1))
        k3 = rhs(jax.tree_util.tree_map(lambda s, k: s + 0.5 * step * k, state, k2))
        k4 = rhs(jax.tree_util.tree_map(lambda s, k: s + step * k, state, k3))
        new = jax.tree_util.tree_map(lambda s, a, b, c, d: s + step / 6 * (a + 2 * b + 2 * c + d), state, k1, k2, k3, k4)
        return new, new

    def run(x, v):
        _, (xs, vs) = jax.lax.scan(one, (x, v), None, length=count)
        return xs, vs

    return jax.jit(run)


def _integrate(accel, g, x0, v0, t_end, step, conserved, manifold, chart):
    if not step > 0:
        raise ValueError("step must be positive")
    total = int(round(t_end / step))
    if abs(total * step - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError("t_end must be a whole number of steps")
    x = jnp.asarray(x0, dtype=float)
    v = jnp.asarray(v0, dtype=float)
    xs, vs = [np.asarray(x)[None]], [np.asarray(v)[None]]
    runners = {}
    done = 0
    while done < total:
        n = min(CHUNK, total - done)
        if n not in runners:
            runners[n] = _rk4_runner(accel, step, n)
        cx, cv = runners[n](x, v)
        cx, cv = np.asarray(cx), np.asarray(cv)
        if manifold is not None:
            for i, y in enumerate(cx):
                if manifold.locate(ManifoldPoint(chart, manifold.chart(chart).wrap(y))) is None:
                    raise LeftAllCharts(f"trajectory left every chart at t = {(done + i + 1) * step:.6g}: {y}")
        xs.append(cx)
        vs.append(cv)
        x, v = jnp.asarray(cx[-1]), jnp.asarray(cv[-1])
        done += n
    coords = np.concatenate(xs)
    vels = np.concatenate(vs)
    times = step * np.arange(total + 1)
    cons = {}
    gx = jax.jit(jax.vmap(g))(jnp.asarray(coords))
    cons["g(v,v)"] = np.einsum("ni,nij,nj->n", vels, gx, vels)
    for name, K in conserved.items():
        kx = np.asarray(jax.jit(jax.vmap(K))(jnp.asarray(coords)))
        cons[f"g(v,{name})"] = np.einsum("ni,nij,nj->n", vels, gx, kx)
    return Trajectory(times, coords, vels, chart, cons, manifold)


def _killing_dict(killing):
    if isinstance(killing, dict):
        return dict(killing)
    return {f"K{i}": k for i, k in enumerate(killing)}


def geodesic_integrate(metric, x0, v0, t_end: float, step: float, killing=(), manifold: Optional[ChartManifold] = None,
                       chart: str = "home") -> Trajectory:
    """RK4 for x'' = -Gamma(x)(x', x'); records g(v, v) and g(v, K) per Killing field.

    Raises LeftAllCharts if a recorded point lies in no chart of ``manifold``.
    """
    g = _fn(metric)

    def accel(x, v):
        return -jnp.einsum("kij,i,j->k", christoffel_fn(g, x), v, v)

    return _integrate(accel, g, x0, v0, t_end, step, _killing_dict(killing), manifold, chart)


def lorentz_integrate(base_metric, F_base: Callable, charge_ratio: float, x0, u0, t_end: float, step: float,
                      sign: float = LORENTZ_SIGN, killing=(), manifold: Optional[ChartManifold] = None,
                      chart: str = "home") -> Trajectory:
    """RK4 for nabla_u u = sign * q * eF(u) on the base, with eF(u)^i = g^ik F_kj u^j."""
    g = _fn(base_metric)
    q = float(charge_ratio)

    def accel(x, v):
        geo = -jnp.einsum("kij,i,j->k", christoffel_fn(g, x), v, v)
        return geo + sign * q * jnp.linalg.solve(g(x), F_base(x) @ v)

    return _integrate(accel, g, x0, u0, t_end, step, _killing_dict(killing), manifold, chart)


# ------------------------------------------------------------ base reduction

@dataclass(frozen=True, eq=False)
class BaseFields:
    """Base metric and field strength pulled back along the section through a fiber point.

    ``section(b)`` is the total-space point over b with the fiber parameters
    of the reference point; ``lift(b, w)`` is the horizontal lift of w.
    """

    metric: Callable
    F: Callable
    section: Callable
    lift: Callable
    project: Callable


def base_fields(bundle: MultiFiberBundle, metric, potential, x_ref) -> BaseFields:
    g = _fn(metric)
    x_ref = jnp.asarray(bundle.coords(x_ref))
    piece = bundle.piece_at(x_ref)
    s0 = bundle.s_factor.coords(piece.h(x_ref))
    w0 = bundle.w_factor.coords(piece.f(x_ref))
    proj = horizontal_projector_fn(bundle, g, piece)

    def section(b):
        return piece.phi_inv(b, s0, w0)

    def lift_matrix(b):
        return proj(section(b)) @ jax.jacfwd(section)(b)

    def g_base(b):
        L = lift_matrix(b)
        return L.T @ g(section(b)) @ L

    def F_base(b):
        L = lift_matrix(b)
        return L.T @ potential.F(section(b)) @ L

    def lift(b, w):
        return lift_matrix(b) @ w

    return BaseFields(g_base, F_base, section, lift, piece.pi)


def fiber_start(bundle, metric, potential, x0, u0, charge_ratio):
    """Initial 5D velocity X = lift(u0) + q Y at x0 (u0 a base vector)."""
    bf = base_fields(bundle, metric, potential, x0)
    b0 = bf.project(jnp.asarray(x0, dtype=float))
    lifted = proj_at(bundle, metric, x0) @ (jax.jacfwd(bf.section)(b0) @ jnp.asarray(u0, dtype=float))
    return np.asarray(lifted + charge_ratio * potential.Y(jnp.asarray(x0, dtype=float)))


def proj_at(bundle, metric, x):
    x = jnp.asarray(x, dtype=float)
    return horizontal_projector_fn(bundle, _fn(metric), bundle.piece_at(x))(x)


@dataclass
class Comparison:
    geodesic: Trajectory
    lorentz: Trajectory
    projected: np.ndarray
    deviation: float
    charge_drift: float


def compare_geodesic_lorentz(bundle, metric, potential, x0, u0, charge_ratio: float, t_end: float, step: float,
                             sign: float = LORENTZ_SIGN, manifold=None) -> Comparison:
    """Integrate the lifted geodesic and the base Lorentz curve; sup-distance of the projections."""
    x0 = np.asarray(x0, dtype=float)
    bf = base_fields(bundle, metric, potential, x0)
    v0 = fiber_start(bundle, metric, potential, x0, u0, charge_ratio)
    geo = geodesic_integrate(metric, x0, v0, t_end, step, {"Y": potential.Y}, manifold)
    b0 = np.asarray(bf.project(jnp.asarray(x0)))
    lor = lorentz_integrate(bf.metric, bf.F, charge_ratio, b0, u0, t_end, step, sign)
    projected = np.asarray(jax.jit(jax.vmap(bf.project))(jnp.asarray(geo.coords)))
    dev = float(np.max(np.abs(projected - lor.coords)))
    return Comparison(geo, lor, projected, dev, geo.drift("g(v,Y)"))


def calibrate_lorentz_sign(bundle, metric, potential, x0, u0, charge_ratio: float = 0.5, t_end: float = 2.0,
                           step: float = 1e-2) -> dict:
    """Which Lorentz sign reproduces the projected geodesic; both deviations are kept."""
    base = compare_geodesic_lorentz(bundle, metric, potential, x0, u0, charge_ratio, t_end, step, 1.0)
    bf = base_fields(bundle, metric, potential, x0)
    b0 = np.asarray(bf.project(jnp.asarray(x0, dtype=float)))
    other = lorentz_integrate(bf.metric, bf.F, charge_ratio, b0, u0, t_end, step, -1.0)
    dev = {1.0: base.deviation, -1.0: float(np.max(np.abs(base.projected - other.coords)))}
    best = min(dev, key=dev.get)
    return {"sign": best, "deviation_plus": dev[1.0], "deviation_minus": dev[-1.0], "matches_default": best == LORENTZ_SIGN}


# ------------------------------------------------------------------ Larmor

def larmor_closed_form(B: float, q: float, x0, u0, times) -> np.ndarray:
    """Exact solution for eta with F_xy = -B: the transverse velocity rotates at omega = qB."""
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    tau = np.asarray(times, dtype=float)
    omega = q * B
    z0 = x0[1] + 1j * x0[2]
    w0 = u0[1] + 1j * u0[2]
    if omega == 0:
        z = z0 + w0 * tau
    else:
        z = z0 + w0 * (np.exp(1j * omega * tau) - 1) / (1j * omega)
    out = np.empty((tau.size, 4))
    out[:, 0] = x0[0] + u0[0] * tau
    out[:, 1] = z.real
    out[:, 2] = z.imag
    out[:, 3] = x0[3] + u0[3] * tau
    return out


def larmor_radius(B: float, q: float, u0) -> float:
    return float(math.hypot(u0[1], u0[2]) / abs(q * B))


def larmor_center(B: float, q: float, x0, u0) -> complex:
    omega = q * B
    return complex(x0[1] + 1j * x0[2]) + complex(u0[1] + 1j * u0[2]) * 1j / omega


def measured_radius_error(traj: Trajectory, B: float, q: float, x0, u0) -> float:
    c = larmor_center(B, q, x0, u0)
    r = np.abs(traj.coords[:, 1] + 1j * traj.coords[:, 2] - c)
    return float(np.max(np.abs(r - larmor_radius(B, q, u0))))


def unit_base_velocity(speed: float, direction=(1.0, 0.0, 0.0)) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    gamma = 1.0 / math.sqrt(1.0 - speed * speed)
    return np.concatenate([[gamma], gamma * speed * d])
