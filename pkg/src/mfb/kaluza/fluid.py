"""Fluid decomposition of the Einstein tensor and the dynamics residuals.

Sign conventions used here:

* X0 spans the timelike eigenline of eG_H with eigenvalue -mu, so
  ``mu = G(X0, X0)`` (positive for g(X0, X0) = -1).
* ``e = G(Y, X0)``, ``gamma = G(Y, Y)``, ``alpha = gamma - e^2/mu``.
* The Lorentz term is ``mu nabla_X0 X0 = LORENTZ_SIGN * e * eF(X0)`` with
  ``eF(v)^i = g^ik F_kj v^j``; the sign is calibrated against the projected
  five-dimensional geodesic (see dynamics.calibrate_lorentz_sign).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import jax
import jax.numpy as jnp
import numpy as np

from ..errors import NonUniqueEigenspace, NotFluidForm
from ..report import ResidualReport
from ..tensor import (
    accel_fn,
    bracket_fn,
    divergence_contra_fn,
    divergence_vector_fn,
    ricci_fn,
)

LORENTZ_SIGN = 1.0
DUST_TOL = 1e-8
PERFECT_TOL = 1e-8
BLOCK_TOL = 1e-6
EIGEN_TOL = 1e-9


@dataclass(frozen=True)
class FluidDecomposition:
    mu: float
    e: float
    gamma: float
    alpha: float
    X0: np.ndarray
    X: np.ndarray
    P: np.ndarray
    P_v: np.ndarray
    P_h: np.ndarray
    is_dust: bool
    is_perfect: bool


def _sym(a):
    return 0.5 * (a + a.T)


def decompose(G, Y, g, projector, time_reference) -> FluidDecomposition:
    """Split a symmetric (0,2) tensor ``G`` at a point into fluid data.

    ``projector`` is the matrix of pr_H; ``time_reference`` a future-pointing
    vector (X0 is chosen with g(X0, ref) < 0).
    """
    G = _sym(np.asarray(G, dtype=float))
    g = np.asarray(g, dtype=float)
    Y = np.asarray(Y, dtype=float)
    proj = np.asarray(projector, dtype=float)
    ginv = np.linalg.inv(g)
    eG = ginv @ G
    # orthonormal-ish basis of H = image of pr_H
    u, sv, _ = np.linalg.svd(proj)
    hb = u[:, : int(np.sum(sv > 1e-9))]
    m = np.linalg.lstsq(hb, proj @ eG @ hb, rcond=None)[0]
    vals, vecs = np.linalg.eig(m)
    timelike = []
    for k in range(len(vals)):
        if abs(vals[k].imag) > 1e-9 * max(1.0, abs(vals[k])):
            continue
        v = hb @ np.real(vecs[:, k])
        n = v @ g @ v
        if n < 0:
            timelike.append((float(vals[k].real), v / np.sqrt(-n)))
    if not timelike:
        raise NotFluidForm("eG_H has no timelike eigendirection")
    lam, x0 = timelike[0]
    if not lam < 0:
        raise NotFluidForm(f"timelike eigenvalue {lam:.3e} of eG_H is not negative")
    close = [k for k in range(len(vals)) if abs(vals[k] - lam) <= EIGEN_TOL * max(1.0, abs(lam))]
    if len(close) > 1 or len(timelike) > 1:
        raise NonUniqueEigenspace(f"timelike eigenvalue {lam:.6e} is not simple")
    if time_reference is not None and x0 @ g @ np.asarray(time_reference, dtype=float) > 0:
        x0 = -x0
    mu = float(x0 @ G @ x0)
    e = float(Y @ G @ x0)
    gamma = float(Y @ G @ Y)
    alpha = gamma - e * e / mu
    x = x0 + (e / mu) * Y
    xf, yf = g @ x, g @ Y
    P = G - mu * np.outer(xf, xf) - alpha * np.outer(yf, yf)
    block = float(np.max(np.abs(P @ x0)))
    if block > BLOCK_TOL * max(1.0, np.max(np.abs(G))):
        raise NotFluidForm(f"P(X0, .) = {block:.3e} does not vanish")
    P_v = proj.T @ P @ proj
    P_h = P - P_v
    return FluidDecomposition(
        mu, e, gamma, alpha, x0, x, P, P_v, P_h,
        bool(np.max(np.abs(P)) < DUST_TOL),
        bool(np.max(np.abs(P_h @ Y)) < PERFECT_TOL),
    )


def reconstruct(d: FluidDecomposition, Y, g) -> np.ndarray:
    """``mu X0 X0 + e (X0 Y + Y X0) + gamma Y Y + P`` as a (0,2) tensor."""
    g = np.asarray(g, dtype=float)
    x0f, yf = g @ d.X0, g @ np.asarray(Y, dtype=float)
    return d.mu * np.outer(x0f, x0f) + d.e * (np.outer(x0f, yf) + np.outer(yf, x0f)) + d.gamma * np.outer(yf, yf) + d.P


def random_fluid(rng: np.random.Generator, g, Y, projector, time_reference, pressure: bool = True,
                 perfect: bool = False):
    """Synthetic fluid data at a point: returns (G, mu, e, gamma, X0).

    X0 is a random unit future-pointing horizontal vector; P (if requested)
    is a random symmetric form annihilating X0, purely horizontal when
    ``perfect``.
    """
    g = np.asarray(g, dtype=float)
    Y = np.asarray(Y, dtype=float)
    proj = np.asarray(projector, dtype=float)
    ref = np.asarray(time_reference, dtype=float)
    n = len(Y)
    while True:
        v = proj @ (ref + 0.4 * rng.normal(size=n))
        norm = v @ g @ v
        if norm < -0.1:
            break
    x0 = v / np.sqrt(-norm)
    if x0 @ g @ ref > 0:
        x0 = -x0
    mu = rng.uniform(0.5, 3.0)
    e = rng.uniform(-1.0, 1.0)
    gamma = rng.uniform(-1.0, 1.0)
    x0f, yf = g @ x0, g @ Y
    G = mu * np.outer(x0f, x0f) + e * (np.outer(x0f, yf) + np.outer(yf, x0f)) + gamma * np.outer(yf, yf)
    if pressure:
        q = np.eye(n) + np.outer(x0, x0f)  # kills X0
        if perfect:
            q = q @ proj
        m = 0.2 * rng.normal(size=(n, n))
        P = q.T @ _sym(m) @ q
        # keep P(Y, Y) = 0 so that gamma = G(Y, Y) stays the input value
        P = P - (Y @ P @ Y) * np.outer(yf, yf) if not perfect else P
        G = G + P
    return G, mu, e, gamma, x0


# ------------------------------------------------------ field-level residuals

@dataclass(frozen=True, eq=False)
class FluidFields:
    """Smooth fluid fields on a chart: scalars mu, e, gamma, vector X0 and an
    optional symmetric covariant P (all jax callables of coordinates)."""

    mu: Callable
    e: Callable
    gamma: Callable
    X0: Callable
    P: Optional[Callable] = None


def synthetic_fields(bundle, metric, rng: np.random.Generator, pressure: bool = False,
                     time_reference=None) -> FluidFields:
    """Random smooth (non-solution) fluid fields: X0 is the normalized
    horizontal projection of a perturbed time direction, P kills X0."""
    from ..multifiber import horizontal_projector_fn

    g = getattr(metric, "components", metric)
    n = bundle.dimension
    proj = horizontal_projector_fn(bundle, g)
    ref = jnp.eye(n)[0] if time_reference is None else jnp.asarray(time_reference, dtype=float)
    c = {k: jnp.asarray(rng.normal(size=n)) for k in ("mu", "e", "gamma", "x0", "p1", "p2", "p3")}
    amp = rng.uniform(0.1, 0.3, size=3)

    def mu(x):
        return 1.5 + amp[0] * jnp.sin(c["mu"] @ x)

    def e(x):
        return 0.4 * jnp.cos(c["e"] @ x)

    def gamma(x):
        return 0.2 + amp[1] * jnp.sin(c["gamma"] @ x + 0.3)

    def X0(x):
        v = proj(x) @ (ref + 0.2 * jnp.sin(x * c["x0"] + jnp.arange(n) * 0.7))
        v = v / jnp.sqrt(-(v @ g(x) @ v))
        return jnp.where(v @ g(x) @ ref > 0, -v, v)

    def P(x):
        gx = g(x)
        x0 = X0(x)
        q = jnp.eye(n) + jnp.outer(x0, gx @ x0)
        a, b = jnp.sin(x * c["p1"] + 1.0), jnp.cos(x * c["p2"])
        m = amp[2] * (jnp.outer(a, b) + jnp.outer(b, a)) + 0.05 * jnp.diag(jnp.cos(x * c["p3"]))
        return q.T @ m @ q

    return FluidFields(mu, e, gamma, X0, P if pressure else None)


def _raise2(g, t):
    def up(x):
        gi = jnp.linalg.inv(g(x))
        return gi @ t(x) @ gi

    return up


def law_terms_fn(g: Callable, Y: Callable, F: Callable, fields: FluidFields) -> Callable:
    """``x -> dict`` of every law expression and the direct divergence of
    the reconstructed G, for arbitrary (non-solution) fields."""
    mu, e, gam, X0 = fields.mu, fields.e, fields.gamma, fields.X0
    P = fields.P if fields.P is not None else (lambda x: jnp.zeros((x.shape[0], x.shape[0])))

    def g_dec(x):
        gx = g(x)
        x0f, yf = gx @ X0(x), gx @ Y(x)
        return (mu(x) * jnp.outer(x0f, x0f) + e(x) * (jnp.outer(x0f, yf) + jnp.outer(yf, x0f))
                + gam(x) * jnp.outer(yf, yf) + P(x))

    def q_ratio(x):
        return e(x) / mu(x)

    def X(x):
        return X0(x) + q_ratio(x) * Y(x)

    def eF(x, v):
        return jnp.linalg.solve(g(x), F(x) @ v)

    def run(x):
        gx = g(x)
        ginv = jnp.linalg.inv(gx)
        x0, y = X0(x), Y(x)
        m, ch = mu(x), e(x)
        div_g = divergence_contra_fn(g, _raise2(g, g_dec), x)
        div_p = divergence_contra_fn(g, _raise2(g, P), x)
        div_f = divergence_contra_fn(g, _raise2(g, F), x)
        ric = ricci_fn(g, x)
        s = jnp.einsum("ij,ij->", ginv, ric)
        c1 = jax.jacfwd(q_ratio)(x) @ x0
        c2 = divergence_vector_fn(g, lambda z: mu(z) * X0(z), x)
        c3 = divergence_vector_fn(g, lambda z: e(z) * X0(z), x)
        c_total = divergence_vector_fn(g, lambda z: mu(z) * X(z), x)
        lorentz = m * accel_fn(g, X0, x) - LORENTZ_SIGN * ch * eF(x, x0)
        free_fall = m * accel_fn(g, X, x)
        x0_divp = x0 @ gx @ div_p
        y_divp = y @ gx @ div_p
        pr_t = -(div_p @ gx @ x0) * x0 - (div_p @ gx @ y) * y
        pr_tperp = div_p - pr_t
        y_e = jax.jacfwd(e)(x) @ y
        y_gamma = jax.jacfwd(gam)(x) @ y
        y_q = jax.jacfwd(q_ratio)(x) @ y
        bracket = bracket_fn(Y, X0, x)
        eP_y = ginv @ P(x) @ y
        div_eP_y = divergence_vector_fn(g, lambda z: jnp.linalg.solve(g(z), P(z) @ Y(z)), x)
        f_sq = jnp.einsum("ij,ik,jl,kl->", F(x), ginv, ginv, F(x))
        e_mass = c2 - x0_divp
        e_charge = c3 - y_divp
        e_apparent = lorentz + pr_tperp
        recombined = e_mass * x0 + e_charge * y + e_apparent + y_e * x0 + y_gamma * y + ch * bracket
        return {
            "div_G": div_g,
            "recombined": recombined,
            "C1": c1,
            "C2": c2,
            "C3": c3,
            "energy_total": c_total - x0_divp,
            "energy": e_mass,
            "charge": e_charge,
            "charge_alt": div_eP_y - y_divp,
            "lorentz": lorentz,
            "apparent": e_apparent,
            "free_fall": free_fall,
            "fluid_motion": free_fall + div_p + x0_divp * X(x),
            "free_fall_identity": free_fall - (lorentz + ch * bracket + m * (c1 + q_ratio(x) * y_q) * y),
            "div_F": div_f,
            "maxwell_stated": div_f - (2 * ch * x0 - (2 * gam(x) + s) * y),
            "maxwell_derived": div_f - (2 * ch * x0 + (2 * gam(x) - s) * y - 2 * eP_y),
            "maxwell_bridge": div_f + 2 * ginv @ ric @ y,
            "F_squared": f_sq,
            "eP_Y": eP_y,
            "scalar": s,
            "e_X0": ch * x0,
            "Y": y,
        }

    return run


@lru_cache(maxsize=None)
def _compiled_terms(g, Y, F, fields, batched):
    fn = law_terms_fn(g, Y, F, fields)
    return jax.jit(jax.vmap(fn) if batched else fn)


def law_terms(g, Y, F, fields: FluidFields, points) -> dict:
    """Law expressions at a batch of points (compiled once per field set)."""
    pts = jnp.asarray(np.atleast_2d(points), dtype=float)
    return {k: np.asarray(v) for k, v in _compiled_terms(g, Y, F, fields, True)(pts).items()}


def _vnorm(a):
    a = np.asarray(a)
    if a.ndim == 1:
        return np.abs(a)
    return np.max(np.abs(a.reshape(a.shape[0], -1)), axis=1)


def charged_dust_residuals(metric, potential, fields: FluidFields, points, scenario: str = "", tol: float = 1e-10,
                       recombination_tol: float = 1e-6) -> ResidualReport:
    """Charged-dust laws: conservation, Maxwell, free fall, Lorentz, and the
    recombination identity (which must vanish for arbitrary fields)."""
    t = law_terms(metric.components, potential.Y, potential.F, fields, points)
    rep = ResidualReport(scenario, "charged_dust")
    rep.add("conservation X0(e/mu)", "charged dust, conservation", _vnorm(t["C1"]).max(), tol)
    rep.add("conservation div(mu X0)", "charged dust, conservation", _vnorm(t["C2"]).max(), tol)
    rep.add("conservation div(e X0)", "charged dust, conservation", _vnorm(t["C3"]).max(), tol)
    rep.add("Maxwell (stated form)", "charged dust, Maxwell equation", _vnorm(t["maxwell_stated"]).max(), tol,
            note="2eX0 - (2 gamma + S) Y")
    rep.add("Maxwell (derived form)", "charged dust, Maxwell equation", _vnorm(t["maxwell_derived"]).max(), tol,
            note="2eX0 + (2 gamma - S) Y, from the Killing identity")
    rep.add("free fall nabla_X X", "charged dust, free fall", _vnorm(t["free_fall"]).max(), tol)
    rep.add("Lorentz mu nabla_X0 X0 - e eF(X0)", "charged dust, Lorentz equation", _vnorm(t["lorentz"]).max(), tol)
    rep.add("recombination identity", "Bianchi projections onto Y, X0 and T-perp",
            _vnorm(t["div_G"] - t["recombined"]).max(), recombination_tol)
    rep.add("free-fall / Lorentz identity", "free fall equivalent to Lorentz",
            _vnorm(t["free_fall_identity"]).max(), recombination_tol)
    return rep


def fluid_law_residuals(metric, potential, fields: FluidFields, points, scenario: str = "", tol: float = 1e-10,
                       recombination_tol: float = 1e-6) -> ResidualReport:
    """Fluid laws with pressure; Maxwell reported under every reading of |F|."""
    t = law_terms(metric.components, potential.Y, potential.F, fields, points)
    rep = ResidualReport(scenario, "fluid_laws")
    rep.add("energy div(mu X) - <X0, div P>", "fluid dynamics, energy", _vnorm(t["energy_total"]).max(), tol)
    rep.add("energy div(mu X0) - <X0, div P>", "fluid dynamics, energy", _vnorm(t["energy"]).max(), tol)
    rep.add("charge div(e X0) - <Y, div P>", "fluid dynamics, charge", _vnorm(t["charge"]).max(), tol)
    rep.add("charge div(eP(Y)) - <Y, div P>", "fluid dynamics, charge", _vnorm(t["charge_alt"]).max(), recombination_tol,
            note="identity for Killing Y and symmetric P")
    rep.add("fluid motion", "fluid dynamics, motion", _vnorm(t["fluid_motion"]).max(), tol)
    rep.add("apparent motion", "fluid dynamics, apparent motion", _vnorm(t["apparent"]).max(), tol)
    f_sq = np.asarray(t["F_squared"])
    for label, fnorm in (("F.F", f_sq), ("sqrt|F.F|", np.sqrt(np.abs(f_sq))), ("F.F/2", 0.5 * f_sq)):
        resid = t["div_F"] - (t["e_X0"] + 0.5 * fnorm[:, None] * t["Y"] - t["eP_Y"])
        rep.add(f"Maxwell with |F| = {label}", "fluid dynamics, Maxwell equation", _vnorm(resid).max(), tol)
    rep.add("Maxwell (derived form)", "fluid dynamics, Maxwell equation", _vnorm(t["maxwell_derived"]).max(), tol)
    rep.add("recombination identity", "Bianchi projections with pressure",
            _vnorm(t["div_G"] - t["recombined"]).max(), recombination_tol)
    return rep


# names used by the command-line contract
theorem1_residuals = charged_dust_residuals
theorem2_residuals = fluid_law_residuals
