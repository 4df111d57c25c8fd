"""Frame pullback onto S^3 fibers and Laplacian spectra of compact fibers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import jax
import jax.numpy as jnp
import numpy as np

from ..errors import FiberMetricNotPositive, NotRoundSphere, TangentMapSingular
from ..multifiber import MultiFiberBundle, fiber
from ..quaternion import left_invariant_frame
from .potential import fiber_length

FRAME_TOL = 1e-8
GRAM_TOL = 1e-8
SINGULAR_TOL = 1e-10
ROUND_TOL = 1e-8
S3_LEVELS = 6


@dataclass(frozen=True)
class FramePullback:
    points: np.ndarray  # (m, n) total-space coordinates
    source_frame: np.ndarray  # (m, 3, 4) X_j(f(x)) in R^4
    pulled: np.ndarray  # (m, 3, n) pulled vectors in total coordinates
    residual: float  # max |Tf(pulled_j) - X_j(f(x))|
    gram_min: float  # smallest Gram determinant of a pulled triple

    @property
    def passed(self) -> bool:
        return self.residual < FRAME_TOL and self.gram_min > GRAM_TOL


@lru_cache(maxsize=None)
def _frame_kernel(bundle, piece, g, frame):
    wf = bundle.w_factor

    def run(x):
        b = piece.pi(x)
        s = bundle.s_factor.coords(piece.h(x))
        w = wf.coords(piece.f(x))
        B = jax.jacfwd(lambda t: piece.phi_inv(b, s, t))(w)  # (n, 3)
        Tf = jax.jacfwd(piece.f)(x) @ B  # (4, 3)
        X = frame(piece.f(x))  # (3, 4)
        c = jnp.linalg.lstsq(Tf, X.T)[0]  # (3, 3), column j solves Tf c = X_j
        pulled = (B @ c).T
        resid = jnp.max(jnp.abs(Tf @ c - X.T))
        gram = jnp.linalg.det(pulled @ g(x) @ pulled.T)
        sv = jnp.linalg.svd(Tf, compute_uv=False)
        return X, pulled, resid, gram, sv[-1]

    return jax.jit(run)


def frame_pullback(bundle: MultiFiberBundle, metric, points, frame: Optional[Callable] = None) -> FramePullback:
    """Pull the S^3 frame back to each W-fiber: solve Tf v = X_j(f(x)) on T W_x.

    Raises TangentMapSingular where Tf restricted to the fiber loses rank.
    """
    if bundle.w_factor.kind != "s3":
        raise ValueError(f"{bundle.name}: W-factor is not S^3")
    frame = frame or left_invariant_frame
    g = getattr(metric, "components", metric)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    srcs, pulled, resid, grams = [], [], [], []
    for x in pts:
        piece = bundle.piece_at(x)
        X, v, r, gram, smin = _frame_kernel(bundle, piece, g, frame)(jnp.asarray(x))
        if float(smin) < SINGULAR_TOL:
            raise TangentMapSingular(f"Tf restricted to the W-fiber is singular at {x} (sigma_min = {float(smin):.2e})")
        srcs.append(np.asarray(X))
        pulled.append(np.asarray(v))
        resid.append(float(r))
        grams.append(float(gram))
    return FramePullback(pts, np.array(srcs), np.array(pulled), max(resid, default=0.0), min(grams, default=math.inf))


# ------------------------------------------------------------------- spectra

@dataclass(frozen=True)
class SpectralData:
    fiber: str  # "s1" or "s3"
    eigenvalues: np.ndarray  # distinct levels, ascending
    multiplicities: np.ndarray
    discretization: int
    ground_state: Optional[np.ndarray] = None
    length: Optional[float] = None
    radius: Optional[float] = None


def _levels(values, tol):
    values = np.sort(np.asarray(values, dtype=float))
    levels, mult = [], []
    for v in values:
        if levels and abs(v - levels[-1]) <= tol * max(1.0, abs(v)):
            mult[-1] += 1
        else:
            levels.append(v)
            mult.append(1)
    return np.array(levels), np.array(mult, dtype=int)


def circle_laplacian(length: float, resolution: int) -> np.ndarray:
    """Periodic second-difference matrix (-d^2/ds^2) on equally spaced arclength nodes."""
    h = length / resolution
    lap = 2 * np.eye(resolution) - np.roll(np.eye(resolution), 1, axis=1) - np.roll(np.eye(resolution), -1, axis=1)
    return lap / h ** 2


def _factor_choice(bundle, kind, which):
    if which is not None:
        factor = bundle.s_factor if which == "S" else bundle.w_factor
        if factor.kind != kind:
            raise ValueError(f"{which}-factor of {bundle.name} is {factor.kind}, not {kind}")
        return which
    if bundle.w_factor.kind == kind:
        return "W"
    if bundle.s_factor.kind == kind:
        return "S"
    raise ValueError(f"{bundle.name} has no {kind} fiber factor")


def _fiber_gram(bundle, metric, x, which, params):
    g = getattr(metric, "components", metric)
    fp = fiber(bundle, x, which, check=False)

    def gram(t):
        B = jax.jacfwd(fp.coords_fn)(t)
        return B.T @ g(fp.coords_fn(t)) @ B

    return np.asarray(jax.jit(jax.vmap(gram))(jnp.asarray(params)))


def fiber_spectrum(bundle: MultiFiberBundle, metric, x, fiber_kind: str = "s1", resolution: int = 256,
                   which: Optional[str] = None) -> SpectralData:
    """Spectrum of the fiber Laplacian at x.

    S^1: eigenvalues of the periodic second difference on ``resolution``
    arclength nodes.  S^3: the round-sphere levels k(k+2)/r^2 with
    multiplicity (k+1)^2 for k < ``resolution``, after checking roundness.
    """
    which = _factor_choice(bundle, fiber_kind, which)
    factor = bundle.s_factor if which == "S" else bundle.w_factor
    x = np.asarray(bundle.coords(x), dtype=float)
    if fiber_kind == "s1":
        nodes = factor.grid(64)
        h = _fiber_gram(bundle, metric, x, which, nodes)[:, 0, 0]
        if np.min(h) <= 0:
            raise FiberMetricNotPositive(f"{which}-fiber metric not positive at {x} (min g(T, T) = {np.min(h):.3e})")
        length = fiber_length(bundle, metric, x, which=which)
        vals, vecs = np.linalg.eigh(circle_laplacian(length, resolution))
        levels, mult = _levels(vals, 1e-8)
        if abs(levels[0]) < 1e-8 * vals[-1]:
            levels[0] = 0.0
        return SpectralData("s1", levels, mult, resolution, vecs[:, 0], length=length)
    if fiber_kind == "s3":
        radius = round_radius(bundle, metric, x, which)
        k = np.arange(resolution if resolution else S3_LEVELS)
        return SpectralData("s3", k * (k + 2) / radius ** 2, (k + 1) ** 2, int(k.size), radius=radius)
    raise ValueError("fiber must be 's1' or 's3'")


def round_radius(bundle: MultiFiberBundle, metric, x, which: str = "W", per_axis: int = 5) -> float:
    """Radius r such that the induced fiber metric is r^2 times the unit round metric.

    Raises FiberMetricNotPositive or NotRoundSphere (relative deviation > 1e-8).
    """
    factor = bundle.s_factor if which == "S" else bundle.w_factor
    params = factor.grid(per_axis)
    h = _fiber_gram(bundle, metric, x, which, params)
    if np.min(np.linalg.eigvalsh(h)) <= 0:
        raise FiberMetricNotPositive(f"{which}-fiber metric not positive definite at {x}")
    unit = np.asarray(jax.vmap(lambda t: jax.jacfwd(factor.embed)(t).T @ jax.jacfwd(factor.embed)(t))(jnp.asarray(params)))
    r2 = np.array([np.trace(np.linalg.solve(u, m)) / 3 for u, m in zip(unit, h)])
    radius2 = float(np.mean(r2))
    dev = max(np.max(np.abs(m - radius2 * u)) / np.max(np.abs(radius2 * u)) for u, m in zip(unit, h))
    if dev > ROUND_TOL:
        raise NotRoundSphere(f"induced S^3 metric deviates from round by {dev:.2e} at {x}")
    return math.sqrt(radius2)
