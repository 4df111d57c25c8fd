"""Multi-fiber bundles: fibers, splitting, adapted charts, horizontal projection.

A bundle is described over the home chart of its total space by one or more
*pieces* (local trivializations).  Each piece carries the projection ``pi``,
the two fiber maps ``h`` (to S) and ``f`` (to W), and the joint inverse
``phi_inv(b, s, w)``: the unique total-space point over base point ``b``
whose images under h and f have factor parameters ``s`` and ``w``.

Factor values returned by ``h`` and ``f`` are points of a Euclidean ambient
space (S^1 in R^2, S^3 in R^4), so distances on S and W are plain norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import jax
import jax.numpy as jnp
import numpy as np

from .charts import Chart, ChartManifold, ManifoldPoint, MetricField, Signature, stereographic, stereographic_inverse
from .errors import (
    Degenerate,
    DegenerateFiberMetric,
    NoTrivialization,
    PhiNotInvertibleOnFiber,
    PointOutsideDomain,
)

FIBER_TOL = 1e-9
NULL_SPACE_TOL = 1e-9


# ------------------------------------------------------------------ factors

@dataclass(frozen=True, eq=False)
class FiberFactor:
    """A compact (or, for counterexamples, noncompact) fiber factor."""

    name: str
    kind: str
    dimension: int
    embed: Callable
    coords: Callable
    lower: tuple = ()
    upper: tuple = ()
    periods: tuple = ()
    compact: bool = True

    def grid(self, per_axis: int) -> np.ndarray:
        if self.dimension == 0:
            return np.zeros((1, 0))
        axes = []
        for lo, hi, p in zip(self.lower, self.upper, self.periods):
            if p is not None:
                axes.append(lo + p * np.arange(per_axis) / per_axis)
            else:
                axes.append(np.linspace(lo, hi, per_axis))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.dimension == 0:
            return np.zeros((count, 0))
        return rng.uniform(self.lower, self.upper, size=(count, self.dimension))

    def delta(self, a, b) -> np.ndarray:
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        for i, p in enumerate(self.periods):
            if p is not None:
                d[..., i] = np.mod(d[..., i] + 0.5 * p, p) - 0.5 * p
        return d


def circle_factor(name: str = "S1") -> FiberFactor:
    return FiberFactor(
        name, "s1", 1,
        lambda u: jnp.array([jnp.cos(u[0]), jnp.sin(u[0])]),
        lambda v: jnp.array([jnp.arctan2(v[1], v[0])]),
        (-math.pi,), (math.pi,), (2 * math.pi,),
    )


def torus_factor(k: int, name: str = "T") -> FiberFactor:
    def embed(a):
        return jnp.concatenate([jnp.cos(a), jnp.sin(a)])

    def coords(v):
        return jnp.arctan2(v[k:], v[:k])

    return FiberFactor(name, "torus", k, embed, coords, (-math.pi,) * k, (math.pi,) * k, (2 * math.pi,) * k)


def sphere3_factor(name: str = "S3", extent: float = 1.5) -> FiberFactor:
    """Unit S^3 in R^4, parametrized by north-pole stereographic coordinates."""
    return FiberFactor(
        name, "s3", 3,
        lambda s: stereographic_inverse(s, 1),
        lambda v: stereographic(v, 1),
        (-extent,) * 3, (extent,) * 3, (None,) * 3,
    )


def point_factor(name: str = "pt") -> FiberFactor:
    return FiberFactor(name, "point", 0, lambda w: jnp.zeros(0), lambda v: jnp.zeros(0))


def line_factor(lower: float, upper: float, name: str = "R") -> FiberFactor:
    """Noncompact R factor; only used to exhibit non-Hausdorff quotients."""
    return FiberFactor(name, "line", 1, lambda w: w, lambda v: v, (lower,), (upper,), (None,), compact=False)


# ------------------------------------------------------------------- bundle

@dataclass(frozen=True, eq=False)
class BundlePiece:
    """A local trivialization of the bundle over total-space home coordinates."""

    id: str
    pi: Callable
    h: Callable
    f: Callable
    phi_inv: Callable
    domain: Optional[Callable] = None
    base_chart: Optional[str] = None

    def contains(self, x) -> bool:
        return self.domain is None or bool(self.domain(np.asarray(x)))


@dataclass(frozen=True, eq=False)
class MultiFiberBundle:
    name: str
    total: ChartManifold
    base: ChartManifold
    s_factor: FiberFactor
    w_factor: FiberFactor
    pieces: tuple
    s_orientation: int = 1

    @property
    def dimension(self) -> int:
        return self.total.dimension

    @property
    def base_dimension(self) -> int:
        return self.base.dimension

    def coords(self, p) -> np.ndarray:
        """Home-chart coordinates of a point (raw vectors pass through)."""
        if isinstance(p, ManifoldPoint):
            if p.chart != self.total.home:
                p = self.total.transition(p, self.total.home)
            return np.asarray(p.coords)
        return np.asarray(p, dtype=float).reshape(-1)

    def piece_at(self, p) -> BundlePiece:
        x = self.coords(p)
        for piece in self.pieces:
            if piece.contains(x):
                return piece
        raise NoTrivialization(f"{self.name}: no trivializing neighborhood contains {x}")

    def split(self, p):
        """``(pi(x), s-parameters, w-parameters)`` at a point."""
        x = jnp.asarray(self.coords(p))
        piece = self.piece_at(x)
        return (
            np.asarray(piece.pi(x)),
            np.asarray(self.s_factor.coords(piece.h(x))),
            np.asarray(self.w_factor.coords(piece.f(x))),
        )

    def point(self, x) -> ManifoldPoint:
        return ManifoldPoint(self.total.home, self.total.chart(self.total.home).wrap(x))

    def distance(self, a, b) -> float:
        """Periodic-aware max-norm distance between home-chart coordinates."""
        return float(np.max(np.abs(self.total.chart(self.total.home).delta(a, b)), initial=0.0))


def _params(bundle: MultiFiberBundle, piece: BundlePiece, x):
    return bundle.s_factor.coords(piece.h(x)), bundle.w_factor.coords(piece.f(x))


def submersion_rank(bundle: MultiFiberBundle, p) -> int:
    x = jnp.asarray(bundle.coords(p))
    jac = np.asarray(jax.jacfwd(bundle.piece_at(x).pi)(x)).reshape(bundle.base_dimension, -1)
    sv = np.linalg.svd(jac, compute_uv=False)
    return int(np.sum(sv > NULL_SPACE_TOL * max(1.0, sv.max(initial=0.0))))


# ------------------------------------------------------------------- fibers

@dataclass(frozen=True, eq=False)
class FiberParametrization:
    """``t -> Phi^-1(t, f(p))`` (S-fiber) or ``t -> Phi^-1(h(p), t)`` (W-fiber)."""

    base_point: ManifoldPoint
    which: str
    factor: FiberFactor
    coords_fn: Callable
    bundle: MultiFiberBundle = field(repr=False)

    def map(self, t) -> ManifoldPoint:
        return self.bundle.point(np.asarray(self.coords_fn(jnp.asarray(t, dtype=float))))

    def points(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float).reshape(-1, self.factor.dimension)
        return np.asarray(jax.vmap(self.coords_fn)(jnp.asarray(params)))

    def image(self, per_axis: int = 24) -> np.ndarray:
        return self.points(self.factor.grid(per_axis))

    def tangent(self, t) -> np.ndarray:
        """Columns span the fiber tangent at ``map(t)``."""
        t = jnp.asarray(t, dtype=float).reshape(self.factor.dimension)
        return np.asarray(jax.jacfwd(self.coords_fn)(t)).reshape(-1, self.factor.dimension)


def fiber(bundle: MultiFiberBundle, p, which: str, check: bool = True) -> FiberParametrization:
    """The S- or W-fiber through ``p``."""
    x = jnp.asarray(bundle.coords(p))
    piece = bundle.piece_at(x)
    b = piece.pi(x)
    s, w = _params(bundle, piece, x)
    if which == "S":
        def coords_fn(t):
            return piece.phi_inv(b, t, w)
        factor = bundle.s_factor
    elif which == "W":
        def coords_fn(t):
            return piece.phi_inv(b, s, t)
        factor = bundle.w_factor
    else:
        raise ValueError("which must be 'S' or 'W'")
    fp = FiberParametrization(bundle.point(np.asarray(x)), which, factor, coords_fn, bundle)
    if check:
        _check_fiber(bundle, piece, fp, np.asarray(b), np.asarray(s), np.asarray(w))
    return fp


def _check_fiber(bundle, piece, fp, b, s, w):
    params = fp.factor.grid(5)
    pts = fp.points(params)
    for t, y in zip(params, pts):
        y = jnp.asarray(y)
        s_y, w_y = _params(bundle, piece, y)
        errs = [np.max(np.abs(np.asarray(piece.pi(y)) - b), initial=0.0)]
        if fp.which == "S":
            errs += [np.max(np.abs(bundle.s_factor.delta(s_y, t)), initial=0.0), _dist(bundle.w_factor, w_y, w)]
        else:
            errs += [np.max(np.abs(bundle.s_factor.delta(s_y, s)), initial=0.0), _dist(bundle.w_factor, w_y, t)]
        if max(errs) > FIBER_TOL * (1 + np.max(np.abs(y))):
            raise PhiNotInvertibleOnFiber(
                f"{bundle.name}: Phi^-1 does not invert Phi on the {fp.which}-fiber at parameter {t} (error {max(errs):.2e})"
            )


def _dist(factor: FiberFactor, a, b) -> float:
    return float(np.max(np.abs(np.asarray(factor.embed(jnp.asarray(a))) - np.asarray(factor.embed(jnp.asarray(b)))), initial=0.0))


def hausdorff(a: np.ndarray, b: np.ndarray, chart: Optional[Chart] = None) -> float:
    """Symmetric sampled Hausdorff distance (max-norm, periodic-aware).

    Non-finite rows (samples that left the chart) are dropped from both sets.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a[np.all(np.isfinite(a), axis=1)]
    b = b[np.all(np.isfinite(b), axis=1)]
    d = a[:, None, :] - b[None, :, :]
    if chart is not None:
        d = chart.delta(d, 0.0)
    dist = np.max(np.abs(d), axis=-1, initial=0.0)
    return float(max(dist.min(axis=1).max(initial=0.0), dist.min(axis=0).max(initial=0.0)))


def fiber_set_distance(fa: FiberParametrization, fb: FiberParametrization, per_axis: int = 24) -> float:
    """Hausdorff distance between two fibers sampled on a shared parameter grid."""
    chart = fa.bundle.total.chart(fa.bundle.total.home)
    return hausdorff(fa.image(per_axis), fb.image(per_axis), chart)


# ---------------------------------------------------------------- splitting

def splitting(bundle: MultiFiberBundle, p):
    """``(psi, psi_inv)`` for the pi-fiber through ``p``.

    ``psi(y) = (Phi^-1(h(y), f(p)), Phi^-1(h(p), f(y)))`` and
    ``psi_inv(a, b) = Phi^-1(h(a), f(b))``, all in home coordinates.
    """
    x = jnp.asarray(bundle.coords(p))
    piece = bundle.piece_at(x)
    b = piece.pi(x)
    s_p, w_p = _params(bundle, piece, x)
    b_np = np.asarray(b)

    def on_fiber(y):
        y = jnp.asarray(bundle.coords(y))
        err = np.max(np.abs(np.asarray(piece.pi(y)) - b_np), initial=0.0)
        if err > FIBER_TOL * (1 + np.max(np.abs(b_np), initial=0.0)):
            raise PhiNotInvertibleOnFiber(f"{np.asarray(y)} is not on the pi-fiber of {np.asarray(x)} (offset {err:.2e})")
        return y

    def psi(y):
        y = on_fiber(y)
        s_y, w_y = _params(bundle, piece, y)
        return np.asarray(piece.phi_inv(b, s_y, w_p)), np.asarray(piece.phi_inv(b, s_p, w_y))

    def psi_inv(a, c):
        a = on_fiber(a)
        c = on_fiber(c)
        s_a, _ = _params(bundle, piece, a)
        _, w_c = _params(bundle, piece, c)
        return np.asarray(piece.phi_inv(b, s_a, w_c))

    return psi, psi_inv


def certify_fiber_diffeomorphism(bundle: MultiFiberBundle, p, per_axis: int = 5) -> dict:
    """Desk-scale certificate that Phi restricted to the pi-fiber of p is a
    diffeomorphism: Phi o Phi^-1 = id and an invertible tangent map at every
    grid sample, plus injectivity on the sample cloud."""
    x = jnp.asarray(bundle.coords(p))
    piece = bundle.piece_at(x)
    b = piece.pi(x)
    ds, dw = bundle.s_factor.dimension, bundle.w_factor.dimension
    grid_s = bundle.s_factor.grid(per_axis)
    grid_w = bundle.w_factor.grid(per_axis)
    inverse_err = 0.0
    min_sv = math.inf
    pts = []
    skipped = 0
    chart = bundle.total.chart(bundle.total.home)
    for s in grid_s:
        for w in grid_w:
            t = jnp.concatenate([jnp.asarray(s), jnp.asarray(w)])
            y = piece.phi_inv(b, t[:ds], t[ds:])
            if not chart.contains(chart.wrap(np.asarray(y))):
                skipped += 1  # grid point outside the home chart
                continue
            s_y, w_y = _params(bundle, piece, y)
            inverse_err = max(inverse_err, float(np.max(np.abs(bundle.s_factor.delta(s_y, s)), initial=0.0)),
                              _dist(bundle.w_factor, w_y, w))
            # tangent map of the fiber parametrization then of Phi (params -> params)
            def roundtrip(tt):
                yy = piece.phi_inv(b, tt[:ds], tt[ds:])
                ss, ww = _params(bundle, piece, yy)
                return jnp.concatenate([ss, ww])
            if ds + dw:
                sv = np.linalg.svd(np.asarray(jax.jacfwd(roundtrip)(t)), compute_uv=False)
                min_sv = min(min_sv, float(sv.min()))
            pts.append(np.asarray(y))
    pts = np.array(pts)
    sep = math.inf
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            sep = min(sep, float(np.max(np.abs(chart.delta(pts[i], pts[j])))))
    return {
        "inverse_error": inverse_err,
        "min_singular_value": min_sv,
        "min_separation": sep,
        "samples": len(pts),
        "skipped": skipped,
        "passed": inverse_err < 1e-9 and min_sv > 1e-6 and sep > 1e-9,
    }


# ------------------------------------------------------------ adapted chart

@dataclass(frozen=True, eq=False)
class AdaptedChart:
    """Coordinates ``(x^i, u, w^k)`` centered at ``p``: base offset, S-offset
    and W-offset, given by (pi, h, f) relative to their values at p."""

    chart: Chart
    center: np.ndarray
    forward: Callable
    inverse: Callable
    base_dimension: int
    s_dimension: int

    def h_coord(self, y) -> np.ndarray:
        z = np.asarray(self.forward(jnp.asarray(y)))
        return z[self.base_dimension:self.base_dimension + self.s_dimension]


def adapted_chart(bundle: MultiFiberBundle, p) -> AdaptedChart:
    x = jnp.asarray(bundle.coords(p))
    piece = bundle.piece_at(x)
    b0 = piece.pi(x)
    s0, w0 = _params(bundle, piece, x)
    sf = bundle.s_factor
    ds = sf.dimension
    s_periods = jnp.asarray([p_ if p_ is not None else 0.0 for p_ in sf.periods]) if ds else jnp.zeros(0)

    def wrap_s(d):
        if ds == 0:
            return d
        return jnp.where(s_periods > 0, jnp.mod(d + 0.5 * s_periods, jnp.where(s_periods > 0, s_periods, 1.0)) - 0.5 * s_periods, d)

    def forward(y):
        s, w = _params(bundle, piece, y)
        return jnp.concatenate([piece.pi(y) - b0, wrap_s(s - s0), w - w0])

    nb = bundle.base_dimension

    def inverse(z):
        return piece.phi_inv(b0 + z[:nb], s0 + z[nb:nb + ds], w0 + z[nb + ds:])

    n = bundle.dimension
    names = tuple(f"x{i}" for i in range(nb)) + ("u",) * ds + tuple(f"w{k}" for k in range(bundle.w_factor.dimension))
    chart = Chart(f"adapted@{piece.id}", n, names=names[:n])
    return AdaptedChart(chart, np.asarray(x), forward, inverse, nb, ds)


# ------------------------------------------------------- horizontal projector

@dataclass(frozen=True)
class HorizontalProjector:
    point: ManifoldPoint
    fiber_tangent_basis: np.ndarray  # columns
    projector_matrix: np.ndarray
    horizontal_signature: Signature

    def __call__(self, v) -> np.ndarray:
        return self.projector_matrix @ np.asarray(v, dtype=float)


def null_space(mat: np.ndarray, tol: float = NULL_SPACE_TOL) -> np.ndarray:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    u, sv, vt = np.linalg.svd(mat)
    rank = int(np.sum(sv > tol * max(1.0, sv.max(initial=0.0))))
    return vt[rank:].T


def fiber_tangent(bundle: MultiFiberBundle, p) -> np.ndarray:
    """Basis of T_x F as the kernel of D pi (SVD null space)."""
    x = jnp.asarray(bundle.coords(p))
    jac = np.asarray(jax.jacfwd(bundle.piece_at(x).pi)(x)).reshape(bundle.base_dimension, -1)
    return null_space(jac)


def _restricted_signature(g, basis, what):
    try:
        return Signature.of(basis.T @ g @ basis)
    except Degenerate as exc:
        raise DegenerateFiberMetric(f"metric degenerate on {what}: {exc}") from None


def projector_from_basis(g: np.ndarray, k: np.ndarray) -> np.ndarray:
    """g-orthogonal projector onto the complement of span(k)."""
    gram = k.T @ g @ k
    if k.shape[1] and np.min(np.abs(np.linalg.eigvalsh(gram))) < 1e-10:
        raise DegenerateFiberMetric("metric degenerate on the fiber tangent space")
    pf = k @ np.linalg.solve(gram, k.T @ g) if k.shape[1] else np.zeros_like(g)
    return np.eye(g.shape[0]) - pf


def horizontal_projector(bundle: MultiFiberBundle, metric: MetricField, p) -> HorizontalProjector:
    x = bundle.coords(p)
    g = metric.matrix(x)
    k = fiber_tangent(bundle, x)
    proj = projector_from_basis(g, k)
    h_basis = null_space(k.T @ g)
    return HorizontalProjector(bundle.point(x), k, proj, _restricted_signature(g, h_basis, "H"))


def horizontal_projector_fn(bundle: MultiFiberBundle, g: Callable, piece: Optional[BundlePiece] = None) -> Callable:
    """Differentiable ``x -> pr_H`` matrix; the fiber tangent comes from the
    Jacobian of Phi^-1 in the fiber parameters, so it can be traced."""
    piece = piece or bundle.pieces[0]
    ds = bundle.s_factor.dimension

    def proj(x):
        b = piece.pi(x)
        s, w = _params(bundle, piece, x)
        t = jnp.concatenate([s, w])
        k = jax.jacfwd(lambda tt: piece.phi_inv(b, tt[:ds], tt[ds:]))(t).reshape(x.shape[0], -1)
        gx = g(x)
        gram = k.T @ gx @ k
        return jnp.eye(x.shape[0]) - k @ jnp.linalg.solve(gram, k.T @ gx)

    return proj


def factor_tangents(bundle: MultiFiberBundle, p):
    """Tangent bases of the S-fiber and the W-fiber at p (columns)."""
    x = bundle.coords(p)
    _, s, w = bundle.split(x)
    ts = fiber(bundle, x, "S", check=False).tangent(s) if bundle.s_factor.dimension else np.zeros((len(x), 0))
    tw = fiber(bundle, x, "W", check=False).tangent(w) if bundle.w_factor.dimension else np.zeros((len(x), 0))
    return ts, tw


# ----------------------------------------------------------------- reports

@dataclass(frozen=True)
class CompatibilityReport:
    passed: bool
    signatures: tuple  # per sample: (sigma_S, sigma_W, sigma_H)
    triple: Optional[tuple]
    offending: Optional[tuple]
    message: str = ""


def check_compatibility(bundle: MultiFiberBundle, metric: MetricField, sample_points) -> CompatibilityReport:
    """Signatures of g on S_x, W_x and H_x must be constant across samples."""
    samples = [bundle.coords(p) for p in sample_points]
    if not samples:
        raise ValueError("need at least one sample point")
    sigs = []
    for x in samples:
        g = metric.matrix(x, check=False)
        ts, tw = factor_tangents(bundle, x)
        k = np.concatenate([ts, tw], axis=1)
        h_basis = null_space(k.T @ g)
        sigs.append((
            _restricted_signature(g, ts, "S-fiber"),
            _restricted_signature(g, tw, "W-fiber"),
            _restricted_signature(g, h_basis, "H"),
        ))
    for i, s in enumerate(sigs):
        if s != sigs[0]:
            return CompatibilityReport(
                False, tuple(sigs), None, (0, i),
                f"signature {tuple(map(str, sigs[0]))} at sample 0 ({samples[0]}) differs from "
                f"{tuple(map(str, s))} at sample {i} ({samples[i]})",
            )
    return CompatibilityReport(True, tuple(sigs), sigs[0], None)


@dataclass(frozen=True, eq=False)
class ObserverChart:
    """An adapted chart given by its forward map (home coords -> chart coords).

    ``s_index`` is the S-coordinate slot, ``time_index`` the base slot whose
    coordinate vector is taken as the time direction.
    """

    id: str
    forward: Callable
    s_index: int
    time_index: int = 0
    domain: Optional[Callable] = None

    def contains(self, x) -> bool:
        return self.domain is None or bool(self.domain(np.asarray(x)))


@dataclass(frozen=True)
class OrientationReport:
    passed: bool
    orientation_ok: bool
    time_ok: bool
    min_time_product: Optional[float]
    failures: tuple


def check_orientation(bundle: MultiFiberBundle, charts, sample_points, metric: Optional[MetricField] = None) -> OrientationReport:
    """Pairwise S-orientation agreement and, when a metric is given, the
    time-orientation condition g(d_t^i, d_t^j) < 0 on overlaps."""
    failures = []
    orientation_ok = True
    time_ok = True
    min_prod = None
    for p in sample_points:
        x = bundle.coords(p)
        ts, _ = factor_tangents(bundle, x)
        e_s = ts[:, 0] * bundle.s_orientation
        live = [c for c in charts if c.contains(x)]
        data = []
        for c in live:
            jac = np.asarray(jax.jacfwd(c.forward)(jnp.asarray(x)))
            sign = float(np.sign((jac @ e_s)[c.s_index]))
            t_vec = np.linalg.solve(jac, np.eye(len(x))[:, c.time_index])
            data.append((c.id, sign, t_vec))
        for i in range(len(data)):
            for j in range(i + 1, len(data)):
                if data[i][1] != data[j][1]:
                    orientation_ok = False
                    failures.append(("orientation", data[i][0], data[j][0], tuple(x)))
                if metric is not None:
                    val = float(data[i][2] @ metric.matrix(x, check=False) @ data[j][2])
                    min_prod = val if min_prod is None else max(min_prod, val)
                    if not val < 0:
                        time_ok = False
                        failures.append(("time", data[i][0], data[j][0], tuple(x)))
    return OrientationReport(orientation_ok and time_ok, orientation_ok, time_ok, min_prod, tuple(failures))


def product_bundle(name: str, total: ChartManifold, base_dim: int, s_factor: FiberFactor, w_factor: FiberFactor,
                   s_orientation: int = 1) -> MultiFiberBundle:
    """Bundle of a product chart ``(base, s, w)`` with Phi the factor projection."""
    ds, dw = s_factor.dimension, w_factor.dimension

    def pi(x):
        return x[:base_dim]

    def h(x):
        return s_factor.embed(x[base_dim:base_dim + ds])

    def f(x):
        return w_factor.embed(x[base_dim + ds:base_dim + ds + dw])

    def phi_inv(b, s, w):
        return jnp.concatenate([b, s, w])

    base = ChartManifold(f"{name}-base", (Chart("base", base_dim),))
    return MultiFiberBundle(name, total, base, s_factor, w_factor, (BundlePiece("product", pi, h, f, phi_inv, base_chart="base"),), s_orientation)
