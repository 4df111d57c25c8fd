"""Observation atlases and their equivalence with (multi-)fiber bundles.

A W-chart maps an open set of the total space onto ``Theta x W_a x W_b``.
Fiber slices are compared through an exact projection: a point z lies on the
slice of chart j through x iff re-inserting chart j's own free coordinates of
z next to the fixed coordinates of x reproduces z.  This turns set equality
into a pointwise residual that does not depend on how densely either slice
was sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import jax
import jax.numpy as jnp
import numpy as np

from .charts import Chart, ChartManifold, MetricField, Signature, TransitionMap
from .errors import AtlasInconsistent, Degenerate, NonHausdorffQuotient, NoTrivialization
from .multifiber import (
    BundlePiece,
    FiberFactor,
    MultiFiberBundle,
    circle_factor,
    line_factor,
    point_factor,
    torus_factor,
)

ATLAS_TOL = 1e-8
HAUSDORFF_TOL = 1e-9
CONDITIONS = ("W", "a", "b")


@dataclass(frozen=True, eq=False)
class WChart:
    """Observation diffeomorphism ``phi: V -> Theta x W_a x W_b``.

    ``phi`` returns the concatenation ``(theta, a-params, b-params)``;
    ``phi_inv(theta, a, b)`` returns total-space home coordinates.
    """

    id: str
    phi: Callable
    phi_inv: Callable
    theta_dim: int
    domain: Optional[Callable] = None

    def contains(self, x) -> bool:
        return self.domain is None or bool(self.domain(np.asarray(x)))


@dataclass(frozen=True, eq=False)
class ObservationAtlas:
    charts: tuple
    total: ChartManifold
    a_factor: FiberFactor
    b_factor: FiberFactor
    flags: dict = field(default_factory=dict)

    @property
    def is_w_atlas(self) -> bool:
        return bool(self.flags.get("W"))

    @property
    def is_wa_atlas(self) -> bool:
        return bool(self.flags.get("a"))

    @property
    def is_wb_atlas(self) -> bool:
        return bool(self.flags.get("b"))

    def union(self, other: "ObservationAtlas") -> "ObservationAtlas":
        return ObservationAtlas(self.charts + other.charts, self.total, self.a_factor, self.b_factor)

    def chart_at(self, x) -> WChart:
        for c in self.charts:
            if c.contains(x):
                return c
        raise NoTrivialization(f"no W-chart contains {np.asarray(x)}")

    def delta(self, a, b) -> np.ndarray:
        return self.total.chart(self.total.home).delta(a, b)


def _split(atlas, chart, values):
    p, da = chart.theta_dim, atlas.a_factor.dimension
    return values[:p], values[p:p + da], values[p + da:]


def _slots(cond: str):
    """(free, fixed) parts for a slice condition."""
    return {"W": (("a", "b"), ()), "a": (("a",), ("b",)), "b": (("b",), ("a",))}[cond]


@lru_cache(maxsize=None)
def _compiled(chart: WChart):
    """Jitted (phi, batched phi, batched phi_inv) for a chart."""
    return (
        jax.jit(chart.phi),
        jax.jit(jax.vmap(chart.phi)),
        jax.jit(jax.vmap(chart.phi_inv)),
    )


def _grid_params(atlas, free, a, b, per_axis):
    ga = atlas.a_factor.grid(per_axis) if "a" in free else np.asarray(a)[None, :]
    gb = atlas.b_factor.grid(per_axis) if "b" in free else np.asarray(b)[None, :]
    return np.repeat(ga, len(gb), axis=0), np.tile(gb, (len(ga), 1))


def slice_points(atlas: ObservationAtlas, chart: WChart, x, cond: str, per_axis: int = 8) -> np.ndarray:
    """Samples of ``phi^-1({theta(x)} x <free factors> x {fixed coords of x})``."""
    phi, _, inv = _compiled(chart)
    theta, a, b = _split(atlas, chart, np.asarray(phi(jnp.asarray(x, dtype=float))))
    free, _ = _slots(cond)
    aa, bb = _grid_params(atlas, free, a, b, per_axis)
    th = np.tile(theta, (len(aa), 1))
    return np.asarray(inv(jnp.asarray(th), jnp.asarray(aa), jnp.asarray(bb)))


def _projection_residuals(atlas, chart: WChart, x, zs, cond: str) -> np.ndarray:
    """Relative distance of each z to its projection on chart's slice through x."""
    phi, phis, inv = _compiled(chart)
    theta_x, a_x, b_x = _split(atlas, chart, np.asarray(phi(jnp.asarray(x, dtype=float))))
    vals = np.asarray(phis(jnp.asarray(zs)))
    p, da = chart.theta_dim, atlas.a_factor.dimension
    free, _ = _slots(cond)
    a = vals[:, p:p + da] if "a" in free else np.tile(a_x, (len(zs), 1))
    b = vals[:, p + da:] if "b" in free else np.tile(b_x, (len(zs), 1))
    th = np.tile(theta_x, (len(zs), 1))
    z_star = np.asarray(inv(jnp.asarray(th), jnp.asarray(a), jnp.asarray(b)))
    err = np.max(np.abs(atlas.delta(z_star, zs)), axis=-1, initial=0.0)
    return err / (1.0 + np.max(np.abs(zs), axis=-1, initial=0.0))


@dataclass(frozen=True)
class AtlasVerdict:
    passed: dict  # condition -> bool
    residual: dict  # condition -> max residual
    witnesses: dict  # condition -> (chart i, chart j, x, z) of the worst pair

    def __getitem__(self, cond):
        return self.passed[cond]


def check_w_atlas(atlas: ObservationAtlas, overlap_samples, conditions=CONDITIONS, per_axis: int = 8,
                  tol: float = ATLAS_TOL) -> AtlasVerdict:
    """Slice-equality conditions on chart overlaps for each requested condition.

    A slice point of chart i that falls outside chart j counts as a failure
    (its slices cannot agree as sets).
    """
    passed, residual, witnesses = {}, {}, {}
    samples = [np.asarray(x, dtype=float) for x in overlap_samples]
    for cond in conditions:
        worst, witness = 0.0, None
        for x in samples:
            live = [c for c in atlas.charts if c.contains(x)]
            for i, ci in enumerate(live):
                for cj in live[i + 1:]:
                    for src, dst in ((ci, cj), (cj, ci)):
                        zs = slice_points(atlas, src, x, cond, per_axis)
                        inside = np.array([dst.contains(z) for z in zs])
                        res = np.full(len(zs), math.inf)
                        if inside.any():
                            res[inside] = _projection_residuals(atlas, dst, x, zs[inside], cond)
                        k = int(np.argmax(res))
                        if res[k] > worst:
                            worst, witness = float(res[k]), (src.id, dst.id, tuple(x), tuple(zs[k]))
        residual[cond] = worst
        passed[cond] = worst <= tol
        witnesses[cond] = witness if worst > tol else None
    return AtlasVerdict(passed, residual, witnesses)


def certify(atlas: ObservationAtlas, overlap_samples, **kw) -> ObservationAtlas:
    """Copy of the atlas with its W / W_a / W_b flags set from the checks."""
    verdict = check_w_atlas(atlas, overlap_samples, **kw)
    return replace(atlas, flags=dict(verdict.passed))


# --------------------------------------------------------- quotient / bundle

class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def fiber_classes(atlas: ObservationAtlas, samples, tol: float = HAUSDORFF_TOL) -> list:
    """Class label per sample: two samples share a class iff some chart puts
    them on the same W-slice (transitively)."""
    pts = [np.asarray(x, dtype=float) for x in samples]
    uf = _UnionFind(len(pts))
    for c in atlas.charts:
        idx = [k for k, x in enumerate(pts) if c.contains(x)]
        if not idx:
            continue
        vals = np.asarray(_compiled(c)[1](jnp.asarray(np.array([pts[k] for k in idx]))))
        thetas = {k: v[:c.theta_dim] for k, v in zip(idx, vals)}
        for n, i in enumerate(idx):
            for j in idx[n + 1:]:
                if np.max(np.abs(thetas[i] - thetas[j]), initial=0.0) <= tol * (1 + np.max(np.abs(thetas[i]), initial=0.0)):
                    uf.union(i, j)
    roots = [uf.find(k) for k in range(len(pts))]
    relabel = {r: n for n, r in enumerate(dict.fromkeys(roots))}
    return [relabel[r] for r in roots]


def _min_distance(atlas, a, b, chunk: int = 256):
    """Smallest periodic-aware max-norm distance between two point clouds, with its indices."""
    best, where = math.inf, (0, 0)
    for start in range(0, len(a), chunk):
        d = np.max(np.abs(atlas.delta(a[start:start + chunk, None, :], b[None, :, :])), axis=-1)
        k = int(np.argmin(d))
        i, j = divmod(k, d.shape[1])
        if d[i, j] < best:
            best, where = float(d[i, j]), (start + i, j)
    return best, where


def _check_hausdorff(atlas, pts, labels, per_axis, tol, budget: int = 1024):
    reps = {}
    for k, lab in enumerate(labels):
        reps.setdefault(lab, k)
    dim = atlas.a_factor.dimension + atlas.b_factor.dimension
    if dim > 1:
        per_axis = max(2, min(per_axis, int(budget ** (1.0 / dim))))
    clouds = {}
    for lab, k in reps.items():
        cloud = slice_points(atlas, atlas.chart_at(pts[k]), pts[k], "W", per_axis)
        clouds[lab] = cloud[np.all(np.isfinite(cloud), axis=1)]  # drop grid points off the chart
    keys = sorted(clouds)
    for n, la in enumerate(keys):
        for lb in keys[n + 1:]:
            dist, (i, j) = _min_distance(atlas, clouds[la], clouds[lb])
            if dist < tol:
                raise NonHausdorffQuotient(
                    f"distinct fibers through samples {reps[la]} and {reps[lb]} come within {dist:.2e}",
                    witness=(reps[la], reps[lb], tuple(clouds[la][i]), tuple(clouds[lb][j])),
                )


def atlas_to_bundle(atlas: ObservationAtlas, samples, multi: bool = True, per_axis: int = 8) -> MultiFiberBundle:
    """Bundle from an observation atlas (constructive direction).

    The base is the quotient of the sample cloud by W-slices (union-find),
    charted by the Theta_i; pi and Phi are taken chartwise, the first chart
    containing a point winning.
    """
    pts = [np.asarray(x, dtype=float) for x in samples]
    conds = CONDITIONS if multi else ("W",)
    verdict = check_w_atlas(atlas, pts, conds, per_axis)
    for cond in conds:
        if not verdict.passed[cond]:
            raise AtlasInconsistent(
                f"overlap condition {cond!r} fails (residual {verdict.residual[cond]:.2e})",
                witness=verdict.witnesses[cond],
            )
    labels = fiber_classes(atlas, pts)
    _check_hausdorff(atlas, pts, labels, max(per_axis, 16), HAUSDORFF_TOL)

    base_charts, transitions, pieces = [], [], []
    da = atlas.a_factor.dimension
    for c in atlas.charts:
        base_charts.append(Chart(f"theta:{c.id}", c.theta_dim))
    for ci in atlas.charts:
        anchor_a = jnp.zeros(da)
        anchor_b = jnp.zeros(atlas.b_factor.dimension)
        for cj in atlas.charts:
            if ci is cj:
                continue
            transitions.append(TransitionMap(
                f"theta:{ci.id}", f"theta:{cj.id}",
                lambda th, ci=ci, cj=cj: cj.phi(ci.phi_inv(th, anchor_a, anchor_b))[:cj.theta_dim],
            ))
        p = ci.theta_dim
        a_f, b_f = atlas.a_factor, atlas.b_factor
        pieces.append(BundlePiece(
            ci.id,
            lambda x, ci=ci, p=p: ci.phi(x)[:p],
            lambda x, ci=ci, p=p: a_f.embed(ci.phi(x)[p:p + da]),
            lambda x, ci=ci, p=p: b_f.embed(ci.phi(x)[p + da:]),
            ci.phi_inv,
            ci.domain,
            f"theta:{ci.id}",
        ))
    base = ChartManifold("quotient", tuple(base_charts), tuple(transitions))
    bundle = MultiFiberBundle("from-atlas", atlas.total, base, atlas.a_factor, atlas.b_factor, tuple(pieces))
    object.__setattr__(bundle, "fiber_labels", tuple(labels))
    return bundle


def bundle_to_atlas(bundle: MultiFiberBundle) -> ObservationAtlas:
    """One observation chart per trivialization: phi = (pi, h, f) in parameters."""
    if not bundle.pieces:
        raise NoTrivialization(f"{bundle.name}: no registered trivializations")
    sf, wf = bundle.s_factor, bundle.w_factor
    charts = []
    for piece in bundle.pieces:
        def phi(x, piece=piece):
            return jnp.concatenate([piece.pi(x), sf.coords(piece.h(x)), wf.coords(piece.f(x))])

        charts.append(WChart(piece.id, phi, piece.phi_inv, bundle.base_dimension, piece.domain))
    return ObservationAtlas(tuple(charts), bundle.total, sf, wf)


@dataclass(frozen=True)
class EquivalenceVerdict:
    equivalent: bool
    atlas_verdict: AtlasVerdict
    metric_compatible: Optional[bool] = None


def slice_signatures(atlas: ObservationAtlas, metric: MetricField, x):
    """Signatures of g on W_a,x and W_b,x as carried by the first chart at x."""
    c = atlas.chart_at(x)
    theta, a, b = _split(atlas, c, jnp.asarray(c.phi(jnp.asarray(x))))
    g = metric.matrix(x, check=False)
    out = []
    for which in ("a", "b"):
        if which == "a":
            k = jax.jacfwd(lambda u: c.phi_inv(theta, u, b))(a)
        else:
            k = jax.jacfwd(lambda v: c.phi_inv(theta, a, v))(b)
        k = np.asarray(k).reshape(len(x), -1)
        out.append(Signature.of(k.T @ g @ k) if k.shape[1] else Signature(0, 0))
    return tuple(out)


def atlas_equivalence(atlas1: ObservationAtlas, atlas2: ObservationAtlas, overlap_samples,
                      metric: Optional[MetricField] = None) -> EquivalenceVerdict:
    """Equivalent iff the union is still a (W_a, W_b)-atlas (compatible with
    ``metric`` when one is given)."""
    union = atlas1.union(atlas2)
    verdict = check_w_atlas(union, overlap_samples, ("a", "b"))
    ok = verdict.passed["a"] and verdict.passed["b"]
    compat = None
    if metric is not None:
        try:
            sigs = {slice_signatures(union, metric, x) for x in overlap_samples}
            compat = len(sigs) == 1
        except Degenerate:
            compat = False
        ok = ok and compat
    return EquivalenceVerdict(ok, verdict, compat)


# ------------------------------------------------------------ demo atlases

def torus_total(theta_dim: int = 2) -> ChartManifold:
    """M = Theta x T^2 with coordinates (theta, a, b), a and b periodic."""
    n = theta_dim + 2
    lower = (-math.inf,) * theta_dim + (-math.pi, -math.pi)
    upper = (math.inf,) * theta_dim + (math.pi, math.pi)
    periods = (None,) * theta_dim + (2 * math.pi, 2 * math.pi)
    return ChartManifold("Theta x T2", (Chart("home", n, lower, upper, periods),))


def _linear_chart(cid, p, fwd, inv):
    return WChart(cid, fwd, lambda th, a, b: inv(jnp.concatenate([th, a, b])), p)


def demo_atlases() -> dict:
    """Constructed atlases on Theta x S^1 x S^1 (Theta = R^2).

    consistent  : identity plus (theta, a + c(theta), b + d(theta))
    wa_only     : identity plus (theta, a + b, b); W_a slices kept, W_b not
    mixing      : identity plus (theta, a + b, a + 2b); only full W kept
    inconsistent: identity plus (theta + 0.1 sin a, a, b); breaks slices
    """
    p = 2
    total = torus_total(p)
    s1, s2 = circle_factor("Wa"), circle_factor("Wb")

    ident = _linear_chart("id", p, lambda x: x, lambda y: y)

    def c_th(t):
        return 0.3 * jnp.sin(t[0]) + 0.2 * t[1]

    def d_th(t):
        return 0.5 * jnp.cos(t[1]) - 0.1 * t[0]

    consistent = _linear_chart(
        "shift", p,
        lambda x: jnp.concatenate([x[:p], jnp.array([x[p] + c_th(x[:p]), x[p + 1] + d_th(x[:p])])]),
        lambda y: jnp.concatenate([y[:p], jnp.array([y[p] - c_th(y[:p]), y[p + 1] - d_th(y[:p])])]),
    )
    wa_only = _linear_chart(
        "rotate-b", p,
        lambda x: jnp.concatenate([x[:p], jnp.array([x[p] + x[p + 1], x[p + 1]])]),
        lambda y: jnp.concatenate([y[:p], jnp.array([y[p] - y[p + 1], y[p + 1]])]),
    )
    mixing = _linear_chart(
        "mix", p,
        lambda x: jnp.concatenate([x[:p], jnp.array([x[p] + x[p + 1], x[p] + 2 * x[p + 1]])]),
        lambda y: jnp.concatenate([y[:p], jnp.array([2 * y[p] - y[p + 1], y[p + 1] - y[p]])]),
    )

    def bad_fwd(x):
        return jnp.concatenate([jnp.array([x[0] + 0.1 * jnp.sin(x[p]), x[1]]), x[p:]])

    def bad_inv(y):
        return jnp.concatenate([jnp.array([y[0] - 0.1 * jnp.sin(y[p]), y[1]]), y[p:]])

    inconsistent = _linear_chart("tilt", p, bad_fwd, bad_inv)

    def make(*charts):
        return ObservationAtlas(tuple(charts), total, s1, s2)

    return {
        "single": make(ident),
        "consistent": make(ident, consistent),
        "wa_only": make(ident, wa_only),
        "mixing": make(ident, mixing),
        "inconsistent": make(ident, inconsistent),
    }


def demo_samples(rng: np.random.Generator, fibers: int = 5, per_fiber: int = 4, theta_dim: int = 2) -> tuple:
    """Sample cloud on Theta x T^2 with ``per_fiber`` points on each of
    ``fibers`` distinct W-fibers; returns (points, expected class count)."""
    thetas = rng.uniform(-1.5, 1.5, size=(fibers, theta_dim))
    pts = []
    for th in thetas:
        for _ in range(per_fiber):
            pts.append(np.concatenate([th, rng.uniform(-math.pi, math.pi, 2)]))
    return np.array(pts), fibers


def punctured_plane_atlas(w_range=(-25.0, 4.0)) -> ObservationAtlas:
    """W = R on the punctured plane: horizontal lines as fibers, charted by
    the half-planes avoiding the negative and the positive x-axis.

    The quotient is the line with a doubled origin: the two rays of y = 0
    are distinct fibers that no chart separates.
    """
    total = ChartManifold("R2 minus 0", (Chart("home", 2, predicate=lambda x: float(np.hypot(x[0], x[1])) > 0),))
    line = line_factor(*w_range, name="R")

    def log_sum(x, y):
        # log(|x| + r), stable for either sign of x
        r = jnp.sqrt(x * x + y * y)
        return jnp.log(jnp.abs(x) + r)

    def log_diff(x, y):
        # log(r - |x|) = log(y^2 / (r + |x|))
        r = jnp.sqrt(x * x + y * y)
        return jnp.log(y * y) - jnp.log(r + jnp.abs(x))

    def fwd_plus(z):
        x, y = z[0], z[1]
        w = jnp.where(x >= 0, log_sum(x, y), log_diff(x, y))
        return jnp.array([y, w])

    def fwd_minus(z):
        x, y = z[0], z[1]
        w = jnp.where(x <= 0, log_sum(x, y), log_diff(x, y))
        return jnp.array([y, w])

    def inv_plus(th, a, b):
        y, w = th[0], a[0]
        return jnp.array([0.5 * (jnp.exp(w) - y * y * jnp.exp(-w)), y])

    def inv_minus(th, a, b):
        y, w = th[0], a[0]
        return jnp.array([-0.5 * (jnp.exp(w) - y * y * jnp.exp(-w)), y])

    plus = WChart("plus", fwd_plus, inv_plus, 1, domain=lambda z: not (z[1] == 0 and z[0] <= 0))
    minus = WChart("minus", fwd_minus, inv_minus, 1, domain=lambda z: not (z[1] == 0 and z[0] >= 0))
    return ObservationAtlas((plus, minus), total, line, point_factor())


def punctured_plane_samples() -> np.ndarray:
    return np.array([[1.0, 0.0], [-1.0, 0.0], [0.5, 1.0], [-2.0, 1.0], [0.3, -0.7], [2.0, -0.7]])
