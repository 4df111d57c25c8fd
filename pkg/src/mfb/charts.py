"""Coordinate charts, transition maps and chart-local tensor fields.

A field lives in a *home* chart as a closure ``coords -> components``.  The
closure must be written with ``jax.numpy`` so that forward-mode
differentiation (nested JVPs, i.e. dual numbers) gives exact first and
second coordinate derivatives.  Evaluating a field at a point expressed in
another chart goes through one registered transition plus Jacobian
transport of every slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Optional, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .errors import (
    Degenerate,
    NoTransitionPath,
    NotInOverlap,
    PointOutsideDomain,
    SignatureMismatch,
)

DEGENERACY_TOL = 1e-10
SYMMETRY_TOL = 1e-14
FD_STEP = 1e-5
ROUND_TRIP_TOL = 1e-10

CO = "co"
CONTRA = "contra"


@dataclass(frozen=True)
class Chart:
    """An open coordinate box in R^n, optionally with periodic coordinates.

    Args:
        id: chart identifier, unique inside its manifold.
        dimension: number of coordinates.
        lower, upper: open box bounds (``-inf``/``inf`` allowed).
        periods: per-coordinate period, ``None`` for non-periodic slots.
        predicate: optional extra open condition, ``coords -> bool``.
        names: optional coordinate names.
    """

    id: str
    dimension: int
    lower: tuple = ()
    upper: tuple = ()
    periods: tuple = ()
    predicate: Optional[Callable] = None
    names: tuple = ()

    def __post_init__(self):
        n = int(self.dimension)
        if n < 0:
            raise ValueError("chart dimension must be nonnegative")
        lower = tuple(float(v) for v in self.lower) or (-math.inf,) * n
        upper = tuple(float(v) for v in self.upper) or (math.inf,) * n
        periods = tuple(None if p is None else float(p) for p in self.periods) or (None,) * n
        if not (len(lower) == len(upper) == len(periods) == n):
            raise ValueError(f"chart {self.id!r}: bounds/periods must have length {n}")
        for lo, hi in zip(lower, upper):
            if not lo < hi:
                raise ValueError(f"chart {self.id!r}: empty domain ({lo}, {hi})")
        for p in periods:
            if p is not None and not p > 0:
                raise ValueError(f"chart {self.id!r}: period must be strictly positive")
        object.__setattr__(self, "dimension", n)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "names", tuple(self.names))

    def wrap(self, coords) -> np.ndarray:
        """Bring periodic coordinates into ``[lower, lower + period)``."""
        x = np.array(coords, dtype=float).reshape(-1)
        for i, p in enumerate(self.periods):
            if p is not None and math.isfinite(self.lower[i]):
                x[i] = self.lower[i] + np.mod(x[i] - self.lower[i], p)
        return x

    def delta(self, a, b) -> np.ndarray:
        """``a - b`` with periodic slots reduced to ``[-period/2, period/2)``."""
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        for i, p in enumerate(self.periods):
            if p is not None:
                d[..., i] = np.mod(d[..., i] + 0.5 * p, p) - 0.5 * p
        return d

    def contains(self, coords) -> bool:
        x = np.asarray(coords, dtype=float).reshape(-1)
        if x.shape != (self.dimension,) or not np.all(np.isfinite(x)):
            return False
        if np.any(x <= np.asarray(self.lower)) or np.any(x >= np.asarray(self.upper)):
            return False
        return self.predicate is None or bool(self.predicate(x))

    def sample(self, rng: np.random.Generator, count: int, box=None) -> np.ndarray:
        """Uniform samples from ``box`` (defaults to the finite part of the domain)."""
        lo = np.array([max(l, -3.0) for l in self.lower]) if box is None else np.asarray(box[0], float)
        hi = np.array([min(u, 3.0) for u in self.upper]) if box is None else np.asarray(box[1], float)
        out = []
        while len(out) < count:
            x = rng.uniform(lo, hi)
            if self.contains(x):
                out.append(x)
        return np.array(out).reshape(count, self.dimension)


@dataclass(frozen=True)
class TransitionMap:
    """Coordinate change ``source -> target`` on the chart overlap.

    ``map`` must be jax-traceable.  ``overlap`` is an optional predicate on
    source coordinates; when omitted, a point is in the overlap iff its image
    lies in the target chart.
    """

    source: str
    target: str
    map: Callable
    overlap: Optional[Callable] = None
    overlap_samples: tuple = ()


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    chart: str
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def __repr__(self):
        return f"ManifoldPoint({self.chart!r}, {np.array2string(self.coords, precision=6)})"


@dataclass(frozen=True, eq=False)
class ChartManifold:
    """A manifold given by charts and (directed) transition maps.

    Only single-hop transitions are followed: a point can be moved from chart
    A to chart B iff a map A -> B is registered.
    """

    name: str
    charts: tuple
    transitions: tuple = ()
    home: Optional[str] = None

    def __post_init__(self):
        charts = tuple(self.charts)
        by_id = {c.id: c for c in charts}
        if len(by_id) != len(charts):
            raise ValueError(f"{self.name}: duplicate chart ids")
        if len({c.dimension for c in charts}) > 1:
            raise ValueError(f"{self.name}: charts disagree on dimension")
        trans = {}
        for t in self.transitions:
            if t.source not in by_id or t.target not in by_id:
                raise ValueError(f"{self.name}: transition {t.source}->{t.target} names unknown chart")
            trans[(t.source, t.target)] = t
        object.__setattr__(self, "charts", charts)
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "home", self.home or charts[0].id)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_trans", trans)

    @property
    def dimension(self) -> int:
        return self.charts[0].dimension

    def chart(self, chart_id: str) -> Chart:
        try:
            return self._by_id[chart_id]
        except KeyError:
            raise NoTransitionPath(f"{self.name}: no chart {chart_id!r}") from None

    def transition_map(self, source: str, target: str) -> TransitionMap:
        try:
            return self._trans[(source, target)]
        except KeyError:
            raise NoTransitionPath(f"{self.name}: no transition {source!r} -> {target!r}") from None

    def point(self, coords, chart: Optional[str] = None) -> ManifoldPoint:
        """Build a validated point (periodic slots wrapped)."""
        c = self.chart(chart or self.home)
        x = c.wrap(coords)
        if not c.contains(x):
            raise PointOutsideDomain(f"{coords} not in chart {c.id!r}")
        return ManifoldPoint(c.id, x)

    def transition(self, point: ManifoldPoint, target: str) -> ManifoldPoint:
        if point.chart == target:
            return ManifoldPoint(target, point.coords)
        tm = self.transition_map(point.chart, target)
        src = self.chart(point.chart)
        if not src.contains(point.coords):
            raise PointOutsideDomain(f"{point} not in chart {src.id!r}")
        inside = tm.overlap(point.coords) if tm.overlap is not None else True
        y = self.chart(target).wrap(np.asarray(tm.map(jnp.asarray(point.coords))))
        if not inside or not self.chart(target).contains(y):
            raise NotInOverlap(f"{point} not in overlap {point.chart!r} -> {target!r}")
        return ManifoldPoint(target, y)

    def locate(self, point: ManifoldPoint) -> Optional[ManifoldPoint]:
        """The point itself if its chart contains it, otherwise its image in
        the first chart reachable by one transition; ``None`` if nowhere."""
        if self.chart(point.chart).contains(point.coords):
            return point
        for (src, tgt) in self._trans:
            if src == point.chart:
                try:
                    return self.transition(point, tgt)
                except (NotInOverlap, PointOutsideDomain):
                    continue
        return None


def transition(point: ManifoldPoint, target_chart: str, manifold: ChartManifold) -> ManifoldPoint:
    """Coordinates of ``point`` in ``target_chart``."""
    return manifold.transition(point, target_chart)


def round_trip_error(manifold: ChartManifold, point: ManifoldPoint, target: str) -> float:
    """``|T_back(T(x)) - x|`` through ``target`` and back, periodic-aware."""
    there = manifold.transition(point, target)
    back = manifold.transition(there, point.chart)
    return float(np.max(np.abs(manifold.chart(point.chart).delta(back.coords, point.coords)), initial=0.0))


@dataclass(frozen=True, eq=False)
class TensorFieldSpec:
    """Components of a tensor field in one chart.

    ``variance`` lists each slot as ``"co"`` or ``"contra"``; ``components``
    maps a coordinate vector to an array of shape ``(n,) * rank``.
    """

    variance: tuple
    components: Callable
    chart: str
    dimension: int
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variance", tuple(self.variance))
        for v in self.variance:
            if v not in (CO, CONTRA):
                raise ValueError(f"bad slot variance {v!r}")

    @property
    def rank(self) -> int:
        return len(self.variance)

    @property
    def shape(self) -> tuple:
        return (self.dimension,) * self.rank

    def __call__(self, coords) -> np.ndarray:
        return np.asarray(_jet(self.components, 0)(jnp.asarray(coords, dtype=float))[0])


class FieldValue(NamedTuple):
    value: np.ndarray
    d1: Optional[np.ndarray] = None  # d1[..., i] = d/dx^i
    d2: Optional[np.ndarray] = None  # d2[..., i, j] = d^2/dx^i dx^j


@lru_cache(maxsize=None)
def _jet(fn: Callable, order: int):
    """Jitted ``x -> (f, Df, D^2 f)`` truncated at ``order`` (forward mode)."""
    if order == 0:
        return jax.jit(lambda x: (fn(x),))
    d1 = jax.jacfwd(fn)
    if order == 1:
        return jax.jit(lambda x: (fn(x), d1(x)))
    d2 = jax.jacfwd(d1)
    return jax.jit(lambda x: (fn(x), d1(x), d2(x)))


def _transport(comps, variance, J, Jinv):
    # J[a, b] = dx_home^a / dy^b
    out = comps
    for slot, kind in enumerate(variance):
        mat = J if kind == CO else Jinv.T
        out = jnp.moveaxis(jnp.tensordot(out, mat, axes=([slot], [0])), -1, slot)
    return out


@lru_cache(maxsize=None)
def pulled_back(field: TensorFieldSpec, manifold: ChartManifold, chart_id: str) -> TensorFieldSpec:
    """``field`` re-expressed in ``chart_id`` via the transition to its home chart."""
    if chart_id == field.chart:
        return field
    tmap = manifold.transition_map(chart_id, field.chart).map

    def comps(y):
        x = tmap(y)
        J = jax.jacfwd(tmap)(y)
        return _transport(field.components(x), field.variance, J, jnp.linalg.inv(J))

    return TensorFieldSpec(field.variance, comps, chart_id, field.dimension, field.name)


def _coords_for(field: TensorFieldSpec, point, manifold: Optional[ChartManifold]):
    if not isinstance(point, ManifoldPoint):
        return field, np.asarray(point, dtype=float).reshape(-1)
    if manifold is not None:
        chart = manifold.chart(point.chart)
        if not chart.contains(point.coords):
            raise PointOutsideDomain(f"{point} outside chart {chart.id!r}")
    if point.chart == field.chart:
        return field, point.coords
    if manifold is None:
        raise NoTransitionPath(f"field lives in {field.chart!r}, point in {point.chart!r}; no manifold given")
    # the transition target must contain the image
    manifold.transition(point, field.chart)
    return pulled_back(field, manifold, point.chart), point.coords


def evaluate(
    field: TensorFieldSpec,
    point,
    derivative_order: int = 0,
    manifold: Optional[ChartManifold] = None,
    method: str = "dual",
    step: float = FD_STEP,
) -> FieldValue:
    """Components of ``field`` at ``point`` plus coordinate derivatives.

    ``point`` is a :class:`ManifoldPoint` or a raw coordinate vector in the
    field's chart.  Derivatives are taken with respect to the coordinates of
    the chart the point is expressed in.

    ``method="fd"`` is the cross-check mode: first derivatives from central
    differences of values, second derivatives from central differences of
    the exact first derivatives (a value-only second difference at step 1e-5
    would be dominated by round-off).
    """
    if derivative_order not in (0, 1, 2):
        raise ValueError("derivative_order must be 0, 1 or 2")
    fld, x = _coords_for(field, point, manifold)
    x = jnp.asarray(x, dtype=float)
    if method == "dual":
        parts = [np.asarray(p) for p in _jet(fld.components, derivative_order)(x)]
    elif method == "fd":
        parts = _finite_difference(fld.components, x, derivative_order, step)
    else:
        raise ValueError(f"unknown method {method!r}")
    if parts[0].shape != fld.shape:
        raise ValueError(f"{fld.name or 'field'}: components shape {parts[0].shape}, expected {fld.shape}")
    return FieldValue(*parts)


def _finite_difference(fn, x, order, h):
    f0 = np.asarray(_jet(fn, 0)(x)[0])
    out = [f0]
    if order == 0:
        return out
    n = x.shape[0]
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        cols.append((np.asarray(_jet(fn, 0)(x + e)[0]) - np.asarray(_jet(fn, 0)(x - e)[0])) / (2 * h))
    out.append(np.stack(cols, axis=-1))
    if order == 2:
        cols = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            cols.append((np.asarray(_jet(fn, 1)(x + e)[1]) - np.asarray(_jet(fn, 1)(x - e)[1])) / (2 * h))
        out.append(np.stack(cols, axis=-1))
    return out


class Signature(NamedTuple):
    """Eigenvalue sign counts of a symmetric bilinear form."""

    minus: int
    plus: int

    @classmethod
    def of(cls, matrix, tol: float = DEGENERACY_TOL) -> "Signature":
        m = np.asarray(matrix, dtype=float)
        if m.size == 0:
            return cls(0, 0)
        vals = np.linalg.eigvalsh(0.5 * (m + m.T))
        if np.any(np.abs(vals) < tol):
            raise Degenerate(f"eigenvalue {vals[np.argmin(np.abs(vals))]:.3e} below {tol:g}")
        return cls(int(np.sum(vals < 0)), int(np.sum(vals > 0)))

    def __str__(self):
        return f"{{-:{self.minus}, +:{self.plus}}}"


@dataclass(frozen=True, eq=False)
class MetricField:
    """A symmetric, nondegenerate (0,2) field with a declared signature."""

    tensor: TensorFieldSpec
    declared_signature: Signature

    def __post_init__(self):
        if self.tensor.variance != (CO, CO):
            raise ValueError("metric must have two covariant slots")
        sig = Signature(*self.declared_signature)
        if sig.minus + sig.plus != self.tensor.dimension:
            raise ValueError(f"declared signature {sig} does not match dimension {self.tensor.dimension}")
        object.__setattr__(self, "declared_signature", sig)

    @property
    def dimension(self) -> int:
        return self.tensor.dimension

    @property
    def chart(self) -> str:
        return self.tensor.chart

    @property
    def components(self) -> Callable:
        return self.tensor.components

    def matrix(self, point, manifold: Optional[ChartManifold] = None, check: bool = True) -> np.ndarray:
        """Component matrix at ``point``; enforces symmetry, nondegeneracy
        and the declared signature unless ``check`` is false."""
        g = evaluate(self.tensor, point, 0, manifold).value
        if check:
            check_metric_matrix(g, self.declared_signature)
        return g


def check_metric_matrix(g: np.ndarray, declared: Optional[Signature] = None) -> None:
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.max(np.abs(g - g.T)) > SYMMETRY_TOL * scale:
        raise ValueError(f"metric not symmetric (|g - g^T| = {np.max(np.abs(g - g.T)):.2e})")
    if abs(np.linalg.det(g)) <= DEGENERACY_TOL:
        raise Degenerate(f"|det g| = {abs(np.linalg.det(g)):.3e}")
    sig = Signature.of(g)
    if declared is not None and sig != declared:
        raise SignatureMismatch(f"signature {sig} differs from declared {declared}")


def signature_at(metric, point, manifold: Optional[ChartManifold] = None) -> Signature:
    """Sign counts of the eigenvalues of the metric components at ``point``.

    Accepts a :class:`MetricField` or a bare component matrix.
    """
    if isinstance(metric, MetricField):
        g = metric.matrix(point, manifold, check=False)
    else:
        g = np.asarray(metric, dtype=float)
    return Signature.of(g)


def constant_field(value, variance: Sequence[str], chart: str, name: str = "") -> TensorFieldSpec:
    arr = jnp.asarray(value, dtype=float)
    return TensorFieldSpec(tuple(variance), lambda x: arr + 0.0 * x[0], chart, arr.shape[0] if arr.ndim else 0, name)


# ----------------------------------------------------------- standard atlases

def circle(name: str = "S1") -> ChartManifold:
    """S^1 as two angle charts: ``a`` on (-pi, pi), ``b`` on (-2pi, 0)."""
    a = Chart("a", 1, (-math.pi,), (math.pi,), names=("u",))
    b = Chart("b", 1, (-2 * math.pi,), (0.0,), names=("u",))
    two_pi = 2 * math.pi
    ab = TransitionMap("a", "b", lambda u: jnp.where(u > 0, u - two_pi, u), overlap=lambda u: abs(u[0]) > 1e-12)
    ba = TransitionMap("b", "a", lambda u: jnp.where(u < -math.pi, u + two_pi, u), overlap=lambda u: abs(u[0] + math.pi) > 1e-12)
    return ChartManifold(name, (a, b), (ab, ba), home="a")


def stereographic_inverse(sigma, pole: int = 1):
    """Unit-sphere point in R^4 from stereographic coordinates.

    ``pole=+1`` projects from the north pole (x4 = 1), ``-1`` from the south.
    """
    s = jnp.asarray(sigma)
    r2 = jnp.sum(s * s)
    return jnp.concatenate([2 * s / (1 + r2), jnp.array([pole * (r2 - 1) / (r2 + 1)])])


def stereographic(x, pole: int = 1):
    x = jnp.asarray(x)
    return x[:3] / (1 - pole * x[3])


def sphere3(name: str = "S3") -> ChartManifold:
    """S^3 as north/south stereographic charts; sigma' = sigma / |sigma|^2."""
    north = Chart("north", 3, names=("s1", "s2", "s3"))
    south = Chart("south", 3, names=("s1", "s2", "s3"))

    def invert(s):
        return s / jnp.sum(s * s)

    def nonzero(s):
        return float(np.sum(np.square(s))) > 1e-20

    return ChartManifold(
        name,
        (north, south),
        (
            TransitionMap("north", "south", invert, overlap=nonzero),
            TransitionMap("south", "north", invert, overlap=nonzero),
        ),
        home="north",
    )
