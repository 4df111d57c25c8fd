"""Scenario registry: built-in spacetimes and JSON scenario files.

Scenario file schema (JSON)::

    {
      "name": "my_kk",
      "coordinates": ["t", "x", "y", "z", "u"],
      "periodic": {"u": 6.283185307179586},
      "parameters": {"B": 1.0},
      "metric": {"matrix": [["-1", 0, ...], ...]}       # or
      "metric": {"diagonal": [...], "components": {"y,u": "-B*x"}},
      "signature": {"minus": 2, "plus": 3},
      "bundle": {"base": ["t", "x", "y", "z"], "s": "u",
                 "w": {"type": "point" | "s1" | "torus" | "s3", "coordinates": [...]}},
      "killing": [["0", "0", "0", "0", "1"]],
      "time_reference": ["1", "0", "0", "0", "0"],
      "samples": {"box": {"x": [-1, 1]}},
      "tolerances": {"bianchi": 1e-6},
      "flat": false
    }

Only the product bundle form is accepted from files; twisted bundles are
built in.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import jax
import jax.numpy as jnp
import numpy as np

from .. import quaternion as quat
from ..charts import (
    CO,
    Chart,
    ChartManifold,
    MetricField,
    Signature,
    TensorFieldSpec,
    stereographic,
    stereographic_inverse,
)
from ..errors import Degenerate, ParseError, ValidationError
from ..multifiber import (
    BundlePiece,
    MultiFiberBundle,
    circle_factor,
    point_factor,
    product_bundle,
    sphere3_factor,
    torus_factor,
)
from .expr import compile_array

TWO_PI = 2 * math.pi

DEFAULT_TOLERANCES = {
    "flat": 1e-12,
    "calibration": 1e-9,
    "bianchi": 1e-6,
    "bianchi_fd": 1e-4,
    "riemann_symmetry": 1e-9,
    "christoffel_symmetry": 1e-12,
    "einstein_trace": 1e-9,
    "dF": 1e-10,
    "unit": 1e-10,
    "killing": 1e-9,
    "geodesic_Y": 1e-9,
    "maxwell_bridge": 1e-6,
    "average_unit": 1e-9,
    "average_killing": 1e-8,
    "average_value": 1e-9,
    "recombination": 1e-6,
    "decomposition": 1e-9,
    "trajectory": 1e-6,
    "larmor": 1e-5,
    "conservation": 1e-8,
    "fiber": 1e-9,
    "atlas": 1e-8,
    "spectrum_s1": 1e-3,
    "frame": 1e-8,
    "gram": 1e-8,
    "derivative_fd": 1e-7,
    "step_ratio": 4.0,  # |ratio - 16|, i.e. ratio in [12, 20]
    "spectrum_ratio": 0.2,  # |ratio - 4|
    "detector": 0.0,
}


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    coordinates: tuple
    manifold: ChartManifold
    metric: MetricField
    bundle: Optional[MultiFiberBundle] = None
    killing: tuple = ()  # vector-field callables
    time_reference: Optional[Callable] = None
    box: tuple = ()  # (lower, upper) arrays for sampling
    tolerances: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    flat: bool = False
    constant_curvature: Optional[float] = None
    frame: Optional[Callable] = None  # S^3 frame for frame pullback
    averaged: Optional[Callable] = None  # expected fiber-averaged metric
    description: str = ""

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def samples(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo, hi = (np.asarray(b, dtype=float) for b in self.box)
        return rng.uniform(lo, hi, size=(count, self.dimension))

    def with_tolerances(self, overrides: dict) -> "Scenario":
        unknown = set(overrides) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ValidationError(f"unknown tolerance names {sorted(unknown)}", "tolerances")
        merged = dict(self.tolerances)
        merged.update({k: float(v) for k, v in overrides.items()})
        return Scenario(**{**self.__dict__, "tolerances": merged})


# ----------------------------------------------------------------- helpers

def _total(coords, periodic, box=None):
    n = len(coords)
    lower, upper, periods = [], [], []
    for c in coords:
        p = periodic.get(c)
        if p is not None:
            lower.append(-p / 2)
            upper.append(p / 2)
            periods.append(p)
        else:
            lower.append(-math.inf)
            upper.append(math.inf)
            periods.append(None)
    return ChartManifold("M", (Chart("home", n, lower, upper, periods, names=tuple(coords)),))


def _metric(fn, n, sig, name="g"):
    return MetricField(TensorFieldSpec((CO, CO), fn, "home", n, name), Signature(*sig))


def _basis(n, i):
    e = jnp.zeros(n).at[i].set(1.0)
    return lambda x: e + 0.0 * x[0]


def _box(coords, default=1.0, **ranges):
    lo, hi = [], []
    for c in coords:
        a, b = ranges.get(c, (-default, default))
        lo.append(a)
        hi.append(b)
    return (np.array(lo), np.array(hi))


KK4 = ("t", "x", "y", "z")


# --------------------------------------------------------------- built-ins

def minkowski5() -> Scenario:
    coords = KK4 + ("u",)
    total = _total(coords, {"u": TWO_PI})
    eta = jnp.diag(jnp.array([-1.0, 1, 1, 1, -1]))
    metric = _metric(lambda x: eta + 0.0 * x[0], 5, (2, 3))
    bundle = product_bundle("minkowski5", total, 4, circle_factor(), point_factor())
    return Scenario(
        "minkowski5", coords, total, metric, bundle,
        killing=(_basis(5, 4), _basis(5, 0), _basis(5, 1)),
        time_reference=_basis(5, 0),
        box=_box(coords, 2.0, u=(-3.0, 3.0)),
        flat=True,
        description="diag(-1,1,1,1,-1) on R^4 x S^1",
    )


def flat_kk(B: float = 1.0) -> Scenario:
    """eta - (du + B x dy)^2: uniform magnetic field along z."""
    coords = KK4 + ("u",)
    total = _total(coords, {"u": TWO_PI})
    eta = jnp.diag(jnp.array([-1.0, 1, 1, 1, 0]))

    def g(x):
        a = jnp.array([0.0, 0.0, B * x[1], 0.0, 1.0])
        return eta - jnp.outer(a, a)

    bundle = product_bundle("flat_kk", total, 4, circle_factor(), point_factor())
    return Scenario(
        f"flat_kk(B={B:g})", coords, total, _metric(g, 5, (2, 3)), bundle,
        killing=(_basis(5, 4), _basis(5, 0), _basis(5, 3), _basis(5, 2)),
        time_reference=_basis(5, 0),
        box=_box(coords, 1.0, u=(-3.0, 3.0)),
        parameters={"B": B},
        description="Minkowski x S^1 with potential A = B x dy",
    )


def warped_kk() -> Scenario:
    coords = KK4 + ("u", "w")
    total = _total(coords, {"u": TWO_PI, "w": TWO_PI})

    def g(x):
        t, X, y, z = x[0], x[1], x[2], x[3]
        a = jnp.array([0.2 * jnp.sin(z), 0.0, 0.4 * X, 0.0, 1.0, 0.0])
        d = jnp.array([-1.0, jnp.exp(0.2 * t), jnp.exp(0.2 * t), jnp.exp(0.2 * t), 0.0, (1 + 0.2 * jnp.cos(X)) ** 2])
        return jnp.diag(d) - jnp.outer(a, a)

    bundle = product_bundle("warped_kk", total, 4, circle_factor(), circle_factor("W"))
    return Scenario(
        "warped_kk", coords, total, _metric(g, 6, (2, 4)), bundle,
        killing=(_basis(6, 4), _basis(6, 5)),
        time_reference=_basis(6, 0),
        box=_box(coords, 1.0, u=(-3.0, 3.0), w=(-3.0, 3.0)),
        description="expanding base, potential 0.4 x dy + 0.2 sin z dt, W = S^1 of radius 1 + 0.2 cos x",
    )


def _round_s3_block(sigma, radius):
    r2 = jnp.sum(sigma * sigma)
    return radius ** 2 * 4 / (1 + r2) ** 2 * jnp.eye(3)


def product_r13_s1_s3() -> Scenario:
    coords = KK4 + ("u", "s1", "s2", "s3")
    total = _total(coords, {"u": TWO_PI})

    def g(x):
        a = jnp.array([0.0, 0.0, 0.5 * x[1], 0.0, 1.0])
        top = jnp.diag(jnp.array([-1.0, 1, 1, 1, 0])) - jnp.outer(a, a)
        radius = 2 + 0.2 * jnp.sin(x[1])
        out = jnp.zeros((8, 8))
        out = out.at[:5, :5].set(top)
        return out.at[5:, 5:].set(_round_s3_block(x[5:], radius))

    bundle = product_bundle("product_r13_s1_s3", total, 4, circle_factor(), sphere3_factor())
    return Scenario(
        "product_r13_s1_s3", coords, total, _metric(g, 8, (2, 6)), bundle,
        killing=(_basis(8, 4),),
        time_reference=_basis(8, 0),
        box=_box(coords, 1.0, u=(-3.0, 3.0), s1=(-0.5, 0.5), s2=(-0.5, 0.5), s3=(-0.5, 0.5)),
        description="R^{1,3} x S^1 x S^3, S^3 of radius 2 + 0.2 sin x",
    )


def u_periodic() -> Scenario:
    """u-dependent metric for averaging; d_u stays unit but is not Killing."""
    coords = KK4 + ("u",)
    total = _total(coords, {"u": TWO_PI})

    def g(x):
        u = x[4]
        m = jnp.diag(jnp.array([-1.0, 1 + 0.3 * jnp.sin(u), 1.0, 1.0, -1.0]))
        c = 0.1 * jnp.cos(u)
        return m.at[0, 2].set(c).at[2, 0].set(c)

    bundle = product_bundle("u_periodic", total, 4, circle_factor(), point_factor())
    return Scenario(
        "u_periodic", coords, total, _metric(g, 5, (2, 3)), bundle,
        killing=(),
        time_reference=_basis(5, 0),
        box=_box(coords, 1.0, u=(-3.0, 3.0)),
        averaged=lambda x: jnp.diag(jnp.array([-1.0, 1.0, 1.0, 1.0, -1.0])) + 0.0 * x[0],
        description="g_xx = 1 + 0.3 sin u, g_ty = 0.1 cos u",
    )


def _twist_axis(b):
    """Base-dependent unit imaginary axis."""
    alpha = 0.7 + 0.3 * jnp.sin(b[1])
    beta = 0.4 * b[2] - 0.2 * b[0] + 0.3 * b[3]
    return jnp.stack([jnp.cos(alpha), jnp.sin(alpha) * jnp.cos(beta), jnp.sin(alpha) * jnp.sin(beta)])


def twisted_phi() -> Scenario:
    """h = u and f = exp(u n(b)) q(sigma): the S-fiber through p is a
    twisted circle that moves in S^3 as well as in u."""
    coords = KK4 + ("u", "s1", "s2", "s3")
    total = _total(coords, {"u": TWO_PI})
    s_fac, w_fac = circle_factor(), sphere3_factor()

    def g(x):
        out = jnp.zeros((8, 8))
        out = out.at[:5, :5].set(jnp.diag(jnp.array([-1.0, 1, 1, 1, -4.0])))
        return out.at[5:, 5:].set(_round_s3_block(x[5:], 1.0))

    def make_piece(pid, shift, domain):
        shift = jnp.asarray(shift)

        def pi(x):
            return x[:4] + shift

        def h(x):
            return s_fac.embed(x[4:5])

        def f(x):
            return quat.mul(quat.exp_imaginary(x[4], _twist_axis(x[:4])), stereographic_inverse(x[5:], 1))

        def phi_inv(b, s, w):
            base = b - shift
            q = quat.mul(quat.exp_imaginary(-s[0], _twist_axis(base)), stereographic_inverse(w, 1))
            return jnp.concatenate([base, s, stereographic(q, 1)])

        return BundlePiece(pid, pi, h, f, phi_inv, domain, base_chart=pid)

    pieces = (
        make_piece("east", [0.0, 0.0, 0.0, 0.0], lambda x: x[1] > -1.0),
        make_piece("west", [0.0, 0.0, 0.0, 1.0], lambda x: x[1] < 1.0),
    )
    base = ChartManifold("base", (Chart("east", 4), Chart("west", 4)))
    bundle = MultiFiberBundle("twisted_phi", total, base, s_fac, w_fac, pieces)
    return Scenario(
        "twisted_phi", coords, total, _metric(g, 8, (2, 6)), bundle,
        killing=(),
        time_reference=_basis(8, 0),
        box=_box(coords, 1.0, u=(-3.0, 3.0), s1=(-0.5, 0.5), s2=(-0.5, 0.5), s3=(-0.5, 0.5)),
        frame=quat.left_invariant_frame,
        description="Phi twisted by a base-dependent quaternion rotation; W = S^3",
    )


def round_sphere(dim: int, radius: float = 1.0) -> Scenario:
    coords = tuple(f"s{i + 1}" for i in range(dim))
    total = _total(coords, {})

    def g(x):
        return radius ** 2 * 4 / (1 + jnp.sum(x * x)) ** 2 * jnp.eye(dim)

    return Scenario(
        f"round_s{dim}", coords, total, _metric(g, dim, (0, dim)),
        box=_box(coords, 1.0),
        constant_curvature=1.0 / radius ** 2,
        description=f"round S^{dim} of radius {radius:g}, stereographic chart",
    )


BUILTINS = {
    "minkowski5": minkowski5,
    "flat_kk": flat_kk,
    "warped_kk": warped_kk,
    "product_r13_s1_s3": product_r13_s1_s3,
    "u_periodic": u_periodic,
    "twisted_phi": twisted_phi,
    "round_s3": lambda: round_sphere(3),
    "round_s2": lambda: round_sphere(2),
}

KILLING_SCENARIOS = ("minkowski5", "flat_kk", "warped_kk", "product_r13_s1_s3")

_CALL = re.compile(r"^\s*([A-Za-z_0-9]+)\s*(?:\((.*)\))?\s*$")


def builtin(spec: str) -> Scenario:
    """``name`` or ``name(args)``, e.g. ``flat_kk(0.5)`` or ``flat_kk(B=0.5)``."""
    m = _CALL.match(spec)
    if not m or m.group(1) not in BUILTINS:
        raise ValidationError(f"unknown scenario {spec!r}", "name")
    name, args = m.group(1), m.group(2)
    if not args:
        return BUILTINS[name]()
    pos, kw = [], {}
    for part in args.split(","):
        part = part.strip()
        if not part:
            continue
        key, _, val = part.rpartition("=")
        try:
            num = float(val)
        except ValueError:
            raise ParseError(f"bad scenario argument {part!r}", None, part) from None
        if key:
            kw[key.strip()] = num
        else:
            pos.append(num)
    try:
        return BUILTINS[name](*pos, **kw)
    except TypeError as exc:
        raise ValidationError(f"{name}: {exc}", "arguments") from None


# ---------------------------------------------------------------- loading

def load_scenario(path_or_name: str, rng_seed: int = 0) -> Scenario:
    """Built-in by name, or a JSON scenario file (validated)."""
    head = _CALL.match(str(path_or_name))
    if head and head.group(1) in BUILTINS:
        return builtin(str(path_or_name))
    try:
        with open(path_or_name, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {path_or_name!r}: {exc}", "file") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.pos) from None
    return scenario_from_dict(data, rng_seed)


def _require(data, key, kind=None):
    if key not in data:
        raise ValidationError(f"missing field {key!r}", key)
    val = data[key]
    if kind is not None and not isinstance(val, kind):
        raise ValidationError(f"field {key!r} has the wrong type", key)
    return val


def _metric_fn(spec, coords, params):
    n = len(coords)
    if "matrix" in spec:
        mat = spec["matrix"]
        if len(mat) != n or any(len(r) != n for r in mat):
            raise ValidationError(f"metric matrix must be {n}x{n}", "metric.shape")
        return compile_array(mat, coords, params)
    diag = spec.get("diagonal", [0] * n)
    if len(diag) != n:
        raise ValidationError(f"metric diagonal must have {n} entries", "metric.shape")
    entries = [[0 for _ in range(n)] for _ in range(n)]
    for i, d in enumerate(diag):
        entries[i][i] = d
    for key, val in spec.get("components", {}).items():
        a, _, b = key.partition(",")
        a, b = a.strip(), b.strip()
        if a not in coords or b not in coords:
            raise ValidationError(f"metric component {key!r} names unknown coordinates", "metric.components")
        i, j = coords.index(a), coords.index(b)
        entries[i][j] = val
        entries[j][i] = val
    return compile_array(entries, coords, params)


def _bundle_from(spec, coords, total, name):
    base = spec.get("base", [])
    s = spec.get("s")
    w = spec.get("w", {"type": "point"})
    order = list(base) + ([s] if s else []) + list(w.get("coordinates", []))
    if order != list(coords):
        raise ValidationError("bundle coordinates must list base, then s, then w in coordinate order", "bundle.order")
    factories = {"point": lambda: point_factor(), "s1": lambda: circle_factor("W"), "s3": lambda: sphere3_factor(),
                 "torus": lambda: torus_factor(len(w.get("coordinates", [])))}
    kind = w.get("type", "point")
    if kind not in factories:
        raise ValidationError(f"unknown fiber type {kind!r}", "bundle.w.type")
    wf = factories[kind]()
    if wf.dimension != len(w.get("coordinates", [])):
        raise ValidationError("W coordinates do not match the fiber type", "bundle.w.coordinates")
    return product_bundle(name, total, len(base), circle_factor(), wf)


def scenario_from_dict(data: dict, rng_seed: int = 0) -> Scenario:
    name = str(_require(data, "name", str))
    coords = tuple(_require(data, "coordinates", list))
    if len(set(coords)) != len(coords) or not coords:
        raise ValidationError("coordinates must be distinct and nonempty", "coordinates")
    params = {str(k): float(v) for k, v in data.get("parameters", {}).items()}
    periodic = {str(k): float(v) for k, v in data.get("periodic", {}).items()}
    for k, p in periodic.items():
        if k not in coords or not p > 0:
            raise ValidationError(f"bad period for {k!r}", "periodic")
    total = _total(coords, periodic)
    n = len(coords)
    g = _metric_fn(_require(data, "metric", dict), coords, params)
    sig_spec = _require(data, "signature")
    sig = Signature(int(sig_spec["minus"]), int(sig_spec["plus"])) if isinstance(sig_spec, dict) else Signature(*map(int, sig_spec))
    if sig.minus + sig.plus != n:
        raise ValidationError(f"signature {sig} does not match dimension {n}", "signature")
    metric = _metric(g, n, sig)
    bundle = _bundle_from(data["bundle"], coords, total, name) if "bundle" in data else None
    killing = tuple(compile_array(k, coords, params) for k in data.get("killing", []))
    tref = compile_array(data["time_reference"], coords, params) if "time_reference" in data else None
    box_spec = data.get("samples", {}).get("box", {})
    box = _box(coords, 1.0, **{k: tuple(v) for k, v in box_spec.items()})
    for c in coords:
        if c in periodic and c not in box_spec:
            i = coords.index(c)
            box[0][i], box[1][i] = -0.45 * periodic[c], 0.45 * periodic[c]
    scen = Scenario(
        name, coords, total, metric, bundle, killing, tref, box,
        {k: float(v) for k, v in data.get("tolerances", {}).items()}, params,
        bool(data.get("flat", False)), data.get("constant_curvature"),
        description=str(data.get("description", "")),
    )
    unknown = set(scen.tolerances) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ValidationError(f"unknown tolerance names {sorted(unknown)}", "tolerances")
    validate(scen, rng_seed)
    return scen


def validate(scen: Scenario, rng_seed: int = 0, count: int = 10) -> None:
    """Expressions evaluate, metric is symmetric and nondegenerate and its
    signature matches the declared one at sample points."""
    rng = np.random.default_rng(rng_seed)
    gfn = jax.jit(scen.metric.components)
    for x in scen.samples(rng, count):
        try:
            gx = np.asarray(gfn(jnp.asarray(x)))
        except Exception as exc:  # evaluation failure inside user expressions
            raise ValidationError(f"metric fails to evaluate at {x}: {exc}", "evaluates") from None
        if gx.shape != (scen.dimension, scen.dimension) or not np.all(np.isfinite(gx)):
            raise ValidationError(f"metric not finite at {x}", "evaluates")
        if np.max(np.abs(gx - gx.T)) > 1e-14:
            raise ValidationError("metric not symmetric", "symmetry")
        try:
            sig = Signature.of(gx)
        except Degenerate as exc:
            raise ValidationError(f"metric degenerate at {x}: {exc}", "nondegenerate") from None
        if sig != scen.metric.declared_signature:
            raise ValidationError(
                f"declared signature {scen.metric.declared_signature} but computed {sig} at {x}", "signature"
            )
        for k in scen.killing:
            if np.asarray(k(jnp.asarray(x))).shape != (scen.dimension,):
                raise ValidationError("Killing field has the wrong shape", "killing")
