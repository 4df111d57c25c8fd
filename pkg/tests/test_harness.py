import json
import math

import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfb.charts import Signature
from mfb.errors import ParseError, ValidationError
from mfb.harness.expr import compile_array, compile_expr, parse, tokenize
from mfb.harness.scenarios import BUILTINS, DEFAULT_TOLERANCES, builtin, load_scenario, scenario_from_dict
from mfb.report import ResidualReport

small = st.floats(-3, 3, allow_nan=False)

FLAT_KK_FILE = {
    "name": "file_kk",
    "coordinates": ["t", "x", "y", "z", "u"],
    "periodic": {"u": 2 * math.pi},
    "parameters": {"B": 0.5},
    "metric": {"diagonal": ["-1", "1", "1 - (B*x)^2", "1", "-1"], "components": {"y,u": "-B*x"}},
    "signature": {"minus": 2, "plus": 3},
    "bundle": {"base": ["t", "x", "y", "z"], "s": "u", "w": {"type": "point"}},
    "killing": [["0", "0", "0", "0", "1"]],
    "time_reference": ["1", "0", "0", "0", "0"],
}


@given(small, small)
def test_expression_oracle(a, b):
    f = compile_expr("2*x^2 - sin(y)/ (1 + exp(x)) + -cos(pi*y)", ("x", "y"))
    expect = 2 * a * a - math.sin(b) / (1 + math.exp(a)) - math.cos(math.pi * b)
    assert abs(float(f(jnp.array([a, b]))) - expect) < 1e-12


def test_precedence_and_unary():
    f = compile_expr("-2^2 + 3*4/2 - (1-4)", ("x",))
    assert float(f(jnp.zeros(1))) == -4 + 6 + 3
    assert float(compile_expr("2^3^2", ("x",))(jnp.zeros(1))) == 512.0


def test_parameters_fold_in():
    f = compile_expr("B*x", ("x",), {"B": 3.0})
    assert float(f(jnp.array([2.0]))) == 6.0
    with pytest.raises(ParseError):
        parse("x", ("x",), {"x": 1.0})


@pytest.mark.parametrize("text,token", [("tan(x)", "tan"), ("x $ 2", "$"), ("foo + 1", "foo")])
def test_parse_errors_name_the_token(text, token):
    with pytest.raises(ParseError) as err:
        parse(text, ("x",))
    assert token in str(err.value)


@pytest.mark.parametrize("text", ["(x", "x +", "sin x", "x y", ""])
def test_malformed(text):
    with pytest.raises(ParseError):
        parse(text, ("x",))


def test_tokenizer_numbers():
    toks = tokenize("1.5e-3 + .25")
    assert toks[0][1] == 1.5e-3 and toks[2][1] == 0.25


def test_compile_array_shape_and_grad():
    import jax

    f = compile_array([["x", 0], [0, "x*y"]], ("x", "y"))
    assert f(jnp.array([2.0, 3.0])).shape == (2, 2)
    d = jax.jacfwd(f)(jnp.array([2.0, 3.0]))
    assert float(d[1, 1, 0]) == 3.0 and float(d[1, 1, 1]) == 2.0


def test_builtins_and_arguments():
    m = builtin("minkowski5")
    assert m.dimension == 5 and m.metric.declared_signature == Signature(2, 3)
    assert builtin("flat_kk(0.5)").parameters["B"] == 0.5
    assert builtin("flat_kk(B=2)").parameters["B"] == 2.0
    with pytest.raises(ValidationError):
        builtin("nope")
    with pytest.raises(ParseError):
        builtin("flat_kk(B=abc)")
    with pytest.raises(ValidationError):
        builtin("flat_kk(C=1)")
    for name in BUILTINS:
        sc = builtin(name)
        assert sc.samples(np.random.default_rng(0), 3).shape == (3, sc.dimension)


def test_file_scenario_matches_builtin(tmp_path):
    path = tmp_path / "kk.json"
    path.write_text(json.dumps(FLAT_KK_FILE), encoding="utf-8")
    sc = load_scenario(str(path))
    ref = builtin("flat_kk(0.5)")
    x = np.array([0.1, 0.7, -0.2, 0.3, 1.0])
    assert np.allclose(sc.metric.matrix(x), ref.metric.matrix(x), atol=1e-15)
    assert sc.bundle is not None and sc.bundle.s_factor.kind == "s1"


def test_bad_files(tmp_path):
    def write(data):
        p = tmp_path / "s.json"
        p.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
        return str(p)

    with pytest.raises(ParseError):
        load_scenario(write("{not json"))
    bad = dict(FLAT_KK_FILE, metric={"diagonal": ["-1", "1", "tanh(x)", "1", "-1"]})
    with pytest.raises(ParseError) as err:
        load_scenario(write(bad))
    assert "tanh" in str(err.value)
    with pytest.raises(ValidationError) as err:
        load_scenario(write(dict(FLAT_KK_FILE, signature={"minus": 1, "plus": 4})))
    assert err.value.invariant == "signature"
    with pytest.raises(ValidationError):
        load_scenario(write({k: v for k, v in FLAT_KK_FILE.items() if k != "metric"}))
    with pytest.raises(ValidationError):
        load_scenario(write(dict(FLAT_KK_FILE, tolerances={"nonsense": 1.0})))
    with pytest.raises(ValidationError):
        load_scenario(str(tmp_path / "missing.json"))
    degenerate = dict(FLAT_KK_FILE, metric={"diagonal": ["-1", "1", "1", "1", "0"]})
    with pytest.raises(ValidationError):
        scenario_from_dict(degenerate)


def test_tolerance_overrides():
    sc = builtin("minkowski5").with_tolerances({"flat": 1e-3})
    assert sc.tol("flat") == 1e-3 and sc.tol("bianchi") == DEFAULT_TOLERANCES["bianchi"]
    with pytest.raises(ValidationError):
        builtin("minkowski5").with_tolerances({"bogus": 1})


@given(st.floats(0, 1), st.floats(0, 1))
def test_report_verdict_invariant(res, tol):
    rep = ResidualReport("s", "x")
    e = rep.add("check", "", res, tol)
    assert e.passed == (res <= tol)
    assert e.reference == "plumbing"
    assert rep.passed == e.passed


def test_report_errors_and_json():
    rep = ResidualReport("s", "x")
    rep.add("ok", "identity", 0.0, 1e-9)
    rep.add_error("boom", "identity", 1e-9, RuntimeError("bad"))
    assert not rep.passed and [e.name for e in rep.failures()] == ["boom"]
    data = json.loads(rep.to_json())
    assert data["entries"][1]["residual"] == "inf" and "RuntimeError" in data["entries"][1]["error"]
    assert "FAIL  boom" in rep.summary()
    with pytest.raises(KeyError):
        rep.entry("missing")
