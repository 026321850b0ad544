import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from milnor.dual import Jet
from milnor.germ import (DimensionError, GermSyntaxError, evaluate, format_germ, jacobian,
                         parse_germ, validate)

EX1 = "vars x y z\nx^2*z + y^3 - z; x"


def test_parse_examples():
    g = parse_germ(EX1)
    assert (g.n, g.k) == (3, 2)
    ident = parse_germ("vars x y\nx; y")
    assert (ident.n, ident.k) == (2, 2)
    sq = parse_germ("vars x y\nx^2 - y^2; 2*x*y")
    assert np.allclose(evaluate(sq, [0.3, 0.4]), [0.09 - 0.16, 0.24])


def test_evaluate_examples():
    g = parse_germ(EX1)
    assert evaluate(g, [1, 1, 1]).tolist() == [1.0, 1.0]
    assert evaluate(g, [0, 0, 0]).tolist() == [0.0, 0.0]
    sq = parse_germ("vars x y\nx^2 - y^2; 2*x*y")
    assert evaluate(sq, [1, 0]).tolist() == [1.0, 0.0]


def test_jacobian_examples():
    g = parse_germ(EX1)
    assert jacobian(g, [0, 0, 0]).tolist() == [[0, 0, -1], [1, 0, 0]]
    ident = parse_germ("vars x y\nx; y")
    assert np.array_equal(jacobian(ident, [0.3, -2.0]), np.eye(2))
    sq = parse_germ("vars x y\nx^2 - y^2; 2*x*y")
    x, y = 0.7, -0.4
    assert np.allclose(jacobian(sq, [x, y]), [[2 * x, -2 * y], [2 * y, 2 * x]])


def test_dimension_mismatch():
    g = parse_germ(EX1)
    with pytest.raises(DimensionError):
        evaluate(g, [1, 2])
    with pytest.raises(DimensionError):
        jacobian(g, [1, 2, 3, 4])


def test_rationals_comments_and_whitespace():
    g = parse_germ("# header comment\nvars a b  # trailing\n 1/2*a^2 ;\n\n -3/4*b + a*b ;")
    assert np.allclose(evaluate(g, [2.0, 4.0]), [2.0, -3.0 + 8.0])


@pytest.mark.parametrize("src, fragment", [
    ("vars x y\nx + w; y", "w"),
    ("vars x y\nx^1.5; y", "1.5"),
    ("vars x y\nx^1/2; y", "1/2"),
    ("vars x y\n0.5*x; y", "0.5"),
    ("vars x y\nx/0; y", None),
    ("vars x y\n1/0*x; y", "0"),
    ("vars x x\nx; x", "x"),
    ("vars x y\n(x + y; y", None),
    ("x; y", None),
])
def test_syntax_errors_carry_spans(src, fragment):
    with pytest.raises(GermSyntaxError) as info:
        parse_germ(src)
    diags = info.value.diagnostics
    assert diags and all(d.severity == "error" for d in diags)
    raw = src.encode()
    for d in diags:
        if d.span is not None:
            assert 0 <= d.span[0] <= d.span[1] <= len(raw)
    if fragment is not None:
        spans = [raw[d.span[0]:d.span[1]].decode() for d in diags if d.span]
        assert any(fragment in s for s in spans)


def test_error_recovery_reports_several_problems():
    with pytest.raises(GermSyntaxError) as info:
        parse_germ("vars x y\nx + u; y^0.5; v")
    assert len(info.value.diagnostics) >= 3


def test_unary_minus_binds_tighter_than_power():
    # Grammar: factor := atom ('^' UINT)?, atom := '-' atom, so -x^2 is (-x)^2.
    g = parse_germ("vars x y\n-x^2; y")
    assert evaluate(g, [3.0, 0.0])[0] == 9.0
    assert any("parses as" in w.message and w.severity == "warning" for w in g.warnings)
    h = parse_germ("vars x y\n-(x^2); y")
    assert evaluate(h, [3.0, 0.0])[0] == -9.0


def test_validate_warnings():
    msgs = [d.message for d in validate(parse_germ(EX1))]
    assert "rank(Df(0)) = 2 = k; origin is a regular point" in msgs
    assert any("origin is a regular point" in d.message
               for d in validate(parse_germ("vars x y\nx; y")))
    bad = [d.message for d in validate(parse_germ("vars x y\nx^2+y^2; 0"))]
    assert any("constant" in m for m in bad)
    assert any("not independent" in m for m in bad)
    assert any("f(0)" in d.message for d in validate(parse_germ("vars x y\nx + 1; y")))
    assert any("k = 3 > n" in d.message for d in validate(parse_germ("vars x y\nx; y; x*y")))
    assert all(d.severity == "warning" for d in validate(parse_germ(EX1)))


def test_round_trip_bitwise_on_corpus(corpus):
    rng = np.random.default_rng(1)
    for g in corpus.values():
        g2 = parse_germ(format_germ(g), g.name)
        for x in rng.uniform(-2, 2, (100, g.n)):
            assert np.array_equal(evaluate(g, x), evaluate(g2, x))


def test_determinism(corpus):
    x = np.array([0.3, -0.7, 0.2])
    g = corpus["example1"]
    assert np.array_equal(evaluate(g, x), evaluate(g, x))
    assert np.array_equal(jacobian(g, x), jacobian(g, x))


def test_jet_rules():
    a, b = Jet.variable(2.0, 0, 2), Jet.variable(3.0, 1, 2)
    p = a * b + a ** 3 - (-b)
    assert p.value == 6.0 + 8.0 + 3.0
    assert np.allclose(p.grad, [3.0 + 12.0, 2.0 + 1.0])
    assert isinstance(p, Jet)


# Random polynomial germs for the format round trip.
_leaf = st.one_of(st.sampled_from(["x", "y", "z"]),
                  st.integers(-5, 5).map(str),
                  st.tuples(st.integers(-5, 5), st.integers(1, 4)).map(lambda t: f"{t[0]}/{t[1]}"))


def _combine(children):
    return st.one_of(
        st.tuples(children, children).map(lambda t: f"({t[0]} + {t[1]})"),
        st.tuples(children, children).map(lambda t: f"({t[0]} - {t[1]})"),
        st.tuples(children, children).map(lambda t: f"{t[0]}*{t[1]}"),
        st.tuples(children, st.integers(0, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
        children.map(lambda c: f"-({c})"),
    )


_expr = st.recursive(_leaf, _combine, max_leaves=8)


@settings(max_examples=60, deadline=None)
@given(st.lists(_expr, min_size=2, max_size=3),
       st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
def test_format_parse_semantics_preserved(exprs, x):
    g = parse_germ("vars x y z\n" + ";\n".join(exprs))
    g2 = parse_germ(format_germ(g))
    assert format_germ(g2) == format_germ(g)
    assert np.array_equal(evaluate(g, x), evaluate(g2, x))
