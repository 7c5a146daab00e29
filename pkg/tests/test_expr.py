import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subreglab.errors import ParseError
from subreglab.expr import parse_expr, parse_relation

CORPUS_BODIES = [
    ("x1^2", 1), ("1 + x1^4", 1), ("2*x1^2 + 0.5*x1^2*sin(1/x1)", 1), ("x1*abs(x1)", 1),
    ("(abs(x1) + abs(x2))^2", 2), ("x1*sqrt(abs(x1))", 1), ("max(abs(x1) - 1, 0)^2", 1),
    ("abs(x1)", 1), ("x1^2 + x2^2", 2),
]


def test_basic_values():
    e = parse_expr("x1^2 - 3*x2 + 1/x1", 2)
    X = np.array([[2.0, 1.0], [-1.0, 0.5]])
    np.testing.assert_allclose(e.values(X), [4 - 3 + 0.5, 1 - 1.5 - 1])


def test_functions_and_precedence():
    e = parse_expr("-x1^2 + min(x1, 2) * max(abs(x1), 3) + sqrt(4) + cos(0)", 1)
    assert e.values(np.array([[1.5]]))[0] == pytest.approx(-2.25 + 1.5 * 3 + 2 + 1)


def test_sin_inverse_value_against_mpmath():
    x = 1 / (2 * math.pi)
    e = parse_expr("2*x1^2 + 0.5*x1^2*sin(1/x1)", 1)
    mpmath.mp.dps = 40
    xm = 1 / (2 * mpmath.pi)
    ref = 2 * xm**2 + mpmath.mpf("0.5") * xm**2 * mpmath.sin(1 / xm)
    assert e.values(np.array([[x]]))[0] == pytest.approx(float(ref), rel=1e-14)


@pytest.mark.parametrize("text", ["foo(x1)", "x1 +", "x1^0.5", "x1 $ 2", "(x1", "x4"])
def test_rejects_malformed(text):
    with pytest.raises(ParseError) as err:
        parse_expr(text, 3 if text != "x4" else 1)
    assert err.value.column is not None or err.value.line is not None or str(err.value)


def test_error_column_points_at_unknown_name():
    with pytest.raises(ParseError) as err:
        parse_expr("x1 + bar(x1)", 1)
    assert err.value.column == 6


def test_relation_parsing():
    poly, rel = parse_relation("x1^2 + x2 <= 1", 2)
    X = np.array([[0.5, 0.5], [1.0, 0.5]])
    assert rel == "<="
    np.testing.assert_allclose(poly.values(X), [-0.25, 0.5])


def test_relation_rejects_missing_operator():
    with pytest.raises(ParseError):
        parse_relation("x1 + 1", 1)


@pytest.mark.parametrize("text,dim", CORPUS_BODIES)
def test_jet_gradient_matches_central_differences(text, dim, rng):
    e = parse_expr(text, dim)
    X = rng.uniform(0.2, 2.0, size=(100, dim)) * rng.choice([-1, 1], size=(100, dim))
    g = e.jet(X).g
    h = 1e-6
    for i in range(dim):
        E = np.zeros(dim)
        E[i] = h
        fd = (e.values(X + E) - e.values(X - E)) / (2 * h)
        scale = np.maximum(np.abs(g[:, i]), 1.0)
        assert np.max(np.abs(fd - g[:, i]) / scale) <= 1e-5


@pytest.mark.parametrize("text,dim", CORPUS_BODIES)
def test_jet_hessian_matches_differences_of_gradient(text, dim, rng):
    e = parse_expr(text, dim)
    X = rng.uniform(0.2, 2.0, size=(30, dim)) * rng.choice([-1, 1], size=(30, dim))
    H = e.jet(X).h
    h = 1e-5
    for i in range(dim):
        E = np.zeros(dim)
        E[i] = h
        fd = (e.jet(X + E).g - e.jet(X - E).g) / (2 * h)
        scale = np.maximum(np.abs(H[:, :, i]), 1.0)
        assert np.max(np.abs(fd - H[:, :, i]) / scale) <= 1e-4


def test_evaluation_is_deterministic(rng):
    e = parse_expr("2*x1^2 + 0.5*x1^2*sin(1/x1)", 1)
    X = rng.normal(size=(500, 1))
    assert np.array_equal(e.values(X), e.values(X.copy()))


def test_kink_mask_marks_nonsmooth_points():
    e = parse_expr("abs(x1) + max(x1, 0)", 1)
    jet = e.jet(np.array([[0.0], [1.0]]))
    assert jet.kink.tolist() == [True, False]


def test_polynomial_detection():
    assert parse_expr("x1^3 - 2*x1*x2 + 1", 2).is_polynomial()
    assert not parse_expr("abs(x1)", 1).is_polynomial()
    assert not parse_expr("1/x1", 1).is_polynomial()


coeffs = st.lists(st.integers(-5, 5), min_size=1, max_size=5)


@settings(max_examples=50, deadline=None)
@given(coeffs, st.floats(-3, 3))
def test_dsl_text_roundtrip_of_polynomials(cs, x):
    text = " + ".join(f"({c})*x1^{k}" for k, c in enumerate(cs))
    e = parse_expr(text, 1)
    back = parse_expr(e.to_dsl(), 1)
    X = np.array([[x]])
    assert back.values(X)[0] == e.values(X)[0]
    ref = sum(c * x**k for k, c in enumerate(cs))
    assert e.values(X)[0] == pytest.approx(ref, rel=1e-12, abs=1e-12)
