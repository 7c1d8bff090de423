from __future__ import annotations

import math

import numpy as np
import pytest

from ultracalc.expr import ExpressionError, parse


@pytest.mark.parametrize("source, value", [
    ("1 + 2 * 3", 7.0),
    ("(1 + 2) * 3", 9.0),
    ("2 ^ 3 ^ 2", 512.0),
    ("-2 ^ 2", -4.0),
    ("8 / 4 / 2", 1.0),
    ("1e-3 * 1000", 1.0),
    (".5 + 1.", 1.5),
    ("abs(-3) + cos(0) + exp(0) + sin(0)", 5.0),
])
def test_constant_expressions(source, value):
    assert float(parse(source)()) == pytest.approx(value)


def test_variables_and_vectorisation():
    e = parse("x*y + t - u")
    out = e(x=np.array([1.0, 2.0]), y=np.array([3.0, 4.0]), t=0.5, u=0.5)
    np.testing.assert_array_equal(out, [3.0, 8.0])
    assert e.names == {"x", "y", "t", "u"}


def test_point_function_with_radius():
    f = parse("1/r").point_function()
    assert float(f(np.array([[3.0, 4.0]]))[0]) == pytest.approx(0.2)
    assert f.source == "1/r"


def test_flux_function():
    F = parse("u^2/2 + x*t").flux_function()
    out = F(2.0, np.array([[1.0], [2.0]]), np.array([1.0, 3.0]))
    np.testing.assert_allclose(out, [2.5, 8.5])


@pytest.mark.parametrize("source, position", [
    ("1 +", 3),
    ("(1 + 2", 6),
    ("foo(1)", 0),
    ("1 $ 2", 2),
    ("w + 1", 0),
    ("1 2", 2),
])
def test_errors_report_position(source, position):
    with pytest.raises(ExpressionError) as info:
        parse(source)
    assert info.value.position == position
    assert "^" in str(info.value)


def test_division_by_zero_gives_inf_not_exception():
    assert math.isinf(float(parse("1/x")(x=0.0)))
