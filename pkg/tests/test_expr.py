import numpy as np
import pytest

from interpchi.expr import ExpressionError, compile_expression, evaluate_constant


def test_arithmetic_and_functions():
    f = compile_expression("sin(u1)^2 + cos(u1)**2 + exp(0)*sqrt(4) - log(1)", ["u1"])
    np.testing.assert_allclose(f({"u1": np.linspace(0, 3, 7)}), 3.0)


def test_caret_binds_tighter_than_plus():
    f = compile_expression("u1+1^2", ["u1"])
    assert f({"u1": np.array([2.0])})[0] == pytest.approx(3.0)
    g = compile_expression("-u1^2", ["u1"])
    assert g({"u1": np.array([3.0])})[0] == pytest.approx(-9.0)


def test_constants_broadcast_to_input_shape():
    f = compile_expression("2*pi", ["u1"])
    out = f({"u1": np.zeros(4)})
    assert out.shape == (4,)
    np.testing.assert_allclose(out, 2 * np.pi)


def test_evaluate_constant():
    assert evaluate_constant("pi/2") == pytest.approx(np.pi / 2)
    assert evaluate_constant(3) == 3.0


@pytest.mark.parametrize(
    "src",
    ["__import__('os')", "u2", "foo(u1)", "u1 if u1 else 0", "sin(u1, u1)", "u1 +", "[u1]", "True"],
)
def test_rejects_unsafe_or_unknown(src):
    with pytest.raises(ExpressionError):
        compile_expression(src, ["u1"])


def test_rejects_non_string():
    with pytest.raises(ExpressionError):
        compile_expression(1.0, ["u1"])
