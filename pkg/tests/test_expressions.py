import math

import numpy as np
import pytest

from engellab.expressions import (
    BinOp,
    Call,
    FieldExpression,
    Num,
    Var,
    ParseError,
    parse,
)

VARS = ("w", "x", "y", "z", "t")


def ev(text, **env):
    full = {v: 0.0 for v in VARS}
    full.update(env)
    return parse(text, VARS).eval(full)


def test_cos_at_zero():
    assert ev("cos(t)", t=0.0) == 1.0


def test_masked_identity_matches_cos():
    rng = np.random.default_rng(1)
    for t in rng.uniform(-10.0, 10.0, size=100):
        lhs = ev("cos(t)*1 + sin(t)*0", t=t)
        assert abs(lhs - math.cos(t)) <= 1e-15


def test_symbolic_derivative_of_exp():
    f = FieldExpression("exp(2*x)", VARS)
    g = f.derivative("x")
    x0 = 0.0
    coords = [0.0] * 5
    coords[1] = x0
    assert abs(g(coords) - 2.0) < 1e-12
    h = 1e-6
    plus, minus = list(coords), list(coords)
    plus[1] += h
    minus[1] -= h
    fd = (f(plus) - f(minus)) / (2 * h)
    assert abs(g(coords) - fd) < 1e-8


def test_arithmetic_precedence_and_power():
    assert ev("1 + 2*3") == 7.0
    assert ev("2^3^1") == 8.0
    assert ev("-2^2") == -4.0  # unary minus binds outside the power
    assert ev("(1+2)*3") == 9.0
    assert ev("8/4/2") == 1.0


def test_scientific_notation():
    assert ev("1.5e2") == 150.0
    assert ev("2e-3") == 0.002


def test_roundtrip_print_reparse_random_trees():
    rng = np.random.default_rng(7)

    def random_tree(depth):
        if depth == 0:
            if rng.random() < 0.5:
                return Num(float(rng.integers(1, 9)))
            return Var(VARS[rng.integers(0, len(VARS))])
        kind = rng.integers(0, 3)
        if kind == 0:
            op = "+-*".__getitem__(rng.integers(0, 3))
            return BinOp(op, random_tree(depth - 1), random_tree(depth - 1))
        if kind == 1:
            fn = ("sin", "cos", "exp", "tanh")[rng.integers(0, 4)]
            return Call(fn, random_tree(depth - 1))
        return random_tree(depth - 1)

    for _ in range(50):
        tree = random_tree(3)
        reparsed = parse(str(tree), VARS)
        for _ in range(5):
            env = {v: float(rng.uniform(-2.0, 2.0)) for v in VARS}
            assert abs(tree.eval(env) - reparsed.eval(env)) <= 1e-15


def test_derivative_tree_matches_central_differences_order_h2():
    texts = ["sin(x)*exp(y)", "tanh(x*y) + x^3", "cos(x)/(2 + sin(y))"]
    rng = np.random.default_rng(3)
    for text in texts:
        f = FieldExpression(text, VARS)
        g = f.derivative("x")
        coords = [float(v) for v in rng.uniform(-1.0, 1.0, size=5)]
        errs = []
        hs = [1e-2, 5e-3, 2.5e-3]
        for h in hs:
            plus, minus = list(coords), list(coords)
            plus[1] += h
            minus[1] -= h
            fd = (f(plus) - f(minus)) / (2 * h)
            errs.append(abs(fd - g(coords)) + 1e-300)
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert abs(slope - 2.0) < 0.3


def test_gradient_agrees_with_component_derivatives():
    f = FieldExpression("x*exp(w) - z^2", VARS)
    coords = [0.3, -0.2, 0.5, 1.1, 0.0]
    grad = f.gradient(coords)
    for i, v in enumerate(VARS):
        assert abs(grad[i] - f.derivative(v)(coords)) < 1e-14


@pytest.mark.parametrize(
    "text,column",
    [
        ("cos(t", 6),       # unbalanced parenthesis at end of input
        ("foo(1)", 1),      # unknown function
        ("x + q", 5),       # unknown identifier
        ("1 + ", 5),        # dangling operator
        ("sin", 1),         # function without argument list
    ],
)
def test_parse_errors_carry_column(text, column):
    with pytest.raises(ParseError) as exc:
        parse(text, VARS)
    assert exc.value.column == column
    assert f"column {column}" in str(exc.value)


def test_trailing_input_rejected():
    with pytest.raises(ParseError):
        parse("1 2", VARS)


def test_nonconstant_exponent_derivative_rejected():
    tree = parse("x^y", VARS)
    with pytest.raises(ValueError):
        tree.deriv("x")
