import itertools

import numpy as np
import pytest
import sympy as sp

from ekahler.jets import Jet, JetTensor, fd_tensor_jet, jinverse, jet_space

X, Y = sp.symbols("x y", real=True)

CASES = [
    (lambda x, y: x * y * y + 3 * x - 1, X * Y**2 + 3 * X - 1),
    (lambda x, y: 1 / (x * x + y * y), 1 / (X**2 + Y**2)),
    (lambda x, y: np.exp(x) * np.sin(y), sp.exp(X) * sp.sin(Y)),
    (lambda x, y: np.sqrt(x + 3.0) * np.log(y + 2.0), sp.sqrt(X + 3) * sp.log(Y + 2)),
    (lambda x, y: np.cosh(x - y) / (2.0 + np.cos(x)), sp.cosh(X - Y) / (2 + sp.cos(X))),
    (lambda x, y: x**3 / y**2 + np.arctan(x * y), X**3 / Y**2 + sp.atan(X * Y)),
    (lambda x, y: np.tanh(x) * np.tan(0.3 * y) + 2.0**x, sp.tanh(X) * sp.tan(sp.Rational(3, 10) * Y) + 2**X),
]


def _derivative_tensor(expr, k, point):
    out = np.zeros((2,) * k)
    for idx in itertools.product(range(2), repeat=k):
        d = expr
        for i in idx:
            d = sp.diff(d, (X, Y)[i])
        out[idx] = float(d.subs({X: point[0], Y: point[1]}))
    return out


@pytest.mark.parametrize("case", range(len(CASES)))
def test_jet_derivatives_against_sympy(case):
    fn, expr = CASES[case]
    space = jet_space(2, 3)
    for point in [(0.4, 1.3), (-0.7, 0.6)]:
        j = fn(Jet.variable(point[0], 0, space), Jet.variable(point[1], 1, space))
        assert abs(j.value - float(expr.subs({X: point[0], Y: point[1]}))) <= 1e-12
        for k in (1, 2, 3):
            ref = _derivative_tensor(expr, k, point)
            assert np.abs(j.part(k) - ref).max() <= 1e-10 * max(1.0, np.abs(ref).max())


def test_jet_refuses_float_conversion():
    with pytest.raises(TypeError):
        float(Jet.variable(1.0, 0, jet_space(1, 1)))


def test_matrix_inverse_jet():
    # G(t) = [[1 + t, t^2], [t^2, 2 - t]] around t = 0.3
    t0 = 0.3
    G = lambda t: np.array([[1 + t, t * t], [t * t, 2 - t]])  # noqa: E731
    tt = sp.Symbol("t")
    Gs = sp.Matrix([[1 + tt, tt**2], [tt**2, 2 - tt]]).inv()
    parts = [G(t0), np.array([[1.0, 2 * t0], [2 * t0, -1.0]])[..., None], np.array([[0.0, 2.0], [2.0, 0.0]])[..., None, None]]
    inv = jinverse(JetTensor(parts, 1))
    for k in range(3):
        ref = np.array(Gs.diff(tt, k).subs(tt, t0), dtype=float)
        got = inv.parts[k].reshape(2, 2)
        assert np.abs(got - ref).max() <= 1e-12


def test_finite_difference_fallback():
    fn = lambda p: np.array([np.sin(p[0]) * p[1], p[0] ** 2])  # noqa: E731
    jt = fd_tensor_jet(fn, np.array([0.5, 2.0]), [0, 1], 2)
    expr = [sp.sin(X) * Y, X**2]
    for i, e in enumerate(expr):
        ref1 = _derivative_tensor(e, 1, (0.5, 2.0))
        ref2 = _derivative_tensor(e, 2, (0.5, 2.0))
        assert np.abs(jt.parts[1][i] - ref1).max() <= 1e-7
        assert np.abs(jt.parts[2][i] - ref2).max() <= 1e-4
