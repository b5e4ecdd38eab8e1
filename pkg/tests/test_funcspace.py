from __future__ import annotations

import numpy as np
import pytest

from fibdrift.errors import NotBracketed, OutsideAnalyticityRegion, TailNotDecayed
from fibdrift.funcspace import (
    AnalyticFunction,
    Chart,
    ChartedFunction,
    complex_newton,
    differentiate,
    eval_complex,
    fit,
    integrate,
    invert_monotone,
)


def test_square_reproduced_exactly():
    f = fit(lambda x: x ** 2, (-1, 1), 8)
    assert abs(f(0.5) - 0.25) < 1e-15


def test_rational_sup_error():
    f = fit(lambda x: 1 / (2 - x), (-1, 1), 64)
    x = np.linspace(-1, 1, 1000)
    assert np.max(np.abs(f(x) - 1 / (2 - x))) < 1e-13


def test_abs_rejected():
    with pytest.raises(TailNotDecayed):
        fit(np.abs, (-1, 1), 64)


def test_complex_square_at_i():
    sq = fit(lambda x: x ** 2, (-1, 1), 8)
    assert abs(eval_complex(sq, 1j) - (-1)) < 1e-14


def test_complex_rational_at_half_i():
    f = fit(lambda x: 1 / (2 - x), (-1, 1), 64)
    assert abs(eval_complex(f, 0.5j) - 1 / (2 - 0.5j)) < 1e-12


def test_complex_far_outside_rejected():
    f = fit(lambda x: 1 / (2 - x), (-1, 1), 64)
    with pytest.raises(OutsideAnalyticityRegion):
        eval_complex(f, 5.0 + 5.0j)


def test_complex_on_real_axis_matches_real():
    f = fit(np.cos, (0, 3), 40)
    x = np.linspace(0, 3, 101)
    assert np.max(np.abs(eval_complex(f, x + 0j) - f(x))) < 1e-15


def test_calculus():
    cube = fit(lambda x: x ** 3, (-3, 3), 8)
    assert abs(differentiate(cube)(2.0) - 12.0) < 1e-12
    ident = fit(lambda x: x, (0, 1), 4)
    assert abs(integrate(ident, 0, 1) - 0.5) < 1e-15
    assert abs(invert_monotone(cube, 8.0, seed=1.0, bracket=(-3, 3)) - 2.0) < 1e-12


def test_invert_not_bracketed():
    cube = fit(lambda x: x ** 3, (-1, 1), 8)
    with pytest.raises(NotBracketed):
        invert_monotone(cube, 8.0, bracket=(-1, 1))


def test_polynomial_round_trip():
    rng = np.random.default_rng(1)
    c = rng.normal(size=10)
    p = np.polynomial.Polynomial(c, domain=[-2, 5], window=[-2, 5])
    f = fit(p, (-2, 5), 12, tail_tol=1.0)
    x = rng.uniform(-2, 5, 1000)
    assert np.max(np.abs(f(x) - p(x))) < 1e-12 * np.max(np.abs(p(x)))


def test_derivative_of_antiderivative():
    f = fit(lambda x: np.exp(np.sin(3 * x)), (-1, 2), 64)
    prim = f.antiderivative()
    x = np.linspace(-0.9, 1.9, 57)
    assert np.max(np.abs(prim.differentiate()(x) - f(x))) < 1e-10


def test_chop_and_safe_radius():
    f = fit(lambda x: 1 / (2 - x), (-1, 1), 64)
    g = f.chop(1e-14)
    assert g.degree < f.degree
    x = np.linspace(-1, 1, 200)
    assert np.max(np.abs(g(x) - f(x))) < 1e-13
    # Bernstein parameter of the pole at 2 is 2 + sqrt(3)
    assert 1.0 < f.safe_radius() < 2.0 + np.sqrt(3.0)


def test_record_round_trip():
    f = fit(np.sin, (0.5, 2.5), 24)
    g = AnalyticFunction.from_record(f.to_record())
    assert np.array_equal(f.coeffs, g.coeffs) and f.interval == g.interval


def test_log_chart():
    F = fit(lambda s: np.exp(-s), (np.log(0.1), np.log(2.0)), 40)
    f = ChartedFunction(F, Chart(1))
    x = np.linspace(0.1, 2.0, 50)
    assert np.max(np.abs(f(x) - 1 / x)) < 1e-12
    assert abs(f.integrate(0.1, 2.0) - np.log(20.0)) < 1e-12


def test_complex_newton():
    z, ok = complex_newton(lambda z: z ** 2, lambda z: 2 * z, np.array([-4.0 + 0j]), np.array([0.1 + 1.5j]))
    assert ok.all() and abs(z[0] - 2j) < 1e-14
