"""Chebyshev representation of real-analytic functions on an interval.

Functions are stored by their coefficients in the Chebyshev basis of the
affinely mapped interval and sampled at the extremal (Lobatto) nodes.  Real
and complex evaluation share one Clenshaw recurrence, so a complex argument
is simply the analytic continuation inside the Bernstein ellipse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numba import njit
from scipy.fft import dct

from .errors import NonFiniteSample, NotBracketed, OutsideAnalyticityRegion, TailNotDecayed

__all__ = [
    "AnalyticFunction",
    "chebyshev_nodes",
    "values_to_coeffs",
    "interpolation_matrix",
    "fit",
    "from_values",
    "eval_complex",
    "differentiate",
    "integrate",
    "invert_monotone",
    "complex_newton",
]

EPS = np.finfo(float).eps
# relative size of coefficients indistinguishable from interpolation round-off
NOISE_FLOOR = 1e-16


@njit(cache=True, nogil=True)
def _clenshaw(t, c):
    out = np.empty_like(t)
    n = c.shape[0]
    for i in range(t.shape[0]):
        x2 = 2.0 * t[i]
        b1 = 0.0 * t[i]
        b2 = 0.0 * t[i]
        for k in range(n - 1, 0, -1):
            b1, b2 = c[k] + x2 * b1 - b2, b1
        out[i] = c[0] + t[i] * b1 - b2
    return out


def clenshaw(t, c: np.ndarray):
    """Chebyshev series at unit-interval points; compiled for 1-D float or complex input."""
    t = np.asarray(t)
    if t.dtype == np.float64 or t.dtype == np.complex128:
        flat = np.ascontiguousarray(t).reshape(-1)
        return _clenshaw(flat, c).reshape(t.shape) if t.ndim else _clenshaw(flat, c)[0]
    return cheb.chebval(t, c)


def chebyshev_nodes(interval: Sequence[float], n: int) -> np.ndarray:
    """Extremal Chebyshev nodes mapped to ``interval``, in increasing order."""
    a, b = float(interval[0]), float(interval[1])
    t = -np.cos(np.pi * np.arange(n) / (n - 1))
    return 0.5 * (a + b) + 0.5 * (b - a) * t


def values_to_coeffs(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of the interpolant through Lobatto-node values.

    ``values`` are ordered like :func:`chebyshev_nodes` (increasing abscissa);
    a 2-D array is transformed column by column.
    """
    v = np.asarray(values)[::-1]
    n = v.shape[0]
    c = dct(v, type=1, axis=0) / (n - 1)
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


def interpolation_matrix(interval: Sequence[float], n: int, x: np.ndarray) -> np.ndarray:
    """Matrix mapping node values to interpolant values at points ``x``."""
    coeff_map = values_to_coeffs(np.eye(n))
    a, b = interval
    t = (2.0 * np.asarray(x) - (a + b)) / (b - a)
    return cheb.chebvander(t, n - 1) @ coeff_map


@dataclass(frozen=True)
class AnalyticFunction:
    """Truncated Chebyshev series on ``interval``.

    Parameters
    ----------
    interval : tuple of float
        Closed interval ``(a, b)`` with ``a < b``.
    coeffs : ndarray
        Real coefficients; ``degree`` is their count.
    """

    interval: tuple[float, float]
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        a, b = (float(v) for v in self.interval)
        if not a < b:
            raise ValueError(f"empty interval [{a}, {b}]")
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 1 or not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be a finite 1-D sequence")
        c.setflags(write=False)
        object.__setattr__(self, "interval", (a, b))
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]

    def _unit(self, x):
        return (2.0 * x - (self.a + self.b)) / (self.b - self.a)

    def __call__(self, x):
        """Evaluate at real or complex points (no analyticity check)."""
        x = np.asarray(x)
        return clenshaw(self._unit(x), self.coeffs)

    def tail_ratio(self) -> float:
        """Max of the last two coefficient magnitudes over the largest one."""
        mags = np.abs(self.coeffs)
        top = mags.max()
        if top == 0.0:
            return 0.0
        return float(mags[-2:].max() / top)

    def bernstein_radius(self, z):
        """Parameter ``r >= 1`` of the Bernstein ellipse through ``z``."""
        t = self._unit(np.asarray(z, dtype=complex))
        root = np.sqrt(t - 1.0) * np.sqrt(t + 1.0)
        return np.maximum(np.abs(t + root), np.abs(t - root))

    def _tail_model(self):
        """Tail magnitudes and their indices used to extrapolate truncation error.

        A series that reaches round-off is cut there and its tail is the
        round-off level at the cut; otherwise the last four coefficients
        (floored at round-off) stand for the tail.
        """
        g = self.chop(NOISE_FLOOR)
        mags = np.abs(self.coeffs)
        scale = max(mags.max(), np.finfo(float).tiny)
        if g.degree < self.degree:
            return g, np.array([NOISE_FLOOR * scale]), np.array([g.degree]), scale
        n = self.degree
        k = np.arange(max(n - 4, 0), n)
        return g, np.maximum(mags[k], EPS * scale), k, scale

    def safe_radius(self, eval_tol: float = 1e-8) -> float:
        """Largest ellipse parameter accepted by :meth:`eval_complex` at ``eval_tol``."""
        _, floor, k, scale = self._tail_model()
        return float(np.min((eval_tol * scale / floor) ** (1.0 / np.maximum(k, 1))))

    def eval_complex(self, z, eval_tol: float = 1e-8):
        """Evaluate at complex ``z`` after a Bernstein-ellipse sanity check.

        Off the real axis, coefficients at round-off level are dropped first:
        their noise grows like ``r**k`` with the ellipse parameter ``r``.
        The truncation error at ``z`` is then estimated by the last
        coefficients grown by ``r``.
        """
        z = np.asarray(z, dtype=complex)
        t = self._unit(z)
        if not np.any(t.imag):
            return clenshaw(t, self.coeffs)
        g, floor, k, scale = self._tail_model()
        root = np.sqrt(t - 1.0) * np.sqrt(t + 1.0)
        r = np.maximum(np.abs(t + root), np.abs(t - root))
        with np.errstate(over="ignore"):
            est = np.max(floor[:, None] * r.ravel()[None, :] ** k[:, None], axis=0)
        if np.any(~np.isfinite(est)) or np.any(est > eval_tol * scale):
            worst = np.ravel(z)[np.argmax(np.nan_to_num(est, nan=np.inf))]
            raise OutsideAnalyticityRegion(
                f"tail estimate at z={worst} exceeds {eval_tol:g} relative"
            )
        return clenshaw(t, g.coeffs)

    def chop(self, tol: float = 1e-14) -> "AnalyticFunction":
        """Drop trailing coefficients below ``tol`` times the largest one.

        Round-off noise in the tail is amplified off the real axis, so
        complex evaluation is more accurate on the chopped series.
        """
        mags = np.abs(self.coeffs)
        keep = np.nonzero(mags > tol * mags.max())[0]
        n = max(int(keep[-1]) + 1 if keep.size else 1, 2)
        return AnalyticFunction(self.interval, self.coeffs[:n].copy())

    def differentiate(self) -> "AnalyticFunction":
        d = cheb.chebder(self.coeffs) * (2.0 / (self.b - self.a))
        if d.size == 0:
            d = np.zeros(1)
        return AnalyticFunction(self.interval, d)

    def antiderivative(self, base: float | None = None) -> "AnalyticFunction":
        """Primitive vanishing at ``base`` (default: left endpoint)."""
        c = cheb.chebint(self.coeffs) * (0.5 * (self.b - self.a))
        prim = AnalyticFunction(self.interval, c)
        x0 = self.a if base is None else base
        c = c.copy()
        c[0] -= float(prim(x0))
        return AnalyticFunction(self.interval, c)

    def integrate(self, x_lo: float, x_hi: float) -> float:
        prim = self.antiderivative()
        return float(prim(x_hi) - prim(x_lo))

    def invert_monotone(self, y, seed=None, bracket=None, inv_tol: float = 1e-13, max_iter: int = 200):
        """Solve ``f(x) = y`` on a monotone bracket; see :func:`invert_monotone`."""
        return invert_monotone(self, y, seed=seed, bracket=bracket, inv_tol=inv_tol, max_iter=max_iter)

    def to_record(self) -> dict:
        return {"interval": [repr_float(self.a), repr_float(self.b)],
                "coeffs": [repr_float(c) for c in self.coeffs]}

    @classmethod
    def from_record(cls, rec: dict) -> "AnalyticFunction":
        return cls(tuple(float(v) for v in rec["interval"]), np.array([float(c) for c in rec["coeffs"]]))


def repr_float(x: float) -> float:
    """Plain Python float; ``json`` writes it with full round-trip precision."""
    return float(x)


def from_values(values: np.ndarray, interval: Sequence[float]) -> AnalyticFunction:
    """Interpolant through values at the Lobatto nodes of ``interval``."""
    return AnalyticFunction(tuple(interval), values_to_coeffs(np.asarray(values, dtype=float)))


def fit(samples_of: Callable, interval: Sequence[float], degree: int,
        tail_tol: float = 1e-12, fit_tol: float = 1e-10) -> AnalyticFunction:
    """Interpolate ``samples_of`` at ``degree`` extremal nodes.

    Parameters
    ----------
    samples_of : callable
        Vectorised real function.
    interval : pair of float
    degree : int
        Number of coefficients (and nodes), at least 2.
    tail_tol : float
        Coefficient-tail tolerance relative to the largest coefficient.
    fit_tol : float
        Allowed sup-norm residual, relative to the sup of the samples, on
        a 3x oversampled grid.

    Raises
    ------
    NonFiniteSample
        A node value is not finite.
    TailNotDecayed
        The coefficient tail or the oversampled residual is too large.
    """
    if degree < 2:
        raise ValueError("degree must be at least 2")
    x = chebyshev_nodes(interval, degree)
    v = np.asarray(samples_of(x), dtype=float)
    if not np.all(np.isfinite(v)):
        raise NonFiniteSample(f"non-finite sample at x={x[~np.isfinite(v)][0]!r}")
    f = from_values(v, interval)
    ratio = f.tail_ratio()
    if ratio > tail_tol:
        raise TailNotDecayed(f"tail ratio {ratio:.3e} > {tail_tol:.1e} at degree {degree}")
    xs = chebyshev_nodes(interval, 3 * degree)
    ref = np.asarray(samples_of(xs), dtype=float)
    scale = max(np.max(np.abs(ref)), 1.0)
    resid = np.max(np.abs(f(xs) - ref)) / scale
    if not resid <= fit_tol:
        raise TailNotDecayed(f"oversampled residual {resid:.3e} > {fit_tol:.1e}")
    return f


def eval_complex(f: AnalyticFunction, z, eval_tol: float = 1e-8):
    return f.eval_complex(z, eval_tol=eval_tol)


def differentiate(f: AnalyticFunction) -> AnalyticFunction:
    return f.differentiate()


def integrate(f: AnalyticFunction, x_lo: float, x_hi: float) -> float:
    return f.integrate(x_lo, x_hi)


def invert_monotone(f: Callable, y, seed=None, bracket=None, inv_tol: float = 1e-13,
                    max_iter: int = 200, df: Callable | None = None):
    """Safeguarded Newton inversion of a monotone function.

    Newton steps that leave the current bracket are replaced by bisection,
    and the bracket is shrunk after every evaluation.  Works elementwise on
    arrays of targets.

    Parameters
    ----------
    f : AnalyticFunction or callable
        Monotone on ``bracket``.
    y : float or ndarray
        Target values.
    seed : float or ndarray, optional
        Starting points; default is the bracket midpoint.
    bracket : pair, optional
        Defaults to ``f.interval``.
    df : callable, optional
        Derivative; taken from the Chebyshev series when ``f`` is one.

    Raises
    ------
    NotBracketed
        If ``f - y`` has no sign change on the bracket.
    """
    if bracket is None:
        bracket = f.interval
    if df is None:
        df = f.differentiate()
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lo = np.full(y.shape, float(bracket[0]))
    hi = np.full(y.shape, float(bracket[1]))
    g_lo = f(lo) - y
    g_hi = f(hi) - y
    if np.any(g_lo * g_hi > 0) or np.any(~np.isfinite(g_lo * g_hi)):
        bad = y[(g_lo * g_hi > 0) | ~np.isfinite(g_lo * g_hi)][0]
        raise NotBracketed(f"no sign change for target {bad!r} on {tuple(bracket)}")
    rising = g_hi >= g_lo
    x = 0.5 * (lo + hi) if seed is None else np.clip(np.broadcast_to(np.asarray(seed, float), y.shape).copy(), lo, hi)
    scale = max(1.0, float(np.max(np.abs(y))))
    for _ in range(max_iter):
        g = f(x) - y
        done = np.abs(g) <= inv_tol * scale
        # shrink bracket
        left = (g < 0) == rising
        lo = np.where(left & ~done, x, lo)
        hi = np.where(~left & ~done, x, hi)
        if np.all(done | (hi - lo <= 4 * EPS * np.maximum(np.abs(x), 1e-300))):
            break
        d = df(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - g / d
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        x = np.where(done, x, xn)
    return float(x[0]) if scalar else x


def complex_newton(f: Callable, df: Callable, target, seed, tol: float = 1e-14, max_iter: int = 60):
    """Plain vectorised Newton for ``f(z) = target`` from ``seed``.

    Returns the solution and a boolean convergence mask; callers decide how
    to treat non-converged entries.
    """
    target = np.asarray(target, dtype=complex)
    z = np.array(np.broadcast_to(np.asarray(seed, dtype=complex), target.shape))
    ok = np.zeros(target.shape, dtype=bool)
    for _ in range(max_iter):
        g = f(z) - target
        step = g / df(z)
        z = z - step
        ok = np.abs(step) <= tol * np.maximum(1.0, np.abs(z))
        if np.all(ok):
            break
    return z, ok


# ---------------------------------------------------------------------------
# Functions represented in a chart variable
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Chart:
    """Coordinate ``s`` for the Chebyshev representation.

    ``sigma = 0`` is the identity chart; ``sigma = +-1`` is ``s = log(sigma x)``,
    which moves a singularity at ``x = 0`` to infinity.
    """

    sigma: int = 0

    def to_s(self, x):
        if self.sigma == 0:
            return x
        x = np.asarray(x)
        return np.log(self.sigma * x)

    def to_x(self, s):
        if self.sigma == 0:
            return s
        return self.sigma * np.exp(s)

    def dx_ds(self, s):
        if self.sigma == 0:
            return np.ones_like(np.asarray(s, dtype=float))
        return self.sigma * np.exp(s)

    def s_interval(self, interval) -> tuple[float, float]:
        s = np.sort(np.asarray([self.to_s(float(interval[0])), self.to_s(float(interval[1]))], dtype=float))
        return (float(s[0]), float(s[1]))


@dataclass(frozen=True)
class ChartedFunction:
    """``f(x) = F(s(x))`` with ``F`` a Chebyshev series in the chart variable."""

    F: AnalyticFunction
    chart: Chart = Chart(0)

    @property
    def interval(self) -> tuple[float, float]:
        a, b = self.chart.to_x(self.F.a), self.chart.to_x(self.F.b)
        return (float(min(a, b)), float(max(a, b)))

    @property
    def degree(self) -> int:
        return self.F.degree

    def tail_ratio(self) -> float:
        return self.F.tail_ratio()

    def __call__(self, x):
        return self.F(self.chart.to_s(x))

    def eval_complex(self, z, eval_tol: float = 1e-8):
        z = np.asarray(z, dtype=complex)
        return self.F.eval_complex(self.chart.to_s(z), eval_tol=eval_tol)

    def chop(self, tol: float = 1e-14) -> "ChartedFunction":
        return ChartedFunction(self.F.chop(tol), self.chart)

    def derivative(self, x):
        s = self.chart.to_s(x)
        return self.F.differentiate()(s) / self.chart.dx_ds(s)

    def antiderivative(self, base: float | None = None) -> "ChartedFunction":
        """Primitive in ``x`` vanishing at ``base`` (default: left end of ``interval``)."""
        n = 2 * self.F.degree
        s = chebyshev_nodes(self.F.interval, n)
        g = from_values(self.F(s) * self.chart.dx_ds(s), self.F.interval)
        prim = g.antiderivative()
        x0 = self.interval[0] if base is None else base
        c = prim.coeffs.copy()
        c[0] -= float(prim(self.chart.to_s(x0)))
        return ChartedFunction(AnalyticFunction(prim.interval, c), self.chart)

    def integrate(self, x_lo: float, x_hi: float) -> float:
        prim = self.antiderivative()
        return float(prim(x_hi) - prim(x_lo))

    def to_record(self) -> dict:
        rec = self.F.to_record()
        rec["chart"] = int(self.chart.sigma)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ChartedFunction":
        return cls(AnalyticFunction.from_record(rec), Chart(int(rec.get("chart", 0))))
