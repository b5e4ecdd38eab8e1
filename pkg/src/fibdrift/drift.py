"""Drift of the induced map and the integrated-density coordinate.

The drift is ``theta = -int_J m f dx``.  It is computed three ways: from
the branch table, from the logarithmic identity
``theta = -(log|tau|)^-1 int_J log|phi(x)/x| f(x) dx`` and by Birkhoff
averages along orbits of the induced map.  The integrated-density
coordinate ``mu`` carries the contour construction whose arc integrals
``s_n`` sum to ``log|tau| theta``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit
from scipy.integrate import tanhsinh

from .errors import (
    LeftUpperHalfPlane,
    NewtonBranchJump,
    NotConverging,
    NotMonotone,
    OutsideAnalyticityRegion,
    QuadratureNotConverged,
)
from .funcspace import ChartedFunction, complex_newton, invert_monotone

log = logging.getLogger(__name__)

__all__ = [
    "drift_direct",
    "drift_log",
    "drift_birkhoff",
    "gauss_birkhoff",
    "GAUSS_LOG2_MEAN",
    "MuCoordinate",
    "mu_coordinate",
    "eta_of_ell",
    "ContourData",
    "contour",
    "contour_adaptive",
    "LimitEstimate",
    "difference_signature",
    "limit_drift_estimate",
    "DriftReport",
]

# mean of log2(x) under the Gauss measure dx / ((1 + x) ln 2)
GAUSS_LOG2_MEAN = -math.pi ** 2 / (12.0 * math.log(2.0) ** 2)


# ---------------------------------------------------------------------------
# Direct and logarithmic estimators
# ---------------------------------------------------------------------------


def drift_direct(sys_, density) -> float:
    """``-sum_m m * int_{domain_m} f`` over the branch table.

    Parameters
    ----------
    sys_ : InducedSystem
        Anything with ``branches`` carrying ``m`` and ``domain``.
    density : Density or ChartedFunction
    """
    f = getattr(density, "f", density)
    prim = f.antiderivative()
    total = 0.0
    for b in sys_.branches:
        if b.m == 0:
            continue
        total -= b.m * float(prim(b.domain[1]) - prim(b.domain[0]))
    return total


def _log_ratio(fp, x):
    """``log|phi(x)/x|`` on arrays of any shape (NaN mapped to 0 at the endpoints)."""
    shape = np.shape(x)
    flat = np.ravel(np.asarray(x, dtype=float))
    _, la = fp.log_abs_phi(flat)
    with np.errstate(divide="ignore"):
        out = la - np.log(np.abs(flat))
    return out.reshape(shape)


def drift_log(fp, density, qtol: float = 1e-8, maxlevel: int = 12) -> float:
    """Drift from the logarithmic identity by double-exponential quadrature.

    ``J`` is split at the critical point and, for coverings, the left end
    ``tau**2 X`` carries the logarithmic singularity of ``phi``.

    Raises
    ------
    QuadratureNotConverged
        If the level-to-level error estimate on any piece exceeds ``qtol``.
    """
    f = getattr(density, "f", density)
    J = fp.J
    cuts = [J[0], fp.x0, J[1]] if J[0] < fp.x0 < J[1] else [J[0], J[1]]

    def integrand(x):
        v = _log_ratio(fp, x) * f(x)
        return np.where(np.isfinite(v), v, 0.0)

    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        res = tanhsinh(integrand, lo, hi, maxlevel=maxlevel, atol=0.1 * qtol, rtol=1e-14)
        if not (res.success or res.error <= qtol) or not np.isfinite(res.integral):
            raise QuadratureNotConverged(
                f"piece ({lo:.6g}, {hi:.6g}): estimate {float(res.integral):.3e}, error {float(res.error):.2e}")
        total += float(res.integral)
    return -total / fp.log_tau


# ---------------------------------------------------------------------------
# Birkhoff averages
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _cheb1(t, c):
    x2 = 2.0 * t
    b1 = 0.0
    b2 = 0.0
    for k in range(c.shape[0] - 1, 0, -1):
        b1, b2 = c[k] + x2 * b1 - b2, b1
    return c[0] + t * b1 - b2


@njit(cache=True, nogil=True)
def _phi_inside(v, c, a, b, ell, covering):
    e = _cheb1((2.0 * v - a - b) / (b - a), c)
    if covering:
        return math.copysign(abs(e) ** ell, e)
    return abs(e) ** ell


@njit(cache=True, nogil=True)
def _induced_orbit(x, c, a, b, tau, ell, covering, log_x, j0, j1, n_steps, n_batches):
    """Batch sums of ``-m`` along the induced orbit of ``x``."""
    lt = math.log(abs(tau))
    sums = np.zeros(n_batches)
    per = n_steps // n_batches
    margin = 1e-14 * (j1 - j0)
    for i in range(per * n_batches):
        y = x
        k = 0
        while (y < a or y > b) and k < 200:
            v = y / tau
            if v < a or v > b:
                return sums * np.nan
            y = _phi_inside(v, c, a, b, ell, covering) / tau
            k += 1
        e = _cheb1((2.0 * y - a - b) / (b - a), c)
        la = 2.0 * k * lt + ell * math.log(abs(e))
        q = (la - log_x) / lt
        if covering:
            if e > 0.0:
                m = 2.0 * math.floor((q - 1.0) / 2.0) + 1.0
            else:
                m = 2.0 * math.floor(q / 2.0)
        else:
            m = math.floor(q)
        orient = 1.0
        if (int(m) % 2) != 0 and tau < 0.0:
            orient = -1.0
        sgn = 1.0
        if covering and e < 0.0:
            sgn = -1.0
        x = sgn * orient * math.exp(la - m * lt)
        # rounding can push an image across an end of J
        if x <= j0:
            x = j0 + margin
        elif x >= j1:
            x = j1 - margin
        sums[i // per] -= m
    return sums


def _batch_statistics(batch_means: np.ndarray) -> tuple[float, float]:
    flat = batch_means.ravel()
    mean = float(flat.mean())
    stderr = float(flat.std(ddof=1) / math.sqrt(flat.size)) if flat.size > 1 else float("inf")
    return mean, stderr


def drift_birkhoff(sys_, n_steps: int = 10 ** 6, n_seeds: int = 8, seed: int = 0,
                   threads: int = 1, n_batches: int = 20) -> tuple[float, float]:
    """Monte Carlo drift ``-(1/n) sum m(Phi^i x)`` with a batch-means standard error.

    Each orbit is cut into ``n_batches`` consecutive blocks; the standard
    error is taken across all blocks of all seeds, so it is defined for a
    single seed as well.  Starting points are uniform on ``J`` from
    ``numpy.random.default_rng(seed)``.
    """
    fp = sys_.fp
    J = sys_.J
    n_batches = max(1, min(n_batches, n_steps))
    starts = np.random.default_rng(seed).uniform(J[0], J[1], size=n_seeds)
    # trailing coefficients below 1e-15 of the largest only cost time
    c = np.ascontiguousarray(fp.E.chop(1e-15).coeffs, dtype=float)
    args = (c, float(fp.E.a), float(fp.E.b), float(fp.tau), float(fp.ell), bool(fp.kind.covering),
            math.log(abs(fp.X)), float(J[0]), float(J[1]), int(n_steps), int(n_batches))

    def run(x):
        return _induced_orbit(float(x), *args)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        sums = np.array(list(pool.map(run, starts)))
    if not np.all(np.isfinite(sums)):
        raise QuadratureNotConverged("an induced orbit left the representable domain")
    per = n_steps // n_batches
    return _batch_statistics(sums / per)


@njit(cache=True, nogil=True)
def _gauss_orbit(seed, n_steps, n_batches):
    np.random.seed(seed)
    x = np.random.random()
    sums = np.zeros(n_batches)
    per = n_steps // n_batches
    for i in range(per * n_batches):
        while x <= 1e-300:
            x = np.random.random()
        sums[i // per] += math.log2(x)
        y = 1.0 / x
        x = y - math.floor(y)
    return sums


def gauss_birkhoff(n_steps: int = 10 ** 6, n_seeds: int = 8, seed: int = 0, threads: int = 1,
                   n_batches: int = 20) -> tuple[float, float]:
    """Birkhoff mean of ``log2 x`` along Gauss-map orbits (oracle: :data:`GAUSS_LOG2_MEAN`).

    Floating-point orbits eventually hit 0; such orbits are restarted from a
    fresh uniform point.
    """
    n_batches = max(1, min(n_batches, n_steps))
    seeds = np.random.default_rng(seed).integers(0, 2 ** 31 - 1, size=n_seeds)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        sums = np.array(list(pool.map(lambda s: _gauss_orbit(int(s), int(n_steps), int(n_batches)), seeds)))
    return _batch_statistics(sums / (n_steps // n_batches))


# ---------------------------------------------------------------------------
# Integrated-density coordinate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MuCoordinate:
    """``mu(x) = int_base^x f``, its inverse and the maps conjugated by it.

    Attributes
    ----------
    mu : ChartedFunction
        Primitive of the density on the density segment, zero at ``base_point``.
    base_point : float
        ``tau**2 X`` for coverings (fixed by ``Gamma``); ``X`` for the unimodal family.
    fp : RenormFixedPoint
    f : ChartedFunction
        The density.
    """

    mu: ChartedFunction = field(repr=False)
    base_point: float
    fp: object = field(repr=False)
    f: ChartedFunction = field(repr=False)

    @property
    def segment(self) -> tuple[float, float]:
        return self.mu.interval

    def __call__(self, x):
        if np.iscomplexobj(x):
            return self.mu.eval_complex(x)
        return self.mu(x)

    def inverse(self, z, seed=None):
        """``mu^-1`` for real targets (safeguarded Newton) or complex ones (Newton from ``seed``)."""
        if not np.iscomplexobj(z):
            return invert_monotone(self.mu, z, bracket=self.segment, df=self.f)
        z = np.asarray(z, dtype=complex)
        if seed is None:
            lo, hi = self.mu(np.array(self.segment))
            xr = invert_monotone(self.mu, np.clip(z.real, lo, hi), bracket=self.segment, df=self.f)
            seed = xr + 1j * z.imag / self.f(xr)
        x, ok = complex_newton(self.mu.eval_complex, self.f.eval_complex, z, seed)
        if not np.all(ok):
            raise NewtonBranchJump("complex inversion of mu did not converge")
        return x

    # conjugated maps, real or complex arguments ------------------------------

    def phi_hat(self, z):
        x = self.inverse(z)
        return self.fp.phi_complex(x) if np.iscomplexobj(x) else self.fp.phi(x)

    def G_hat(self, z):
        return self(self.fp.G(self.inverse(z)))

    def Gamma_hat(self, z):
        return self(self.fp.Gamma(self.inverse(z)))

    def T_hat(self, z):
        return self(self.inverse(z) / self.fp.tau ** 2)

    @property
    def rho(self) -> float:
        """``(Gamma_hat^-1)'(0) = 1 / Gamma'(base)``; a conjugation invariant."""
        fp = self.fp
        return float(fp.tau / fp.dphi(np.array([self.base_point / fp.tau ** 2]))[0])

    def functional_equation_deviation(self, n: int = 33) -> float:
        """``max |phi_hat(G_hat z) - tau^-2 phi_hat(z)|`` relative, on an interior grid of (0, 1)."""
        fp = self.fp
        x = np.linspace(*fp.J, n + 2)[1:-1]
        x = x[np.abs(x - fp.x0) > 1e-3 * (fp.J[1] - fp.J[0])]
        z = self(x)
        lhs = self.phi_hat(self.G_hat(z))
        rhs = self.phi_hat(z) / fp.tau ** 2
        return float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)))


def mu_coordinate(fp, density) -> MuCoordinate:
    """Integrated density based at the ``Gamma``-fixed end of ``J``.

    Raises
    ------
    NotMonotone
        If the density is not positive on its segment.
    """
    f = getattr(density, "f", density).chop()
    lo, hi = f.interval
    grid = np.linspace(lo, hi, 4001)
    fv = f(grid)
    if not np.all(fv > 0):
        raise NotMonotone(f"density reaches {float(np.min(fv)):.3e} at x={float(grid[np.argmin(fv)])!r}")
    base = fp.base if fp.kind.covering else fp.J[0]
    return MuCoordinate(f.antiderivative(base).chop(), float(base), fp, f)


def eta_of_ell(fp, density=None, rho: float | None = None) -> float:
    """``rho**-4 - 1`` with ``rho = (Gamma_hat^-1)'(0)``."""
    if rho is None:
        rho = mu_coordinate(fp, density).rho
    return rho ** -4 - 1.0


# ---------------------------------------------------------------------------
# Contour arcs and the sums s_n
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContourData:
    """Backward ``G_hat`` orbit, sampled arcs and arc integrals.

    ``points[0]`` is ``z0`` and ``points[n] = G_hat^-n(z0)``; arc ``n >= 1``
    joins ``points[n-1]`` to ``points[n]`` and arc 0 is the segment from 1
    to ``z0``.  Entries past ``n_resolved`` lie below double-precision
    range and are reported as zero.
    """

    z0: complex
    points: np.ndarray = field(repr=False)
    arcs: list = field(repr=False)
    s_values: np.ndarray = field(repr=False)
    partial_sums: np.ndarray = field(repr=False)
    log_tau: float
    n_resolved: int
    q_hat: float
    tail_bound: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def theta(self) -> float:
        """``(log|tau|)^-1 sum s_n``."""
        return float(self.partial_sums[-1] / self.log_tau)

    def rows(self) -> list[tuple]:
        """``(n, Re z_n, Im z_n, s_n, partial_sum)`` for ``n = 0..N``."""
        return [(n, float(self.points[n].real), float(self.points[n].imag), float(self.s_values[n]),
                 float(self.partial_sums[n])) for n in range(len(self.s_values))]


def _panel_nodes(breaks: np.ndarray, order: int):
    """Gauss-Legendre nodes and weights on consecutive panels of [0, 1]."""
    t, w = np.polynomial.legendre.leggauss(order)
    lo, hi = breaks[:-1, None], breaks[1:, None]
    nodes = (0.5 * (lo + hi) + 0.5 * (hi - lo) * t).ravel()
    weights = (0.5 * (hi - lo) * w).ravel()
    return nodes, weights


def _graded_breaks(start: complex, end: complex, singular: Sequence[complex], panels: int) -> np.ndarray:
    """Panel breaks on the segment ``start -> end``, split until each panel is shorter than its distance to ``singular``."""
    breaks = list(np.linspace(0.0, 1.0, panels + 1))
    length = abs(end - start)
    for _ in range(60):
        out = [breaks[0]]
        split = False
        for a, b in zip(breaks[:-1], breaks[1:]):
            mid = start + 0.5 * (a + b) * (end - start)
            dist = min((abs(mid - s) for s in singular), default=np.inf)
            if (b - a) * length > 0.5 * dist and (b - a) > 1e-12:
                out.append(0.5 * (a + b))
                split = True
            out.append(b)
        breaks = out
        if not split:
            break
    return np.asarray(breaks)


def _unwrap_log(values: np.ndarray) -> np.ndarray:
    """Continuous branch of a sampled logarithm (imaginary parts unwrapped)."""
    return values.real + 1j * np.unwrap(values.imag)


def _segments_cross(p: np.ndarray, q: np.ndarray) -> bool:
    """Whether two polylines (complex vertex arrays) intersect away from shared ends."""
    a0, a1 = p[:-1, None], p[1:, None]
    b0, b1 = q[None, :-1], q[None, 1:]

    def cross(u, v):
        return u.real * v.imag - u.imag * v.real

    d1 = cross(a1 - a0, b0 - a0)
    d2 = cross(a1 - a0, b1 - a0)
    d3 = cross(b1 - b0, a0 - b0)
    d4 = cross(b1 - b0, a1 - b0)
    hit = (d1 * d2 < 0) & (d3 * d4 < 0)
    return bool(np.any(hit))


def contour(fp, density, z0_mod: float = 0.05, z0_arg_deg: float = 85.0, N: int = 2000,
            panels0: int = 32, panels: int = 16, order: int = 16, mu: MuCoordinate | None = None,
            crossing_arcs: int = 12) -> ContourData:
    """Arcs ``C_n`` of the backward ``G_hat`` orbit and ``s_n = Re int_{C_n} log(phi_hat / mu^-1) dz``.

    ``C_0`` is the segment ``1 -> z0``, ``C_1`` the segment ``z0 -> G_hat^-1(z0)``
    and ``C_n = G_hat^{-(n-1)}(C_1)``.  Nodes of ``C_1`` are pushed through
    ``G^-1`` in the original coordinate, so ``mu^-1`` on ``C_n`` and the arc
    Jacobian come for free.  ``log phi_hat`` on ``C_n`` is the ``C_1`` value
    shifted by ``(n-1)(2 log|tau| + 2 pi i k)``, with ``k`` the winding fixed
    by continuity at the arc junction (0 in all cases seen so far).

    Raises
    ------
    LeftUpperHalfPlane
        If some resolved ``z_n`` has ``Im z_n <= 0``.
    NewtonBranchJump
        If a backward step moves further than the distance to the fixed point,
        or the branch of ``log phi_hat`` is inconsistent at the arc junction.
    """
    if not fp.kind.covering:
        raise ValueError("the contour construction is defined for the covering family")
    if mu is None:
        mu = mu_coordinate(fp, density)
    f = mu.f
    lt = fp.log_tau
    z0 = complex(z0_mod * np.exp(1j * np.deg2rad(z0_arg_deg)))
    xi_z0 = mu.inverse(np.array([z0]))
    g0, _ = fp.G_inverse_complex(xi_z0)
    z1 = complex(mu(g0)[0])
    u_crit = float(mu(np.array([fp.x0]))[0])

    # C_0 and C_1 sampled in mu; log phi_hat continued from the real value at 1
    br0 = _graded_breaks(1.0 + 0j, z0, [u_crit, 0.0], panels0)
    n0, w0 = _panel_nodes(br0, order)
    br1 = _graded_breaks(z0, z1, [u_crit, 0.0], panels)
    n1, w1 = _panel_nodes(br1, order)
    t0_all = np.concatenate([n0, br0])
    i0 = np.argsort(t0_all, kind="stable")
    t1_all = np.concatenate([n1, br1])
    i1 = np.argsort(t1_all, kind="stable")
    path0 = 1.0 + t0_all[i0] * (z0 - 1.0)
    path1 = z0 + t1_all[i1] * (z1 - z0)
    xi0 = mu.inverse(path0)
    xi1 = mu.inverse(path1)
    xi0[0] = fp.X + 0j
    L0, _ = fp.log_phi_complex(xi0)
    L1, _ = fp.log_phi_complex(xi1)
    if not (np.all(np.isfinite(L0)) and np.all(np.isfinite(L1))):
        raise OutsideAnalyticityRegion(
            f"arcs from z0={z0:.4g} leave the domain of phi_hat (G-orbits escape)")
    L = _unwrap_log(np.concatenate([L0, L1]))
    L0c, L1c = L[:path0.size], L[path0.size:]
    if abs(L0c[0].imag) > 1e-9:
        L0c = L0c - 1j * L0c[0].imag
        L1c = L1c - 1j * L[0].imag
    jump = (L1c[-1] - L1c[0] - 2.0 * lt) / (2j * np.pi)
    k_wind = int(round(jump.real))
    if abs(jump - k_wind) > 1e-6:
        raise NewtonBranchJump(f"log phi_hat not consistent across the arc junction (offset {jump:.3e})")
    # back to quadrature order
    inv0 = np.empty_like(i0)
    inv0[i0] = np.arange(i0.size)
    inv1 = np.empty_like(i1)
    inv1[i1] = np.arange(i1.size)
    q0 = inv0[:n0.size]
    q1 = inv1[:n1.size]
    s0 = float(np.real(np.sum(w0 * (L0c[q0] - np.log(xi0[q0])) * (z0 - 1.0))))

    # C_n nodes in the original coordinate
    b_pts = np.concatenate([xi1[q1], xi1[inv1[n1.size:][[0, -1]]]])  # quadrature nodes, then t=0 and t=1
    Lphi = L1c[q1]
    dzdt1 = (z1 - z0) / f.eval_complex(b_pts[:n1.size])
    D = np.ones(b_pts.size, dtype=complex)
    xi = b_pts.copy()
    step_offset = 2.0 * lt + 2j * np.pi * k_wind
    s_vals = np.zeros(N + 1)
    points = np.zeros(N + 1, dtype=complex)
    points[0] = z0
    s_vals[0] = s0
    arcs = [path0]
    n_resolved = N
    seed = xi / fp.tau
    # near the fixed point mu loses relative accuracy; points then advance by the
    # trapezoid rule for G_hat^-1 between 0 and z_{n-1}
    lam0 = complex(fp.G_inverse_complex(np.array([fp.base + 0j]))[1][0])
    f_last = complex(f.eval_complex(xi[-1:])[0])
    for n in range(1, N + 1):
        slope = None
        if n > 1:
            new, dnew = fp.G_inverse_complex(xi, seed=seed)
            seed = new / fp.tau
            D = D * dnew
            xi = new
            f_new = complex(f.eval_complex(xi[-1:])[0])
            slope = 0.5 * (lam0 + f_new * dnew[-1] / f_last)
            f_last = f_new
        dzdt = f.eval_complex(xi[:n1.size]) * D[:n1.size] * dzdt1
        if not np.all(np.isfinite(dzdt)) or np.max(np.abs(dzdt)) < 1e-250:
            n_resolved = n - 1
            break
        integrand = ((n - 1) * step_offset + Lphi - np.log(xi[:n1.size])) * dzdt
        s_vals[n] = float(np.real(np.sum(w1 * integrand)))
        if slope is not None and abs(points[n - 1]) < 1e-6:
            points[n] = points[n - 1] * slope
        else:
            points[n] = mu(xi[-1:])[0]
        if points[n].imag <= 0.0:
            raise LeftUpperHalfPlane(f"Im z_{n} = {points[n].imag:.3e}")
        if abs(points[n] - points[n - 1]) > 2.0 * abs(points[n - 1]):
            raise NewtonBranchJump(f"backward step {n} jumps from {points[n - 1]:.3e} to {points[n]:.3e}")
        if n <= crossing_arcs:
            arcs.append(mu(xi[:n1.size]))
    partial = np.cumsum(s_vals)

    # decay constants and diagnostics
    nn = np.arange(N + 1, dtype=float)
    sel = (nn >= 10) & (nn <= N)
    shape = np.zeros_like(nn)
    shape[sel] = np.abs(s_vals[sel]) * nn[sel] ** 1.5 / np.log(nn[sel])
    q_hat = float(shape.max(initial=0.0))
    tail_bound = q_hat * (2.0 * math.log(N) + 4.0) / math.sqrt(N)
    res = points[1:n_resolved + 1]
    steps = np.abs(np.diff(points[:n_resolved + 1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        claim3 = np.abs(res.real) / (np.abs(res) ** 3 * np.log(1.0 / np.abs(res)))
    crosses = any(_segments_cross(arcs[i], arcs[j]) for i in range(len(arcs)) for j in range(i + 2, len(arcs)))
    diagnostics = {
        "z1": [z1.real, z1.imag],
        "mu_of_x0": u_crit,
        "winding": k_wind,
        "multiplier": float(abs(points[2] / points[1])) if n_resolved >= 2 else float("nan"),
        "step_sup_n32": float(np.max(steps * np.arange(1, steps.size + 1) ** 1.5, initial=0.0)),
        "claim3_sup": float(np.nanmax(claim3[np.isfinite(claim3)], initial=0.0)),
        "arcs_non_crossing": not crosses,
        "panels_c0": int(br0.size - 1),
        "panels_c1": int(br1.size - 1),
    }
    return ContourData(z0, points, arcs, s_vals, partial, lt, n_resolved, q_hat, tail_bound, diagnostics)


def contour_adaptive(fp, density, z0_mod: float = 0.05, z0_arg_deg: float = 85.0, N: int = 2000,
                     min_mod: float = 1e-3, arg_step: float = 5.0, min_arg: float = 10.0, **kw) -> ContourData:
    """:func:`contour` with a fallback for ``z0``.

    ``|z0|`` is halved on :class:`LeftUpperHalfPlane`.  When the arcs leave
    the domain of ``phi_hat`` the argument is lowered in ``arg_step``
    degrees: for small ``ell`` the sector around the repelling point in
    which ``G``-orbits stay in the domain of ``phi`` is narrower than 90 degrees.
    The ``z0`` actually used is recorded in the diagnostics.
    """
    mod, arg = z0_mod, z0_arg_deg
    while True:
        try:
            c = contour(fp, density, mod, arg, N, **kw)
            c.diagnostics["z0_requested"] = [z0_mod, z0_arg_deg]
            c.diagnostics["z0_used"] = [mod, arg]
            return c
        except LeftUpperHalfPlane:
            mod *= 0.5
            if mod < min_mod:
                raise
            log.info("contour left the upper half plane; retrying with |z0| = %.3g", mod)
        except OutsideAnalyticityRegion:
            arg -= arg_step
            if arg < min_arg:
                raise
            log.info("arcs leave the domain of phi_hat; retrying with arg z0 = %.1f deg", arg)


# ---------------------------------------------------------------------------
# Reports and the limit in ell
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriftReport:
    """Drift of one fixed point by every estimator, with diagnostics."""

    family: str
    ell: int
    theta_direct: float
    theta_log: float
    theta_birkhoff: float
    birkhoff_stderr: float
    theta_contour_partial: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def theta(self) -> float:
        return self.theta_log

    def to_record(self) -> dict:
        return {
            "family": self.family,
            "ell": self.ell,
            "theta_direct": self.theta_direct,
            "theta_log": self.theta_log,
            "theta_birkhoff": self.theta_birkhoff,
            "birkhoff_stderr": self.birkhoff_stderr,
            "theta_contour_partial": [float(v) for v in self.theta_contour_partial],
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "DriftReport":
        return cls(rec["family"], int(rec["ell"]), float(rec["theta_direct"]), float(rec["theta_log"]),
                   float(rec["theta_birkhoff"]), float(rec["birkhoff_stderr"]),
                   tuple(rec.get("theta_contour_partial", ())), dict(rec.get("diagnostics", {})))


def drift_report(sys_, density, n_steps: int = 10 ** 6, n_seeds: int = 8, seed: int = 0,
                 threads: int = 1, contour_n: int | None = None, qtol: float = 1e-8) -> DriftReport:
    """All three estimators (and, for coverings, the contour partial sums when ``contour_n`` is set)."""
    fp = sys_.fp
    t_direct = drift_direct(sys_, density)
    t_log = drift_log(fp, density, qtol=qtol)
    t_birk, err = drift_birkhoff(sys_, n_steps, n_seeds, seed=seed, threads=threads)
    diag = {
        "direct_log_relative": abs(t_direct - t_log) / abs(t_log),
        "birkhoff_sigmas": abs(t_birk - t_log) / err if err > 0 else float("inf"),
        "branches": len(sys_.branches),
        "omitted_length": sys_.omitted,
        "birkhoff_steps": int(n_steps),
        "birkhoff_seeds": int(n_seeds),
    }
    partial: tuple = ()
    if fp.kind.covering:
        mu = mu_coordinate(fp, density)
        diag["rho"] = mu.rho
        diag["eta"] = eta_of_ell(fp, rho=mu.rho)
        diag["mu_functional_equation"] = mu.functional_equation_deviation()
        if contour_n:
            c = contour_adaptive(fp, density, N=contour_n)
            partial = tuple(float(v) for v in c.partial_sums / c.log_tau)
            diag["contour"] = {"theta": c.theta, "q_hat": c.q_hat, "tail_bound_theta": c.tail_bound / c.log_tau,
                               "n_resolved": c.n_resolved, **c.diagnostics}
    return DriftReport(fp.kind.tag, fp.ell, t_direct, t_log, t_birk, err, partial, diag)


@dataclass(frozen=True)
class LimitEstimate:
    """Extrapolated limit of ``theta(ell)`` with the spread across orders as error bar."""

    value: float
    error: float
    tag: str
    orders: tuple
    differences: tuple
    slope_exponent: float

    def to_record(self) -> dict:
        return {"value": self.value, "error": self.error, "tag": self.tag, "orders": list(self.orders),
                "differences": list(self.differences), "slope_exponent": self.slope_exponent}


def slope_exponent(ells: Sequence[float], values: Sequence[float]) -> float:
    """Power ``p`` in ``|d theta / d(1/ell)| ~ (1/ell)**p`` from successive difference quotients.

    ``p`` near 0 means ``theta`` is smooth in ``1/ell`` (finite limit);
    ``p`` near -1 is the signature of logarithmic growth in ``ell``.
    """
    h = 1.0 / np.asarray(ells, dtype=float)
    v = np.asarray(values, dtype=float)
    slope = np.abs(np.diff(v) / np.diff(h))
    mid = 0.5 * (h[1:] + h[:-1])
    if slope.size < 2 or np.any(slope == 0):
        return 0.0
    return float(np.polyfit(np.log(mid), np.log(slope), 1)[0])


def difference_signature(values: Sequence[float], ells: Sequence[float] | None = None,
                         rtol: float = 1e-12, divergent_exponent: float = -0.5) -> str:
    """Classify a sweep as ``FINITE``, ``DIVERGENT`` or ``INDETERMINATE``.

    ``FINITE`` needs strictly shrinking successive |differences| (or none at
    all) and, when ``ells`` is given, a slope exponent above
    ``divergent_exponent``.  Differences that never shrink, or slopes growing
    like ``ell``, give ``DIVERGENT``.
    """
    v = np.asarray(values, dtype=float)
    d = np.abs(np.diff(v))
    if d.size == 0 or np.all(d <= rtol * max(1.0, float(np.max(np.abs(v))))):
        return "FINITE"
    if d.size == 1:
        return "INDETERMINATE"
    shrinking = bool(np.all(np.diff(d) < 0))
    if np.all(np.diff(d) >= 0):
        return "DIVERGENT"
    if ells is not None and slope_exponent(ells, v) < divergent_exponent:
        return "DIVERGENT"
    return "FINITE" if shrinking else "INDETERMINATE"


def _neville_at_zero(h: np.ndarray, y: np.ndarray) -> float:
    p = y.astype(float).copy()
    n = len(h)
    for k in range(1, n):
        for i in range(n - k):
            p[i] = (h[i + k] * p[i] - h[i] * p[i + 1]) / (h[i + k] - h[i])
    return float(p[0])


def limit_drift_estimate(sweep) -> LimitEstimate:
    """Richardson extrapolation of ``theta`` in ``1/ell``.

    Parameters
    ----------
    sweep : sequence of DriftReport or of ``(ell, theta)`` pairs, at least 4 entries.

    Raises
    ------
    NotConverging
        If the sweep has the divergence signature of :func:`difference_signature`.
    """
    pairs = sorted((float(r.ell), float(r.theta)) if hasattr(r, "theta") else (float(r[0]), float(r[1]))
                   for r in sweep)
    if len(pairs) < 4:
        raise ValueError("need at least 4 values of ell")
    ell = np.array([p[0] for p in pairs])
    th = np.array([p[1] for p in pairs])
    tag = difference_signature(th, ell)
    diffs = tuple(float(v) for v in np.diff(th))
    expo = slope_exponent(ell, th)
    if tag == "DIVERGENT":
        raise NotConverging(f"drift sweep has the divergence signature: differences {diffs}, "
                            f"slope exponent {expo:.2f}")
    h = 1.0 / ell
    orders = tuple(_neville_at_zero(h[-(k + 1):], th[-(k + 1):]) for k in range(len(th)))
    value = orders[-1]
    error = float(max(abs(orders[-1] - orders[-2]), abs(orders[-2] - orders[-3])))
    return LimitEstimate(value, error, tag, orders, diffs, expo)
