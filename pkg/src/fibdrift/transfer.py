"""Transfer operator over a countable inverse-branch system.

``P f(x) = sum_m |psi_m'(x)| f(psi_m(x))``.  Densities are Chebyshev
interpolants on a segment that every branch maps into itself, and the
operator is assembled as a matrix acting on their node values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from math import factorial
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.special import zeta

from .errors import MassLeak, NegativeDensity, NoConvergence, SignConventionViolation
from .funcspace import (
    AnalyticFunction,
    Chart,
    ChartedFunction,
    chebyshev_nodes,
    from_values,
    interpolation_matrix,
    values_to_coeffs,
)

log = logging.getLogger(__name__)

__all__ = [
    "BranchSystem",
    "Density",
    "branch_system",
    "gauss_branch_system",
    "gauss_density",
    "apply_transfer",
    "transfer_matrix",
    "invariant_density",
    "density_identity_checks",
    "density_convergence",
]


@dataclass(frozen=True)
class BranchSystem:
    """Inverse branches with derivatives, the segment they act on and ``J``.

    Attributes
    ----------
    segment : tuple of float
        Interval carrying the density; every branch maps it into itself.
    J : tuple of float
        Interval on which mass is normalised.
    evaluate : callable
        ``x -> (Y, DY)`` with one row per branch.
    labels : tuple of int
        Drift index of each row.
    expected_sign : tuple of int
        Required sign of the signed weight, per row: the weight entering
        ``P`` is ``expected_sign * psi'`` and must be positive.
    tail_matrix : callable, optional
        ``(x, interval, n) -> matrix`` adding the contribution of omitted
        branches as a linear map on node values.
    tail_tol : float
        Truncation tolerance used when the branches were enumerated.
    chart : Chart
        Variable in which densities are interpolated.
    tails : tuple of (int, int)
        Row indices ``(previous, last)`` of each truncated geometric tail;
        the omitted terms are summed as a geometric series from the last one.
    """

    segment: tuple[float, float]
    J: tuple[float, float]
    evaluate: Callable = field(repr=False)
    labels: tuple[int, ...] = field(repr=False)
    expected_sign: tuple[int, ...] = field(repr=False)
    tail_matrix: Callable | None = field(default=None, repr=False)
    tail_tol: float = 0.0
    chart: Chart = Chart(0)
    tails: tuple[tuple[int, int], ...] = ()

    @property
    def s_interval(self) -> tuple[float, float]:
        return self.chart.s_interval(self.segment)

    def nodes(self, n: int) -> np.ndarray:
        """Interpolation nodes in ``x``."""
        return self.chart.to_x(chebyshev_nodes(self.s_interval, n))

    def mass_row(self, n: int, order: int = 256) -> np.ndarray:
        """Row vector giving the mass on ``J`` of an interpolant from its node values."""
        t, w = np.polynomial.legendre.leggauss(order)
        s0, s1 = (float(self.chart.to_s(v)) for v in self.J)
        s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * t
        return (0.5 * (s1 - s0) * w * self.chart.dx_ds(s)) @ interpolation_matrix(self.s_interval, n, s)

    def weights(self, x, check: bool = True):
        """Branch values and positive weights at ``x``."""
        Y, DY = self.evaluate(np.asarray(x, dtype=float))
        signed = np.asarray(self.expected_sign, dtype=float)[:, None] * DY
        if check and np.any(signed <= 0):
            i, j = np.argwhere(signed <= 0)[0]
            raise SignConventionViolation(
                f"branch m={self.labels[i]}: signed derivative {signed[i, j]:.3e} at x={np.ravel(x)[j]!r}")
        return Y, np.abs(DY)


def branch_system(sys_, segment: Sequence[float] | None = None, check: bool = True) -> BranchSystem:
    """Wrap an induced system; weights are ``|psi_m'|``.

    For coverings the factor ``(-1)**m`` exactly compensates the
    orientation of odd branches, so ``(-1)**m psi_m' > 0`` is asserted; for
    the unimodal family the left-piece branches reverse orientation and
    the right-piece ones preserve it.
    """
    from .induced import density_segment

    fp = sys_.fp
    if segment is None:
        segment = density_segment(sys_)
    if fp.kind.covering:
        signs = tuple(1 if b.m % 2 == 0 else -1 for b in sys_.branches)
    else:
        signs = tuple(-1 if b.piece == "+" else 1 for b in sys_.branches)
    # densities are singular at 0, which sits just outside J; a log chart removes it
    chart = Chart(-1 if fp.kind.covering else 1)
    bs = BranchSystem(tuple(float(v) for v in segment), sys_.J, sys_.evaluate,
                      tuple(b.m for b in sys_.branches), signs, None, sys_.tail_tol, chart)
    grid = np.linspace(sys_.J[0], sys_.J[1], 65)[1:-1]
    _, W = bs.weights(grid, check=check)
    tails = _geometric_tails(sys_.branches, W, 2 if fp.kind.covering else 1)
    return replace(bs, tails=tails)


def _geometric_tails(branches, W: np.ndarray, stride: int) -> tuple[tuple[int, int], ...]:
    """Locate truncated tails: the outermost group of each sign whose weights decay geometrically."""
    groups: dict[tuple, list[int]] = {}
    for i, b in enumerate(branches):
        if b.m != 0:
            groups.setdefault((int(np.sign(b.m)), b.m % stride, b.piece), []).append(i)
    extreme = {}
    for b in branches:
        sg = int(np.sign(b.m))
        extreme[sg] = max(extreme.get(sg, 0), abs(b.m))
    tails = []
    for (sg, _, _), idx in sorted(groups.items()):
        idx.sort(key=lambda i: abs(branches[i].m))
        if len(idx) < 3 or abs(branches[idx[-1]].m) < extreme[sg] - stride:
            continue
        a, b, c = idx[-3:]
        r1, r2 = W[b] / W[a], W[c] / W[b]
        if np.all(r2 < 1.0) and np.max(np.abs(r2 / r1 - 1.0)) < 0.1:
            tails.append((b, c))
    return tuple(tails)


# ---------------------------------------------------------------------------
# Gauss map oracle
# ---------------------------------------------------------------------------


def gauss_density(x):
    """Invariant density of the Gauss map."""
    return 1.0 / ((1.0 + np.asarray(x, dtype=float)) * math.log(2.0))


def gauss_branch_system(n_branches: int = 200, taylor_order: int = 12) -> BranchSystem:
    """Branches ``x -> 1/(x + k)`` on ``[0, 1]`` with an analytic tail correction.

    Omitted branches ``k > n_branches`` are summed through the Taylor
    expansion of ``f`` at 0 and Hurwitz zeta values:
    ``sum_{k>K} (x+k)^-2 f(1/(x+k)) = sum_j f^(j)(0)/j! * zeta(j+2, x+K+1)``.
    """
    ks = np.arange(1, n_branches + 1, dtype=float)

    def evaluate(x):
        x = np.asarray(x, dtype=float).ravel()
        s = x[None, :] + ks[:, None]
        return 1.0 / s, -1.0 / s ** 2

    def tail_matrix(x, interval, n):
        x = np.asarray(x, dtype=float).ravel()
        coeff_map = values_to_coeffs(np.eye(n))
        half = 0.5 * (interval[1] - interval[0])
        t0 = (2.0 * 0.0 - (interval[0] + interval[1])) / (interval[1] - interval[0])
        out = np.zeros((x.size, n))
        c = coeff_map
        for j in range(taylor_order + 1):
            deriv_at_0 = cheb.chebval(t0, c) / half ** j  # row vector over node values
            out += np.outer(zeta(j + 2.0, x + n_branches + 1.0), deriv_at_0 / factorial(j))
            c = cheb.chebder(c, axis=0) if c.shape[0] > 1 else np.zeros_like(c)
        return out

    return BranchSystem((0.0, 1.0), (0.0, 1.0), evaluate, tuple(range(1, n_branches + 1)),
                        tuple([-1] * n_branches), tail_matrix, 0.0)


# ---------------------------------------------------------------------------
# Operator and iteration
# ---------------------------------------------------------------------------


def transfer_matrix(bs: BranchSystem, n: int, x=None) -> np.ndarray:
    """Matrix taking node values to ``P f`` at ``x`` (default: the nodes)."""
    if x is None:
        x = bs.nodes(n)
    x = np.asarray(x, dtype=float).ravel()
    Y, W = bs.weights(x)
    lo, hi = bs.segment
    span = hi - lo
    if np.any((Y < lo - 1e-12 * span) | (Y > hi + 1e-12 * span)):
        raise MassLeak("a branch maps the density segment outside itself")
    nb = Y.shape[0]
    rows = np.repeat(np.arange(x.size)[None, :], nb, axis=0).ravel()
    B = interpolation_matrix(bs.s_interval, n, bs.chart.to_s(Y.ravel())) * W.ravel()[:, None]
    M = np.zeros((x.size, n))
    np.add.at(M, rows, B)
    for i, j in bs.tails:
        r = W[j] / W[i]
        w = np.where((r > 0) & (r < 1), W[j] * r / (1.0 - r), 0.0)
        M += interpolation_matrix(bs.s_interval, n, bs.chart.to_s(Y[j])) * w[:, None]
    if bs.tail_matrix is not None:
        M += bs.tail_matrix(x, bs.s_interval, n)
    return M


def _charted(bs: BranchSystem, values: np.ndarray) -> ChartedFunction:
    return ChartedFunction(from_values(values, bs.s_interval), bs.chart)


def apply_transfer(bs: BranchSystem, f, degree: int | None = None, check_mass: bool = True) -> ChartedFunction:
    """``P f`` interpolated at ``degree`` nodes of the branch segment.

    ``f`` is any real callable (for instance a previous iterate); ``degree``
    defaults to ``f.degree`` when available.

    Raises
    ------
    MassLeak
        If the mass on ``J`` changes by more than ``10 * tail_tol`` (plus
        round-off) relative to the input mass.
    """
    n = degree if degree is not None else getattr(f, "degree", 64)
    x = bs.nodes(n)
    fx = np.asarray(f(x), dtype=float)
    M = transfer_matrix(bs, n, x)
    g = _charted(bs, M @ fx)
    if check_mass:
        row = bs.mass_row(n)
        m_in, m_out = row @ fx, row @ (M @ fx)
        scale = max(abs(m_in), float(np.max(np.abs(fx))) * (bs.J[1] - bs.J[0]), 1e-300)
        if abs(m_out - m_in) > (10.0 * bs.tail_tol + 1e-9) * scale:
            raise MassLeak(f"mass changed from {m_in:.12g} to {m_out:.12g}")
    return g


@dataclass(frozen=True)
class Density:
    """Invariant density: ``f`` on the branch segment, unit mass on ``J``."""

    f: ChartedFunction
    J: tuple[float, float]
    residual: float
    iterations: int
    contraction: float = float("nan")

    def __call__(self, x):
        return self.f(x)

    def mass(self) -> float:
        return self.f.integrate(*self.J)

    def to_record(self) -> dict:
        return {"f": self.f.to_record(), "J": list(self.J), "residual": float(self.residual),
                "iterations": int(self.iterations)}

    @classmethod
    def from_record(cls, rec: dict) -> "Density":
        return cls(ChartedFunction.from_record(rec["f"]), tuple(rec["J"]), float(rec["residual"]),
                   int(rec["iterations"]))


def invariant_density(bs: BranchSystem, tol: float = 1e-10, max_iter: int = 200, degree: int = 96,
                      check_points: int = 257) -> Density:
    """Power iteration of ``P`` from the constant density, renormalised to unit mass on ``J``.

    Raises
    ------
    NoConvergence
        If successive iterates still differ by more than ``tol`` after ``max_iter`` steps.
    NegativeDensity
        If the limit dips below ``-tol`` anywhere on ``J``.
    MassLeak
        If one application of ``P`` changes the mass beyond the truncation budget.
    """
    x = bs.nodes(degree)
    M = transfer_matrix(bs, degree, x)
    mass_row = bs.mass_row(degree)
    v = np.ones(degree)
    v /= mass_row @ v
    leak = abs(mass_row @ (M @ v) - 1.0)
    if leak > 10.0 * bs.tail_tol + 1e-9:
        raise MassLeak(f"mass of P(1) deviates by {leak:.3e}")
    history = []
    for it in range(1, max_iter + 1):
        w = M @ v
        w /= mass_row @ w
        diff = float(np.max(np.abs(w - v)))
        history.append(diff)
        v = w
        if diff <= tol:
            break
    else:
        raise NoConvergence(f"density iteration not converged after {max_iter} steps (last step {diff:.2e})")
    f = _charted(bs, v)
    ratios = [b / a for a, b in zip(history[:-1], history[1:]) if a > 0 and b > 0]
    contraction = float(np.median(ratios[-8:])) if ratios else 0.0
    # residual on an offset grid, evaluated through the branches directly
    s0, s1 = bs.s_interval
    sc = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * np.cos(np.pi * (np.arange(check_points) + 0.5) / check_points)
    xc = bs.chart.to_x(sc)
    Pf = transfer_matrix(bs, degree, xc) @ v
    residual = float(np.max(np.abs(Pf - f(xc))))
    xj = np.linspace(bs.J[0], bs.J[1], 2001)
    fj = f(xj)
    if np.min(fj) < -tol:
        raise NegativeDensity(f"density reaches {np.min(fj):.3e} on J")
    log.info("density: %d iterations, residual %.2e, contraction %.3f", it, residual, contraction)
    return Density(f, tuple(bs.J), residual, it, contraction)


# ---------------------------------------------------------------------------
# Identities satisfied by the invariant density
# ---------------------------------------------------------------------------


def density_identity_checks(fp, density: Density, eps3: float | None = None, n: int = 41,
                            mu_radius: float = 0.02) -> dict:
    """Deviations of the two density identities tied to ``Gamma``.

    * On ``x`` in ``(p, p + eps3)`` with ``p = tau**2 X``:
      ``f(Gamma(x)/tau^2) (Gamma/tau^2)'(x) - f(Gamma(x)) Gamma'(x) = f(x/tau^2) / tau^2``.
    * In the integrated-density coordinate ``mu`` (based at ``p``), with
      ``T = mu o tau^-2 o mu^-1`` and ``Gh = mu o Gamma o mu^-1``:
      ``T(z) = T(Gh(z)) - Gh(z)`` for real ``z`` near 0.
    """
    from .drift import mu_coordinate
    from .induced import associated_maps

    if not fp.kind.covering:
        raise ValueError("density identities are stated for the covering family")
    _, Gamma, _, dGamma = associated_maps(fp)
    f = density.f
    p = fp.base
    t2 = fp.tau ** 2
    if eps3 is None:
        eps3 = 0.05 * (fp.X - p)
    x = p + eps3 * np.linspace(0.05, 1.0, n)
    g, dg = Gamma(x), dGamma(x)
    lhs = f(g / t2) * dg / t2 - f(g) * dg
    rhs = f(x / t2) / t2
    dev34 = float(np.max(np.abs(lhs - rhs)))

    mu = mu_coordinate(fp, density)
    z = mu_radius * np.linspace(-1.0, 1.0, n)
    xz = mu.inverse(z)
    gh = mu(Gamma(xz))
    T = mu(xz / t2)
    T_at_gh = mu(mu.inverse(gh) / t2)
    dev35 = float(np.max(np.abs(T - (T_at_gh - gh))))
    return {"gamma_density_identity": dev34, "mu_functional_equation": dev35,
            "eps3": float(eps3), "mu_radius": float(mu_radius)}


def density_convergence(densities: Sequence[Density], shrink: float = 0.1, n: int = 2001) -> dict:
    """Sup distances between successive densities on a common inner segment.

    The segment is the intersection of all ``J`` with a fraction ``shrink``
    cut from each end.

    Returns
    -------
    dict
        ``segment``, ``distances`` and ``monotone`` (strictly decreasing).
    """
    if len(densities) < 2:
        raise ValueError("need at least two densities")
    lo = max(d.J[0] for d in densities)
    hi = min(d.J[1] for d in densities)
    if not lo < hi:
        raise ValueError("intervals J have empty intersection")
    a, b = lo + shrink * (hi - lo), hi - shrink * (hi - lo)
    x = np.linspace(a, b, n)
    vals = [np.asarray(d(x)) for d in densities]
    dist = [float(np.max(np.abs(u - v))) for u, v in zip(vals, vals[1:])]
    return {"segment": [float(a), float(b)], "distances": dist,
            "monotone": all(q < p for p, q in zip(dist, dist[1:]))}
