"""Fibonacci renormalization fixed points.

The fixed point is stored through ``E`` with ``phi = E**ell``.  With
``G(y) = phi(y / tau) / tau`` the fixed-point equation reads

    E(y) = s * |tau|**(2/ell) * E(G(y)),

where ``s = +1`` for the covering family (odd ``ell``, ``tau < -1``) and
``s = -1`` for the unimodal family (even ``ell``, ``tau > 1``).  It is
collocated on an interval ``[a, b]`` that is invariant under both ``G`` and
division by ``tau``; values of ``phi`` to the left of ``a`` (covering only)
follow from ``phi(y) = tau**2 * phi(G(y))``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import minimize_scalar

from .errors import (
    NotBracketed,
    CombinatoricsExhausted,
    DegreeTooLow,
    DepthUnresolvable,
    InvariantViolation,
    NewtonDiverged,
    NoSignChange,
    ParityMismatch,
)
from .funcspace import AnalyticFunction, chebyshev_nodes, complex_newton, invert_monotone, values_to_coeffs

log = logging.getLogger(__name__)

__all__ = [
    "FamilyKind",
    "RenormFixedPoint",
    "ConcreteFibMap",
    "SeedData",
    "template_family",
    "find_fibonacci_parameter",
    "renormalize",
    "fixed_point_map",
    "bootstrap_seed",
    "solve_fixed_point",
    "continuation_sweep",
]

FAMILIES = ("covering", "unimodal")


@dataclass(frozen=True)
class FamilyKind:
    """Family tag and criticality; parity is checked on construction."""

    tag: str
    ell: int

    def __post_init__(self) -> None:
        tag = str(self.tag).lower()
        if tag not in FAMILIES:
            raise ValueError(f"unknown family {self.tag!r}")
        object.__setattr__(self, "tag", tag)
        ell = self.ell
        if isinstance(ell, float) and ell.is_integer():
            ell = int(ell)
        if not isinstance(ell, (int, np.integer)) or isinstance(ell, bool):
            raise ParityMismatch(f"ell must be an integer, got {self.ell!r}")
        ell = int(ell)
        object.__setattr__(self, "ell", ell)
        if tag == "covering" and (ell % 2 == 0 or ell < 3):
            raise ParityMismatch(f"covering family needs odd ell >= 3, got {ell}")
        if tag == "unimodal" and (ell % 2 == 1 or ell < 4):
            raise ParityMismatch(f"unimodal family needs even ell >= 4, got {ell}")

    @property
    def covering(self) -> bool:
        return self.tag == "covering"

    @property
    def sign(self) -> int:
        return 1 if self.covering else -1


def _power(v, ell: float, covering: bool):
    """``phi`` from ``E``: odd extension for coverings, modulus otherwise."""
    if covering:
        return np.sign(v) * np.abs(v) ** ell
    return np.abs(v) ** ell


def _root(v, ell: float):
    """Real, sign-preserving ``ell``-th root."""
    return np.sign(v) * np.abs(v) ** (1.0 / ell)


# ---------------------------------------------------------------------------
# Fixed point and the maps derived from it
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RenormFixedPoint:
    """Solved fixed point ``(tau, E)`` with its landmarks.

    Attributes
    ----------
    kind : FamilyKind
    tau : float
        Scaling constant.
    E : AnalyticFunction
        ``ell``-th root of ``phi`` on the collocation interval ``[a, b]``.
    X : float
        Point with ``phi(X) = tau * X``.
    x0 : float
        Critical point, the zero of ``E``.
    domain : tuple of float
        Interval on which ``phi`` is evaluated (for coverings it reaches down
        to ``tau**2 * X`` through the functional equation).
    residual : float
        Fixed-point residual on the dense verification grid.
    """

    kind: FamilyKind
    tau: float
    E: AnalyticFunction = field(repr=False)
    X: float
    x0: float
    domain: tuple[float, float]
    residual: float = float("nan")

    @property
    def ell(self) -> int:
        return self.kind.ell

    @property
    def degree(self) -> int:
        return self.E.degree

    @property
    def log_tau(self) -> float:
        return math.log(abs(self.tau))

    @property
    def base(self) -> float:
        """Fixed point of ``Gamma`` (``tau**2 X``); left end of J for coverings."""
        return self.tau ** 2 * self.X

    @property
    def J(self) -> tuple[float, float]:
        if self.kind.covering:
            return (self.base, self.X)
        return (self.X, self.tau * self.X)

    @cached_property
    def dE(self) -> AnalyticFunction:
        return self.E.differentiate()

    @cached_property
    def monotone_bracket(self) -> tuple[float, float]:
        return self.E.interval

    # -- real evaluation ---------------------------------------------------

    def phi_direct(self, x):
        return _power(self.E(x), self.ell, self.kind.covering)

    def G(self, x):
        """Associated map ``tau^-1 phi tau^-1``."""
        return self.phi(np.asarray(x) / self.tau) / self.tau

    def Gamma(self, x):
        """Associated map ``tau phi tau^-2`` (covering family)."""
        return self.tau * self.phi(np.asarray(x) / self.tau ** 2)

    def _pull_into_domain(self, x):
        """Iterate ``G`` until points land in ``[a, b]``; returns (points, counts).

        Uses ``phi(x) = tau**2 phi(G(x))``, valid for both families.
        """
        x = np.array(x, dtype=float, copy=True)
        k = np.zeros(x.shape, dtype=int)
        a, b = self.E.interval
        for _ in range(4000):
            out = ((x < a) | (x > b)) & np.isfinite(x)
            if not np.any(out):
                break
            v = x[out] / self.tau
            inner = (v >= a) & (v <= b)
            pv = np.full(v.shape, np.nan)
            pv[inner] = self.phi_direct(v[inner])
            if np.any(~inner):
                pv[~inner] = self.phi(v[~inner])
            x[out] = pv / self.tau
            k[out] += 1
        return x, k

    def log_abs_phi(self, x):
        """Sign and log-modulus of ``phi``; outside ``[a, b]`` via the functional equation."""
        x = np.asarray(x, dtype=float)
        y, k = self._pull_into_domain(x)
        a, b = self.E.interval
        y = np.where((y >= a) & (y <= b), y, np.nan)
        e = self.E(y)
        with np.errstate(divide="ignore"):
            la = 2.0 * k * self.log_tau + self.ell * np.log(np.abs(e))
        sgn = np.sign(e) if self.kind.covering else np.where(np.isnan(e), np.nan, 1.0)
        bad = x <= self.base if self.kind.covering else np.zeros(x.shape, bool)
        la = np.where(bad, np.nan, la)
        return sgn, la

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        sgn, la = self.log_abs_phi(x)
        with np.errstate(over="ignore"):
            return sgn * np.exp(la)

    def dphi(self, x):
        """Derivative of ``phi`` via the chain rule through the functional equation."""
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        direct = (x >= self.E.a) & (x <= self.E.b)
        e = self.E(x[direct])
        out[direct] = self.ell * np.abs(e) ** (self.ell - 1) * self.dE(x[direct]) * (
            1.0 if self.kind.covering else np.sign(e))
        if np.any(~direct):
            y = x[~direct]
            # phi'(y) = tau^2 phi'(G y) G'(y),  G'(y) = phi'(y/tau) / tau^2
            out[~direct] = self.dphi(self.G(y)) * self.dphi(y / self.tau)
        return out

    # -- inverses ----------------------------------------------------------

    def E_inverse(self, r, lo: float | None = None, hi: float | None = None):
        a, b = self.E.interval
        return invert_monotone(self.E, r, bracket=(a if lo is None else lo, b if hi is None else hi),
                               df=self.dE)

    def phi_inverse(self, v, branch: str = "-"):
        """Inverse of ``phi`` with its derivative.

        Parameters
        ----------
        v : ndarray
            Values of ``phi``.
        branch : {'-', '+'}
            Unimodal only: ``'-'`` selects the increasing piece right of
            ``x0``, ``'+'`` the decreasing piece left of it.

        Returns
        -------
        y, dy : ndarray
            Preimages and ``(phi^-1)'(v)``.
        """
        v = np.asarray(v, dtype=float)
        ell = self.ell
        if not self.kind.covering:
            r = np.abs(v) ** (1.0 / ell)
            if branch == "+":
                y = self.E_inverse(r, self.E.a, self.x0)
                e = r
            else:
                y = self.E_inverse(-r, self.x0, self.E.b)
                e = -r
            with np.errstate(divide="ignore"):
                dy = 1.0 / (ell * e ** (ell - 1) * self.dE(y))
            return y, dy
        v_a = float(self.phi_direct(self.E.a))
        k = np.zeros(v.shape, dtype=int)
        w = v.copy()
        low = w < v_a
        while np.any(low):
            w[low] /= self.tau ** 2
            k[low] += 1
            low = w < v_a
        r = _root(w, ell)
        y = self.E_inverse(r)
        with np.errstate(divide="ignore"):
            dy = 1.0 / (ell * np.abs(r) ** (ell - 1) * self.dE(y))
        dy = dy / self.tau ** (2 * k)
        for level in range(int(k.max(initial=0)), 0, -1):
            sel = k >= level
            # G^-1(u) = tau * phi^-1(tau u) on the increasing piece right of x0
            ys, dys = self._G_inverse(y[sel])
            y[sel] = ys
            dy[sel] *= dys
        return y, dy

    def _G_inverse(self, u):
        r = _root(self.tau * np.asarray(u, dtype=float), self.ell)
        z = self.E_inverse(r)
        dz = 1.0 / (self.ell * np.abs(r) ** (self.ell - 1) * self.dE(z))
        return self.tau * z, self.tau ** 2 * dz

    # -- complex evaluation --------------------------------------------------

    @cached_property
    def E_complex(self) -> AnalyticFunction:
        """``E`` with its round-off tail removed, for evaluation off the real axis."""
        return self.E.chop(1e-13)

    @cached_property
    def _complex_radius(self) -> float:
        return self.E_complex.safe_radius(1e-9)

    def log_phi_complex(self, x):
        """Principal-branch ``log phi`` at complex points (branch fixed by the caller).

        Points outside the ellipse where ``E`` is trustworthy are moved by
        ``G`` first, using ``phi = tau**2 phi o G``; points whose orbit never
        gets there (outside the domain of ``phi``) give NaN.  Returns the
        values and the points at which ``E`` was finally evaluated.
        """
        x = np.array(x, dtype=complex, copy=True)
        k = np.zeros(x.shape, dtype=int)
        Ec, r_ok = self.E_complex, self._complex_radius
        for _ in range(400):
            far = np.isfinite(x) & (Ec.bernstein_radius(x) > r_ok)
            if not np.any(far):
                break
            v = x[far] / self.tau
            ok = Ec.bernstein_radius(v) <= r_ok
            step = np.full(v.shape, np.nan + 0j)
            step[ok] = Ec.eval_complex(v[ok], eval_tol=1.0) ** self.ell / self.tau
            x[far] = step
            k[far] += 1
        bad = ~np.isfinite(x) | (Ec.bernstein_radius(np.where(np.isfinite(x), x, 0)) > r_ok)
        e = Ec.eval_complex(np.where(bad, 0.5 * (Ec.a + Ec.b), x), eval_tol=1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 2.0 * k * self.log_tau + self.ell * np.log(e)
        out[bad] = np.nan
        return out, x

    def phi_complex(self, x):
        lg, _ = self.log_phi_complex(np.asarray(x, dtype=complex))
        return np.exp(lg)

    def G_inverse_complex(self, u, seed=None):
        """``G^-1`` at complex points near the right piece, with derivative."""
        u = np.asarray(u, dtype=complex)
        w = self.tau * u
        r = w ** (1.0 / self.ell) if self.kind.covering else -(w ** (1.0 / self.ell))
        if seed is None:
            seed = self.E_inverse(np.clip(r.real, *self._E_range()))
        z, ok = complex_newton(self.E, self.dE, r, seed)
        if not np.all(ok):
            raise InvariantViolation("complex inversion of E did not converge")
        dz = 1.0 / (self.ell * r ** (self.ell - 1) * self.dE(z))
        return self.tau * z, self.tau ** 2 * dz

    def _E_range(self):
        lo, hi = float(self.E(self.E.a)), float(self.E(self.E.b))
        return (min(lo, hi), max(lo, hi))

    # -- serialisation -------------------------------------------------------

    def to_record(self) -> dict:
        return {
            "kind": self.kind.tag,
            "ell": self.ell,
            "tau": float(self.tau),
            "X": float(self.X),
            "x0": float(self.x0),
            "domain": [float(self.domain[0]), float(self.domain[1])],
            "E": self.E.to_record(),
            "residual": float(self.residual),
            "degree": self.degree,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "RenormFixedPoint":
        return cls(
            kind=FamilyKind(rec["kind"], int(rec["ell"])),
            tau=float(rec["tau"]),
            E=AnalyticFunction.from_record(rec["E"]),
            X=float(rec["X"]),
            x0=float(rec["x0"]),
            domain=(float(rec["domain"][0]), float(rec["domain"][1])),
            residual=float(rec.get("residual", float("nan"))),
        )


# ---------------------------------------------------------------------------
# Concrete two-branch maps and their renormalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConcreteFibMap:
    """Two-branch map given by its central branch ``psi0`` and ``psi1``.

    Both branches are increasing near their relevant pieces and share the
    critical value 0.  ``param`` is the tuning parameter of the template the
    map came from; ``scalings`` records the factors used by each
    renormalization already applied.
    """

    kind: FamilyKind
    psi0: Callable
    psi1: Callable
    param: float
    level: int = 0
    scalings: tuple = ()
    window: tuple | None = None

    def admissibility(self) -> int:
        """0 if one more renormalization is possible, else a failure mode in {-1, +1}."""
        b1 = float(self.psi1(1.0))
        if not math.isfinite(b1):
            return 1
        if self.kind.covering:
            if b1 >= 0.0:
                return 1
            if b1 <= -1.0:
                return -1
            return 0
        h = 1e-7
        slope = (float(self.psi1(1.0 + h)) - float(self.psi1(1.0 - h))) / (2 * h)
        if not slope > 0.0 or b1 <= 0.0:
            return -1
        if b1 >= 1.0:
            return 1
        return 0


def renormalize(g: ConcreteFibMap) -> ConcreteFibMap:
    """First return to the central interval, rescaled so that ``psi0(0) = 1``.

    The pair ``(A, B)`` becomes ``(lam B(A(x/lam)), lam A(x/lam))`` with
    ``lam = 1 / B(1)``.

    Raises
    ------
    CombinatoricsExhausted
        If the return structure at this level is not of Fibonacci type.
    """
    mode = g.admissibility()
    if mode != 0:
        raise CombinatoricsExhausted(f"level {g.level}: return structure is not Fibonacci (mode {mode:+d})")
    lam = 1.0 / float(g.psi1(1.0))
    A, B = g.psi0, g.psi1

    def new_a(x, A=A, B=B, lam=lam):
        return lam * B(A(np.asarray(x) / lam))

    def new_b(x, A=A, lam=lam):
        return lam * A(np.asarray(x) / lam)

    return ConcreteFibMap(g.kind, new_a, new_b, g.param, g.level + 1, g.scalings + (lam,), g.window)


def template_family(kind: FamilyKind, c: float | None = None):
    """Pure-power template: ``A`` has its critical point at ``c``; ``B = t A(./t)``.

    Returns the family (a callable of the parameter ``t``) and a parameter
    bracket on which the first level is admissible somewhere.
    """
    ell = kind.ell
    if kind.covering:
        c = -0.5 if c is None else c

        def A(x):
            v = (np.asarray(x, dtype=float) - c) / (-c)
            return np.sign(v) * np.abs(v) ** ell

        bracket = (-60.0, -1.05)
    else:
        c = 0.04 if c is None else c

        def A(x):
            return np.abs((c - np.asarray(x, dtype=float)) / c) ** ell

        bracket = (1.05, 0.999 / c)

    def family(t: float) -> ConcreteFibMap:
        return ConcreteFibMap(kind, A, lambda x, t=t: t * A(np.asarray(x) / t), float(t))

    return family, bracket


def _outcome(family, t: float, depth: int) -> tuple[int, int]:
    """Number of admissible levels (capped at ``depth``) and the failure mode."""
    g = family(t)
    with np.errstate(all="ignore"):
        for k in range(depth):
            mode = g.admissibility()
            if mode != 0:
                return k, mode
            g = renormalize(g)
    return depth, 0


def find_fibonacci_parameter(kind: FamilyKind, template=None, depth: int = 10,
                             bracket: Sequence[float] | None = None, scan: int = 24) -> ConcreteFibMap:
    """Tune the template parameter so the first ``depth`` levels are Fibonacci.

    The admissible parameters of successive levels form nested windows.
    Each window is scanned; a point passing one more level is located
    either directly or by bisecting between neighbours that fail in
    opposite modes, and the new window is grown around it by bisection.

    Raises
    ------
    NoSignChange
        No scan point passes and the failure mode never changes.
    DepthUnresolvable
        The window shrinks to round-off before ``depth`` levels match.
    """
    if template is None:
        template, default = template_family(kind)
        bracket = default if bracket is None else bracket
    if bracket is None:
        raise ValueError("a parameter bracket is required for a custom template")
    lo, hi = float(min(bracket)), float(max(bracket))

    def passes(t, level):
        return _outcome(template, t, level)[0] >= level

    for level in range(1, depth + 1):
        ts = np.linspace(lo, hi, scan + 2)[1:-1]
        outs = [_outcome(template, t, level) for t in ts]
        good = [i for i, (k, _) in enumerate(outs) if k >= level]
        if good:
            tp = ts[good[len(good) // 2]]
        else:
            tp = None
            for i in range(len(ts) - 1):
                (k1, m1), (k2, m2) = outs[i], outs[i + 1]
                if (k1, m1) == (k2, m2):
                    continue
                a_, b_ = ts[i], ts[i + 1]
                oa = outs[i]
                for _ in range(200):
                    mid = 0.5 * (a_ + b_)
                    om = _outcome(template, mid, level)
                    if om[0] >= level:
                        tp = mid
                        break
                    if om == oa:
                        a_ = mid
                    else:
                        b_ = mid
                    if b_ - a_ <= 4 * np.finfo(float).eps * abs(mid):
                        break
                if tp is not None:
                    break
            if tp is None:
                if len({o for o in outs}) == 1:
                    raise NoSignChange(f"combinatorics constant across the bracket at level {level}")
                raise DepthUnresolvable(f"no admissible parameter found at level {level}")
        # grow the window around tp
        def edge(inside, outside):
            for _ in range(60):
                mid = 0.5 * (inside + outside)
                if passes(mid, level):
                    inside = mid
                else:
                    outside = mid
                if abs(outside - inside) <= 1e-3 * abs(hi - lo) or abs(outside - inside) <= 4e-16 * abs(mid):
                    break
            return inside

        new_lo, new_hi = edge(tp, lo), edge(tp, hi)
        if new_hi - new_lo <= 8 * np.finfo(float).eps * abs(tp):
            if level < depth:
                raise DepthUnresolvable(f"parameter window collapsed at level {level}")
        lo, hi = new_lo, new_hi
    t = 0.5 * (lo + hi)
    if not passes(t, depth):
        t = tp
    g = template(t)
    return ConcreteFibMap(g.kind, g.psi0, g.psi1, g.param, 0, (), (lo, hi))


def fixed_point_map(fp: RenormFixedPoint) -> ConcreteFibMap:
    """The two-branch map of a solved fixed point: ``phi`` and ``tau phi tau^-1``."""
    tau = fp.tau
    return ConcreteFibMap(fp.kind, fp.phi, lambda x: tau * fp.phi(np.asarray(x) / tau), tau)


# ---------------------------------------------------------------------------
# Bootstrap seed
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeedData:
    """Initial data for Newton: landmarks and a sampled ``E``."""

    kind: FamilyKind
    tau: float
    X: float
    x0: float
    E: Callable
    history: tuple = ()


def _bisect(f: Callable, lo: float, hi: float, iters: int = 80) -> float:
    """Bisection using array evaluation only, so sign tests match the scan."""
    flo = float(np.asarray(f(np.array([lo])))[0])
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = float(np.asarray(f(np.array([mid])))[0])
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= 2 * np.finfo(float).eps * abs(mid):
            break
    return 0.5 * (lo + hi)


def _landmarks(kind: FamilyKind, phi: Callable, E: Callable | None = None):
    """``tau``, ``x0`` and ``X`` of a map normalised by ``phi(0) = 1``.

    When the root ``E`` is supplied the unimodal critical point is its zero.
    """
    ell = kind.ell
    with np.errstate(all="ignore"):
        if kind.covering:
            grid = np.linspace(-1.0, -1e-6, 4001)
            vals = phi(grid)
            idx = np.where(np.isfinite(vals[:-1]) & (vals[:-1] < 0) & (vals[1:] >= 0))[0]
            x0 = _bisect(phi, grid[idx[-1]], grid[idx[-1] + 1])
            u_lo, u_hi = x0, -1e-9
        else:
            grid = np.linspace(1e-6, 1.0, 4001)
            vals = phi(grid)
            x0 = float(grid[np.nanargmin(vals)])
            if E is not None:
                x0 = _bisect(E, x0 - 2e-3, x0 + 2e-3)
            u_lo, u_hi = x0, 1.0
        us = np.linspace(u_lo, u_hi, 4001)[1:]
        h = phi(us) - us ** 2
        idx = np.where(np.isfinite(h[:-1]) & np.isfinite(h[1:]) & (np.sign(h[:-1]) != np.sign(h[1:])))[0]
        if idx.size == 0:
            raise DepthUnresolvable("normalising root of phi(u) = u^2 not found")
        u = _bisect(lambda s: phi(s) - s * s, us[idx[0]], us[idx[0] + 1])
        tau = 1.0 / u
        xs = np.linspace(x0, 0.0, 4001)[1:-1] if kind.covering else np.linspace(1e-9, x0, 4001)[1:-1]
        h = phi(xs) - tau * xs
        idx = np.where(np.isfinite(h[:-1]) & (np.sign(h[:-1]) != np.sign(h[1:])))[0]
        if idx.size == 0:
            raise DepthUnresolvable("landmark X not found on the seed map")
        j = idx[0] if kind.covering else idx[-1]
        X = _bisect(lambda s: phi(s) - tau * s, xs[j], xs[j + 1])
    return tau, x0, X


def _sample_E(kind: FamilyKind, phi: Callable, y: np.ndarray, x0: float) -> np.ndarray:
    """Root of a sampled map, signed so that the result is analytic through ``x0``."""
    v = np.asarray(phi(y), dtype=float)
    if kind.covering:
        return _root(v, kind.ell)
    return np.where(y < x0, 1.0, -1.0) * np.abs(v) ** (1.0 / kind.ell)


def _refine_unimodal_x0(kind: FamilyKind, phi: Callable, x0: float, width: float) -> float:
    # |phi|^(1/ell) has a V-shaped minimum, located to round-off by a bounded search
    res = minimize_scalar(lambda s: float(np.abs(phi(np.array([s]))[0]) ** (1.0 / kind.ell)),
                          bounds=(x0 - width, x0 + width), method="bounded", options={"xatol": 1e-15})
    return float(res.x)


def bootstrap_seed(kind: FamilyKind, depth: int = 10, n_renorm: int = 6, max_self_similar: int = 80,
                   settle: float = 1e-7, degree: int = 128, window: float = 1.5) -> SeedData:
    """Seed for Newton from renormalizing a tuned concrete map.

    The template is tuned to ``depth`` Fibonacci levels and renormalized
    ``n_renorm`` times.  The tuning only holds to finite depth, so the
    central branch is then iterated with the self-similar operator
    ``E -> s |lam|^(2/ell) E(phi(./lam)/lam)`` (``lam`` from
    ``phi(1/lam) = lam^-2``), which needs no tuning.  ``E`` is refitted on
    ``[-window, window]`` after every step until ``lam`` settles.
    """
    history: list[float] = []
    try:
        g = find_fibonacci_parameter(kind, depth=depth)
        for _ in range(n_renorm):
            g = renormalize(g)
        history.extend(g.scalings)
        phi = g.psi0
    except (NoSignChange, DepthUnresolvable, CombinatoricsExhausted) as exc:
        log.info("pair tuning failed (%s); starting the self-similar stage from the template", exc)
        template, _ = template_family(kind)
        phi = template(2.0).psi0
    interval = (-window, window)
    y = chebyshev_nodes(interval, degree)
    tau, x0, X = _landmarks(kind, phi)
    if not kind.covering:
        x0 = _refine_unimodal_x0(kind, phi, x0, 2.0 / 4000)
    E = AnalyticFunction(interval, values_to_coeffs(_sample_E(kind, phi, y, x0)))
    ell, s = kind.ell, kind.sign
    prev = None
    for _ in range(max_self_similar):
        phi = (lambda t, E=E: _power(E(t), ell, kind.covering))
        tau, x0, X = _landmarks(kind, phi, E)
        history.append(tau)
        if prev is not None and abs(tau - prev) <= settle * abs(tau):
            break
        prev = tau
        if not kind.covering:
            # the landmark interval is G-invariant with a wide margin, unlike a fixed window
            interval = collocation_interval(kind, tau, X, x0)
            y = chebyshev_nodes(interval, degree)
        with np.errstate(all="ignore"):
            vals = s * abs(tau) ** (2.0 / ell) * E(phi(y / tau) / tau)
        if not np.all(np.isfinite(vals)):
            raise DepthUnresolvable("self-similar iteration left the sampling window")
        E = AnalyticFunction(interval, values_to_coeffs(vals))
        # conjugate by x -> c x with c = phi(0): interpolation error would
        # otherwise feed the unstable direction that moves phi(0)
        c = float(_power(E(0.0), ell, kind.covering))
        E = AnalyticFunction(interval, values_to_coeffs(E(c * y) / abs(c) ** (1.0 / ell)))
    lo, hi = E.interval
    scale = s * abs(tau) ** (2.0 / ell)

    def seed_E(t, E=E):
        # one application of the functional equation covers points left of the window
        t = np.asarray(t, dtype=float)
        inner = np.clip(t, lo, hi)
        w = _power(E(np.clip(t / tau, lo, hi)), ell, kind.covering) / tau
        return np.where(t < lo, scale * E(np.clip(w, lo, hi)), E(inner))

    return SeedData(kind, tau, X, x0, seed_E, tuple(history))


# ---------------------------------------------------------------------------
# Newton solver
# ---------------------------------------------------------------------------


def collocation_interval(kind: FamilyKind, tau: float, X: float, x0: float) -> tuple[float, float]:
    """Interval invariant under ``G`` and ``y -> y / tau``.

    The right end sits midway between ``tau X`` and the critical point
    ``tau x0`` of ``E``, so ``E`` is monotone there for both families.
    """
    b = 0.5 * (tau * X + tau * x0)
    if kind.covering:
        a = x0 + 0.2 * (tau ** 2 * X - x0)
    else:
        a = -0.25 * tau * X
    return (a, b)


class _Collocation:
    """Residual and Jacobian of the collocated fixed-point system."""

    def __init__(self, kind: FamilyKind, ell: float, interval, degree: int):
        self.kind = kind
        self.ell = ell
        self.a, self.b = interval
        self.n = degree
        self.y = chebyshev_nodes(interval, degree)
        self.Vy = self.vander(self.y)
        self.V0 = self.vander(np.array([0.0]))[0]

    def unit(self, x):
        return (2.0 * x - (self.a + self.b)) / (self.b - self.a)

    def vander(self, x):
        return cheb.chebvander(self.unit(np.asarray(x, dtype=float)), self.n - 1)

    def E(self, c, x):
        return cheb.chebval(self.unit(x), c)

    def dE(self, c, x):
        return cheb.chebval(self.unit(x), cheb.chebder(c)) * (2.0 / (self.b - self.a))

    def residual(self, u, y=None):
        c, tau, X = u[:-2], u[-2], u[-1]
        ell, s = self.ell, self.kind.sign
        y = self.y if y is None else y
        ev = self.E(c, y / tau)
        w = _power(ev, ell, self.kind.covering) / tau
        r = self.E(c, y) - s * abs(tau) ** (2.0 / ell) * self.E(c, w)
        if y is not self.y:
            return r
        rX = self.E(c, X) - _root(tau * X, ell)
        return np.concatenate([r, [self.E(c, 0.0) - 1.0, rX]])

    def jacobian(self, u):
        c, tau, X = u[:-2], u[-2], u[-1]
        ell, s, n = self.ell, self.kind.sign, self.n
        y = self.y
        v = y / tau
        ev = self.E(c, v)
        phiv = _power(ev, ell, self.kind.covering)
        w = phiv / tau
        scale = abs(tau) ** (2.0 / ell)
        dphiv = ell * np.abs(ev) ** (ell - 1) * self.dE(c, v) * (1.0 if self.kind.covering else np.sign(ev))
        dEw = self.dE(c, w)
        dphi_dc = (ell * np.abs(ev) ** (ell - 1) * (1.0 if self.kind.covering else np.sign(ev)))[:, None] * self.vander(v)
        J = np.zeros((n + 2, n + 2))
        J[:n, :n] = self.Vy - s * scale * (self.vander(w) + (dEw / tau)[:, None] * dphi_dc)
        dw_dtau = -(w + dphiv * v / tau) / tau
        J[:n, n] = -s * scale * ((2.0 / ell) / tau * self.E(c, w) + dEw * dw_dtau)
        J[n, :n] = self.V0
        J[n + 1, :n] = self.vander(np.array([X]))[0]
        root = _root(tau * X, ell)
        d_root = root / (ell * tau * X) if tau * X != 0 else 0.0
        J[n + 1, n] = -d_root * X
        J[n + 1, n + 1] = self.dE(c, X) - d_root * tau
        return J


def _newton(sys_: _Collocation, u: np.ndarray, tol: float, max_iter: int = 60):
    """Damped Newton with Armijo backtracking (factor 1/2, at most 30 halvings)."""
    r = sys_.residual(u)
    norm = np.max(np.abs(r))
    failures = 0
    for it in range(max_iter):
        if norm <= tol:
            # polish while it still helps
            for _ in range(3):
                step = np.linalg.solve(sys_.jacobian(u), -r)
                u2 = u + step
                r2 = sys_.residual(u2)
                n2 = np.max(np.abs(r2))
                if not n2 < 0.5 * norm:
                    break
                u, r, norm = u2, r2, n2
            return u, norm, it
        try:
            step = np.linalg.solve(sys_.jacobian(u), -r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(sys_.jacobian(u), -r, rcond=None)[0]
        t = 1.0
        accepted = False
        for _ in range(31):
            u2 = u + t * step
            with np.errstate(all="ignore"):
                r2 = sys_.residual(u2)
            n2 = np.max(np.abs(r2))
            if np.isfinite(n2) and n2 < (1.0 - 1e-4 * t) * norm:
                accepted = True
                break
            t *= 0.5
        if accepted:
            u, r, norm = u2, r2, n2
            failures = 0
            continue
        failures += 1
        if failures >= 5:
            break
        # take the shortest tried step anyway to escape a plateau
        if np.isfinite(n2):
            u, r, norm = u2, r2, n2
    return u, norm, max_iter


def _seed_vector(sys_: _Collocation, seed) -> np.ndarray:
    values = np.asarray(seed.E(sys_.y), dtype=float)
    c = values_to_coeffs(values)
    return np.concatenate([c, [seed.tau, seed.X]])


def _check_chain(kind: FamilyKind, tau: float, X: float, x0: float) -> None:
    if kind.covering:
        p = tau ** 2 * X
        chain = [tau < min(X * tau ** 2, -1.0), min(X * tau ** 2, -1.0) <= p, p < x0, x0 < X, X < 0.0,
                 0.0 < tau * X, tau * X < 1.0, tau < -1.0]
        text = "tau < min(X tau^2, -1) <= tau^2 X < x0 < X < 0 < tau X < 1"
    else:
        chain = [tau > 1.0, 0.0 < X, X < x0, x0 < tau * X, tau * X < tau * x0, tau * x0 < 1.0]
        text = "tau > 1, 0 < X < x0 < tau X < tau x0 < 1"
    if not all(chain):
        raise InvariantViolation(f"ordering chain fails ({text}) for tau={tau!r}, X={X!r}, x0={x0!r}")


def _finish(kind, ell, sys_, u, tol, tail_tol, strict=True) -> RenormFixedPoint:
    c, tau, X = u[:-2], float(u[-2]), float(u[-1])
    interval = (sys_.a, sys_.b)
    E = AnalyticFunction(interval, c)
    if strict and E.tail_ratio() > tail_tol:
        raise DegreeTooLow(f"tail ratio {E.tail_ratio():.2e} exceeds {tail_tol:.1e} at degree {sys_.n}")
    if kind.covering:
        x0 = invert_monotone(E, 0.0, bracket=(sys_.a, 0.0))
        domain = (tau ** 2 * X, sys_.b)
    else:
        x0 = invert_monotone(E, 0.0, bracket=(0.0, min(1.0 / tau, sys_.b)))
        domain = interval
    # dense verification grid: first-kind nodes, 4x the collocation count
    m = 4 * sys_.n
    t = np.cos(np.pi * (np.arange(m) + 0.5) / m)
    yv = 0.5 * (sys_.a + sys_.b) + 0.5 * (sys_.b - sys_.a) * t
    res = float(np.max(np.abs(sys_.residual(u, y=yv))))
    fp = RenormFixedPoint(kind, tau, E, X, float(x0), (float(domain[0]), float(domain[1])), res)
    if strict:
        _check_chain(kind, tau, X, fp.x0)
        # domain invariance under G
        g_ends = fp.G(np.array([sys_.a, sys_.b]))
        if not (np.all(g_ends >= sys_.a - 1e-12) and np.all(g_ends <= sys_.b + 1e-12)):
            raise InvariantViolation(f"collocation interval not G-invariant: G(ends)={g_ends}")
    return fp


def solve_fixed_point(kind: FamilyKind, seed=None, degree: int = 128, tol: float = 1e-11,
                      tail_tol: float = 1e-12, max_iter: int = 60, interval=None) -> RenormFixedPoint:
    """Damped Newton solve of the fixed-point equation.

    Parameters
    ----------
    kind : FamilyKind
    seed : SeedData or RenormFixedPoint, optional
        Initial data; bootstrapped by renormalization when omitted.
    degree : int
        Number of Chebyshev coefficients of ``E``.
    tol : float
        Target for the collocation residual (max norm).
    tail_tol : float
        Coefficient-tail tolerance of the returned ``E``.
    interval : pair, optional
        Collocation interval; chosen from the seed landmarks by default.

    Raises
    ------
    NewtonDiverged, InvariantViolation, DegreeTooLow
    """
    if seed is None:
        seed = bootstrap_seed(kind)
    if interval is None:
        interval = collocation_interval(kind, seed.tau, seed.X, seed.x0)
    sys_ = _Collocation(kind, kind.ell, interval, degree)
    u = _seed_vector(sys_, seed)
    # the residual is absolute; allow for the magnitude of E on the interval
    tol = tol * max(1.0, float(np.max(np.abs(sys_.E(u[:-2], sys_.y)))) / 100.0)
    u, norm, iters = _newton(sys_, u, tol, max_iter)
    if not norm <= tol:
        raise NewtonDiverged(f"collocation residual {norm:.3e} above {tol:.1e} after {iters} iterations")
    # re-centre the interval on the solved landmarks and polish once
    c, tau, X = u[:-2], u[-2], u[-1]
    E = AnalyticFunction(interval, c)
    x0 = invert_monotone(E, 0.0, bracket=(interval[0], 0.0) if kind.covering else (0.0, min(1 / tau, interval[1])))
    new_interval = collocation_interval(kind, tau, X, x0)
    if max(abs(new_interval[0] - interval[0]), abs(new_interval[1] - interval[1])) > 1e-6 * (interval[1] - interval[0]):
        prev = SeedData(kind, tau, X, x0, E)
        sys_ = _Collocation(kind, kind.ell, new_interval, degree)
        u, norm, iters = _newton(sys_, _seed_vector(sys_, prev), tol, max_iter)
        if not norm <= tol:
            raise NewtonDiverged(f"residual {norm:.3e} after re-centring the collocation interval")
    fp = _finish(kind, kind.ell, sys_, u, tol, tail_tol)
    log.info("solved %s ell=%d: tau=%.15g residual=%.2e", kind.tag, kind.ell, fp.tau, fp.residual)
    return fp


def _x0_of(kind: FamilyKind, E: AnalyticFunction, tau: float) -> float:
    a, b = E.interval
    bracket = (a, 0.0) if kind.covering else (0.0, min(1.0 / tau, b))
    return invert_monotone(E, 0.0, bracket=bracket)


def _continue_real(kind_from: FamilyKind, fp: RenormFixedPoint, ell_to: int, degree: int,
                   step: float = 0.5, min_step: float = 1.0 / 64, tol: float = 1e-11) -> SeedData:
    """Carry a solution from ``fp.ell`` to ``ell_to`` through real criticalities.

    A step is accepted when Newton converges and the landmarks keep their
    order; otherwise the step is halved.
    """
    kind = kind_from
    tau, X, x0, E = fp.tau, fp.X, fp.x0, fp.E
    ell = float(fp.ell)
    h = step
    while ell < ell_to:
        target = min(ell + h, float(ell_to))
        interval = collocation_interval(kind, tau, X, x0)
        sys_ = _Collocation(kind, target, interval, degree)
        u, norm, _ = _newton(sys_, _seed_vector(sys_, SeedData(kind, tau, X, x0, E)), tol)
        try:
            if not (np.isfinite(norm) and norm <= 1e-8):
                raise NewtonDiverged(f"residual {norm:.2e}")
            E_new = AnalyticFunction(interval, u[:-2])
            tau_new, X_new = float(u[-2]), float(u[-1])
            x0_new = _x0_of(kind, E_new, tau_new)
            _check_chain(kind, tau_new, X_new, x0_new)
        except (NewtonDiverged, InvariantViolation, NotBracketed) as exc:
            h *= 0.5
            if h < min_step:
                raise NewtonDiverged(f"continuation stalled at ell={target:g}: {exc}") from exc
            continue
        ell, tau, X, x0, E = target, tau_new, X_new, x0_new, E_new
        h = min(step, 2 * h)
    return SeedData(FamilyKind(kind.tag, ell_to), tau, X, x0, E)


def continuation_sweep(tag: str, ell_list: Sequence[int], degree: int = 128, tol: float = 1e-11,
                       seed_first=None) -> list[RenormFixedPoint]:
    """Solve along ``ell_list`` using each solution to seed the next.

    Intermediate steps pass through non-integer criticalities; only the
    requested integer values are solved at full degree and checked.
    """
    ells = [int(e) for e in ell_list]
    if any(b <= a for a, b in zip(ells, ells[1:])):
        raise ValueError("ell_list must be strictly increasing")
    kinds = [FamilyKind(tag, e) for e in ells]
    if len({e % 2 for e in ells}) > 1:
        raise ParityMismatch("ell_list mixes parities")
    out: list[RenormFixedPoint] = []
    for i, kind in enumerate(kinds):
        try:
            if i == 0:
                fp = solve_fixed_point(kind, seed_first, degree=degree, tol=tol)
            else:
                seed = _continue_real(kinds[i - 1], out[-1], kind.ell, min(degree, 96))
                fp = solve_fixed_point(kind, seed, degree=degree, tol=tol)
        except Exception as exc:
            if hasattr(exc, "args"):
                exc.args = (f"ell={kind.ell}: {exc.args[0] if exc.args else exc}",)
            raise
        out.append(fp)
    return out
