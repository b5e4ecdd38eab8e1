"""Near-parabolic normal form and its orbit bounds.

The family is

    g(z, eta) = z / sqrt(1 + eta) + b eta^2 z^2 - c z^3 + d eta z^4 + z^5 R(z)

with ``b`` imaginary and ``c`` real.  Orbits are iterated both in ``z`` and
in the pre-Fatou coordinate ``w = z^-2``, where the map is the
near-translation ``gamma(w) = (1 + eta) w + 2 c (1 + eta)^(3/2) + ...``.
Three normalized ratios measure the decay, step and imaginary-step bounds
along each orbit.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .errors import BoundBlowup, EscapedDomain, StructureViolation

log = logging.getLogger(__name__)

__all__ = [
    "ParabolicFamily",
    "OrbitRecord",
    "BoundsReport",
    "from_fixed_point",
    "remove_quadratic",
    "quadratic_shift",
    "iterate",
    "gamma0_iterate",
    "gamma0_closed_form",
    "adaptive_W0",
    "verify_theorem_bounds",
    "default_eta_grid",
]

DELTA0 = 0.05
ALPHA0 = 0.3


# ---------------------------------------------------------------------------
# Family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParabolicFamily:
    """Normal-form family ``g(z, eta)``.

    Parameters
    ----------
    eta : float
        Non-negative parameter; the multiplier at 0 is ``1/sqrt(1+eta)``.
    b, c, d : complex
        Normal-form coefficients.
    R : numpy.ndarray
        Taylor coefficients of the remainder, ``R(z) = sum R[j] z^j``.
        Empty means ``R = 0``.
    source : str
        Free-form label.
    """

    eta: float
    b: complex = 0j
    c: complex = 1.0 + 0j
    d: complex = 0j
    R: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    source: str = "synthetic"

    def __post_init__(self):
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be finite and non-negative, got {self.eta}")
        object.__setattr__(self, "R", np.asarray(self.R, dtype=complex).ravel())

    @property
    def multiplier(self) -> float:
        return 1.0 / math.sqrt(1.0 + self.eta)

    def coefficients(self) -> np.ndarray:
        """Taylor coefficients ``[g_0, g_1, ...]`` of ``g``."""
        eta = self.eta
        head = np.array([0.0, self.multiplier, self.b * eta ** 2, -self.c, self.d * eta],
                        dtype=complex)
        return np.concatenate([head, self.R])

    def __call__(self, z):
        coef = self.coefficients()
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for a in coef[::-1]:
            out = out * z + a
        return out

    def with_eta(self, eta: float) -> "ParabolicFamily":
        """Same coefficients at a different ``eta``."""
        return ParabolicFamily(eta=float(eta), b=self.b, c=self.c, d=self.d, R=self.R,
                               source=self.source)

    @property
    def c_hat(self) -> float:
        """Translation constant ``2 c (1+eta)^(3/2)`` of the pre-Fatou map."""
        return float(2.0 * self.c.real * (1.0 + self.eta) ** 1.5)

    def gamma(self, w):
        """Pre-Fatou map ``gamma(w) = g(w^-1/2)^-2`` evaluated in ``w``."""
        coef = self.coefficients()
        w = np.asarray(w, dtype=complex)
        z = 1.0 / np.sqrt(w)
        v = np.zeros_like(z)
        for a in coef[:1:-1]:
            v = v * z + a
        v = v * z / self.multiplier
        with np.errstate(divide="ignore", invalid="ignore"):
            return (1.0 + self.eta) * w / (1.0 + v) ** 2

    def to_record(self) -> dict:
        return {
            "eta": self.eta,
            "b": [self.b.real, self.b.imag],
            "c": [self.c.real, self.c.imag],
            "d": [self.d.real, self.d.imag],
            "R": [[r.real, r.imag] for r in self.R],
            "source": self.source,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ParabolicFamily":
        cx = lambda p: complex(p[0], p[1])
        return cls(eta=rec["eta"], b=cx(rec["b"]), c=cx(rec["c"]), d=cx(rec["d"]),
                   R=np.array([cx(p) for p in rec["R"]], dtype=complex),
                   source=rec.get("source", "synthetic"))


def _family_from_coefficients(coef: np.ndarray, eta: float, source: str) -> ParabolicFamily:
    coef = np.asarray(coef, dtype=complex)
    coef = np.concatenate([coef, np.zeros(max(0, 5 - coef.size), dtype=complex)])
    b = coef[2] / eta ** 2 if eta > 0 else 0j
    d = coef[4] / eta if eta > 0 else 0j
    return ParabolicFamily(eta=eta, b=b, c=-coef[3], d=d, R=coef[5:], source=source)


def from_fixed_point(fp, density, radius: float = 0.04, n_nodes: int = 64,
                     structure_tol: float = 1e-6, coef_floor: float = 1e-15,
                     mu=None) -> ParabolicFamily:
    """Normal-form family read off ``g(z) = -i G_hat^-1(i z)``.

    Taylor coefficients of ``G_hat^-1`` at 0 come from a discrete Cauchy
    integral on the circle ``|z| = radius``, checked against the circle of
    radius ``0.75 radius``.

    Parameters
    ----------
    fp : RenormFixedPoint
        Covering fixed point.
    density : Density
        Its invariant density.
    radius : float
        Circle radius in the integrated-density coordinate.
    n_nodes : int
        Number of nodes on the circle.
    structure_tol : float
        Tolerance on the parts of the coefficients that must vanish.
    coef_floor : float
        Coefficients with ``|a_k| radius^k`` below this are dropped.
    mu : MuCoordinate, optional
        Precomputed coordinate.

    Returns
    -------
    ParabolicFamily

    Raises
    ------
    StructureViolation
        If a real-symmetry part exceeds ``structure_tol``, the linear
        coefficient disagrees with ``rho^2`` or ``c`` is not positive.
    """
    from .drift import eta_of_ell, mu_coordinate

    if mu is None:
        mu = mu_coordinate(fp, density)
    rho = mu.rho
    eta = eta_of_ell(fp, rho=rho)

    def ginv_hat(z):
        x = mu.inverse(z)
        g, _ = fp.G_inverse_complex(x)
        return mu(g)

    def taylor(r):
        th = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
        vals = ginv_hat(r * np.exp(1j * th))
        if not np.all(np.isfinite(vals)):
            raise StructureViolation(f"inverse map not evaluable on |z| = {r}")
        return np.fft.fft(vals) / n_nodes, np.arange(n_nodes)

    scaled, k = taylor(radius)
    scaled2, _ = taylor(0.75 * radius)
    keep = np.abs(scaled[: n_nodes // 2]) > coef_floor
    kmax = max(5, int(np.nonzero(keep)[0].max()) + 1)
    a = scaled[:kmax] / radius ** k[:kmax]
    a2 = scaled2[:kmax] / (0.75 * radius) ** k[:kmax]
    coef_error = float(np.max(np.abs(a[:6] - a2[:6]) * radius ** k[:6]))

    # real symmetry makes every Taylor coefficient of G_hat^-1 real
    imag_part = float(np.max(np.abs(a[:5].imag) * radius ** k[:5]))
    if imag_part > structure_tol:
        raise StructureViolation(f"Taylor coefficients not real: {imag_part:.3e}")
    if abs(a[0]) * 1.0 > structure_tol:
        raise StructureViolation(f"0 is not fixed: {abs(a[0]):.3e}")
    if abs(a[1].real - rho ** 2) > structure_tol:
        raise StructureViolation(f"linear coefficient {a[1].real} differs from rho^2 {rho ** 2}")
    a = a.real.astype(complex)
    # rotation z -> -i a(iz) multiplies a_k by i^(k-1)
    coef = a * (1j) ** (np.arange(kmax) - 1)
    coef[0] = 0.0
    coef[1] = 1.0 / math.sqrt(1.0 + eta)
    fam = _family_from_coefficients(coef, eta, source="fixed_point")
    if not fam.c.real > 0:
        raise StructureViolation(f"cubic coefficient c = {fam.c.real} not positive")
    log.info("parabolic family: eta=%.6g b=%s c=%.6g d=%s terms=%d coef_err=%.2e",
             eta, fam.b, fam.c.real, fam.d, kmax, coef_error)
    return fam


# ---------------------------------------------------------------------------
# Quadratic removal
# ---------------------------------------------------------------------------

def quadratic_shift(fam: ParabolicFamily) -> complex:
    """Conjugating parameter ``a = b eta (1+eta)(sqrt(1+eta)+1)``."""
    eta = fam.eta
    return complex(fam.b * eta * (1.0 + eta) * (math.sqrt(1.0 + eta) + 1.0))


def _series_mul(p: np.ndarray, q: np.ndarray, order: int) -> np.ndarray:
    return np.convolve(p, q)[: order + 1]


def _series_compose(outer: np.ndarray, inner: np.ndarray, order: int) -> np.ndarray:
    """Coefficients of ``outer(inner(z))`` with ``inner(0) = 0``, truncated."""
    out = np.zeros(order + 1, dtype=complex)
    power = np.zeros(order + 1, dtype=complex)
    power[0] = 1.0
    for k, a in enumerate(outer[: order + 1]):
        if k > 0:
            power = _series_mul(power, inner, order)
            power = np.concatenate([power, np.zeros(order + 1 - power.size, dtype=complex)])
        out += a * power
    return out


def remove_quadratic(fam: ParabolicFamily, order: int | None = None) -> ParabolicFamily:
    """Conjugate by ``z = u - a u^2`` to kill the quadratic term.

    Parameters
    ----------
    fam : ParabolicFamily
    order : int, optional
        Truncation order of the conjugated series; defaults to
        ``max(12, len(coefficients) + 6)``.

    Returns
    -------
    ParabolicFamily
        Family with zero quadratic coefficient.
    """
    coef = fam.coefficients()
    if order is None:
        order = max(12, coef.size + 6)
    a = quadratic_shift(fam)
    if a == 0:
        return ParabolicFamily(eta=fam.eta, b=0j, c=fam.c, d=fam.d, R=fam.R, source=fam.source)
    h = np.zeros(order + 1, dtype=complex)
    h[1], h[2] = 1.0, -a
    # inverse of u - a u^2 is sum_k Catalan(k) a^k z^(k+1)
    hinv = np.zeros(order + 1, dtype=complex)
    cat = 1
    for k in range(order):
        hinv[k + 1] = cat * a ** k
        cat = cat * 2 * (2 * k + 1) // (k + 2)
    g = np.concatenate([coef, np.zeros(max(0, order + 1 - coef.size), dtype=complex)])[: order + 1]
    conj = _series_compose(hinv, _series_compose(g, h, order), order)
    # the quadratic coefficient is kept as computed so callers can check it
    return _family_from_coefficients(conj, fam.eta, source=fam.source + "+noquad")


# ---------------------------------------------------------------------------
# Orbits
# ---------------------------------------------------------------------------

@njit(cache=True)
def _orbit_kernel(coef, eta, z0, n_max, z_floor):
    K = coef.size
    rho = 1.0 / math.sqrt(1.0 + eta)
    z = np.zeros(n_max + 1, dtype=np.complex128)
    w = np.zeros(n_max + 1, dtype=np.complex128)
    z[0] = z0
    w[0] = 1.0 / (z0 * z0)
    n_eff = n_max
    for n in range(n_max):
        zn = z[n]
        acc = 0j
        for k in range(K - 1, 0, -1):
            acc = acc * zn + coef[k]
        z[n + 1] = acc * zn
        wn = w[n]
        s = 1.0 / np.sqrt(wn)
        v = 0j
        for k in range(K - 1, 1, -1):
            v = v * s + coef[k]
        v = v * s / rho
        w[n + 1] = (1.0 + eta) * wn / ((1.0 + v) * (1.0 + v))
        if abs(z[n + 1]) < z_floor or not np.isfinite(w[n + 1].real):
            n_eff = n + 1
            break
    return z[: n_eff + 1], w[: n_eff + 1]


@dataclass(frozen=True)
class OrbitRecord:
    """Orbit ``z_n = g^n(z_0)`` with its bound ratios.

    Attributes
    ----------
    eta : float
    z0 : complex
    z : numpy.ndarray
        ``z_0, ..., z_N``.
    w : numpy.ndarray
        Pre-Fatou orbit ``w_n``.
    n : numpy.ndarray
        Indices ``2 .. N-1`` where all three ratios are defined.
    r1, r2, r3 : numpy.ndarray
        Ratios on ``n``.
    prefatou_deviation : float
        ``max |w_n^-1/2 - z_n| / |z_n|``.
    gap : numpy.ndarray
        ``(1+eta)^-n |w_n - gamma0^n(w_0)|`` on ``n``.
    W0 : float
        Threshold above which monotonicity was enforced.
    n_max : int
        Requested length; ``len(z) - 1`` is shorter when the orbit
        underflowed.
    """

    eta: float
    z0: complex
    z: np.ndarray
    w: np.ndarray
    n: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    prefatou_deviation: float
    gap: np.ndarray
    W0: float
    n_max: int

    def sups(self, n_upto: int | None = None) -> tuple[float, float, float]:
        m = slice(None) if n_upto is None else self.n <= n_upto
        pick = lambda r: float(np.max(r[m])) if np.any(m) else 0.0
        return pick(self.r1), pick(self.r2), pick(self.r3)

    def gap_constant(self) -> float:
        """``sup gap_n / (1 + min(log n, -log eta))``."""
        if self.gap.size == 0:
            return 0.0
        lg = np.log(self.n.astype(float))
        scale = np.minimum(lg, -math.log(self.eta)) if self.eta > 0 else lg
        return float(np.max(self.gap / (1.0 + scale)))

    def rows(self) -> list[tuple]:
        out = []
        for i, k in enumerate(self.n):
            zk = self.z[k]
            out.append((int(k), zk.real, zk.imag, self.r1[i], self.r2[i], self.r3[i]))
        return out


def gamma0_closed_form(w, eta: float, c0: float, n):
    """``(1+eta)^n w + c0 ((1+eta)^n - 1)/eta``, equal to ``w + n c0`` at ``eta = 0``."""
    n = np.asarray(n, dtype=float)
    if eta == 0:
        return w + n * c0
    growth = np.exp(n * math.log1p(eta))
    geometric = np.expm1(n * math.log1p(eta)) / eta
    return growth * w + c0 * geometric


def gamma0_iterate(w0: complex, eta: float, c0: float, n_max: int) -> np.ndarray:
    """Orbit of ``gamma0(w) = (1+eta) w + c0`` by direct iteration."""
    out = np.empty(n_max + 1, dtype=complex)
    out[0] = w0
    for k in range(n_max):
        out[k + 1] = (1.0 + eta) * out[k] + c0
    return out


def adaptive_W0(fam: ParabolicFamily, c0: float | None = None, n_probe: int = 64,
                w_max: float = 1e6, alpha: float = ALPHA0) -> float:
    """Smallest probe level above which ``Re gamma(w) > Re w + c0``.

    Probes lie on rays ``|arg w| <= 2 alpha`` at log-spaced moduli.
    Returns ``inf`` when the inequality fails at the largest level.
    """
    if c0 is None:
        c0 = fam.c.real
    levels = np.logspace(0, math.log10(w_max), n_probe)
    args = np.linspace(-2 * alpha, 2 * alpha, 9)
    ok = np.empty(n_probe, dtype=bool)
    for i, L in enumerate(levels):
        w = L * np.exp(1j * args) / np.cos(args)
        ok[i] = bool(np.all(fam.gamma(w).real > w.real + c0))
    if not ok[-1]:
        return math.inf
    bad = np.nonzero(~ok)[0]
    return float(levels[0] if bad.size == 0 else levels[bad.max() + 1])


def iterate(fam: ParabolicFamily, z0: complex = DELTA0 * 0.9, n_max: int = 10 ** 5,
            z_floor: float = 1e-150, W0: float | None = None,
            delta0: float = DELTA0, alpha0: float = ALPHA0) -> OrbitRecord:
    """Iterate ``g`` and ``gamma`` from ``z0`` and compute the bound ratios.

    Parameters
    ----------
    fam : ParabolicFamily
    z0 : complex
        Start point with ``|z0| < delta0`` and ``|arg z0| < alpha0``.
    n_max : int
        Number of steps.  Stops early once ``|z_n| < z_floor``.
    z_floor : float
        Underflow guard; below it all three ratios are negligible.
    W0 : float, optional
        Monotonicity threshold; computed by :func:`adaptive_W0` if omitted.

    Returns
    -------
    OrbitRecord

    Raises
    ------
    ValueError
        If ``z0`` violates the start hypotheses.
    EscapedDomain
        If ``Re w_n`` drops below ``Re w_0`` or monotonicity fails above ``W0``.
    """
    z0 = complex(z0)
    if not (0 < abs(z0) < delta0 and abs(math.atan2(z0.imag, z0.real)) < alpha0):
        raise ValueError(f"z0={z0} outside |z|<{delta0}, |arg z|<{alpha0}")
    if W0 is None:
        W0 = adaptive_W0(fam)
    coef = fam.coefficients()
    z, w = _orbit_kernel(coef, float(fam.eta), z0, int(n_max), float(z_floor))
    N = z.size - 1
    if not np.all(np.isfinite(z)):
        raise EscapedDomain(f"orbit left the evaluation disk for eta={fam.eta}")
    rew = w.real
    low = np.nonzero(rew < rew[0])[0]
    if low.size:
        raise EscapedDomain(f"Re w_n fell below Re w_0 at n={int(low[0])} (eta={fam.eta})")
    c0 = fam.c.real
    above = rew[:-1] >= W0
    viol = np.nonzero(above & ~(rew[1:] > rew[:-1] + c0))[0]
    if viol.size:
        raise EscapedDomain(f"Re w not increasing by c at n={int(viol[0])} (eta={fam.eta})")

    zr = 1.0 / np.sqrt(w)
    dev = float(np.max(np.abs(zr - z) / np.abs(z)))

    n = np.arange(2, N, dtype=np.int64)
    nf = n.astype(float)
    absz = np.abs(z)
    eta = fam.eta
    log_r1 = np.log(absz[n]) - 0.5 * np.log(np.maximum(1.0 / nf, eta)) + nf * eta / 8.0
    r1 = np.exp(log_r1)
    r2 = np.abs(z[n + 1] - z[n]) * nf ** 1.5
    r3 = np.abs(z[n + 1].imag - z[n].imag) * nf ** 2.5 / np.log(nf)

    lin = gamma0_closed_form(w[0], eta, 2.0 * c0, nf)
    gap = np.abs(w[n] - lin) * np.exp(-nf * math.log1p(eta))
    return OrbitRecord(eta=eta, z0=z0, z=z, w=w, n=n, r1=r1, r2=r2, r3=r3,
                       prefatou_deviation=dev, gap=gap, W0=W0, n_max=int(n_max))


# ---------------------------------------------------------------------------
# Bounds over a grid
# ---------------------------------------------------------------------------

def default_eta_grid(n: int = 8, lo: float = 1e-4, hi: float = 1e-1) -> np.ndarray:
    return np.logspace(math.log10(hi), math.log10(lo), n)


@dataclass(frozen=True)
class BoundsReport:
    """Empirical constants ``Q1, Q2, Q3`` over an ``(eta, n)`` grid."""

    etas: list
    n_max: int
    Q: tuple
    Q_doubled: tuple
    relative_change: tuple
    per_eta: list
    prefatou_deviation: float
    gap_constant: float
    gamma0_closed_form_error: float
    W0: float
    family: dict

    @property
    def stable(self) -> bool:
        return all(r < 0.05 for r in self.relative_change)

    def to_record(self) -> dict:
        return {
            "etas": list(self.etas),
            "n_max": self.n_max,
            "Q": list(self.Q),
            "Q_doubled": list(self.Q_doubled),
            "relative_change": list(self.relative_change),
            "stable": self.stable,
            "per_eta": self.per_eta,
            "prefatou_deviation": self.prefatou_deviation,
            "gap_constant": self.gap_constant,
            "gamma0_closed_form_error": self.gamma0_closed_form_error,
            "W0": self.W0,
            "family": self.family,
        }


def _gamma0_check(etas: Sequence[float], c0: float, n_check: int = 1000) -> float:
    err = 0.0
    for eta in list(etas) + [0.0]:
        w0 = 400.0 + 30.0j
        direct = gamma0_iterate(w0, eta, c0, n_check)
        closed = gamma0_closed_form(w0, eta, c0, np.arange(n_check + 1))
        err = max(err, float(np.max(np.abs(direct - closed) / np.abs(direct))))
    return err


def verify_theorem_bounds(fam: ParabolicFamily, etas: Sequence[float] | None = None,
                          n_max: int = 10 ** 5, z0s: Sequence[complex] | None = None,
                          threads: int = 1, stability: float = 0.05,
                          prefatou_tol: float = 1e-9) -> BoundsReport:
    """Sup of the three ratios over an ``(eta, z0, n)`` grid.

    Each orbit runs to ``2 n_max``; the sups up to ``n_max`` and up to
    ``2 n_max`` are compared.

    Parameters
    ----------
    fam : ParabolicFamily
        Coefficients ``b, c, d, R``; ``eta`` is replaced by the grid values.
    etas : sequence of float, optional
        Defaults to 8 log-spaced values in ``[1e-4, 1e-1]``.
    n_max : int
    z0s : sequence of complex, optional
        Start points; default three points of modulus ``0.9 delta0``.
    threads : int
    stability : float
        Allowed relative change of each sup under doubling.
    prefatou_tol : float
        Allowed relative ``|w_n^-1/2 - z_n|``.

    Returns
    -------
    BoundsReport

    Raises
    ------
    BoundBlowup
        If an orbit escapes, a sup is not finite, or a sup grows by more than
        ``stability`` under doubling.
    """
    etas = default_eta_grid() if etas is None else np.asarray(etas, dtype=float)
    if z0s is None:
        z0s = [0.9 * DELTA0 * np.exp(1j * a) for a in (-0.2, 0.0, 0.2)]
    W0 = adaptive_W0(fam.with_eta(float(np.max(etas))))
    W0 = max(W0, adaptive_W0(fam.with_eta(float(np.min(etas)))))
    if not math.isfinite(W0):
        raise BoundBlowup("no level above which Re gamma(w) exceeds Re w + c")
    jobs = [(float(e), complex(z)) for e in etas for z in z0s]

    def run(job):
        eta, z0 = job
        try:
            return iterate(fam.with_eta(eta), z0, 2 * n_max, W0=W0)
        except EscapedDomain as exc:
            raise BoundBlowup(f"orbit repelled: {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            recs = list(ex.map(run, jobs))
    else:
        recs = [run(j) for j in jobs]

    Q = np.zeros(3)
    Q2 = np.zeros(3)
    per_eta = []
    dev = 0.0
    gapc = 0.0
    for job, rec in zip(jobs, recs):
        s1 = np.array(rec.sups(n_max))
        s2 = np.array(rec.sups())
        Q = np.maximum(Q, s1)
        Q2 = np.maximum(Q2, s2)
        dev = max(dev, rec.prefatou_deviation)
        gapc = max(gapc, rec.gap_constant())
        per_eta.append({"eta": job[0], "z0": [job[1].real, job[1].imag],
                        "sup": s1.tolist(), "sup_doubled": s2.tolist(),
                        "steps": int(rec.z.size - 1),
                        "prefatou_deviation": rec.prefatou_deviation,
                        "gap_constant": rec.gap_constant()})
    if not np.all(np.isfinite(Q2)):
        raise BoundBlowup(f"non-finite ratio sup {Q2.tolist()}")
    rel = tuple(float((b - a) / a) if a > 0 else 0.0 for a, b in zip(Q, Q2))
    if any(r >= stability for r in rel):
        raise BoundBlowup(f"ratio sups grow under doubling: {rel}")
    if dev > prefatou_tol:
        log.warning("pre-Fatou deviation %.3e exceeds %.1e", dev, prefatou_tol)
    closed_err = _gamma0_check(etas, 2.0 * fam.c.real)
    return BoundsReport(etas=[float(e) for e in etas], n_max=int(n_max),
                        Q=tuple(float(q) for q in Q), Q_doubled=tuple(float(q) for q in Q2),
                        relative_change=rel, per_eta=per_eta, prefatou_deviation=dev,
                        gap_constant=gapc, gamma0_closed_form_error=closed_err, W0=W0,
                        family=fam.to_record())
