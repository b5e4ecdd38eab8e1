"""Induced map on the inducing interval and its inverse-branch system.

For the covering family the induced map is ``x -> tau**(-m) phi(x)`` on
``J = (tau**2 X, X)``; branches exist for every even ``m`` and every
negative odd ``m``.  For the unimodal family ``J = (X, tau X)`` and the two
monotone pieces of ``phi`` give branches ``psi+_m`` (``m <= 0``) and
``psi-_m`` (``m <= 2``).  Every branch maps onto ``J``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import OnBranchBoundary, TailNotConverging, TowerMismatch
from .renorm import RenormFixedPoint

__all__ = [
    "Branch",
    "InducedSystem",
    "build_branches",
    "m_of",
    "induced_step",
    "associated_maps",
    "tower_return_check",
    "density_segment",
]


@dataclass(frozen=True)
class Branch:
    """One inverse branch ``psi_m`` of the induced map.

    ``sign`` is the orientation of ``psi_m`` (+1 increasing); for the
    unimodal family ``piece`` records the root choice, ``'+'`` for the
    piece left of the critical point and ``'-'`` for the right one.
    """

    m: int
    sign: int
    piece: str
    domain: tuple[float, float]
    image: tuple[float, float]

    @property
    def length(self) -> float:
        return self.domain[1] - self.domain[0]

    def to_row(self) -> dict:
        return {"m": self.m, "sign": self.sign if self.piece == "" else f"{self.piece}{abs(self.sign)}",
                "domain_lo": self.domain[0], "domain_hi": self.domain[1], "length": self.length}


def _branch_map(fp: RenormFixedPoint, m: int, piece: str) -> Callable:
    """``x -> (psi_m(x), psi_m'(x))`` for real arrays."""
    scale = fp.tau ** m

    def psi(x):
        x = np.asarray(x, dtype=float)
        y, dy = fp.phi_inverse(scale * x, branch=piece or "-")
        return y, dy * scale

    return psi


@dataclass(frozen=True)
class InducedSystem:
    """Truncated branch list of the induced map of a fixed point.

    Attributes
    ----------
    fp : RenormFixedPoint
    J : tuple of float
    branches : tuple of Branch
        Ordered by ``|m|``.
    omitted : float
        Estimated total length of the branch domains left out.
    tail_tol : float
    """

    fp: RenormFixedPoint
    J: tuple[float, float]
    branches: tuple[Branch, ...] = field(repr=False)
    omitted: float
    tail_tol: float

    @property
    def length(self) -> float:
        return self.J[1] - self.J[0]

    @property
    def boundary_eps(self) -> float:
        return 1e-12 * self.length

    def inverse_branches(self) -> list[tuple[int, Callable]]:
        """``(m, psi)`` pairs; each ``psi`` returns values and derivatives."""
        return [(b.m, _branch_map(self.fp, b.m, b.piece)) for b in self.branches]

    def evaluate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """All branches at ``x``: arrays of ``psi_m(x)`` and ``psi_m'(x)``, one row per branch.

        Far covering branches are chained through ``psi_{m+2} = G^-1 o psi_m``
        so the cost stays linear in the largest ``m``.
        """
        x = np.asarray(x, dtype=float)
        fp = self.fp
        ys = np.empty((len(self.branches), x.size))
        dys = np.empty_like(ys)
        chain = None
        order = sorted(range(len(self.branches)), key=lambda i: self.branches[i].m)
        for i in order:
            b = self.branches[i]
            if fp.kind.covering and b.m >= 4 and chain is not None and chain[0] == b.m - 2:
                y_prev, dy_prev = chain[1], chain[2]
                g, dg = fp._G_inverse(y_prev)
                y, dy = g, dg * dy_prev
            else:
                y, dy = _branch_map(fp, b.m, b.piece)(x.ravel())
            if fp.kind.covering and b.m >= 2 and b.m % 2 == 0:
                chain = (b.m, y, dy)
            ys[i], dys[i] = y, dy
        return ys, dys

    def coverage(self) -> float:
        return float(sum(b.length for b in self.branches))

    def m_range(self) -> tuple[int, int]:
        ms = [b.m for b in self.branches]
        return min(ms), max(ms)

    def disjoint(self) -> bool:
        doms = sorted(b.domain for b in self.branches)
        return all(d2[0] >= d1[1] - 1e-15 * self.length for d1, d2 in zip(doms, doms[1:]))


def _candidates(fp: RenormFixedPoint):
    """Branch labels grouped as tails; each tail is an infinite generator ordered by |m|."""
    if fp.kind.covering:
        def neg():
            m = 0
            while True:
                yield (m, "")
                m -= 1

        def pos():
            m = 2
            while True:
                yield (m, "")
                m += 2

        return [neg(), pos()]

    def plus():
        m = 0
        while True:
            yield (m, "+")
            m -= 1

    def minus():
        for m in (2, 1):
            yield (m, "-")
        m = 0
        while True:
            yield (m, "-")
            m -= 1

    return [plus(), minus()]


def _make_branch(fp: RenormFixedPoint, J, m: int, piece: str) -> Branch:
    psi = _branch_map(fp, m, piece)
    y, dy = psi(np.array(J))
    lo, hi = float(min(y)), float(max(y))
    orient = 1 if y[1] > y[0] else -1
    return Branch(int(m), orient, piece, (lo, hi), (float(J[0]), float(J[1])))


def build_branches(fp: RenormFixedPoint, tail_tol: float = 1e-10, max_branches: int = 20000) -> InducedSystem:
    """Enumerate inverse branches until the omitted length is below ``tail_tol |J|``.

    Each tail is extended until its next branch would be shorter than a
    geometric-tail bound; the omitted mass is estimated from the observed
    ratio of successive lengths.

    Raises
    ------
    TailNotConverging
        If branch lengths stop decreasing geometrically.
    """
    J = fp.J
    L = J[1] - J[0]
    tails = _candidates(fp)
    branches: list[Branch] = []
    omitted = 0.0
    budget = tail_tol * L / len(tails)
    for gen in tails:
        lengths: list[float] = []
        # parity-grouped ratios: the covering negative tail alternates even/odd m
        stride = 2 if fp.kind.covering else 1
        prev = None
        while True:
            m, piece = next(gen)
            if fp.kind.covering and m >= 4 and prev is not None:
                prev = fp._G_inverse(prev)[0]
                br = Branch(int(m), 1 if prev[1] > prev[0] else -1, piece,
                            (float(prev.min()), float(prev.max())), (float(J[0]), float(J[1])))
            else:
                br = _make_branch(fp, J, m, piece)
                if fp.kind.covering and m == 2:
                    prev = _branch_map(fp, m, piece)(np.array(J))[0]
            if not (math.isfinite(br.length) and br.length >= 0):
                raise TailNotConverging(f"branch m={m} has invalid length {br.length!r}")
            branches.append(br)
            lengths.append(br.length)
            if len(branches) > max_branches:
                raise TailNotConverging(f"more than {max_branches} branches needed for tail_tol={tail_tol:g}")
            k = len(lengths)
            if k < 2 * stride + 2:
                continue
            r = max(lengths[-1] / lengths[-1 - stride], lengths[-2] / lengths[-2 - stride])
            if not r < 1.0:
                if k > 40:
                    raise TailNotConverging(f"branch lengths not decaying near m={m} (ratio {r:.4f})")
                continue
            r_step = r ** (1.0 / stride)
            tail = lengths[-1] * r_step / (1.0 - r_step)
            if tail < budget:
                omitted += tail
                break
    # order by |m| with a stable tie-break for the unimodal pieces
    branches.sort(key=lambda b: (abs(b.m), b.m, b.piece))
    return InducedSystem(fp, (float(J[0]), float(J[1])), tuple(branches), omitted, tail_tol)


def m_of(sys_: InducedSystem, x, check_boundary: bool = True):
    """Drift index of the induced map at ``x`` (vectorised).

    Raises
    ------
    OnBranchBoundary
        If ``x`` lies within ``boundary_eps`` of a branch endpoint.
    """
    m, _ = _m_and_image(sys_, x, check_boundary)
    return m


def _m_and_image(sys_: InducedSystem, x, check_boundary: bool):
    fp = sys_.fp
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    sgn, la = fp.log_abs_phi(x)
    lt = fp.log_tau
    lx = math.log(abs(fp.X))
    q = (la - lx) / lt
    if fp.kind.covering:
        # phi < 0: even m with m < q < m + 2;  phi > 0: odd m
        odd = sgn > 0
        m = np.where(odd, 2 * np.floor((q - 1.0) / 2.0) + 1, 2 * np.floor(q / 2.0))
        frac = np.where(odd, (q - 1.0) / 2.0, q / 2.0)
    else:
        m = np.floor(q)
        frac = q
    frac = frac - np.floor(frac)
    if check_boundary:
        # frac is a log-scale position inside the branch; 1e-12 of it is far below |J| resolution
        tol = 1e-12
        near = (frac < tol) | (frac > 1.0 - tol)
        if np.any(near):
            raise OnBranchBoundary(f"x={x[near][0]!r} within boundary_eps of a branch endpoint")
    m = m.astype(int)
    orient = np.where(np.mod(m, 2) == 0, 1.0, np.sign(fp.tau))
    with np.errstate(over="ignore"):
        image = sgn * orient * np.exp(la - m * lt)
    if scalar:
        return int(m[0]), float(image[0])
    return m, image


def induced_step(sys_: InducedSystem, x, check_boundary: bool = True):
    """Image of ``x`` under the induced map and its drift index."""
    m, image = _m_and_image(sys_, x, check_boundary)
    return image, m


def associated_maps(fp: RenormFixedPoint):
    """``(G, Gamma, dG, dGamma)`` as real callables (``Gamma`` for coverings only)."""
    tau = fp.tau

    def G(x):
        return fp.G(x)

    def dG(x):
        return fp.dphi(np.asarray(x) / tau) / tau ** 2

    def Gamma(x):
        return fp.Gamma(x)

    def dGamma(x):
        return fp.dphi(np.asarray(x) / tau ** 2) / tau

    if not fp.kind.covering:
        return G, None, dG, None
    return G, Gamma, dG, dGamma


def _fib_words(n: int) -> list[str]:
    wa, wb = "A", "B"
    out = [wa]
    for _ in range(n):
        wa, wb = wa + wb, wa
        out.append(wa)
    return out


def tower_return_check(fp: RenormFixedPoint, n_max: int = 6, samples: int = 64, tower_tol: float = 1e-8) -> dict:
    """Compare ``tau^-n phi(tau^n x)`` with the ``S_n``-fold composition of the two-branch map.

    The branches are ``A = phi`` and ``B = tau phi tau^-1``; the word for
    level ``n`` is built by ``W_{n+1} = W_n W'_n``, ``W'_{n+1} = W_n``
    (maps applied left to right), which has Fibonacci length ``S_n``.

    Raises
    ------
    TowerMismatch
        With the offending ``(n, x)``.
    """
    if n_max > 6:
        raise ValueError("n_max must be at most 6")
    tau = fp.tau
    words = _fib_words(n_max)
    J = fp.J
    lo = max(J[0], fp.E.a) if fp.kind.covering else J[0]
    ys = np.linspace(lo, J[1], samples + 2)[1:-1]
    report = {"levels": []}
    for n in range(n_max + 1):
        x = ys / tau ** n
        v = x.copy()
        with np.errstate(all="ignore"):
            for letter in words[n]:
                v = fp.phi(v) if letter == "A" else tau * fp.phi(v / tau)
            ref = fp.phi(ys) / tau ** n
        ok = np.isfinite(v) & np.isfinite(ref)
        if ok.sum() < samples // 2:
            raise TowerMismatch(f"level {n}: too few evaluable samples ({int(ok.sum())})")
        err = np.abs(v[ok] - ref[ok]) / np.maximum(1.0, np.abs(ref[ok]))
        worst = int(np.argmax(err))
        if err[worst] > tower_tol:
            raise TowerMismatch(f"level {n}, x={x[ok][worst]!r}: relative mismatch {err[worst]:.2e}")
        report["levels"].append({"n": n, "S_n": len(words[n]), "max_rel_err": float(err.max()),
                                 "samples": int(ok.sum())})
    return report


def density_segment(sys_: InducedSystem) -> tuple[float, float]:
    """Segment containing ``J`` that every inverse branch maps into itself.

    Covering: left end a quarter of the way from ``tau**2 X`` to ``tau``,
    right end its image under ``psi_{-1}``.  Unimodal: ``J`` widened by a
    common factor on a log scale, shrinking the factor until the branch
    images of the segment fall inside it.  Both stay clear of 0, where the
    branch derivatives are singular.
    """
    fp = sys_.fp
    J = sys_.J

    def inside(seg):
        ys, _ = sys_.evaluate(np.array(seg))
        return bool(np.all(np.isfinite(ys)) and ys.min() >= seg[0] and ys.max() <= seg[1])

    if fp.kind.covering:
        for frac in (0.25, 0.15, 0.08, 0.04):
            left = fp.base - frac * (fp.base - fp.tau)
            right = float(fp.phi_inverse(np.array([left / fp.tau]))[0][0])
            seg = (float(left), right)
            if right < 0.0 and inside(seg):
                return seg
    else:
        for kappa in (0.3, 0.2, 0.1, 0.05, 0.02):
            seg = (float(J[0] * math.exp(-kappa)), float(J[1] * math.exp(kappa)))
            if inside(seg):
                return seg
    raise TailNotConverging("no branch-invariant segment found around J")
