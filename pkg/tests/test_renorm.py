from __future__ import annotations

import numpy as np
import pytest

from fibdrift.errors import CombinatoricsExhausted, NoSignChange, ParityMismatch
from fibdrift.renorm import (
    ConcreteFibMap,
    FamilyKind,
    RenormFixedPoint,
    continuation_sweep,
    find_fibonacci_parameter,
    fixed_point_map,
    renormalize,
)

COV3 = FamilyKind("covering", 3)


@pytest.mark.parametrize("tag,ell", [("covering", 4), ("covering", 1), ("unimodal", 5), ("unimodal", 2)])
def test_parity(tag, ell):
    with pytest.raises(ParityMismatch):
        FamilyKind(tag, ell)


def test_mixed_parity_sweep():
    with pytest.raises(ParityMismatch):
        continuation_sweep("covering", [3, 4])


def test_first_level_wide_bracket():
    g = find_fibonacci_parameter(COV3, depth=1)
    lo, hi = g.window
    assert hi - lo > 1.0


def _levels_pass(t, template, depth):
    h = template(t)
    with np.errstate(all="ignore"):
        for _ in range(depth):
            if h.admissibility() != 0:
                return False
            h = renormalize(h)
    return True


def test_depth8_interval():
    from fibdrift.renorm import template_family

    template, _ = template_family(COV3)
    g = find_fibonacci_parameter(COV3, depth=8)
    lo, hi = g.param - 5e-7, g.param + 5e-7
    assert g.window[0] <= lo and hi <= g.window[1]
    assert all(_levels_pass(t, template, 8) for t in np.linspace(lo, hi, 11))


def test_constant_combinatorics():
    def template(t):
        return ConcreteFibMap(COV3, lambda x: np.asarray(x) ** 3, lambda x: 0.5 + 0 * np.asarray(x), t)

    with pytest.raises(NoSignChange):
        find_fibonacci_parameter(COV3, template=template, depth=5, bracket=(1.0, 2.0))


def test_exhausted():
    g = ConcreteFibMap(COV3, lambda x: np.asarray(x) ** 3, lambda x: 0.5 + 0 * np.asarray(x), 1.0)
    with pytest.raises(CombinatoricsExhausted):
        renormalize(g)


def test_renormalize_fixed_point(covering_fps):
    fp = covering_fps[3]
    g = fixed_point_map(fp)
    r = renormalize(g)
    x = np.linspace(fp.x0, fp.X, 200)
    assert np.max(np.abs(r.psi0(x) - g.psi0(x))) < 1e-6


def test_renormalizations_converge():
    g = find_fibonacci_parameter(COV3, depth=14)
    x = np.linspace(-0.2, 0.2, 101)
    dist = []
    prev = np.cbrt(g.psi0(x))
    with np.errstate(all="ignore"):
        for _ in range(13):
            g = renormalize(g)
            cur = np.cbrt(g.psi0(x))
            dist.append(float(np.max(np.abs(cur - prev))))
            prev = cur
    assert all(b < a for a, b in zip(dist, dist[1:])), dist


def _chain_ok(fp):
    t, X, x0 = fp.tau, fp.X, fp.x0
    if fp.kind.covering:
        return t < min(X * t ** 2, -1) <= t ** 2 * X < x0 < X < 0 < t * X < 1 and t < -1
    return t > 1 and 0 < X < x0 < t * X < t * x0 < 1


def test_solved_covering(solved3):
    fp, seconds = solved3
    assert fp.residual <= 1e-9
    assert _chain_ok(fp)
    assert abs(fp.phi(np.array([0.0]))[0] - 1) < 1e-10
    assert abs(fp.phi(np.array([fp.X]))[0] - fp.tau * fp.X) < 1e-10
    assert abs(fp.E(fp.x0)) < 1e-12
    x = np.linspace(fp.x0, fp.tau * fp.x0, 2001)[1:-1]
    assert np.all(fp.dphi(x) > 0)


def test_solved_unimodal(solved4):
    fp, _ = solved4
    assert fp.residual <= 1e-9
    assert _chain_ok(fp)
    assert abs(fp.phi(np.array([0.0]))[0] - 1) < 1e-10
    tx = fp.phi(np.array([fp.tau * fp.X]))[0]
    assert abs(tx - fp.tau ** 3 * fp.X) < 1e-9 * max(1.0, abs(tx))


def test_record_round_trip(solved3):
    fp = solved3[0]
    fp2 = RenormFixedPoint.from_record(fp.to_record())
    x = np.linspace(fp.x0, fp.X, 9)
    assert np.array_equal(fp.phi(x), fp2.phi(x))


def test_covering_tau_differences_decrease(covering_fps):
    taus = [covering_fps[e].tau for e in (3, 5, 7, 9)]
    d = [abs(b - a) for a, b in zip(taus, taus[1:])]
    assert all(b < a for a, b in zip(d, d[1:]))
    assert all(fp.residual <= 1e-9 and _chain_ok(fp) for fp in covering_fps.values())


def test_unimodal_taus(unimodal_fps):
    taus = [unimodal_fps[e].tau for e in (4, 6, 8, 10)]
    assert all(t > 1 and np.isfinite(t) for t in taus)
    assert all(_chain_ok(fp) for fp in unimodal_fps.values())
