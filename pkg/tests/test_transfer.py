from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from fibdrift.errors import MassLeak, NoConvergence
from fibdrift.funcspace import ChartedFunction, fit
from fibdrift.induced import build_branches
from fibdrift.transfer import (
    Density,
    apply_transfer,
    branch_system,
    density_convergence,
    density_identity_checks,
    gauss_branch_system,
    gauss_density,
    invariant_density,
    transfer_matrix,
)

from conftest import DENSITY_DEGREE


@pytest.fixture(scope="module")
def gauss():
    return gauss_branch_system()


@pytest.fixture(scope="module")
def cov3(covering_systems):
    return covering_systems[3]


def test_gauss_weights_positive(gauss):
    x = np.linspace(0, 1, 101)
    _, W = gauss.weights(x)
    assert np.all(W > 0)


def test_gauss_fixed_point(gauss):
    f = fit(gauss_density, (0, 1), 48)
    Pf = apply_transfer(gauss, f)
    x = np.linspace(0, 1, 1001)
    assert np.max(np.abs(Pf(x) - gauss_density(x))) < 1e-10


def test_gauss_density(gauss):
    d = invariant_density(gauss, tol=1e-13, degree=48)
    x = np.linspace(0, 1, 1001)
    assert np.max(np.abs(d(x) - gauss_density(x))) < 1e-9


def test_zero_maps_to_zero(gauss, cov3):
    x = np.linspace(0, 1, 11)
    assert np.all(apply_transfer(gauss, lambda t: 0.0 * t, degree=32)(x) == 0)
    bs = branch_system(cov3[0])
    assert np.all(apply_transfer(bs, lambda t: 0.0 * t, degree=32)(np.linspace(*bs.J, 11)) == 0)


def test_mass_conservation_constant(cov3):
    bs = branch_system(cov3[0])
    L = bs.J[1] - bs.J[0]
    g = apply_transfer(bs, lambda t: np.ones_like(t) / L, degree=DENSITY_DEGREE)
    assert abs(g.integrate(*bs.J) - 1.0) < 1e-9


def test_mass_conservation_random_polynomials(cov3):
    bs = branch_system(cov3[0])
    rng = np.random.default_rng(7)
    lo, hi = bs.segment
    for _ in range(3):
        c = rng.uniform(0.5, 1.0, 4)
        p = np.polynomial.Polynomial(c, domain=[lo, hi])
        g = apply_transfer(bs, p, degree=DENSITY_DEGREE)
        m_in = fit(p, bs.J, 16).integrate(*bs.J)
        assert abs(g.integrate(*bs.J) - m_in) < 1e-9 * abs(m_in)


def test_positivity(cov3):
    bs = branch_system(cov3[0])
    g = apply_transfer(bs, lambda t: 1.0 + np.cos(5 * t), degree=DENSITY_DEGREE)
    x = bs.nodes(DENSITY_DEGREE)
    assert np.all(g(x) >= -1e-12)


def test_sign_convention(cov3):
    sys_ = cov3[0]
    x = np.linspace(*sys_.J, 33)[1:-1]
    _, DY = sys_.evaluate(x)
    for row, b in zip(DY, sys_.branches):
        if b.m == -1:
            assert np.all(row < 0)
        if b.m % 2 == 0:
            assert np.all(row > 0)
        assert np.all((-1) ** b.m * row > 0)


def test_unimodal_sign_convention(unimodal_systems):
    sys_ = unimodal_systems[4][0]
    branch_system(sys_)  # raises on a violation


@pytest.mark.parametrize("ell", [3, 5, 7, 9])
def test_covering_density(covering_systems, ell):
    sys_, d = covering_systems[ell]
    x = np.linspace(*d.J, 2001)
    assert d.residual <= 1e-8
    assert np.all(d(x) > 0)
    assert abs(d.mass() - 1) < 1e-9
    assert 0 < d.contraction < 0.9


def test_identities(covering_fps, covering_systems):
    rep = density_identity_checks(covering_fps[3], covering_systems[3][1])
    assert rep["gamma_density_identity"] <= 1e-6
    assert rep["mu_functional_equation"] <= 1e-6


def test_identity_negative_control(covering_fps, covering_systems):
    d = covering_systems[3][1]
    a, b = d.f.F.interval
    F = fit(lambda s: d.f.F(s) * (1.0 + 0.2 * np.cos(np.pi * (s - a) / (b - a))), (a, b), d.f.degree + 16,
            tail_tol=1e-6)
    bad = Density(ChartedFunction(F, d.f.chart), d.J, d.residual, d.iterations)
    rep = density_identity_checks(covering_fps[3], bad)
    assert rep["gamma_density_identity"] > 1e-2


def test_truncation_robustness(covering_fps):
    fp = covering_fps[3]
    ds = []
    for tt in (1e-8, 1e-10):
        ds.append(invariant_density(branch_system(build_branches(fp, tt)), tol=1e-12, degree=DENSITY_DEGREE))
    x = np.linspace(*ds[0].J, 2001)
    assert np.max(np.abs(ds[0](x) - ds[1](x))) < 1e-7


def test_power_bounded(cov3):
    bs = branch_system(cov3[0])
    M = transfer_matrix(bs, 64)
    v = np.ones(64)
    sups = []
    for _ in range(200):
        v = M @ v
        sups.append(np.max(np.abs(v)))
    assert np.all(np.isfinite(sups))
    assert max(sups) < 10 * max(sups[:10])
    assert abs(sups[-1] - sups[-2]) < 1e-10 * sups[-1]


def test_mass_leak_detected(covering_fps):
    # coarse truncation, no tail summation, but a fine tolerance claimed
    bs = replace(branch_system(build_branches(covering_fps[3], 1e-4)), tails=(), tail_tol=1e-12)
    with pytest.raises(MassLeak):
        invariant_density(bs, degree=DENSITY_DEGREE)


def test_density_convergence(covering_systems):
    rep = density_convergence([covering_systems[e][1] for e in (3, 5, 7, 9)])
    assert len(rep["distances"]) == 3
    assert rep["monotone"]


def test_no_convergence(gauss):
    with pytest.raises(NoConvergence):
        invariant_density(gauss, tol=1e-15, max_iter=2, degree=48)
