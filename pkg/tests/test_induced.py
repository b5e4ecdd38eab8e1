from __future__ import annotations

import numpy as np
import pytest

from fibdrift.errors import OnBranchBoundary
from fibdrift.induced import (
    associated_maps,
    build_branches,
    induced_step,
    m_of,
    tower_return_check,
)


@pytest.fixture(scope="module")
def cov3(covering_systems):
    return covering_systems[3][0]


@pytest.fixture(scope="module")
def uni4(unimodal_systems):
    return unimodal_systems[4][0]


@pytest.mark.parametrize("name", ["cov3", "uni4"])
def test_partition(name, request):
    sys_ = request.getfixturevalue(name)
    L = sys_.length
    assert sys_.disjoint()
    assert abs(sys_.coverage() + sys_.omitted - L) <= 1e-8 * L


def test_covering_branch_set(cov3):
    ms = {b.m for b in cov3.branches}
    assert -1 in ms
    assert not any(m > 0 and m % 2 == 1 for m in ms)
    lo, hi = cov3.m_range()
    # the tails reach far in both directions
    assert lo < -10 and hi > 10


def test_minus_one_branch_reaches_tau_cubed(cov3):
    fp = cov3.fp
    b = next(b for b in cov3.branches if b.m == -1)
    vals = fp.phi(np.linspace(*b.domain, 50)[1:-1]) * fp.tau
    assert np.all(np.abs(vals) < abs(fp.tau) ** 3 + 1e-9)


def test_m_zero_when_phi_in_J(cov3):
    fp = cov3.fp
    x = np.linspace(*cov3.J, 20001)[1:-1]
    phi = fp.phi(x)
    inJ = (phi > cov3.J[0]) & (phi < cov3.J[1])
    assert inJ.any()
    img, m = induced_step(cov3, x[inJ], check_boundary=False)
    assert np.all(m == 0)
    assert np.allclose(img, phi[inJ], rtol=1e-12, atol=0)


def test_m_matches_branch_table(cov3):
    for b in cov3.branches[:30]:
        mid = 0.5 * (b.domain[0] + b.domain[1])
        assert m_of(cov3, mid) == b.m


def test_boundary_rejected(cov3):
    b = next(b for b in cov3.branches if b.m == 0)
    with pytest.raises(OnBranchBoundary):
        m_of(cov3, b.domain[0])


def test_unimodal_m_ranges(uni4):
    fp = uni4.fp
    left = np.linspace(uni4.J[0], fp.x0, 5001)[1:-1]
    right = np.linspace(fp.x0, uni4.J[1], 5001)[1:-1]
    ml = m_of(uni4, left, check_boundary=False)
    mr = m_of(uni4, right, check_boundary=False)
    assert ml.max() <= 0 and mr.max() <= 2
    assert all(b.m <= 2 for b in uni4.branches)


@pytest.mark.parametrize("name", ["cov3", "uni4"])
def test_orbits_stay_in_J(name, request):
    sys_ = request.getfixturevalue(name)
    rng = np.random.default_rng(3)
    x = rng.uniform(*sys_.J, 100)
    for _ in range(200):
        x, _ = induced_step(sys_, x, check_boundary=False)
        assert np.all((x > sys_.J[0]) & (x < sys_.J[1]))


def test_associated_maps(cov3):
    fp = cov3.fp
    G, Gamma, dG, dGamma = associated_maps(fp)
    p = np.array([fp.base])
    assert abs(Gamma(p)[0] - p[0]) < 1e-10 * abs(p[0])
    assert dGamma(p)[0] < 0
    x = np.linspace(fp.x0, fp.X, 41)[1:-1]
    assert np.max(np.abs(fp.phi(G(x)) - fp.phi(x) / fp.tau ** 2)) < 1e-9
    xs = np.linspace(fp.base, fp.X, 41)[1:-1]
    assert np.max(np.abs(G(Gamma(xs)) - Gamma(Gamma(Gamma(xs))))) < 1e-9


def test_unimodal_G_derivative(uni4):
    fp = uni4.fp
    _, _, dG, _ = associated_maps(fp)
    assert abs(dG(np.array([fp.x0]))[0] + fp.tau ** (-2.0 / fp.ell)) < 1e-8


def test_tower(cov3):
    rep = tower_return_check(cov3.fp, 6)
    assert [lv["S_n"] for lv in rep["levels"]] == [1, 2, 3, 5, 8, 13, 21]


def test_tail_tol_grows_range(covering_fps):
    a = build_branches(covering_fps[3], 1e-6).m_range()
    b = build_branches(covering_fps[3], 1e-12).m_range()
    assert b[0] < a[0] and b[1] > a[1]
