from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import pytest

from fibdrift.errors import LeftUpperHalfPlane, NotConverging
from fibdrift.drift import (
    GAUSS_LOG2_MEAN,
    contour,
    drift_birkhoff,
    drift_direct,
    drift_log,
    eta_of_ell,
    gauss_birkhoff,
    limit_drift_estimate,
    mu_coordinate,
)
from fibdrift.funcspace import fit


@pytest.fixture(scope="module")
def theta_log(covering_fps, covering_systems, unimodal_fps, unimodal_systems):
    out = {("covering", e): drift_log(covering_fps[e], covering_systems[e][1]) for e in covering_fps}
    out.update({("unimodal", e): drift_log(unimodal_fps[e], unimodal_systems[e][1]) for e in unimodal_fps})
    return out


@pytest.fixture(scope="module")
def mus(covering_fps, covering_systems):
    return {e: mu_coordinate(covering_fps[e], covering_systems[e][1]) for e in covering_fps}


@pytest.fixture(scope="module")
def contour3(covering_fps, covering_systems, mus):
    return contour(covering_fps[3], covering_systems[3][1], z0_arg_deg=30.0, N=2000, mu=mus[3])


def test_toy_zero_drift():
    branches = [SimpleNamespace(m=0, domain=(0.0, 0.4)), SimpleNamespace(m=0, domain=(0.4, 1.0))]
    f = fit(lambda x: 1.0 + 0 * x, (0, 1), 4)
    assert drift_direct(SimpleNamespace(branches=branches), f) == 0.0


@pytest.mark.parametrize("ell", [3, 5, 7])
def test_direct_matches_log(covering_systems, theta_log, ell):
    sys_, d = covering_systems[ell]
    t_direct = drift_direct(sys_, d)
    t_log = theta_log[("covering", ell)]
    assert np.isfinite(t_direct)
    assert abs(t_direct - t_log) <= 1e-4 * abs(t_log)


def test_scaling_sanity(covering_fps, covering_systems, theta_log):
    # log|tau| times the mean of m equals the mean of log|phi(x)/x|
    fp = covering_fps[3]
    sys_, d = covering_systems[3]
    mean_m = -drift_direct(sys_, d)
    x = np.linspace(*fp.J, 400001)[1:-1]
    _, la = fp.log_abs_phi(x)
    integrand = (la - np.log(np.abs(x))) * d(x)
    mean_log = float(np.sum(integrand) * (x[1] - x[0]))
    assert abs(fp.log_tau * mean_m - mean_log) < 1e-3 * abs(mean_log)
    assert abs(-mean_log / fp.log_tau - theta_log[("covering", 3)]) < 1e-3 * abs(theta_log[("covering", 3)])


def test_unimodal_ell4_positive_and_above_coverings(theta_log):
    t4 = theta_log[("unimodal", 4)]
    assert t4 > 0
    assert all(t4 > theta_log[("covering", e)] for e in (3, 5, 7, 9))


def test_unimodal_sweep_increasing(theta_log):
    t = [theta_log[("unimodal", e)] for e in (4, 6, 8, 10)]
    assert all(b > a for a, b in zip(t, t[1:]))


def test_gauss_birkhoff():
    mean, err = gauss_birkhoff(n_steps=10 ** 6, n_seeds=8, seed=0)
    assert abs(mean - GAUSS_LOG2_MEAN) <= 3 * err


def test_birkhoff_ell3(covering_systems, theta_log):
    mean, err = drift_birkhoff(covering_systems[3][0], n_steps=10 ** 6, n_seeds=8, seed=1)
    assert abs(mean - theta_log[("covering", 3)]) <= 3 * err


def test_birkhoff_short_brackets(covering_systems, theta_log):
    mean, err = drift_birkhoff(covering_systems[3][0], n_steps=10 ** 3, n_seeds=1, seed=2)
    _, err_long = drift_birkhoff(covering_systems[3][0], n_steps=10 ** 5, n_seeds=8, seed=2)
    assert err > err_long
    assert abs(mean - theta_log[("covering", 3)]) <= 3 * err


def test_birkhoff_seeded(covering_systems):
    a = drift_birkhoff(covering_systems[3][0], n_steps=10 ** 4, n_seeds=4, seed=5, threads=2)
    b = drift_birkhoff(covering_systems[3][0], n_steps=10 ** 4, n_seeds=4, seed=5, threads=1)
    assert a == b


def test_mu_endpoints(mus, covering_fps):
    mu = mus[3]
    fp = covering_fps[3]
    assert abs(mu(np.array([fp.base]))[0]) < 1e-14
    assert abs(mu(np.array([fp.X]))[0] - 1.0) < 1e-9
    x = np.linspace(*fp.J, 1001)
    assert np.all(np.diff(mu(x)) > 0)
    assert mu.functional_equation_deviation() < 1e-8


def test_gamma_hat_fixes_zero(mus):
    assert abs(mus[3].Gamma_hat(np.array([0.0]))[0]) < 1e-12


def test_rho_and_eta(mus):
    rho = [mus[e].rho for e in (3, 5, 7, 9)]
    assert all(-1 < r < 0 for r in rho)
    assert all(b < a for a, b in zip(rho, rho[1:]))
    eta = [eta_of_ell(None, rho=r) for r in rho]
    assert all(v > 0 for v in eta)
    assert all(b < a for a, b in zip(eta, eta[1:]))
    assert eta_of_ell(None, rho=-1.0) == 0.0


def test_contour_first_arc_is_segment(contour3):
    z0 = contour3.z0
    a = np.asarray(contour3.arcs[0])
    # every sample lies on the segment from 1 to z0
    t = ((a - 1.0) / (z0 - 1.0))
    assert np.max(np.abs(t.imag)) < 1e-12
    assert np.all((t.real > -1e-12) & (t.real < 1 + 1e-12))


def test_contour_points(contour3):
    n = contour3.n_resolved
    z = contour3.points[1:n + 1]
    assert n >= 100
    assert np.all(z.imag > 0)
    mod = np.abs(z)
    assert np.all(np.diff(mod[n // 2:]) < 0)
    assert contour3.diagnostics["arcs_non_crossing"]


def test_contour_decay_constant(contour3):
    assert np.isfinite(contour3.q_hat) and contour3.q_hat > 0
    n = np.arange(10, 2001)
    assert np.all(np.abs(contour3.s_values[10:2001]) * n ** 1.5 / np.log(n) <= contour3.q_hat)


def test_contour_sum(contour3, theta_log):
    t = theta_log[("covering", 3)]
    assert abs(contour3.theta - t) <= max(1e-3, contour3.tail_bound / contour3.log_tau)


def test_contour_lower_half_plane(covering_fps, covering_systems, mus):
    with pytest.raises(LeftUpperHalfPlane):
        contour(covering_fps[3], covering_systems[3][1], z0_arg_deg=-30.0, N=200, mu=mus[3])


def test_limit_constant_sequence():
    est = limit_drift_estimate([(e, 2.5) for e in (3, 5, 7, 9)])
    assert abs(est.value - 2.5) < 1e-12
    assert est.tag == "FINITE"


def test_limit_covering(theta_log):
    est = limit_drift_estimate([(e, theta_log[("covering", e)]) for e in (3, 5, 7, 9)])
    assert est.tag == "FINITE"
    assert np.isfinite(est.value) and np.isfinite(est.error)


def test_unimodal_differences_do_not_decrease(theta_log):
    d = np.abs(np.diff([theta_log[("unimodal", e)] for e in (4, 6, 8, 10)]))
    assert np.all(np.diff(d) >= 0), d


def test_limit_unimodal(theta_log):
    with pytest.raises(NotConverging):
        limit_drift_estimate([(e, theta_log[("unimodal", e)]) for e in (4, 6, 8, 10)])
