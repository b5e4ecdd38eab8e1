from __future__ import annotations

import time

import pytest

from fibdrift.induced import build_branches
from fibdrift.renorm import FamilyKind, continuation_sweep, solve_fixed_point
from fibdrift.transfer import branch_system, invariant_density

BRANCH_TOL = 1e-12
DENSITY_TOL = 1e-12
DENSITY_DEGREE = 96

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture(scope="session")
def solved3():
    """Covering ell=3 solved from the renormalization bootstrap, with wall time."""
    t = time.perf_counter()
    fp = solve_fixed_point(FamilyKind("covering", 3), degree=128)
    return fp, time.perf_counter() - t


@pytest.fixture(scope="session")
def solved4():
    t = time.perf_counter()
    fp = solve_fixed_point(FamilyKind("unimodal", 4), degree=128)
    return fp, time.perf_counter() - t


@pytest.fixture(scope="session")
def covering_fps(solved3):
    fps = continuation_sweep("covering", [3, 5, 7, 9], seed_first=solved3[0])
    return {fp.ell: fp for fp in fps}


@pytest.fixture(scope="session")
def unimodal_fps(solved4):
    fps = continuation_sweep("unimodal", [4, 6, 8, 10], seed_first=solved4[0])
    return {fp.ell: fp for fp in fps}


def _systems(fps):
    out = {}
    for ell, fp in fps.items():
        sys_ = build_branches(fp, BRANCH_TOL)
        d = invariant_density(branch_system(sys_), tol=DENSITY_TOL, degree=DENSITY_DEGREE)
        out[ell] = (sys_, d)
    return out


@pytest.fixture(scope="session")
def covering_systems(covering_fps):
    """``ell -> (InducedSystem, Density)``."""
    return _systems(covering_fps)


@pytest.fixture(scope="session")
def unimodal_systems(unimodal_fps):
    return _systems(unimodal_fps)
