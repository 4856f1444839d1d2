"""Session-wide recorders shared by the unit and acceptance tests.

Every Vandermonde decomposition (the last stage of SPA and SPICE-PP) and every
SDP solve in the session is observed, so acceptance tests can check sparsity
and solver certificates over everything that ran.
"""

from __future__ import annotations

import numpy as np
import pytest

import gridless_doa.baselines as baselines
import gridless_doa.sdp.lmi as lmi
import gridless_doa.spa as spa


class Recorder:
    def __init__(self):
        self.decompositions = 0
        self.rank_violations = []
        self.sdp_solutions = []
        self.sdp_tag = None
        self.acceptance = {}

    def report(self, number: int, passed: bool, detail: str) -> str:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        self.acceptance[number] = line
        print(line)
        return line

    def sdp_since(self, mark: int):
        return self.sdp_solutions[mark:]


RECORDER = Recorder()


def _wrap_decompose(func):
    def wrapped(u_hat, *args, **kwargs):
        thetas, powers = func(u_hat, *args, **kwargs)
        M = len(np.atleast_1d(u_hat))
        RECORDER.decompositions += 1
        if len(thetas) > M - 1:
            RECORDER.rank_violations.append((M, len(thetas)))
        return thetas, powers

    return wrapped


def _wrap_solve(func):
    def wrapped(problem, **kwargs):
        sol = func(problem, **kwargs)
        RECORDER.sdp_solutions.append((RECORDER.sdp_tag, sol.diagnostics()))
        return sol

    return wrapped


spa.vandermonde_decompose = _wrap_decompose(spa.vandermonde_decompose)
baselines.vandermonde_decompose = spa.vandermonde_decompose
lmi.solve_sdp = _wrap_solve(lmi.solve_sdp)


@pytest.fixture
def tight_sdp():
    """Solve SPA SDPs to 1e-12 while the test runs.

    Exactly rank-deficient inputs put the optimum on a face where the error
    in u scales like the square root of the duality gap, so exact-recovery
    oracles need a tighter gap than the default.
    """
    saved = dict(spa._sdp_tols)
    spa.set_sdp_tolerances(gap_tol=1e-12, feas_tol=1e-12, max_iter=200)
    yield
    spa._sdp_tols.update(saved)


@pytest.fixture(scope="session")
def recorder():
    return RECORDER


def pytest_terminal_summary(terminalreporter):
    if RECORDER.acceptance:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RECORDER.acceptance):
            terminalreporter.write_line(RECORDER.acceptance[number])


def pytest_sessionfinish(session, exitstatus):
    if RECORDER.rank_violations:
        print(f"\nsparsity violations (M, r): {RECORDER.rank_violations[:10]}")
        session.exitstatus = 1
