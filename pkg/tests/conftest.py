"""Shared, session-cached solves and simulations (they dominate test time)."""

import numpy as np
import pytest

from regenbot import sim
from regenbot.trajopt import CollocationProblem, solve


@pytest.fixture(scope="session")
def problem_ab():
    return CollocationProblem(N=100, horizon=2.0)


@pytest.fixture(scope="session")
def problem_ba(problem_ab):
    return problem_ab.with_(boundary=problem_ab.boundary.reversed())


@pytest.fixture(scope="session")
def sol_ab(problem_ab):
    # eight random starts plus the deterministic one
    return solve(problem_ab, starts=8, seed=0)


@pytest.fixture(scope="session")
def sol_ba(problem_ba):
    return solve(problem_ba, starts=0)


@pytest.fixture(scope="session")
def sol_ab_50(problem_ab):
    return solve(problem_ab.with_(N=50), starts=0)


@pytest.fixture(scope="session")
def ref_ab(sol_ab):
    return sim.Reference.from_solution(sol_ab)


@pytest.fixture(scope="session")
def ref_ba(sol_ba):
    return sim.Reference.from_solution(sol_ba)


@pytest.fixture(scope="session")
def trace_ab(ref_ab):
    return sim.simulate(ref_ab)


@pytest.fixture(scope="session")
def trace_mission(ref_ab, ref_ba):
    return sim.simulate(ref_ab.then(ref_ba))


@pytest.fixture(scope="session")
def neighbor_traces(ref_ab, sol_ab):
    return {sign: sim.simulate(sim.neighboring_trajectory(ref_ab, sign=sign, q_nodes=sol_ab.q))
            for sign in (+1, -1)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
