from __future__ import annotations

import pytest

from orbitindex.dynamics import integrate_orbit, linearized_flow
from orbitindex.orbits import cylinder_tangent, find_circular_orbit, period_derivative_analytic
from orbitindex.profile import f_star, f_two, zero_profile


@pytest.fixture(scope="session")
def fstar():
    return f_star()


@pytest.fixture(scope="session")
def ftwo():
    return f_two()


@pytest.fixture(scope="session")
def fzero():
    return zero_profile()


class OrbitBundle:
    """A circular orbit with its trajectory and variational flow, computed once."""

    def __init__(self, p, k, seed):
        self.p = p
        self.orb = find_circular_orbit(p, k, seed)
        self.rhoprime, self.Tprime = period_derivative_analytic(p, self.orb)
        self.traj = integrate_orbit(p, self.orb.state(), self.orb.T)
        self.lp = linearized_flow(p, self.traj)
        self.xi0 = cylinder_tangent(p, self.orb)


@pytest.fixture(scope="session")
def star_orbit(fstar):
    return OrbitBundle(fstar, 0.5, 2.0)


@pytest.fixture(scope="session")
def two_orbit(ftwo):
    return OrbitBundle(ftwo, 0.5, 2.5)
