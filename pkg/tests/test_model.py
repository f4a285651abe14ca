from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitindex.dynamics import el_vector_field
from orbitindex.errors import DomainError
from orbitindex.model import (
    HamiltonianState,
    LagrangianState,
    energy,
    hamiltonian,
    hamiltonian_vector_field,
    inverse_legendre,
    kinetic_energy,
    lagrangian,
    legendre,
    mane_upper_bound,
    momentum_integral,
)
from orbitindex.profile import evaluate


def test_lagrangian_examples(fstar, fzero):
    f2 = evaluate(fstar, 2.0)[0]
    assert lagrangian(fstar, LagrangianState(2.0, 0.0, 0.0, 0.5)) == pytest.approx(0.5 - f2 / 2, abs=1e-14)
    assert lagrangian(fzero, LagrangianState(1.0, 0.0, 1.0, 0.0)) == 0.5
    assert lagrangian(fstar, LagrangianState(0.5, 0.0, 0.0, 2.0)) == pytest.approx(0.5)


def test_kinetic_energy_examples():
    assert kinetic_energy(LagrangianState(2.0, 0.0, 0.0, 0.5)) == pytest.approx(0.5)
    assert kinetic_energy(LagrangianState(1.0, 0.0, 0.0, 0.0)) == 0.0
    assert kinetic_energy(LagrangianState(2.5, 0.0, 0.0, 0.4)) == pytest.approx(0.5)


def test_legendre_examples(fstar, fzero):
    h = legendre(fzero, LagrangianState(1.0, 0.0, 0.3, 0.7))
    assert (h.p_r, h.p_theta) == pytest.approx((0.3, 0.7))
    h = legendre(fstar, LagrangianState(2.0, 0.0, 0.0, 0.5))
    assert (h.p_r, h.p_theta) == pytest.approx((0.0, 2.0 - evaluate(fstar, 2.0)[0]))


def test_legendre_roundtrip_random(fstar):
    rng = np.random.default_rng(7)
    for _ in range(100):
        s = LagrangianState(rng.uniform(0.2, 3.8), rng.uniform(0, 6), rng.normal(), rng.normal())
        back = inverse_legendre(fstar, legendre(fstar, s))
        assert np.max(np.abs(back.as_array() - s.as_array())) <= 1e-12


def test_hamiltonian_matches_energy(fstar):
    s = LagrangianState(2.1, 0.3, 0.2, 0.4)
    assert hamiltonian(fstar, legendre(fstar, s)) == pytest.approx(energy(fstar, s), abs=1e-14)


def test_momentum_integral_examples(fstar, fzero):
    assert momentum_integral(fstar, LagrangianState(2.0, 0.0, 0.0, 0.5)) == pytest.approx(2 - evaluate(fstar, 2.0)[0])
    assert momentum_integral(fzero, LagrangianState(1.5, 0.0, 0.1, 0.4)) == pytest.approx(1.5**2 * 0.4)


@settings(max_examples=50, deadline=None)
@given(
    r=st.floats(0.3, 3.7),
    rd=st.floats(-2, 2),
    td=st.floats(-2, 2),
)
def test_momentum_is_conserved_by_the_field(fstar, r, rd, td):
    s = LagrangianState(r, 0.0, rd, td)
    f, f1, _ = fstar.values(np.array([r]))
    dr, _, rdd, tdd = el_vector_field(fstar, s)
    # d/dt (r^2 thetadot - f(r))
    d = 2 * r * dr * td + r * r * tdd - f1[0] * dr
    assert abs(d) <= 1e-12 * (1 + abs(r * r * tdd))


def test_hamiltonian_field_matches_lagrangian_field(fstar):
    s = LagrangianState(2.2, 0.1, 0.3, -0.2)
    h = legendre(fstar, s)
    X = hamiltonian_vector_field(fstar, h)
    v = el_vector_field(fstar, s)
    assert X[:2] == pytest.approx(v[:2], abs=1e-14)


def test_states_reject_radius_outside_disk():
    with pytest.raises(DomainError):
        LagrangianState(4.5, 0, 0, 0)
    with pytest.raises(DomainError):
        HamiltonianState(0.0, 0, 0, 0)


def test_mane_bounds(fstar, fzero):
    assert mane_upper_bound(fzero) == 0.0
    assert 0 < mane_upper_bound(fstar) < 0.5
