from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import expm

from orbitindex.errors import CrossingResolutionFailure, ToleranceAmbiguity
from orbitindex.indices import (
    IndexRecord,
    J0,
    SymplecticPath,
    crossing_form_index,
    cz_index,
    direct_sum,
    floquet_multipliers,
    monodromy,
    mu_rab,
    nullity,
    rotation_angle,
    rs_maslov,
    sampled_crossing_index,
    split_monodromy,
    split_path,
    to_index_coords,
    transverse_cz_index,
    virtual_dimension,
)
from orbitindex.scenario import shear_path


def rotation_path(angle, n=400):
    t = np.linspace(0.0, 1.0, n)
    return SymplecticPath(t, np.array([expm(J0(1) * angle * s) for s in t]))


@pytest.mark.parametrize("angle,want", [(math.pi * math.sqrt(2), 1), (2 * math.pi, 2), (-1.4 * math.pi, -1), (0.3, 1)])
def test_rotation_paths(angle, want):
    assert rs_maslov(rotation_path(angle)) == want


def test_rotation_against_crossing_forms():
    for angle in (math.pi * math.sqrt(2), 2 * math.pi, 3.3 * math.pi):
        oracle = crossing_form_index(lambda s: expm(J0(1) * angle * s), 0.0, 1.0)
        assert rs_maslov(rotation_path(angle)) == oracle


@pytest.mark.parametrize("tp,want", [(1.0, Fraction(-1, 2)), (-1.0, Fraction(1, 2)), (0.0, Fraction(0))])
def test_shear_calibration(tp, want):
    # the shear keeps a kernel for all t, so only the winding route applies
    assert rs_maslov(shear_path(tp)) == want


def test_orientation_flip_breaks_calibration():
    assert rs_maslov(shear_path(1.0), orientation=-1) == Fraction(1, 2)


def test_constant_identity_path():
    t = np.linspace(0, 1, 10)
    assert rs_maslov(SymplecticPath(t, np.array([np.eye(2)] * 10))) == 0


def test_direct_sum_is_additive():
    a, b = rotation_path(1.4 * math.pi), shear_path(-1.0, n=400)
    assert rs_maslov(direct_sum(a, b)) == rs_maslov(a) + rs_maslov(b)


def test_under_resolved_path_is_rejected():
    with pytest.raises(CrossingResolutionFailure):
        rs_maslov(rotation_path(3.5 * math.pi, n=8))


def test_nullity_examples(star_orbit):
    assert nullity(monodromy(star_orbit.lp)) == 1
    assert nullity(np.eye(4)) == 4
    R = lambda a: np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])  # noqa: E731
    M = np.zeros((4, 4))
    M[:2, :2], M[2:, 2:] = R(math.sqrt(2)), R(math.sqrt(3))
    assert nullity(M) == 0


def test_nullity_tolerance_ambiguity():
    M = np.eye(2)
    M[0, 1] = 5e-6
    M = np.diag([1.0 + 5e-6, 1.0 / (1.0 + 5e-6)])
    with pytest.raises(ToleranceAmbiguity):
        nullity(M, tol=1e-6)


def test_floquet_multipliers(star_orbit, two_orbit):
    ev = floquet_multipliers(monodromy(star_orbit.lp))
    for w in (1, 1, np.exp(1j * math.pi * math.sqrt(2)), np.exp(-1j * math.pi * math.sqrt(2))):
        assert np.min(np.abs(ev - w)) <= 1e-6
    ev2 = floquet_multipliers(monodromy(two_orbit.lp))
    target = np.exp(1j * math.pi * math.sqrt(5))
    assert min(np.min(np.abs(ev2 - target)), np.min(np.abs(ev2 - target.conjugate()))) <= 1e-6


def test_split_monodromy(star_orbit, two_orbit):
    o = star_orbit
    sm = split_monodromy(monodromy(o.lp), o.p, o.orb.state(), o.xi0)
    assert sm.cylinder_block[0, 1] == pytest.approx(-o.Tprime, rel=1e-3)
    assert sm.cylinder_block[0, 0] == pytest.approx(1.0, abs=1e-6)
    assert sm.cylinder_block[1, 0] == pytest.approx(0.0, abs=1e-6)
    assert np.trace(sm.transverse_block) == pytest.approx(2 * math.cos(math.pi * math.sqrt(2)), abs=1e-5)
    assert sm.offdiag_norm <= 1e-8
    t = two_orbit
    sm2 = split_monodromy(monodromy(t.lp), t.p, t.orb.state(), t.xi0)
    assert sm2.cylinder_block[0, 1] > 0


def test_cz_indices_fstar(star_orbit):
    o = star_orbit
    mu = cz_index(o.lp)
    assert mu == Fraction(1, 2) and mu.denominator == 2
    sp = split_path(o.p, o.traj, o.lp, o.xi0, o.Tprime)
    assert rs_maslov(sp.cylinder) + rs_maslov(sp.transverse) == mu
    assert transverse_cz_index(sp) == mu + Fraction(1, 2)
    assert rotation_angle(sp.split.transverse_block) == pytest.approx(2 * math.pi - math.pi * math.sqrt(2), abs=1e-6)


def test_cz_indices_ftwo(two_orbit):
    o = two_orbit
    mu = cz_index(o.lp)
    assert mu == Fraction(7, 2)
    sp = split_path(o.p, o.traj, o.lp, o.xi0, o.Tprime)
    assert transverse_cz_index(sp) == mu - Fraction(1, 2)
    assert rs_maslov(sp.cylinder) + rs_maslov(sp.transverse) == mu


def test_reversed_path_negates(star_orbit):
    path = SymplecticPath(star_orbit.lp.times, to_index_coords(star_orbit.lp.matrices))
    assert rs_maslov(path.reversed()) == -rs_maslov(path)


def test_transverse_oracle_agrees(star_orbit):
    o = star_orbit
    sp = split_path(o.p, o.traj, o.lp, o.xi0, o.Tprime)
    assert sampled_crossing_index(sp.transverse) == transverse_cz_index(sp)


def test_mu_rab_and_virtual_dimension():
    rec = IndexRecord(Fraction(1, 2), Fraction(1), 1, -1)
    assert rec.mu_rab == 1 == mu_rab(Fraction(1, 2), -1)
    assert virtual_dimension(rec, rec) == -1
    assert rec.as_dict()["mu_cz"] == "1/2"
    with pytest.raises(ValueError):
        IndexRecord(Fraction(1, 2), Fraction(1), 1, -1, mu_rab=Fraction(0))


def test_symplectic_path_rejects_non_symplectic():
    t = np.linspace(0, 1, 3)
    with pytest.raises(ValueError):
        SymplecticPath(t, np.array([np.eye(2), 2 * np.eye(2), np.eye(2)]))
