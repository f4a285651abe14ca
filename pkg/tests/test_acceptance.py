"""Acceptance criteria. Each test prints one PASS/FAIL line with its measurements."""

from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from orbitindex.dynamics import integrate_orbit, linearized_flow
from orbitindex.indices import cz_index, monodromy, mu_rab, nullity, rs_maslov, split_path, transverse_cz_index
from orbitindex.model import as_system
from orbitindex.morse import circular_loop, cylinder_vector, duistermaat_check, hessians, verify_index_theorem
from orbitindex.orbits import cylinder_tangent, orbit_cylinder
from orbitindex.profile import default_grid, f_star, f_two, validate_profile
from orbitindex.scenario import shear_path
from orbitindex.spectral_flow import axiom_checks, run_cf_suite

ORBITS = {"fstar": (f_star, 2.0), "f2": (f_two, 2.5)}


def report(capsys, n: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\nACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}: {detail}")


def pipeline(name: str, k: float = 0.5):
    make, seed = ORBITS[name]
    p = make()
    cyl = orbit_cylinder(p, k, 1e-3, 9, rho_seed=seed)
    orb = cyl.center
    traj = integrate_orbit(p, orb.state(), orb.T)
    lp = linearized_flow(p, traj)
    return p, cyl, orb, traj, lp


def test_criterion_01_fstar_orbit(capsys):
    t0 = time.perf_counter()
    _, cyl, orb, _, lp = pipeline("fstar")
    nu = nullity(monodromy(lp))
    elapsed = time.perf_counter() - t0
    target = 4 * math.sqrt(2) * math.pi
    checks = {
        "rho": abs(orb.rho - 2.0) <= 1e-10,
        "T": abs(orb.T - 4 * math.pi) <= 1e-10,
        "Tprime_analytic": cyl.Tprime_analytic == pytest.approx(target, rel=1e-12, abs=0),
        "Tprime_fd": abs(cyl.Tprime_fd - target) <= 1e-4 * target,
        "chi": cyl.chi == -1,
        "nullity": nu == 1,
        "runtime": elapsed <= 10.0,
    }
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report(capsys, 1, ok, f"rho={orb.rho:.12f} T={orb.T:.12f} T'={cyl.Tprime_analytic:.10f} "
           f"(target 4*sqrt(2)*pi={target:.10f}) T'_fd={cyl.Tprime_fd:.10f} chi={cyl.chi} nu={nu} "
           f"{elapsed:.2f}s" + (f" failed={failed}" if failed else ""))
    assert ok, failed


def test_criterion_02_f2_orbit(capsys):
    t0 = time.perf_counter()
    _, cyl, orb, _, _ = pipeline("f2")
    elapsed = time.perf_counter() - t0
    ok = cyl.chi == 1 and elapsed <= 10.0
    report(capsys, 2, ok, f"rho={orb.rho:.12f} T'={cyl.Tprime_analytic:.10f} chi={cyl.chi} {elapsed:.2f}s")
    assert ok


def test_criterion_03_mane_bound(capsys):
    r = default_grid(10_000)
    parts = []
    ok = True
    for name, (make, _) in ORBITS.items():
        p = make()
        f, _, _ = p.values(r)
        bound = 0.5 * float(np.max(np.abs(f / r))) ** 2
        rep = validate_profile(p)
        ok &= bound < 0.5 and rep.mane_upper_bound < 0.5
        parts.append(f"{name}: grid10^4={bound:.6f} validate={rep.mane_upper_bound:.6f}")
    report(capsys, 3, ok, "; ".join(parts))
    assert ok


def test_criterion_04_free_vs_fixed_index(capsys):
    expected = {"fstar": 1, "f2": 0}
    rows, ok, worst = [], True, 0.0
    for name in ORBITS:
        _, _, orb, _, _ = pipeline(name)
        seen = set()
        for N in (256, 512, 1024):
            t0 = time.perf_counter()
            thm = verify_index_theorem(ORBITS[name][0](), orb, N)
            worst = max(worst, time.perf_counter() - t0)
            seen.add((thm.i_T, thm.i_free))
            ok &= thm.i_free - thm.i_T == expected[name]
            rows.append(f"{name} N={N}: i_T={thm.i_T} i_free={thm.i_free}")
        ok &= len(seen) == 1
    ok &= worst <= 120.0
    report(capsys, 4, ok, "; ".join(rows) + f"; slowest N run {worst:.2f}s")
    assert ok


def test_criterion_05_duistermaat(capsys):
    rows, ok = [], True
    for name in ORBITS:
        p, _, orb, _, lp = pipeline(name)
        mu = cz_index(lp)
        i_T = verify_index_theorem(p, orb, 512).i_T
        holds = duistermaat_check(i_T, mu).holds and Fraction(i_T) == mu - Fraction(1, 2)
        ok &= holds
        rows.append(f"{name}: i_T={i_T} mu_CZ={mu}")
    report(capsys, 5, ok, "; ".join(rows))
    assert ok


def test_criterion_06_mu_rab(capsys):
    rows, ok = [], True
    for name in ORBITS:
        p, cyl, orb, traj, lp = pipeline(name)
        mu = cz_index(lp)
        sp = split_path(p, traj, lp, cylinder_tangent(p, orb), cyl.Tprime_analytic)
        mu_t = transverse_cz_index(sp)
        mr = mu_rab(mu, cyl.chi)
        i_free = verify_index_theorem(p, orb, 512).i_free
        ok &= mr == mu - Fraction(cyl.chi, 2) == mu_t and Fraction(i_free) == mr
        rows.append(f"{name}: mu_CZ={mu} chi={cyl.chi} mu_Rab={mr} mu_CZ^tau={mu_t} i_free={i_free}")
    report(capsys, 6, ok, "; ".join(rows))
    assert ok


def test_criterion_07_monodromy_blocks(capsys):
    rows, ok = [], True
    for name in ORBITS:
        p, cyl, orb, traj, lp = pipeline(name)
        sp = split_path(p, traj, lp, cylinder_tangent(p, orb), cyl.Tprime_analytic)
        cb = sp.split.cylinder_block
        tp = cyl.Tprime_analytic
        K = orb.a * as_system(p).fields(orb.rho)[2]
        want = 2 * math.cos(math.sqrt(K) * orb.T)
        trace = float(np.trace(sp.split.transverse_block))
        shape = abs(cb[0, 0] - 1) <= 1e-6 and abs(cb[1, 1] - 1) <= 1e-6 and abs(cb[1, 0]) <= 1e-6
        good = shape and abs(-cb[0, 1] - tp) <= 1e-3 * abs(tp) and abs(trace - want) <= 1e-5
        ok &= good
        rows.append(f"{name}: block(1,2)={cb[0, 1]:.8f} -T'={-tp:.8f} trace={trace:.9f} 2cos(sqrt(K)T)={want:.9f}")
    report(capsys, 7, ok, "; ".join(rows))
    assert ok


def test_criterion_08_shear(capsys):
    got = {tp: rs_maslov(shear_path(tp)) for tp in (-1.0, 0.0, 1.0)}
    want = {-1.0: Fraction(1, 2), 0.0: Fraction(0), 1.0: Fraction(-1, 2)}
    ok = got == want
    report(capsys, 8, ok, ", ".join(f"T'={tp:+g}: {got[tp]}" for tp in got))
    assert ok


def test_criterion_09_spectral_flow_suite(capsys):
    t0 = time.perf_counter()
    suite = run_cf_suite(500, base_seed=0, oracle=True)
    ax = axiom_checks()
    elapsed = time.perf_counter() - t0
    ok = suite.passed and ax["passed"] and elapsed <= 30.0
    report(capsys, 9, ok, f"{suite.trials} trials, {len(suite.failures)} formula failures, "
           f"{len(suite.oracle_mismatches)} oracle mismatches, axioms {'ok' if ax['passed'] else ax['failures']}, "
           f"{elapsed:.2f}s")
    assert ok


def test_criterion_10_hessian_cylinder_identities(capsys):
    rows, ok = [], True
    N = 512
    for name in ORBITS:
        p, cyl, orb, _, _ = pipeline(name)
        hp = hessians(p, circular_loop(orb, N))
        z = cylinder_vector(p, orb, N)
        Hz = hp.free @ z
        q = float(z @ Hz)
        tp = cyl.Tprime_analytic
        slot, rest = abs(Hz[-1] + 1.0), float(np.max(np.abs(Hz[:-1])))
        good = slot <= 1e-3 and rest <= 1e-3 and abs(q + tp) <= 1e-3 * abs(tp)
        ok &= good
        rows.append(f"{name}: period slot {Hz[-1]:.6f} other max {rest:.2e} quad {q:.6f} -T'={-tp:.6f}")
    report(capsys, 10, ok, "; ".join(rows))
    assert ok
