"""Circular periodic orbits, their energy continuation and the correction term."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .dynamics import _rhs, integrate_orbit, linearized_flow
from .errors import (
    AmbiguousRoot,
    ContinuationBreakdown,
    DegenerateCylinder,
    LeftDomain,
    NoConvergence,
    NoRoot,
)
from .model import LagrangianState, as_system, energy

T_PRIME_FLOOR = 1e-8


@dataclass(frozen=True)
class CircularOrbit:
    k: float
    rho: float
    a: float
    T: float
    profile_id: str = ""

    def state(self) -> LagrangianState:
        return LagrangianState(self.rho, 0.0, 0.0, self.a)


def _radial_residual(sys, k: float):
    """r'' on the circle of radius r at energy k (zero on circular orbits)."""
    if sys.potential is None:
        target = math.sqrt(2.0 * k)
        return lambda r: sys.fields(r)[1] - target

    def g(r):
        _, f1, _, v, v1, _ = sys.fields(r)
        w = 2.0 * (k - v)
        if w <= 0.0:
            return -v1
        a = math.sqrt(w) / r
        return a * (r * a - f1) - v1

    return g


def find_circular_orbit(
    p, k: float, rho_seed: float, halfwidth: float = 0.1, n_scan: int = 201, profile_id: str = ""
) -> CircularOrbit:
    """Solve sqrt(2k) = rho a = f'(rho) on [seed - halfwidth, seed + halfwidth]."""
    sys = as_system(p)
    if k <= 0.0:
        raise NoRoot("energy must be positive")
    if sys.potential is None:
        target = math.sqrt(2.0 * k)
        if abs(sys.fields(rho_seed)[1] - target) > 0.5 * target:
            raise NoRoot(f"f'(seed) is not within 50% of sqrt(2k) = {target:.6g}")
    g = _radial_residual(sys, k)
    lo, hi = max(rho_seed - halfwidth, 0.06), min(rho_seed + halfwidth, 3.94)
    xs = np.linspace(lo, hi, n_scan)
    vals = np.array([g(x) for x in xs])
    sgn = np.sign(vals)
    roots = []
    for i in range(n_scan - 1):
        if sgn[i] == 0.0:
            roots.append((xs[i], xs[i]))
        elif sgn[i] * sgn[i + 1] < 0:
            roots.append((xs[i], xs[i + 1]))
    if sgn[-1] == 0.0:
        roots.append((xs[-1], xs[-1]))
    if not roots:
        raise NoRoot(f"no circular orbit at k = {k} in [{lo:.4g}, {hi:.4g}]")
    if len(roots) > 1:
        raise AmbiguousRoot(f"{len(roots)} circular orbits at k = {k} in [{lo:.4g}, {hi:.4g}]; shrink the bracket")
    x0, x1 = roots[0]
    rho = x0 if x0 == x1 else brentq(g, x0, x1, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    v = sys.fields(rho)[3]
    a = math.sqrt(2.0 * (k - v)) / rho
    orb = CircularOrbit(k, rho, a, 2.0 * math.pi / a, profile_id)
    rdd = _rhs(sys, [rho, 0.0, 0.0, a])[2]
    if abs(rdd) > 1e-12:
        raise NoRoot(f"root is not stationary: r'' = {rdd:.3g}")
    return orb


def period_derivative_analytic(p, orb: CircularOrbit) -> tuple[float, float]:
    """(rho'(k), T'(k)) by implicit differentiation of the circular-orbit equations.

    Without a potential rho' = 1/(sqrt(2k) f''(rho)) and
    T' = 2 pi rho' (f' - rho f'') / f'^2.
    """
    sys = as_system(p)
    rho, a = orb.rho, orb.a
    _, f1, f2, _, v1, v2 = sys.fields(rho)
    if sys.potential is None:
        if abs(f2) < 1e-10:
            raise DegenerateCylinder(f"f''(rho) = {f2:.3g}; energy does not parametrize the family")
        rp = 1.0 / (math.sqrt(2.0 * orb.k) * f2)
        return rp, 2.0 * math.pi * rp * (f1 - rho * f2) / f1**2
    # energy: rho^2 a^2 / 2 + V = k ; radial balance: rho a^2 - f' a - V' = 0
    A = np.array([[rho * a * a + v1, rho * rho * a], [a * a - f2 * a - v2, 2.0 * rho * a - f1]])
    if abs(np.linalg.det(A)) < 1e-10:
        raise DegenerateCylinder("circular family is not parametrized by energy here")
    rp, ap = np.linalg.solve(A, [1.0, 0.0])
    return float(rp), float(-2.0 * math.pi * ap / a**2)


def correction_term(Tprime: float, floor: float = T_PRIME_FLOOR) -> int:
    if not abs(Tprime) > floor:
        raise DegenerateCylinder(f"|T'| = {abs(Tprime):.3g} below the floor {floor:g}")
    return -1 if Tprime > 0 else 1


def cylinder_tangent(p, orb: CircularOrbit) -> np.ndarray:
    """xi(0) = d/dk of the initial point (r, theta, p_r, p_theta) along the family."""
    sys = as_system(p)
    rp, Tp = period_derivative_analytic(p, orb)
    ap = -Tp * orb.a**2 / (2.0 * math.pi)
    f1 = sys.fields(orb.rho)[1]
    return np.array([rp, 0.0, 0.0, 2.0 * orb.rho * orb.a * rp + orb.rho**2 * ap - f1 * rp])


@dataclass(frozen=True)
class OrbitCylinder:
    k: float
    samples: tuple[tuple[float, CircularOrbit], ...]
    Tprime_fd: float
    Tprime_analytic: float
    rhoprime_analytic: float
    chi: int
    epsilon: float

    @property
    def center(self) -> CircularOrbit:
        return self.samples[len(self.samples) // 2][1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "rho", "a", "T"])
            for kk, o in self.samples:
                w.writerow([repr(float(x)) for x in (kk, o.rho, o.a, o.T)])

    def summary(self) -> dict:
        return {
            "k": self.k,
            "epsilon": self.epsilon,
            "n_samples": len(self.samples),
            "Tprime_fd": self.Tprime_fd,
            "Tprime_analytic": self.Tprime_analytic,
            "rhoprime_analytic": self.rhoprime_analytic,
            "chi": self.chi,
        }


def _continue(p, ks, seed, halfwidth):
    out = []
    rho = seed
    for kk in ks:
        try:
            orb = find_circular_orbit(p, kk, rho, halfwidth=halfwidth)
        except (NoRoot, AmbiguousRoot) as exc:
            raise ContinuationBreakdown(f"continuation failed at k = {kk:.6g}: {exc}") from exc
        out.append(orb)
        rho = orb.rho
    return out


def orbit_cylinder(p, k: float, epsilon: float = 1e-3, n_samples: int = 9, rho_seed: float | None = None,
                   halfwidth: float = 0.05) -> OrbitCylinder:
    """Sample the circular family on k + s, s in [-eps, eps], continuing outward from k."""
    if n_samples < 5 or n_samples % 2 == 0:
        raise ValueError("n_samples must be odd and at least 5")
    if rho_seed is None:
        raise ValueError("rho_seed is required to pin the branch")
    center = find_circular_orbit(p, k, rho_seed, halfwidth=halfwidth)
    half = n_samples // 2
    s = np.linspace(-epsilon, epsilon, n_samples)
    up = _continue(p, k + s[half + 1:], center.rho, halfwidth)
    down = _continue(p, k + s[:half][::-1], center.rho, halfwidth)
    orbs = down[::-1] + [center] + up
    T = np.array([o.T for o in orbs])
    d2 = np.abs(np.diff(T, 2))
    if np.max(d2, initial=0.0) > 1e3 * (s[1] - s[0]) ** 2 * (1 + abs(T[half])):
        raise ContinuationBreakdown("period samples are not smooth; epsilon too large")
    # Richardson on central differences at h = eps and eps/2
    d_full = (T[-1] - T[0]) / (2 * epsilon)
    q = half // 2 if half % 2 == 0 else None
    if q is not None and q > 0:
        d_half = (T[half + q] - T[half - q]) / (2 * (s[half + q]))
        tp_fd = (4 * d_half - d_full) / 3
    else:
        tp_fd = (T[half + 1] - T[half - 1]) / (2 * s[half + 1])
    rp, tp = period_derivative_analytic(p, center)
    chi = correction_term(tp)
    if np.sign(tp_fd) != np.sign(tp):
        raise DegenerateCylinder("finite-difference and analytic T' disagree in sign")
    return OrbitCylinder(k, tuple(zip((k + s).tolist(), orbs)), float(tp_fd), tp, rp, chi, epsilon)


@dataclass(frozen=True)
class ScanRow:
    k: float
    rho: float
    a: float
    T: float
    Tprime: float
    chi: int | None
    status: str


def _step_to(p, orb: CircularOrbit, k_target: float, halfwidth: float) -> CircularOrbit:
    """Predictor-corrector steps along the branch, sized so the bracket keeps the root."""
    while orb.k != k_target:
        try:
            rp = period_derivative_analytic(p, orb)[0]
        except DegenerateCylinder:
            rp = 0.0
        dk = k_target - orb.k
        max_dk = 0.25 * halfwidth / max(abs(rp), 1e-12)
        if abs(dk) > max_dk:
            dk = math.copysign(max_dk, dk)
        kk = k_target if abs(k_target - orb.k - dk) < 1e-15 else orb.k + dk
        orb = find_circular_orbit(p, kk, orb.rho + rp * dk, halfwidth=halfwidth)
    return orb


def _scan_branch(p, start: CircularOrbit, ks, halfwidth):
    rows = []
    orb = start
    broken = False
    for kk in ks:
        if broken:
            rows.append(ScanRow(kk, math.nan, math.nan, math.nan, math.nan, None, "ContinuationBreakdown"))
            continue
        try:
            orb = _step_to(p, orb, kk, halfwidth)
        except (NoRoot, AmbiguousRoot):
            broken = True
            rows.append(ScanRow(kk, math.nan, math.nan, math.nan, math.nan, None, "ContinuationBreakdown"))
            continue
        try:
            _, tp = period_derivative_analytic(p, orb)
            chi, status = correction_term(tp), "ok"
        except DegenerateCylinder:
            tp, chi, status = math.nan, None, "DegenerateCylinder"
        rows.append(ScanRow(kk, float(orb.rho), float(orb.a), float(orb.T), float(tp), chi, status))
    return rows


def scan_energy(p, k_values, rho_seed: float, halfwidth: float = 0.05, k_seed: float | None = None) -> list[ScanRow]:
    """Continue the circular branch through sorted k values; failures are row-marked.

    ``rho_seed`` pins the branch at ``k_seed`` (default: the smallest k).
    Continuation runs outward from there in both directions.
    """
    ks = sorted(float(x) for x in k_values)
    if not ks:
        return []
    k0 = ks[0] if k_seed is None else float(k_seed)
    try:
        start = find_circular_orbit(p, k0, rho_seed, halfwidth=halfwidth)
    except (NoRoot, AmbiguousRoot) as exc:
        raise ContinuationBreakdown(f"no circular orbit near rho = {rho_seed} at k = {k0}") from exc
    up = [kk for kk in ks if kk >= k0]
    down = [kk for kk in ks if kk < k0][::-1]
    return _scan_branch(p, start, down, halfwidth)[::-1] + _scan_branch(p, start, up, halfwidth)


def write_scan_csv(rows, path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(["k", "rho", "a", "T", "Tprime", "chi", "status"])
        for r in rows:
            chi = "" if r.chi is None else str(r.chi)
            w.writerow([repr(r.k), repr(r.rho), repr(r.a), repr(r.T), repr(r.Tprime), chi, r.status])
    finally:
        if own:
            fh.close()


def refine_periodic_orbit(p, guess: LagrangianState, T_guess: float, energy_level: float | None = None,
                          winding: int = 1, n_steps: int = 4096, max_iter: int = 50, tol: float = 1e-10):
    """Gauss-Newton shooting on (r0, thetadot0, T) with rdot0 = 0, theta0 = 0.

    Residual: (E - k, r(T) - r0, rdot(T), theta(T) - 2 pi w).
    """
    sys = as_system(p)
    k = energy(p, guess) if energy_level is None else float(energy_level)
    x = np.array([guess.r, guess.thetadot, float(T_guess)])

    def residual(x, with_jac):
        s0 = LagrangianState(x[0], 0.0, 0.0, x[1])
        traj = integrate_orbit(sys, s0, x[2], n_steps, tol=1e-6)
        y = traj.states[-1]
        res = np.array([energy(sys, s0) - k, y[0] - x[0], y[2], y[1] - 2 * math.pi * winding])
        if not with_jac:
            return res, None
        Phi = linearized_flow(sys, traj).lagrangian[-1]
        v1 = sys.fields(x[0])[4]
        fT = np.array(_rhs(sys, list(y)))
        J = np.zeros((4, 3))
        J[0] = [x[0] * x[1] ** 2 + v1, x[0] ** 2 * x[1], 0.0]
        J[1] = [Phi[0, 0] - 1.0, Phi[0, 3], fT[0]]
        J[2] = [Phi[2, 0], Phi[2, 3], fT[2]]
        J[3] = [Phi[1, 0], Phi[1, 3], fT[1]]
        return res, J

    try:
        res, _ = residual(x, False)
        if np.max(np.abs(res[1:])) > 0.1 or abs(res[0]) > 0.1:
            raise NoConvergence(f"seed closure defect {np.max(np.abs(res)):.3g} > 0.1: outside the basin")
        for _ in range(max_iter):
            if np.max(np.abs(res)) <= tol:
                return LagrangianState(x[0], 0.0, 0.0, x[1]), float(x[2])
            res, J = residual(x, True)
            if np.max(np.abs(res)) <= tol:
                return LagrangianState(x[0], 0.0, 0.0, x[1]), float(x[2])
            dx = np.linalg.lstsq(J, -res, rcond=None)[0]
            x = x + dx
            res, _ = residual(x, False)
    except LeftDomain as exc:
        raise NoConvergence(f"shooting left the domain: {exc}") from exc
    raise NoConvergence(f"no convergence after {max_iter} iterations (defect {np.max(np.abs(res)):.3g})")
