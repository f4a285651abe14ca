"""Euler-Lagrange flow, variational flow and the transverse Jacobi system.

All integrations use the classical fixed-step RK4 scheme.  The variational
equations are integrated together with the orbit using the analytic
Jacobian of the vector field, which needs f' and f'' only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConservationFailure, DomainError, LeftDomain
from .model import LagrangianState, as_system

R_MIN, R_MAX = 0.05, 3.95

# canonical symplectic form for (r, theta, p_r, p_theta): z' = J grad H
J_CANON = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])


def _rhs(sys, y):
    r, _, rd, td = y
    if r <= 0.0:
        raise DomainError(f"r = {r} <= 0")
    _, f1, _, _, v1, _ = sys.fields(r)
    return (rd, td, td * (r * td - f1) - v1, (f1 * rd - 2.0 * r * rd * td) / (r * r))


def _jacobian(sys, y) -> np.ndarray:
    r, _, rd, td = y
    _, f1, f2, _, v1, v2 = sys.fields(r)
    r2 = r * r
    return np.array(
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [td * td - f2 * td - v2, 0.0, 0.0, 2.0 * r * td - f1],
            [
                (f2 * rd - 2.0 * rd * td) / r2 - 2.0 * (f1 * rd - 2.0 * r * rd * td) / (r2 * r),
                0.0,
                (f1 - 2.0 * r * td) / r2,
                -2.0 * rd / r,
            ],
        ]
    )


def el_vector_field(p, s) -> np.ndarray:
    """(rdot, thetadot, rddot, thetaddot) at a state (LagrangianState or 4-array)."""
    y = s.as_array() if isinstance(s, LagrangianState) else np.asarray(s, dtype=float)
    return np.array(_rhs(as_system(p), [float(v) for v in y]))


def el_jacobian(p, s) -> np.ndarray:
    y = s.as_array() if isinstance(s, LagrangianState) else np.asarray(s, dtype=float)
    return _jacobian(as_system(p), [float(v) for v in y])


def _energy(sys, y) -> float:
    return 0.5 * (y[2] ** 2 + y[0] ** 2 * y[3] ** 2) + sys.fields(y[0])[3]


def _momentum(sys, y) -> float:
    return y[0] ** 2 * y[3] - sys.fields(y[0])[0]


def legendre_jacobian(sys, y) -> np.ndarray:
    """d(r, theta, p_r, p_theta) / d(r, theta, rdot, thetadot)."""
    r, _, _, td = y
    f1 = sys.fields(r)[1]
    P = np.eye(4)
    P[3, 0] = 2.0 * r * td - f1
    P[3, 3] = r * r
    return P


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n+1, 4): r, theta, rdot, thetadot
    step: float
    energy_drift: float
    momentum_drift: float

    def state(self, i: int) -> LagrangianState:
        return LagrangianState.from_array(self.states[i])

    @property
    def period(self) -> float:
        return float(self.times[-1])

    def to_csv(self, path, p) -> None:
        sys = as_system(p)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "r", "theta", "rdot", "thetadot", "E", "J"])
            for t, y in zip(self.times, self.states):
                w.writerow([repr(float(x)) for x in (t, *y, _energy(sys, y), _momentum(sys, y))])


@dataclass(frozen=True)
class LinearizedPath:
    """Fundamental solutions along a trajectory.

    ``matrices`` are in canonical coordinates (r, theta, p_r, p_theta) and
    preserve ``J_CANON``.  ``lagrangian`` holds the same flow in
    (r, theta, rdot, thetadot) coordinates.
    """

    times: np.ndarray
    matrices: np.ndarray
    lagrangian: np.ndarray
    frame: str = "canonical (r, theta, p_r, p_theta)"

    def symplectic_defect(self) -> float:
        M = self.matrices
        return float(np.max(np.abs(np.einsum("kji,jl,klm->kim", M, J_CANON, M) - J_CANON)))


def _check_domain(y, t):
    if not R_MIN < y[0] < R_MAX:
        raise LeftDomain(f"r = {y[0]:.6g} left ({R_MIN}, {R_MAX}) at t = {t:.6g}")


def integrate_orbit(p, s0, T: float, n_steps: int = 4096, tol: float = 1e-8) -> Trajectory:
    """RK4 with ``n_steps`` uniform steps on [0, T]."""
    if n_steps < 100:
        raise ValueError("n_steps must be at least 100")
    sys = as_system(p)
    y = [float(v) for v in (s0.as_array() if isinstance(s0, LagrangianState) else s0)]
    h = T / n_steps
    out = np.empty((n_steps + 1, 4))
    out[0] = y
    _check_domain(y, 0.0)
    for i in range(n_steps):
        k1 = _rhs(sys, y)
        k2 = _rhs(sys, [a + 0.5 * h * b for a, b in zip(y, k1)])
        k3 = _rhs(sys, [a + 0.5 * h * b for a, b in zip(y, k2)])
        k4 = _rhs(sys, [a + h * b for a, b in zip(y, k3)])
        y = [a + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        _check_domain(y, (i + 1) * h)
        out[i + 1] = y
    e = np.array([_energy(sys, z) for z in out])
    j = np.array([_momentum(sys, z) for z in out])
    drift = float(np.max(np.abs(e - e[0])))
    if drift > 100.0 * tol:
        raise ConservationFailure(f"energy drift {drift:.3g} exceeds 100 x {tol:g}")
    times = np.linspace(0.0, T, n_steps + 1)
    return Trajectory(times, out, h, drift, float(np.max(np.abs(j - j[0]))))


def linearized_flow(p, traj: Trajectory) -> LinearizedPath:
    """Variational equations re-integrated alongside the orbit on the same grid."""
    sys = as_system(p)
    h = traj.step
    n = len(traj.times) - 1
    y = [float(v) for v in traj.states[0]]
    Phi = np.eye(4)
    lag = np.empty((n + 1, 4, 4))
    can = np.empty((n + 1, 4, 4))
    lag[0] = Phi
    P0inv = np.linalg.inv(legendre_jacobian(sys, y))
    can[0] = np.eye(4)
    for i in range(n):
        k1 = _rhs(sys, y)
        A1 = _jacobian(sys, y)
        y2 = [a + 0.5 * h * b for a, b in zip(y, k1)]
        k2 = _rhs(sys, y2)
        A2 = _jacobian(sys, y2)
        y3 = [a + 0.5 * h * b for a, b in zip(y, k2)]
        k3 = _rhs(sys, y3)
        A3 = _jacobian(sys, y3)
        y4 = [a + h * b for a, b in zip(y, k3)]
        k4 = _rhs(sys, y4)
        A4 = _jacobian(sys, y4)
        L1 = A1 @ Phi
        L2 = A2 @ (Phi + 0.5 * h * L1)
        L3 = A3 @ (Phi + 0.5 * h * L2)
        L4 = A4 @ (Phi + h * L3)
        Phi = Phi + h / 6.0 * (L1 + 2 * L2 + 2 * L3 + L4)
        y = [a + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        lag[i + 1] = Phi
        can[i + 1] = legendre_jacobian(sys, y) @ Phi @ P0inv
    return LinearizedPath(traj.times.copy(), can, lag)


@dataclass(frozen=True)
class JacobiData:
    times: np.ndarray
    F_along: np.ndarray
    K_along: np.ndarray


def jacobi_coefficients(p, traj: Trajectory) -> JacobiData:
    """F = -f'(r)/r and K = <grad F, i gamma'> + F^2 along the orbit."""
    prof = as_system(p).profile
    r = traj.states[:, 0]
    td = traj.states[:, 3]
    _, f1, f2 = prof.values(r)
    F = -f1 / r
    K = td * f2 - td * f1 / r + F**2
    return JacobiData(traj.times.copy(), F, K)


@dataclass(frozen=True)
class JacobiSolution:
    times: np.ndarray
    normal: np.ndarray  # (n+1, 2, 2) on (y, ydot)
    full: np.ndarray  # (n+1, 4, 4) on (x, y, ydot, c)


def integrate_jacobi(jd: JacobiData, T: float | None = None, n_steps: int | None = None) -> JacobiSolution:
    """Fundamental solution of x' = c - F y, y'' = F c - K y, c' = 0.

    With c = 0 this is the displayed pair x' + F y = 0, y'' + K y = 0.
    """
    T = float(jd.times[-1]) if T is None else float(T)
    n = len(jd.times) - 1 if n_steps is None else int(n_steps)
    const = np.ptp(jd.F_along) == 0.0 and np.ptp(jd.K_along) == 0.0
    if const:
        Ff, Kf = float(jd.F_along[0]), float(jd.K_along[0])

        def coef(t):
            return Ff, Kf
    else:
        Fs, Ks = CubicSpline(jd.times, jd.F_along), CubicSpline(jd.times, jd.K_along)

        def coef(t):
            return float(Fs(t)), float(Ks(t))

    def A(t):
        F, K = coef(t)
        return np.array([[0.0, -F, 0.0, 1.0], [0.0, 0.0, 1.0, 0.0], [0.0, -K, 0.0, F], [0.0, 0.0, 0.0, 0.0]])

    h = T / n
    X = np.eye(4)
    full = np.empty((n + 1, 4, 4))
    full[0] = X
    for i in range(n):
        t = i * h
        A1, A2, A4 = A(t), A(t + 0.5 * h), A(t + h)
        L1 = A1 @ X
        L2 = A2 @ (X + 0.5 * h * L1)
        L3 = A2 @ (X + 0.5 * h * L2)
        L4 = A4 @ (X + h * L3)
        X = X + h / 6.0 * (L1 + 2 * L2 + 2 * L3 + L4)
        full[i + 1] = X
    times = np.linspace(0.0, T, n + 1)
    return JacobiSolution(times, full[:, 1:3, 1:3].copy(), full)


def jacobi_rotation(K: float, t: float) -> np.ndarray:
    """Closed-form (y, ydot) solution for constant K."""
    if K > 0:
        w = np.sqrt(K)
        return np.array([[np.cos(w * t), np.sin(w * t) / w], [-w * np.sin(w * t), np.cos(w * t)]])
    if K == 0:
        return np.array([[1.0, t], [0.0, 1.0]])
    w = np.sqrt(-K)
    return np.array([[np.cosh(w * t), np.sinh(w * t) / w], [w * np.sinh(w * t), np.cosh(w * t)]])


def circular_to_jacobi(rho: float, a: float) -> np.ndarray:
    """Map (dr, dtheta, drdot, dthetadot) to (x, y, ydot, c) on a circular orbit."""
    return np.array(
        [[0.0, rho, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0], [0.0, 0.0, -1.0, 0.0], [a, 0.0, 0.0, rho]]
    )
