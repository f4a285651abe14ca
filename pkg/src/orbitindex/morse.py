"""Discretised free-time and fixed-period action functionals and their Morse indices.

A loop is N nodes (r_i, theta_i) at t_i = i/N, t in [0, 1], with
theta_N = theta_0 + 2 pi w.  Segment i joins node i to node i+1 and uses
its midpoint radius m_i.  The discrete action is

    S = sum_i |dq_i|^2 / (2 T dt)  -  f(m_i) dtheta_i  -  T dt V(m_i)  +  T k

where |dq|^2 = dr^2 + m^2 dtheta^2.  The magnetic term is the line integral
of the primitive -f dtheta.  Circular orbits are exact discrete critical
points for every N, and so is the circular family in k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BandAmbiguity, NotCritical
from .model import as_system
from .orbits import CircularOrbit, correction_term, period_derivative_analytic


@dataclass(frozen=True)
class DiscreteLoop:
    r: np.ndarray
    theta: np.ndarray
    T: float
    k: float
    winding: int = 1

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        if self.r.shape != self.theta.shape or self.r.ndim != 1:
            raise ValueError("r and theta must be 1-d arrays of equal length")
        if int(self.winding) != self.winding:
            raise ValueError("winding must be an integer")
        if np.any(self.r <= 0.05) or np.any(self.r >= 3.95):
            raise ValueError("loop leaves r in (0.05, 3.95)")

    @property
    def N(self) -> int:
        return len(self.r)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.r, self.theta, [self.T]])

    def with_vector(self, x: np.ndarray) -> "DiscreteLoop":
        n = self.N
        return DiscreteLoop(x[:n], x[n : 2 * n], float(x[2 * n]), self.k, self.winding)


def circular_loop(orb: CircularOrbit, N: int, winding: int = 1) -> DiscreteLoop:
    i = np.arange(N)
    return DiscreteLoop(np.full(N, orb.rho), 2 * math.pi * winding * i / N, orb.T, orb.k, winding)


def _segments(loop: DiscreteLoop):
    r, th = loop.r, loop.theta
    r_next = np.roll(r, -1)
    th_next = np.roll(th, -1)
    th_next[-1] += 2 * math.pi * loop.winding
    return r_next - r, th_next - th, 0.5 * (r + r_next)


def _fields(sys, m):
    f, f1, f2 = sys.profile.values(m)
    if sys.potential is None:
        z = np.zeros_like(m)
        return f, f1, f2, z, z, z
    v = np.array([sys.potential(x) for x in m]).T
    return f, f1, f2, v[0], v[1], v[2]


def discrete_action_fixed(p, loop: DiscreteLoop) -> float:
    """S_k evaluated at (q, T); the fixed-period functional is this at frozen T."""
    sys = as_system(p)
    N, T = loop.N, loop.T
    dt = 1.0 / N
    dr, dth, m = _segments(loop)
    f, _, _, v, _, _ = _fields(sys, m)
    kin = np.sum(dr**2 + m**2 * dth**2) / (2 * T * dt)
    return float(kin - np.sum(f * dth) - T * dt * np.sum(v) + T * loop.k)


discrete_action = discrete_action_fixed


def _local_derivatives(sys, loop):
    """Gradient and Hessian of each segment term in z = (dr, dtheta, m, T)."""
    N, T = loop.N, loop.T
    dt = 1.0 / N
    c = 0.5 * N
    dr, dth, m = _segments(loop)
    f, f1, f2, v, v1, v2 = _fields(sys, m)
    q2 = dr**2 + m**2 * dth**2
    g = np.stack(
        [
            2 * c * dr / T,
            2 * c * m**2 * dth / T - f,
            2 * c * m * dth**2 / T - f1 * dth - v1 * T * dt,
            -c * q2 / T**2 - v * dt + loop.k / N,
        ],
        axis=1,
    )
    H = np.zeros((N, 4, 4))
    H[:, 0, 0] = 2 * c / T
    H[:, 1, 1] = 2 * c * m**2 / T
    H[:, 2, 2] = 2 * c * dth**2 / T - f2 * dth - v2 * T * dt
    H[:, 1, 2] = H[:, 2, 1] = 4 * c * m * dth / T - f1
    H[:, 0, 3] = H[:, 3, 0] = -2 * c * dr / T**2
    H[:, 1, 3] = H[:, 3, 1] = -2 * c * m**2 * dth / T**2
    H[:, 2, 3] = H[:, 3, 2] = -2 * c * m * dth**2 / T**2 - v1 * dt
    H[:, 3, 3] = 2 * c * q2 / T**3
    return g, H


def _local_map(N):
    """Global indices of (r_i, r_{i+1}, th_i, th_{i+1}, T) and dz/dx_loc."""
    i = np.arange(N)
    j = (i + 1) % N
    idx = np.stack([i, j, N + i, N + j, np.full(N, 2 * N)], axis=1)
    A = np.array(
        [[-1.0, 1.0, 0.0, 0.0, 0.0], [0.0, 0.0, -1.0, 1.0, 0.0], [0.5, 0.5, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0, 1.0]]
    )
    return idx, A


def action_gradient(p, loop: DiscreteLoop) -> np.ndarray:
    """Gradient in (r_0..r_{N-1}, theta_0..theta_{N-1}, T)."""
    sys = as_system(p)
    N = loop.N
    g, _ = _local_derivatives(sys, loop)
    idx, A = _local_map(N)
    out = np.zeros(2 * N + 1)
    np.add.at(out, idx, g @ A)
    return out


@dataclass(frozen=True)
class HessianPair:
    fixed: np.ndarray
    free: np.ndarray
    method: str
    N: int


def _analytic_free_hessian(sys, loop):
    N = loop.N
    _, H = _local_derivatives(sys, loop)
    idx, A = _local_map(N)
    Hl = np.einsum("ai,nab,bj->nij", A, H, A)
    out = np.zeros((2 * N + 1, 2 * N + 1))
    np.add.at(out, (idx[:, :, None], idx[:, None, :]), Hl)
    return out


def _fd_free_hessian(p, loop, step=1e-5):
    x0 = loop.vector()
    n = len(x0)
    out = np.empty((n, n))
    for j in range(n):
        h = step * (loop.T if j == n - 1 else max(1.0, abs(x0[j])))
        e = np.zeros(n)
        e[j] = h
        out[:, j] = (action_gradient(p, loop.with_vector(x0 + e)) - action_gradient(p, loop.with_vector(x0 - e))) / (2 * h)
    return out


def hessians(p, loop: DiscreteLoop, method: str = "analytic", grad_tol: float = 1e-6) -> HessianPair:
    """Hessians of the fixed-period (2N x 2N) and free-time (2N+1 square) actions.

    ``method="fd"`` differences the analytic gradient (step 1e-5, scaled per
    coordinate, 1e-5 T for the period) instead of assembling exact entries.
    """
    sys = as_system(p)
    gnorm = float(np.max(np.abs(action_gradient(sys, loop))))
    if gnorm > grad_tol:
        raise NotCritical(f"gradient norm {gnorm:.3g} > {grad_tol:g}")
    if method == "analytic":
        free = _analytic_free_hessian(sys, loop)
    elif method == "fd":
        free = _fd_free_hessian(sys, loop)
    else:
        raise ValueError(f"unknown method {method!r}")
    free = 0.5 * (free + free.T)
    n = 2 * loop.N
    return HessianPair(free[:n, :n].copy(), free, method, loop.N)


@dataclass(frozen=True)
class InertiaResult:
    n_minus: int
    n_zero: int
    n_plus: int
    margin: float
    band: float


def inertia(Hsym: np.ndarray, null_band: float | None = None, rel_band: float = 1e-9) -> InertiaResult:
    """Eigenvalue sign counts; |lambda| < band counts as null.

    Default band: rel_band * max |lambda|.  Raises BandAmbiguity if an
    eigenvalue lies within a factor 3 of the band edge.
    """
    H = np.asarray(Hsym, dtype=float)
    if np.max(np.abs(H - H.T), initial=0.0) > 1e-9 * max(1.0, float(np.max(np.abs(H)))):
        raise ValueError("matrix is not symmetric")
    ev = np.linalg.eigvalsh(0.5 * (H + H.T))
    scale = float(np.max(np.abs(ev))) if ev.size else 0.0
    band = rel_band * scale if null_band is None else float(null_band)
    a = np.abs(ev)
    if np.any((a > band / 3) & (a < band * 3)):
        raise BandAmbiguity(f"eigenvalue within a factor 3 of the null band {band:.3g}")
    zero = a < band
    outside = a[~zero]
    margin = float(outside.min()) if outside.size else math.inf
    return InertiaResult(int(np.sum(ev < -band)), int(np.sum(zero)), int(np.sum(ev > band)), margin, band)


def null_vector(Hsym: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(Hsym)
    return v[:, np.argmin(np.abs(w))]


def cylinder_vector(p, orb: CircularOrbit, N: int) -> np.ndarray:
    """Discretised (zeta_k, T'(k)): rho' in the r slots, 0 in theta slots, T' last."""
    rp, tp = period_derivative_analytic(p, orb)
    return np.concatenate([np.full(N, rp), np.zeros(N), [tp]])


@dataclass(frozen=True)
class IndexTheoremReport:
    N: int
    i_T: int
    i_free: int
    chi: int
    fixed: InertiaResult
    free: InertiaResult
    holds: bool

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "i_T": self.i_T,
            "i_free": self.i_free,
            "chi": self.chi,
            "theorem_holds": self.holds,
            "margins": {"fixed": self.fixed.margin, "free": self.free.margin},
            "n_zero": {"fixed": self.fixed.n_zero, "free": self.free.n_zero},
        }


def verify_index_theorem(p, orb: CircularOrbit, N: int, winding: int = 1) -> IndexTheoremReport:
    """i_free - i_T = (1 - chi)/2 with i = negative inertia of the discrete Hessians."""
    loop = circular_loop(orb, N, winding)
    hp = hessians(p, loop)
    fx, fr = inertia(hp.fixed), inertia(hp.free)
    chi = correction_term(period_derivative_analytic(p, orb)[1])
    holds = fr.n_minus - fx.n_minus == (1 - chi) // 2
    return IndexTheoremReport(N, fx.n_minus, fr.n_minus, chi, fx, fr, holds)


@dataclass(frozen=True)
class DuistermaatReport:
    i_T: int
    mu_cz: Fraction
    holds: bool


def duistermaat_check(i_T: int, mu_cz: Fraction) -> DuistermaatReport:
    return DuistermaatReport(i_T, Fraction(mu_cz), Fraction(i_T) == Fraction(mu_cz) - Fraction(1, 2))


# Fourier oracle


def fourier_index_jacobi(F: float, K: float, T: float, M_modes: int) -> int:
    """Negative inertia of Q = int (x' + F y)^2 + y'^2 - K y^2 over M_modes Fourier modes."""
    count = 1 if F * F - K < 0 else 0
    for j in range(1, M_modes + 1):
        w = 2 * math.pi * j / T
        Hj = np.array([[w * w, 1j * w * F], [-1j * w * F, F * F + w * w - K]])
        count += 2 * int(np.sum(np.linalg.eigvalsh(Hj) < 0))
    return count


def fourier_index_polar(L_rr: float, L_rtd: float, L_tdtd: float, T: float, M_modes: int) -> int:
    """Same count for the constant-coefficient second variation in (dr, dtheta)."""
    count = 1 if L_rr < 0 else 0
    for j in range(1, M_modes + 1):
        w = 2 * math.pi * j / T
        Hj = np.array([[w * w + L_rr, 1j * w * L_rtd], [-1j * w * L_rtd, L_tdtd * w * w]])
        count += 2 * int(np.sum(np.linalg.eigvalsh(Hj) < 0))
    return count


def fourier_index_oracle(p, orb: CircularOrbit, M_modes: int = 64) -> int:
    """Independent i_T for a circular orbit from the per-mode second variation."""
    sys = as_system(p)
    _, f1, f2, _, _, v2 = sys.fields(orb.rho)
    rho, a = orb.rho, orb.a
    return fourier_index_polar(a * a - f2 * a - v2, 2 * rho * a - f1, rho * rho, orb.T, M_modes)


@dataclass(frozen=True)
class ControlReport:
    orbit: CircularOrbit
    chi: int
    i_T: int
    i_free: int
    fourier_i_T: int
    holds: bool


def control_system():
    """f = 0 with V(r) = r^4 / 4: circular orbit rho = 1, a = 1 at k = 3/4."""
    from .model import RadialPotential, RadialSystem
    from .profile import zero_profile

    return RadialSystem(zero_profile(), RadialPotential(((4, 0.25),)))


def control_case_radial(N: int = 512) -> ControlReport:
    from .orbits import find_circular_orbit

    sys = control_system()
    orb = find_circular_orbit(sys, 0.75, 1.0)
    rep = verify_index_theorem(sys, orb, N)
    fi = fourier_index_oracle(sys, orb)
    ok = rep.chi == 1 and rep.i_free == rep.i_T and fi == rep.i_T
    return ControlReport(orb, rep.chi, rep.i_T, rep.i_free, fi, ok)
