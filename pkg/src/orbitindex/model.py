"""Polar-chart Lagrangian and Hamiltonian of the magnetic system on the disk.

L(r, theta, rdot, thetadot) = 1/2 (rdot^2 + r^2 thetadot^2) - f(r) thetadot - V(r)

V is zero for the magnetic scenarios; a radial potential is only used by the
non-magnetic control system.  Momenta: p_r = rdot, p_theta = r^2 thetadot - f.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .profile import DISK_RADIUS, MagneticProfile, evaluate


@dataclass(frozen=True)
class RadialPotential:
    """V(r) = sum_n c_n r^n, stored as {power: coefficient}."""

    terms: tuple[tuple[int, float], ...]

    def __call__(self, r: float) -> tuple[float, float, float]:
        v = v1 = v2 = 0.0
        for n, c in self.terms:
            v += c * r**n
            if n >= 1:
                v1 += n * c * r ** (n - 1)
            if n >= 2:
                v2 += n * (n - 1) * c * r ** (n - 2)
        return v, v1, v2


@dataclass(frozen=True)
class RadialSystem:
    profile: MagneticProfile
    potential: RadialPotential | None = None

    def fields(self, r: float):
        """(f, f', f'', V, V', V'') at r."""
        f, f1, f2 = evaluate(self.profile, r)
        if self.potential is None:
            return f, f1, f2, 0.0, 0.0, 0.0
        return (f, f1, f2) + self.potential(r)


def as_system(p) -> RadialSystem:
    if isinstance(p, RadialSystem):
        return p
    if isinstance(p, MagneticProfile):
        return RadialSystem(p)
    raise TypeError(f"expected MagneticProfile or RadialSystem, got {type(p).__name__}")


def _check_r(r: float) -> None:
    if not 0.0 < r < DISK_RADIUS:
        raise DomainError(f"r = {r} outside the disk (0, {DISK_RADIUS})")


@dataclass(frozen=True)
class LagrangianState:
    r: float
    theta: float
    rdot: float
    thetadot: float

    def __post_init__(self):
        _check_r(self.r)

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.theta, self.rdot, self.thetadot])

    @classmethod
    def from_array(cls, y) -> "LagrangianState":
        return cls(*(float(v) for v in y))


@dataclass(frozen=True)
class HamiltonianState:
    r: float
    theta: float
    p_r: float
    p_theta: float

    def __post_init__(self):
        _check_r(self.r)

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.theta, self.p_r, self.p_theta])


def kinetic_energy(s: LagrangianState) -> float:
    return 0.5 * (s.rdot**2 + s.r**2 * s.thetadot**2)


def energy(p, s: LagrangianState) -> float:
    """Kinetic energy plus the radial potential (if any)."""
    sys = as_system(p)
    return kinetic_energy(s) + sys.fields(s.r)[3]


def lagrangian(p, s: LagrangianState) -> float:
    f, _, _, v, _, _ = as_system(p).fields(s.r)
    return kinetic_energy(s) - f * s.thetadot - v


def legendre(p, s: LagrangianState) -> HamiltonianState:
    f = as_system(p).fields(s.r)[0]
    return HamiltonianState(s.r, s.theta, s.rdot, s.r**2 * s.thetadot - f)


def inverse_legendre(p, h: HamiltonianState) -> LagrangianState:
    f = as_system(p).fields(h.r)[0]
    return LagrangianState(h.r, h.theta, h.p_r, (h.p_theta + f) / h.r**2)


def hamiltonian(p, h: HamiltonianState) -> float:
    """H = p_r^2/2 + (p_theta + f)^2 / (2 r^2) + V."""
    f, _, _, v, _, _ = as_system(p).fields(h.r)
    return 0.5 * h.p_r**2 + (h.p_theta + f) ** 2 / (2.0 * h.r**2) + v


def hamiltonian_gradient(p, h: HamiltonianState) -> np.ndarray:
    """(dH/dr, dH/dtheta, dH/dp_r, dH/dp_theta)."""
    f, f1, _, _, v1, _ = as_system(p).fields(h.r)
    w = h.p_theta + f
    r = h.r
    return np.array([-(w**2) / r**3 + w * f1 / r**2 + v1, 0.0, h.p_r, w / r**2])


def hamiltonian_vector_field(p, h: HamiltonianState) -> np.ndarray:
    g = hamiltonian_gradient(p, h)
    return np.array([g[2], g[3], -g[0], -g[1]])


def momentum_integral(p, s: LagrangianState) -> float:
    return s.r**2 * s.thetadot - as_system(p).fields(s.r)[0]


def mane_bounds(p: MagneticProfile, grid=None) -> tuple[float, float]:
    """(1/2 sup (f/r)^2, 1/2 sup f^2) over the profile grid."""
    r = p.grid if grid is None else np.asarray(grid, dtype=float)
    f = p.values(r)[0]
    return 0.5 * float(np.max((f / r) ** 2)), 0.5 * float(np.max(f**2))


def mane_upper_bound(p: MagneticProfile) -> float:
    return mane_bounds(p)[0]
