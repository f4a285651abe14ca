"""Radial magnetic profile f with sigma = -f'(r) dr ^ dtheta on the disk r < 4.

The profile is built from its derivative g = f'. On [a, m] g is a C2 quintic
Hermite spline through the anchors (value f', slope f''), exactly linear on a
small window around each anchor, rising to a peak at a shape knot p and falling back to zero at a second
shape knot m.  On [m, b] g is a negative Hermite bump whose area cancels
the positive part.  Integrating gives a C3 piecewise sextic f which is
nonnegative by construction: it increases on [a, m], decreases on [m, b]
and ends at 0.  The linear windows keep the circular-orbit period T(k) smooth
for orbits near an anchor radius.
"""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.interpolate import BPoly, PPoly

from .errors import DomainError, InfeasibleSpec, ValidationFailure

STRICT = "strict_sup_f_lt_1"
WEIGHTED = "weighted_sup_f_over_r_lt_1"
GLUING_TOL = 1e-9
FD_STEP = 1e-6
DISK_RADIUS = 4.0


@dataclass(frozen=True)
class ProfileSpec:
    support: tuple[float, float]
    anchors: tuple[tuple[float, float, float], ...] = ()
    smoothness_order: int = 2
    sup_bound_mode: str = STRICT
    # shape knots, as fractions of (b - last anchor)
    peak_frac: float = 0.25
    mid_frac: float = 0.5
    peak_gain: float = 0.3
    # f' is exactly linear on [r - w, r + w] around each anchor
    flat_halfwidth: float = 0.05

    def __post_init__(self):
        a, b = (float(x) for x in self.support)
        object.__setattr__(self, "support", (a, b))
        object.__setattr__(
            self, "anchors", tuple(sorted((float(r), float(d1), float(d2)) for r, d1, d2 in self.anchors))
        )
        if not 1.0 < a < b < 3.0:
            raise ValidationFailure(f"support {self.support} must satisfy 1 < a < b < 3")
        if self.sup_bound_mode not in (STRICT, WEIGHTED):
            raise ValidationFailure(f"unknown sup_bound_mode {self.sup_bound_mode!r}")
        if self.smoothness_order < 2:
            raise ValidationFailure("smoothness_order must be >= 2")
        radii = [r for r, _, _ in self.anchors]
        if any(not a < r < b for r in radii):
            raise ValidationFailure("anchor radii must lie strictly inside the support")
        if len(set(radii)) != len(radii):
            raise InfeasibleSpec("more than one (f', f'') pair at the same radius")
        if not 0.0 < self.peak_frac < self.mid_frac < 1.0:
            raise ValidationFailure("need 0 < peak_frac < mid_frac < 1")
        if self.flat_halfwidth < 0.0:
            raise ValidationFailure("flat_halfwidth must be nonnegative")
        if self.peak_gain <= 0.0:
            raise ValidationFailure("peak_gain must be positive")


@dataclass(frozen=True)
class MagneticProfile:
    """Piecewise polynomial f on knots; zero outside [knots[0], knots[-1]].

    ``coeffs[i]`` holds ascending power coefficients of f on piece i in the
    local variable u = r - knots[i].
    """

    spec: ProfileSpec
    knots: np.ndarray
    coeffs: np.ndarray
    grid: np.ndarray = field(repr=False)
    sup_mode_used: str = STRICT
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "_knot_list", [float(k) for k in self.knots])
        rows = [[float(c) for c in row] for row in self.coeffs]
        d1 = [[j * c[j] for j in range(1, len(c))] for c in rows]
        d2 = [[j * c[j] for j in range(1, len(c))] for c in d1]
        object.__setattr__(self, "_coef_list", rows)
        object.__setattr__(self, "_horner", [(c[::-1], e[::-1], q[::-1]) for c, e, q in zip(rows, d1, d2)])

    @property
    def support(self):
        return self.spec.support

    def __call__(self, r: float) -> tuple[float, float, float]:
        return evaluate(self, r)

    def piece_eval(self, r: float, i: int) -> tuple[float, float, float]:
        """Evaluate the polynomial of piece i at r (no range check)."""
        u = r - self._knot_list[i]
        out = []
        for cs in self._horner[i]:
            acc = 0.0
            for c in cs:
                acc = acc * u + c
            out.append(self.scale * acc)
        return out[0], out[1], out[2]

    def values(self, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorised (f, f', f'') on an array of radii."""
        r = np.asarray(r, dtype=float)
        if len(self._coef_list) == 0:
            return tuple(np.zeros_like(r) for _ in range(3))
        k = self.knots
        idx = np.clip(np.searchsorted(k, r, side="right") - 1, 0, len(k) - 2)
        idx = np.where((r >= k[0]) & (r < k[-1]), idx, -1)
        return self.values_on_pieces(r, idx)

    def values_on_pieces(self, r, idx) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(f, f', f'') using the polynomial of piece idx[j] at r[j]; idx -1 means zero."""
        r = np.asarray(r, dtype=float)
        idx = np.asarray(idx)
        out = [np.zeros_like(r) for _ in range(3)]
        live = idx >= 0
        if len(self._coef_list) == 0 or not np.any(live):
            return tuple(out)
        u = r[live] - self.knots[idx[live]]
        c = self.coeffs[idx[live]] * self.scale
        deg = c.shape[1] - 1
        for order in range(3):
            acc = np.zeros_like(u)
            for j in range(deg, order - 1, -1):
                fac = 1.0
                for m in range(order):
                    fac *= j - m
                acc = acc * u + fac * c[:, j]
            out[order][live] = acc
        return tuple(out)

    def scaled(self, factor: float) -> "MagneticProfile":
        """factor * f; the result need not satisfy the profile constraints."""
        return replace(self, scale=self.scale * float(factor))

    def to_csv(self, path, r=None) -> None:
        r = self.grid if r is None else np.asarray(r, dtype=float)
        f, f1, f2 = self.values(r)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "f", "fp", "fpp"])
            for row in zip(r, f, f1, f2):
                w.writerow([repr(float(x)) for x in row])


def default_grid(n: int = 20000) -> np.ndarray:
    return np.arange(1, n + 1) * (DISK_RADIUS / (n + 1))


def evaluate(p: MagneticProfile, r: float) -> tuple[float, float, float]:
    """(f, f', f'') at r; exactly zero outside the support."""
    r = float(r)
    if not r > 0.0:
        raise DomainError(f"radius must be positive, got {r}")
    kl = p._knot_list
    if not p._coef_list or r < kl[0] or r >= kl[-1]:
        return 0.0, 0.0, 0.0
    i = min(bisect.bisect_right(kl, r) - 1, len(kl) - 2)
    return p.piece_eval(r, i)


def _hermite_data(spec: ProfileSpec):
    """Knots and (g, g', g'') data; the bump depth at q is filled in later."""
    a, b = spec.support
    radii = [r for r, _, _ in spec.anchors]
    last_r, last_d1, _ = spec.anchors[-1]
    span = b - last_r
    p_knot = last_r + spec.peak_frac * span
    m_knot = last_r + spec.mid_frac * span
    q_knot = 0.5 * (m_knot + b)
    gaps = np.diff([a] + radii + [p_knot])
    w = min(spec.flat_halfwidth, 0.4 * float(np.min(gaps)))
    x, data = [a], [[0.0, 0.0, 0.0]]
    for r, d1, d2 in spec.anchors:
        if w > 0.0:
            x += [r - w, r, r + w]
            data += [[d1 - d2 * w, d2, 0.0], [d1, d2, 0.0], [d1 + d2 * w, d2, 0.0]]
        else:
            x.append(r)
            data.append([d1, d2, 0.0])
    x += [p_knot, m_knot, q_knot, b]
    data += [[(1.0 + spec.peak_gain) * last_d1, 0.0, 0.0], [0.0, 0.0, 0.0], None, [0.0, 0.0, 0.0]]
    return x, data, m_knot


def build_profile(spec: ProfileSpec, grid: np.ndarray | None = None) -> MagneticProfile:
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if spec.smoothness_order > 3:
        raise InfeasibleSpec("the Hermite construction is C3; smoothness_order > 3 unsupported")
    if not spec.anchors:
        return MagneticProfile(spec, np.array(spec.support), np.zeros((0, 7)), grid, spec.sup_bound_mode)
    if any(d1 <= 0.0 for _, d1, _ in spec.anchors):
        raise InfeasibleSpec("anchors must prescribe f' > 0 (rising side of f)")
    x, data, m_knot = _hermite_data(spec)

    # positive part first: its area fixes the depth of the negative bump
    n_pos = x.index(m_knot) + 1
    g_pos = BPoly.from_derivatives(x[:n_pos], data[:n_pos])
    samples = np.linspace(x[0], m_knot, 8001)
    if np.min(g_pos(samples)) < -1e-14:
        raise InfeasibleSpec("anchor data force f' < 0 before the peak; relax f'' at the anchors")
    area = float(g_pos.integrate(x[0], m_knot))
    data[-2] = [-2.0 * area / (x[-1] - m_knot), 0.0, 0.0]

    f = PPoly.from_bernstein_basis(BPoly.from_derivatives(x, data).antiderivative())
    # PPoly stores descending powers; flip to ascending
    coeffs = np.ascontiguousarray(f.c[::-1].T)

    sup_f = area
    rr = np.linspace(x[0], x[-1], 20001)
    sup_f_r = float(np.max(f(rr) / rr))
    mode = spec.sup_bound_mode
    if mode == STRICT and sup_f >= 1.0:
        mode = WEIGHTED
    if mode == WEIGHTED and sup_f_r >= 1.0:
        raise InfeasibleSpec(f"sup f/r = {sup_f_r:.4f} >= 1 even in weighted mode; relax the anchors")
    return MagneticProfile(spec, np.array(x, dtype=float), coeffs, grid, mode)


@dataclass(frozen=True)
class ConstraintResult:
    name: str
    measured: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    constraints: tuple[ConstraintResult, ...]
    sup_f: float
    sup_f_over_r: float
    mane_upper_bound: float
    crude_bound: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.constraints)

    def failures(self) -> list[str]:
        return [c.name for c in self.constraints if not c.passed]

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "sup_f": self.sup_f,
            "sup_f_over_r": self.sup_f_over_r,
            "mane_upper_bound": self.mane_upper_bound,
            "crude_bound": self.crude_bound,
            "constraints": [
                {"name": c.name, "measured": c.measured, "bound": c.bound, "pass": c.passed}
                for c in self.constraints
            ],
        }


def _fd_derivatives(p: MagneticProfile, r: np.ndarray, h: float = FD_STEP):
    """Finite-difference f' (from f) and f'' (from f').

    Stencils never straddle a knot: near a knot they become one-sided and
    every stencil point is evaluated on the same polynomial piece.
    """
    r = np.asarray(r, dtype=float)
    knots = p.knots
    if len(p._coef_list) == 0:
        z = np.zeros_like(r)
        return z, z
    npieces = len(knots) - 1
    lo = np.searchsorted(knots, r - h, side="right")
    hi = np.searchsorted(knots, r + h, side="left")
    straddle = hi > lo
    nearest = np.clip(lo, 0, len(knots) - 1)
    backward = straddle & (knots[nearest] >= r)
    forward = straddle & ~backward
    # piece used by the whole stencil; -1 means identically zero
    piece = np.searchsorted(knots, r, side="right") - 1
    piece = np.where(backward, nearest - 1, piece)
    piece = np.where(forward, nearest, piece)
    piece = np.where((piece < 0) | (piece >= npieces), -1, piece)

    def stencil(order):
        fm2, fm1, f0, fp1, fp2 = (p.values_on_pieces(r + s * h, piece)[order] for s in (-2, -1, 0, 1, 2))
        d = (fp1 - fm1) / (2 * h)
        d = np.where(backward, (3 * f0 - 4 * fm1 + fm2) / (2 * h), d)
        d = np.where(forward, (-3 * f0 + 4 * fp1 - fp2) / (2 * h), d)
        return d

    return stencil(0), stencil(1)


def _piece_jumps(p: MagneticProfile) -> float:
    """Largest mismatch of one-sided limits of (f, f', f'') over all knots."""
    if len(p._coef_list) == 0:
        return 0.0
    worst = 0.0
    n = len(p._coef_list)
    for j, k in enumerate(p._knot_list):
        left = p.piece_eval(k, j - 1) if j > 0 else (0.0, 0.0, 0.0)
        right = p.piece_eval(k, j) if j < n else (0.0, 0.0, 0.0)
        worst = max(worst, max(abs(u - v) for u, v in zip(left, right)))
    return worst


def _integral_fprime(p: MagneticProfile) -> float:
    """Gauss-Legendre per piece; exact for the quintic f'."""
    if len(p._coef_list) == 0:
        return 0.0
    nodes, weights = np.polynomial.legendre.leggauss(4)
    total = 0.0
    for i in range(len(p._coef_list)):
        k0, k1 = p._knot_list[i], p._knot_list[i + 1]
        half = 0.5 * (k1 - k0)
        for x, w in zip(nodes, weights):
            total += w * half * p.piece_eval(k0 + half * (x + 1.0), i)[1]
    return total


def validate_profile(
    p: MagneticProfile,
    requirements: Sequence[tuple[float, float, float]] | None = None,
    anchor_tol: float = 1e-6,
) -> ValidationReport:
    """Check every pointwise constraint on the profile's grid.

    ``requirements`` lists (r, f'(r), f''(r)) targets; defaults to the
    anchors of ``p.spec``.  Failures are reported, never raised.
    """
    r = p.grid
    f, f1, f2 = p.values(r)
    a, b = p.support
    res = []

    def add(name, measured, bound, ok):
        res.append(ConstraintResult(name, float(measured), float(bound), bool(ok)))

    add("grid points >= 1e4", len(r), 1e4, len(r) >= 10_000 and r.min() > 0 and r.max() <= DISK_RADIUS)
    outside = (r < a) | (r > b)
    leak = float(np.max(np.abs(np.concatenate([f[outside], f1[outside], f2[outside]])), initial=0.0))
    add("zero outside support", leak, 0.0, leak == 0.0)
    add("f >= 0", float(f.min()), 0.0, f.min() >= -1e-12)
    jump = _piece_jumps(p)
    add("C2 gluing", jump, GLUING_TOL, jump <= GLUING_TOL)
    d1, d2 = _fd_derivatives(p, r)
    e1 = float(np.max(np.abs(f1 - d1) / (1 + np.abs(f1))))
    e2 = float(np.max(np.abs(f2 - d2) / (1 + np.abs(f2))))
    add("f' matches differences of f", e1, 1e-6, e1 <= 1e-6)
    add("f'' matches differences of f'", e2, 1e-6, e2 <= 1e-6)
    tot = abs(_integral_fprime(p))
    add("integral of f' vanishes", tot, 1e-8, tot <= 1e-8)

    sup_f = float(max(f.max(), 0.0))
    sup_fr = float(np.max(f / r))
    if p.sup_mode_used == STRICT:
        add("sup f < 1", sup_f, 1.0, sup_f < 1.0)
    else:
        add("sup f/r < 1", sup_fr, 1.0, sup_fr < 1.0)
    mane = 0.5 * sup_fr**2
    add("mane bound < 1/2", mane, 0.5, mane < 0.5)

    reqs = p.spec.anchors if requirements is None else requirements
    for r0, want1, want2 in reqs:
        got = evaluate(p, r0)
        fd1, fd2 = (float(x[0]) for x in _fd_derivatives(p, np.array([r0])))
        ok1 = abs(fd1 - want1) <= anchor_tol and abs(got[1] - fd1) <= anchor_tol
        ok2 = abs(fd2 - want2) <= anchor_tol and abs(got[2] - fd2) <= anchor_tol
        add(f"f'({r0:g})={want1:g}", fd1, want1, ok1)
        add(f"f''({r0:g})={want2:g}", fd2, want2, ok2)
    return ValidationReport(tuple(res), sup_f, sup_fr, mane, 0.5 * sup_f**2)


# configured profiles
F_STAR_SPEC = ProfileSpec(support=(1.2, 2.9), anchors=((2.0, 1.0, 0.25),))
F_TWO_SPEC = ProfileSpec(support=(1.2, 2.9), anchors=((2.5, 1.0, 0.5),))
ZERO_SPEC = ProfileSpec(support=(1.2, 2.9), anchors=())


def f_star() -> MagneticProfile:
    return build_profile(F_STAR_SPEC)


def f_two() -> MagneticProfile:
    return build_profile(F_TWO_SPEC)


def zero_profile() -> MagneticProfile:
    return build_profile(ZERO_SPEC)

