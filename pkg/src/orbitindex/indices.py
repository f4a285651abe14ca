"""Symplectic-path indices: Robbin-Salamon, Conley-Zehnder, transverse index.

Conventions
-----------
Index computations use the standard form ``omega0(u, v) = <J0 u, v>`` with
``J0 = [[0, -I], [I, 0]]``.  Canonical flows in (q, p) are converted to
"index coordinates" (q, -p) by conjugation with ``D = diag(I, -I)``.  With
this choice a positive rotation ``exp(J0 t)`` on [0, 2 pi] has index 2 and
the shear ``[[1, 0], [-t T'/T, 1]]`` has index sign(-T')/2.

The Robbin-Salamon index of a path is computed from the winding of
``det W(t)``, where ``W = V^T V`` and ``V`` relates unitary frames of the
diagonal and of graph(Psi(t)).  Eigenvalues of ``W`` equal to 1 correspond
to crossings, and the endpoint half-contributions come from the positions
of the eigenvalues of ``W`` on the unit circle.  This handles degenerate
crossings (such as the permanent kernel along a periodic orbit) without
perturbation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize_scalar

from .dynamics import LinearizedPath, Trajectory, el_vector_field
from .errors import CrossingResolutionFailure, FrameDegenerate, ToleranceAmbiguity
from .model import as_system

SYMPLECTIC_TOL = 1e-7


def J0(m: int) -> np.ndarray:
    z, i = np.zeros((m, m)), np.eye(m)
    return np.block([[z, -i], [i, z]])


def omega0(u, v) -> float:
    u = np.asarray(u, dtype=float)
    return float((J0(len(u) // 2) @ u) @ np.asarray(v, dtype=float))


def to_index_coords(M: np.ndarray) -> np.ndarray:
    """Conjugate (q, p) matrices (or vectors) to (q, -p) coordinates."""
    M = np.asarray(M, dtype=float)
    m = M.shape[-1] // 2
    d = np.r_[np.ones(m), -np.ones(m)]
    if M.ndim == 1:
        return d * M
    return d[:, None] * M * d[None, :] if M.ndim == 2 else d[None, :, None] * M * d[None, None, :]


def half_str(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class SymplecticPath:
    times: np.ndarray
    matrices: np.ndarray
    anchored: bool = True  # require Psi(0) = I

    def __post_init__(self):
        M = np.asarray(self.matrices, dtype=float)
        object.__setattr__(self, "matrices", M)
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        if M.ndim != 3 or M.shape[1] != M.shape[2] or M.shape[1] % 2:
            raise ValueError("matrices must have shape (n, 2m, 2m)")
        if len(self.times) != len(M):
            raise ValueError("times and matrices differ in length")
        if self.anchored and np.max(np.abs(M[0] - np.eye(M.shape[1]))) > SYMPLECTIC_TOL:
            raise ValueError("path does not start at the identity")
        d = self.symplectic_defect()
        if d > SYMPLECTIC_TOL * max(1.0, float(np.max(np.abs(M))) ** 2):
            raise ValueError(f"path is not symplectic (defect {d:.3g})")

    @property
    def m(self) -> int:
        return self.matrices.shape[1] // 2

    def symplectic_defect(self) -> float:
        J = J0(self.m)
        M = self.matrices
        return float(np.max(np.abs(np.einsum("kji,jl,klm->kim", M, J, M) - J)))

    def reversed(self) -> "SymplecticPath":
        return SymplecticPath(self.times[-1] - self.times[::-1], self.matrices[::-1], anchored=False)

    def block(self, idx) -> "SymplecticPath":
        idx = list(idx)
        return SymplecticPath(self.times, self.matrices[:, idx][:, :, idx], anchored=self.anchored)


def direct_sum(a: SymplecticPath, b: SymplecticPath) -> SymplecticPath:
    """Psi_a (+) Psi_b, ordered so the result is symplectic for J0."""
    ma, mb = a.m, b.m
    n = len(a.times)
    out = np.zeros((n, 2 * (ma + mb), 2 * (ma + mb)))
    ia = list(range(ma)) + list(range(ma + mb, 2 * ma + mb))
    ib = list(range(ma, ma + mb)) + list(range(2 * ma + mb, 2 * (ma + mb)))
    out[np.ix_(range(n), ia, ia)] = a.matrices
    out[np.ix_(range(n), ib, ib)] = b.matrices
    return SymplecticPath(a.times, out, anchored=a.anchored and b.anchored)


def _unitary_frame(Z: np.ndarray, m: int) -> np.ndarray:
    Q, _ = np.linalg.qr(Z)
    xi = np.r_[0:m, 2 * m : 3 * m]
    yi = np.r_[m : 2 * m, 3 * m : 4 * m]
    return Q[xi] + 1j * Q[yi]


def souriau_W(Psi: np.ndarray) -> np.ndarray:
    """W with eigenvalue 1 of multiplicity dim ker(Psi - I)."""
    m = Psi.shape[0] // 2
    sig = np.diag(np.r_[np.ones(m), -np.ones(m)])
    Ug = _unitary_frame(np.vstack([sig, Psi]), m)
    Ud = _unitary_frame(np.vstack([sig, np.eye(2 * m)]), m)
    V = Ud.conj().T @ Ug
    return V.T @ V


def rs_maslov(path: SymplecticPath, snap_tol: float = 1e-6, orientation: int = 1) -> Fraction:
    """Robbin-Salamon index of graph(path) relative to the diagonal.

    ``orientation=-1`` flips the sign; it exists only for fault injection.
    """
    Ws = [souriau_W(P) for P in path.matrices]
    dets = np.array([np.linalg.det(W) for W in Ws])
    inc = np.angle(dets[1:] / dets[:-1])
    if inc.size and np.max(np.abs(inc)) > math.pi / 2:
        raise CrossingResolutionFailure("path under-resolved: refine the time grid")

    def phases(W):
        ph = np.angle(np.linalg.eigvals(W))
        amb = (np.abs(ph) >= snap_tol) & (np.abs(ph) < 100 * snap_tol)
        if np.any(amb):
            raise CrossingResolutionFailure("endpoint eigenvalue too close to 1 to classify")
        ph[np.abs(ph) < snap_tol] = 0.0
        return ph

    ph0, ph1 = phases(Ws[0]), phases(Ws[-1])
    w = (inc.sum() - ph1.sum() + ph0.sum()) / (2 * math.pi)
    n = round(w)
    if abs(w - n) > 1e-6:
        raise CrossingResolutionFailure(f"winding {w:.6g} is not an integer")
    val = Fraction(n) + Fraction(int(np.sign(ph1).sum() - np.sign(ph0).sum()), 2)
    return orientation * val


# independent oracle: explicit crossing forms


def _crossing_form(Psi: np.ndarray, dPsi: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    m = Psi.shape[0] // 2
    G = kernel.T @ (-J0(m) @ dPsi) @ kernel
    return 0.5 * (G + G.T)


def _form_signature(G: np.ndarray, rel: float = 1e-6) -> int:
    ev = np.linalg.eigvalsh(G)
    scale = max(1.0, float(np.max(np.abs(ev))))
    if np.any(np.abs(ev) < rel * scale):
        raise CrossingResolutionFailure("degenerate crossing form")
    return int(np.sum(ev > 0) - np.sum(ev < 0))


def crossing_form_index(
    fun: Callable[[float], np.ndarray],
    t0: float,
    t1: float,
    n_grid: int = 2001,
    kernel_tol: float = 1e-7,
    orientation: int = 1,
) -> Fraction:
    """Robbin-Salamon index from regular crossings of a smooth path.

    Crossings are local minima of the smallest singular value of Psi(t) - I,
    refined by bounded minimisation.  Endpoint crossings count with weight 1/2.
    """
    ts = np.linspace(t0, t1, n_grid)
    smin = np.array([np.linalg.svd(fun(t) - np.eye(fun(t).shape[0]), compute_uv=False)[-1] for t in ts])
    span = t1 - t0
    hd = 1e-6 * span
    total = Fraction(0)

    def contribution(t, weight, side=0):
        P = fun(t)
        U, s, Vt = np.linalg.svd(P - np.eye(P.shape[0]))
        K = Vt[s < kernel_tol * max(1.0, float(np.max(np.abs(P))))].T
        if K.shape[1] == 0:
            return Fraction(0)
        if side < 0:
            dP = (fun(t + hd) - P) / hd
        elif side > 0:
            dP = (P - fun(t - hd)) / hd
        else:
            dP = (fun(t + hd) - fun(t - hd)) / (2 * hd)
        return weight * _form_signature(_crossing_form(P, dP, K))

    total += contribution(t0, Fraction(1, 2), side=-1)
    total += contribution(t1, Fraction(1, 2), side=1)
    for i in range(1, n_grid - 1):
        if smin[i] <= smin[i - 1] and smin[i] < smin[i + 1]:
            res = minimize_scalar(
                lambda t: np.linalg.svd(fun(t) - np.eye(fun(t).shape[0]), compute_uv=False)[-1],
                bounds=(ts[i - 1], ts[i + 1]),
                method="bounded",
                options={"xatol": 1e-12 * span},
            )
            if res.fun < kernel_tol:
                total += contribution(float(res.x), Fraction(1))
    return orientation * total


def sampled_crossing_index(path: SymplecticPath, orientation: int = 1) -> Fraction:
    """Crossing-form oracle on a sampled path (piecewise-cubic interpolation)."""
    from scipy.interpolate import CubicSpline

    n = path.matrices.shape[1]
    cs = CubicSpline(path.times, path.matrices.reshape(len(path.times), -1), axis=0)
    return crossing_form_index(
        lambda t: cs(t).reshape(n, n), float(path.times[0]), float(path.times[-1]),
        n_grid=min(4001, 4 * len(path.times)), kernel_tol=1e-6, orientation=orientation,
    )


def monodromy(lp: LinearizedPath) -> np.ndarray:
    return lp.matrices[-1].copy()


def floquet_multipliers(M: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(M)
    return ev[np.lexsort((ev.imag, ev.real))]


def nullity(M: np.ndarray, tol: float = 1e-6) -> int:
    M = np.asarray(M, dtype=float)
    s = np.linalg.svd(M - np.eye(M.shape[0]), compute_uv=False)
    thr = tol * max(1.0, float(np.linalg.norm(M, 2)))
    if np.any((s > thr / 10) & (s < thr * 10)):
        raise ToleranceAmbiguity(f"singular value within a factor 10 of {thr:.3g}: {s}")
    return int(np.sum(s < thr))


def cz_index(lp: LinearizedPath, snap_tol: float = 1e-6) -> Fraction:
    """Conley-Zehnder index of the full flow in the (vertical-preserving) polar frame."""
    return rs_maslov(SymplecticPath(lp.times, to_index_coords(lp.matrices)), snap_tol)


# splitting along the orbit cylinder


def _hamiltonian_field(sys, y) -> np.ndarray:
    """X_H in canonical coordinates at a Lagrangian state y."""
    d = el_vector_field(sys, y)
    return np.array([d[0], d[1], d[2], 0.0])


def _vertical_tangent(y) -> np.ndarray:
    """Vertical vector tangent to the energy level (canonical coordinates)."""
    w = np.array([-y[3], y[2]])
    return np.r_[0.0, 0.0, w / np.linalg.norm(w)]


def symplectic_frame(xi_c: np.ndarray, X: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Columns (xi_c, e, X, f): a J0-symplectic basis adapted to the cylinder plane.

    Inputs are in index coordinates.  f is g projected into the omega-complement
    E of span{xi_c, X}; e in E is Euclidean-orthogonal to f with omega(e, f) = 1.
    """
    w = omega0(xi_c, X)
    if abs(w) < 1e-8:
        raise FrameDegenerate(f"cylinder plane is not symplectic: omega(xi, X_H) = {w:.3g}")
    if w < 0:
        raise FrameDegenerate("omega(xi, X_H) < 0: cylinder tangent has the wrong orientation")
    X = X / w
    J = J0(2)
    f = g - omega0(xi_c, g) * X
    B = null_space(np.vstack([J @ xi_c, J @ X]))
    c = null_space((f @ B)[None, :])
    e = B @ c[:, 0]
    e = e / omega0(e, f)
    return np.column_stack([xi_c, e, X, f])


@dataclass(frozen=True)
class MonodromySplit:
    full: np.ndarray
    cylinder_block: np.ndarray  # basis (X_H, xi)
    transverse_block: np.ndarray
    frame: np.ndarray
    offdiag_norm: float

    @property
    def tprime_from_block(self) -> float:
        return -float(self.cylinder_block[0, 1])


def _split(M, F0, FT) -> MonodromySplit:
    L = np.linalg.solve(FT, M @ F0)
    cyl = np.array([[L[2, 2], L[2, 0]], [L[0, 2], L[0, 0]]])
    tr = L[np.ix_([1, 3], [1, 3])]
    off = np.concatenate([L[np.ix_([0, 2], [1, 3])].ravel(), L[np.ix_([1, 3], [0, 2])].ravel()])
    return MonodromySplit(M, cyl, tr, F0, float(np.max(np.abs(off))))


def split_monodromy(M: np.ndarray, p, state0, xi0: np.ndarray) -> MonodromySplit:
    """Split the canonical monodromy M along the frame {X_H(y0), xi(0)}."""
    sys = as_system(p)
    y0 = np.asarray(state0.as_array() if hasattr(state0, "as_array") else state0, dtype=float)
    F0 = symplectic_frame(
        to_index_coords(xi0), to_index_coords(_hamiltonian_field(sys, y0)), to_index_coords(_vertical_tangent(y0))
    )
    return _split(to_index_coords(M), F0, F0)


@dataclass(frozen=True)
class SplitPath:
    frames: np.ndarray
    blocks: np.ndarray  # F(t)^-1 Psi(t) F(0)
    cylinder: SymplecticPath  # (xi, X_H) ordering
    transverse: SymplecticPath
    split: MonodromySplit
    frame_closure: float


def split_path(p, traj: Trajectory, lp: LinearizedPath, xi0: np.ndarray, Tprime: float) -> SplitPath:
    """Time-dependent cylinder/transverse splitting of the index-coordinate flow."""
    sys = as_system(p)
    T = float(traj.times[-1])
    Psi = to_index_coords(lp.matrices)
    xi0i = to_index_coords(xi0)
    n = len(traj.times)
    frames = np.empty((n, 4, 4))
    for i, (t, y) in enumerate(zip(traj.times, traj.states)):
        X = to_index_coords(_hamiltonian_field(sys, y))
        xi_c = Psi[i] @ xi0i + (t * Tprime / T) * X
        frames[i] = symplectic_frame(xi_c, X, to_index_coords(_vertical_tangent(y)))
    blocks = np.linalg.solve(frames, Psi @ frames[0])
    cyl = SymplecticPath(traj.times, blocks[:, [0, 2]][:, :, [0, 2]])
    trv = SymplecticPath(traj.times, blocks[:, [1, 3]][:, :, [1, 3]])
    split = _split(Psi[-1], frames[0], frames[-1])
    closure = float(np.max(np.abs(frames[-1] - frames[0])))
    return SplitPath(frames, blocks, cyl, trv, split, closure)


def transverse_cz_index(sp: SplitPath, snap_tol: float = 1e-6) -> Fraction:
    return rs_maslov(sp.transverse, snap_tol)


def rotation_angle(block: np.ndarray) -> float:
    """Rotation angle in [0, pi] of an elliptic 2x2 symplectic block."""
    return float(abs(np.angle(np.linalg.eigvals(block)[0])))


def irrationality_margin(angle: float, q_max: int = 32) -> float:
    """Distance of ``angle`` to the nearest 2 pi j / q with q <= q_max."""
    x = (angle / (2 * math.pi)) % 1.0
    best = min(abs(x * q - round(x * q)) / q for q in range(1, q_max + 1))
    return 2 * math.pi * best


def mu_rab(mu_cz: Fraction, chi: int) -> Fraction:
    return Fraction(mu_cz) - Fraction(chi, 2)


@dataclass(frozen=True)
class IndexRecord:
    mu_cz: Fraction
    mu_cz_transverse: Fraction
    nullity: int
    chi: int
    floquet: tuple = field(default=())
    mu_rab: Fraction | None = None

    def __post_init__(self):
        expected = mu_rab(self.mu_cz, self.chi)
        if self.mu_rab is None:
            object.__setattr__(self, "mu_rab", expected)
        elif Fraction(self.mu_rab) != expected:
            raise ValueError("mu_rab must equal mu_cz - chi/2")

    def as_dict(self) -> dict:
        return {
            "mu_cz": half_str(self.mu_cz),
            "mu_cz_transverse": half_str(self.mu_cz_transverse),
            "mu_rab": half_str(self.mu_rab),
            "nullity": self.nullity,
            "chi": self.chi,
            "floquet": [[float(z.real), float(z.imag)] for z in self.floquet],
        }


def virtual_dimension(minus: IndexRecord, plus: IndexRecord) -> int:
    v = minus.mu_rab - plus.mu_rab - 1
    if v.denominator != 1:
        raise ValueError("virtual dimension is not an integer")
    return int(v)


def reversed_chi(chi: int) -> int:
    """Correction term of the time-reversed orbit."""
    return -chi
