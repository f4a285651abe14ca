"""Finite-dimensional spectral flow and the bordered-operator correction formula."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import DeltaTooLarge, NotInRange, NotRegular, ToleranceAmbiguity

DELTA_SCHEDULE = (1e-2, 1e-3, 1e-4)


def signature(A: np.ndarray, tol: float = 1e-9) -> int:
    """n_plus - n_minus; eigenvalues in (-tol, tol) count as zero."""
    ev = np.linalg.eigvalsh(np.asarray(A, dtype=float))
    a = np.abs(ev)
    if np.any((a >= tol) & (a < 10 * tol)):
        raise ToleranceAmbiguity(f"eigenvalue within (tol, 10 tol) for tol = {tol:g}")
    return int(np.sum(ev >= tol) - np.sum(ev <= -tol))


def smooth_step(s):
    """C-infinity map R -> [0, 1]: 0 for s <= 0, 1 for s >= 1."""
    if np.isscalar(s):
        x = float(s)
        if x <= 0.0:
            return 0.0
        if x >= 1.0:
            return 1.0
        a, b = math.exp(-1.0 / x), math.exp(-1.0 / (1.0 - x))
        return a / (a + b)
    s = np.asarray(s, dtype=float)

    def psi(x):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)

    a, b = psi(s), psi(1.0 - s)
    return a / (a + b)


def beta(s):
    """Cutoff: -1 for s <= -1/2, +1 for s >= 1/2."""
    return 2.0 * smooth_step(np.asarray(s, dtype=float) + 0.5) - 1.0


@dataclass(frozen=True)
class OperatorPath:
    """A(s) for s in [-1, 1]; ``fun`` must be constant near both ends."""

    fun: Callable[[float], np.ndarray]
    n_samples: int = 201
    samples: np.ndarray = field(init=False, repr=False)
    matrices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = np.linspace(-1.0, 1.0, self.n_samples)
        mats = np.array([np.asarray(self.fun(x), dtype=float) for x in s])
        asym = float(np.max(np.abs(mats - np.transpose(mats, (0, 2, 1)))))
        if asym > 1e-12:
            raise ValueError(f"path is not symmetric (defect {asym:.3g})")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "matrices", mats)

    @property
    def minus(self) -> np.ndarray:
        return self.matrices[0]

    @property
    def plus(self) -> np.ndarray:
        return self.matrices[-1]

    @property
    def n(self) -> int:
        return self.matrices.shape[1]


def endpoint_gap(*mats: np.ndarray, zero_tol: float = 1e-9) -> float:
    """Smallest nonzero |eigenvalue| over the given endpoint matrices."""
    gaps = []
    for M in mats:
        a = np.abs(np.linalg.eigvalsh(M))
        scale = max(1.0, float(a.max()))
        nz = a[a > zero_tol * scale]
        if nz.size:
            gaps.append(float(nz.min()))
    return min(gaps) if gaps else 1.0


def _flow_at(path: OperatorPath, delta: float) -> Fraction:
    n = path.n
    sp = signature(path.plus - delta * np.eye(n), tol=delta * 1e-3)
    sm = signature(path.minus + delta * np.eye(n), tol=delta * 1e-3)
    return Fraction(sp - sm, 2)


def spectral_flow(path: OperatorPath, delta: float | None = None) -> Fraction:
    """Spectral flow of the regularised path A(s) - delta beta(s) I.

    With ``delta=None`` the schedule {1e-2, 1e-3, 1e-4} x gap is run and
    must give one value.
    """
    gap = endpoint_gap(path.minus, path.plus)
    if delta is not None:
        if delta >= gap / 2:
            raise DeltaTooLarge(f"delta {delta:g} >= half the endpoint gap {gap:.3g}")
        return _flow_at(path, delta)
    vals = {_flow_at(path, c * gap) for c in DELTA_SCHEDULE}
    if len(vals) != 1:
        raise ToleranceAmbiguity(f"spectral flow did not stabilise over the delta schedule: {vals}")
    return vals.pop()


def regularized(path: OperatorPath, delta: float) -> Callable[[float], np.ndarray]:
    n = path.n
    return lambda s: np.asarray(path.fun(s), dtype=float) - delta * float(beta(s)) * np.eye(n)


def crossing_count(path: OperatorPath, delta: float, refine_tol: float = 1e-12) -> Fraction:
    """Independent oracle: sum of crossing-form signatures of the regularised path.

    Crossings are bracketed by changes of the negative-eigenvalue count on the
    sample grid, bisected, and classified by the signature of P^T A'(s*) P on
    the kernel.  Intervals are subdivided when the count changes by more than
    one.
    """
    fun = regularized(path, delta)

    @lru_cache(maxsize=None)
    def nneg(s):
        return int(np.sum(np.linalg.eigvalsh(fun(s)) < 0))

    def cross_sig(lo, hi):
        nlo = nneg(lo)
        while hi - lo > refine_tol:
            mid = 0.5 * (lo + hi)
            if nneg(mid) == nlo:
                lo = mid
            else:
                hi = mid
        # the kernel is spanned by the eigenvectors that change sign across [lo, hi]
        jump = abs(nneg(hi) - nlo)
        s = 0.5 * (lo + hi)
        w, V = np.linalg.eigh(fun(s))
        P = V[:, np.argsort(np.abs(w))[: max(jump, 1)]]
        h = max(1e-7, 10 * (hi - lo))
        dA = (fun(s + h) - fun(s - h)) / (2 * h)
        G = P.T @ dA @ P
        ev = np.linalg.eigvalsh(0.5 * (G + G.T))
        return int(np.sum(ev > 0) - np.sum(ev < 0))

    def walk(a, b, depth=0):
        na, nb = nneg(a), nneg(b)
        if na == nb:
            return 0
        if abs(na - nb) == 1 or b - a < 1e-10:
            return cross_sig(a, b)
        m = 0.5 * (a + b)
        return walk(a, m, depth + 1) + walk(m, b, depth + 1)

    s = path.samples
    grid = path.matrices - delta * beta(s)[:, None, None] * np.eye(path.n)
    counts = np.sum(np.linalg.eigvalsh(grid) < 0, axis=1)
    total = sum(walk(float(s[i]), float(s[i + 1])) for i in range(len(s) - 1) if counts[i] != counts[i + 1])
    return Fraction(total, 1)


def lambda_Ah(A: np.ndarray, h: np.ndarray, tol: float = 1e-9) -> float:
    """<v, h> for a solution of A v = h (minimum-norm least squares)."""
    A = np.asarray(A, dtype=float)
    h = np.asarray(h, dtype=float)
    v, *_ = np.linalg.lstsq(A, h, rcond=1e-12)
    res = float(np.linalg.norm(A @ v - h))
    if res > tol * max(1.0, float(np.linalg.norm(h))):
        raise NotInRange(f"h is not in the range of A (residual {res:.3g})")
    return float(v @ h)


def border(A: np.ndarray, h: np.ndarray, tau: float) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    h = np.asarray(h, dtype=float).reshape(-1)
    n = A.shape[0]
    out = np.empty((n + 1, n + 1))
    out[:n, :n] = A
    out[:n, n] = h
    out[n, :n] = h
    out[n, n] = tau
    return out


@dataclass(frozen=True)
class BorderData:
    h: Callable[[float], np.ndarray]
    tau: Callable[[float], float]

    def endpoints(self):
        return (np.asarray(self.h(-1.0), float), float(self.tau(-1.0))), (np.asarray(self.h(1.0), float), float(self.tau(1.0)))


def bordered_path(path: OperatorPath, bd: BorderData) -> OperatorPath:
    return OperatorPath(lambda s: border(path.fun(s), bd.h(s), bd.tau(s)), path.n_samples)


@dataclass(frozen=True)
class CFResult:
    lhs: Fraction
    rhs: Fraction
    equal: bool
    lam_minus: float
    lam_plus: float


def verify_cf(path: OperatorPath, bd: BorderData, delta: float | None = None, tol: float = 1e-8) -> CFResult:
    """Compare the flow of the bordered path with flow(A) + the two half-sign corrections."""
    (hm, tm), (hp, tp) = bd.endpoints()
    try:
        lm = lambda_Ah(path.minus, hm)
        lp = lambda_Ah(path.plus, hp)
    except NotInRange as exc:
        raise NotRegular(str(exc)) from exc
    if abs(tm - lm) <= tol or abs(tp - lp) <= tol:
        raise NotRegular("tau equals lambda_{A,h} at an endpoint")
    bp = bordered_path(path, bd)
    if delta is None:
        lhs, flow = spectral_flow(bp), spectral_flow(path)
    else:
        lhs, flow = spectral_flow(bp, delta), spectral_flow(path, delta)
    rhs = flow + Fraction(int(np.sign(tp - lp)), 2) - Fraction(int(np.sign(tm - lm)), 2)
    return CFResult(lhs, rhs, lhs == rhs, lm, lp)


# randomised suite


def _random_symmetric(rng, n, rank=None, scale=1.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = rng.uniform(0.3, 2.0, n) * rng.choice([-1.0, 1.0], n) * scale
    if rank is not None:
        ev[rank:] = 0.0
    A = (Q * ev) @ Q.T
    return 0.5 * (A + A.T), Q, ev


def random_trial(seed: int):
    """A random regular instance (path, border data, description) for one trial index."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 21))
    singular = rng.random() < 0.3
    kdim = int(rng.integers(1, max(2, n // 3) + 1)) if singular else 0
    Am, Qm, evm = _random_symmetric(rng, n, n - kdim if singular and rng.random() < 0.5 else None)
    Ap, Qp, evp = _random_symmetric(rng, n, n - kdim if singular else None)
    C, _, _ = _random_symmetric(rng, n, scale=float(rng.uniform(0.5, 3.0)))

    def in_range(Q, ev):
        h = Q @ (rng.standard_normal(n) * (ev != 0))
        return h

    hm, hp = in_range(Qm, evm), in_range(Qp, evp)
    hmid = rng.standard_normal(n)
    lm, lp = float(np.linalg.pinv(Am) @ hm @ hm), float(np.linalg.pinv(Ap) @ hp @ hp)
    tm = lm + rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 2.0)
    tp = lp + rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 2.0)

    def A(s):
        u = float(smooth_step((s + 0.9) / 1.8))
        bump = 4.0 * u * (1.0 - u)
        M = (1 - u) * Am + u * Ap + bump * C
        return 0.5 * (M + M.T)

    def h(s):
        u = float(smooth_step((s + 0.9) / 1.8))
        bump = 4.0 * u * (1.0 - u)
        return (1 - u) * hm + u * hp + bump * hmid

    def tau(s):
        u = float(smooth_step((s + 0.9) / 1.8))
        return (1 - u) * tm + u * tp

    return OperatorPath(A), BorderData(h, tau), {"seed": seed, "n": n, "singular": singular, "kernel_dim": kdim}


@dataclass(frozen=True)
class SuiteReport:
    trials: int
    failures: tuple
    oracle_mismatches: tuple
    seeds: tuple

    @property
    def passed(self) -> bool:
        return not self.failures and not self.oracle_mismatches

    def as_dict(self) -> dict:
        return {
            "trials": self.trials,
            "failures": list(self.failures),
            "oracle_mismatches": list(self.oracle_mismatches),
            "seed_range": [self.seeds[0], self.seeds[-1]] if self.seeds else [],
            "passed": self.passed,
        }


def run_cf_suite(n_trials: int = 500, base_seed: int = 0, oracle: bool = True) -> SuiteReport:
    fails, mism = [], []
    seeds = tuple(range(base_seed, base_seed + n_trials))
    for seed in seeds:
        path, bd, meta = random_trial(seed)
        res = verify_cf(path, bd)
        if not res.equal:
            fails.append({**meta, "lhs": str(res.lhs), "rhs": str(res.rhs)})
        if oracle:
            bp = bordered_path(path, bd)
            for name, pth in (("A", path), ("A_h", bp)):
                gap = endpoint_gap(pth.minus, pth.plus)
                d = 1e-3 * gap
                a, b = spectral_flow(pth, d), crossing_count(pth, d)
                if a != b:
                    mism.append({**meta, "path": name, "endpoint": str(a), "crossings": str(b)})
    return SuiteReport(n_trials, tuple(fails), tuple(mism), seeds)


def direct_sum_path(a: OperatorPath, b: OperatorPath) -> OperatorPath:
    def fun(s):
        A, B = np.asarray(a.fun(s), float), np.asarray(b.fun(s), float)
        out = np.zeros((A.shape[0] + B.shape[0],) * 2)
        out[: A.shape[0], : A.shape[0]] = A
        out[A.shape[0] :, A.shape[0] :] = B
        return out

    return OperatorPath(fun, a.n_samples)


def _interpolating_path(Am, Ap, C):
    def fun(s):
        u = float(smooth_step((s + 0.9) / 1.8))
        M = (1 - u) * Am + u * Ap + 4.0 * u * (1.0 - u) * C
        return 0.5 * (M + M.T)

    return fun


def axiom_checks(n_trials: int = 50, base_seed: int = 10_000) -> dict:
    """Constant paths, additivity, the endpoint formula and interior-perturbation invariance."""
    counts = {"constant": 0, "additivity": 0, "endpoint_formula": 0, "homotopy": 0}
    fails: list = []
    for seed in range(base_seed, base_seed + n_trials):
        rng = np.random.default_rng(seed)
        n1, n2 = int(rng.integers(2, 11)), int(rng.integers(2, 11))
        A1m, _, _ = _random_symmetric(rng, n1)
        A1p, _, _ = _random_symmetric(rng, n1)
        A2m, _, _ = _random_symmetric(rng, n2)
        A2p, _, _ = _random_symmetric(rng, n2)
        C1, _, _ = _random_symmetric(rng, n1)
        C2, _, _ = _random_symmetric(rng, n1, scale=0.5)

        const = OperatorPath(lambda s, M=A1m: M)
        if spectral_flow(const) != 0:
            fails.append({"seed": seed, "axiom": "constant"})
        counts["constant"] += 1

        p1 = OperatorPath(_interpolating_path(A1m, A1p, C1))
        p2 = OperatorPath(_interpolating_path(A2m, A2p, 0 * A2m))
        if spectral_flow(direct_sum_path(p1, p2)) != spectral_flow(p1) + spectral_flow(p2):
            fails.append({"seed": seed, "axiom": "additivity"})
        counts["additivity"] += 1

        expected = Fraction(signature(A1p) - signature(A1m), 2)
        d = 1e-3 * endpoint_gap(p1.minus, p1.plus)
        if spectral_flow(p1) != expected or crossing_count(p1, d) != expected:
            fails.append({"seed": seed, "axiom": "endpoint_formula"})
        counts["endpoint_formula"] += 1

        p1b = OperatorPath(_interpolating_path(A1m, A1p, C1 + C2))
        if spectral_flow(p1b) != spectral_flow(p1):
            fails.append({"seed": seed, "axiom": "homotopy"})
        counts["homotopy"] += 1
    return {"checked": counts, "failures": fails, "passed": not fails}


def self_test_report(n_trials: int = 500, base_seed: int = 0, n_axiom: int = 50, oracle: bool = False) -> dict:
    suite = run_cf_suite(n_trials, base_seed, oracle=oracle)
    ax = axiom_checks(n_axiom)
    return {"cf_suite": suite.as_dict(), "axioms": ax, "passed": suite.passed and ax["passed"]}
