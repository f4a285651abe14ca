"""Scenario configuration and the end-to-end index pipeline behind the CLI."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction

import numpy as np

from . import __version__
from .dynamics import integrate_orbit, linearized_flow
from .errors import ConfigError, ValidationFailure
from .indices import (
    SymplecticPath,
    cz_index,
    floquet_multipliers,
    half_str,
    irrationality_margin,
    monodromy,
    mu_rab,
    nullity,
    rotation_angle,
    rs_maslov,
    split_path,
    transverse_cz_index,
)
from .model import as_system
from .morse import duistermaat_check, verify_index_theorem
from .orbits import cylinder_tangent, find_circular_orbit, orbit_cylinder
from .profile import F_STAR_SPEC, F_TWO_SPEC, ZERO_SPEC, build_profile, validate_profile
from .spectral_flow import axiom_checks, run_cf_suite

PROFILES = {"fstar": (F_STAR_SPEC, 2.0), "f2": (F_TWO_SPEC, 2.5), "zero": (ZERO_SPEC, 2.0)}
# orbit checks the scenario expects: (profile, chi, i_free - i_T)
EXPECTED = {"fstar": (-1, 1), "f2": (1, 0)}


def _parse_anchor(text: str) -> tuple[float, float, float]:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if len(parts) != 3:
        raise ConfigError(f"anchor needs r,f1,f2 but got {text!r}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError as exc:
        raise ConfigError(f"bad anchor {text!r}") from exc


@dataclass(frozen=True)
class ScenarioConfig:
    profile: str = "fstar"
    k: float = 0.5
    rho_seed: float | None = None
    N: int = 512
    epsilon: float = 1e-3
    samples: int = 9
    n_steps: int = 4096
    rk_tol: float = 1e-8
    snap_tol: float = 1e-6
    nullity_tol: float = 1e-6
    anchor_tol: float = 1e-6
    fstar_anchor: str = ""
    f2_anchor: str = ""
    k_min: float = 0.3
    k_max: float = 0.7
    k_count: int = 41
    trials: int = 500
    seed: int = 0
    output_dir: str = "."

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {sorted(PROFILES)}")
        if not (128 <= self.N <= 4096 and self.N & (self.N - 1) == 0):
            raise ConfigError(f"N = {self.N} must be a power of two in [128, 4096]")
        for name in ("epsilon", "rk_tol", "snap_tol", "nullity_tol", "anchor_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.samples < 5 or self.samples % 2 == 0:
            raise ConfigError("samples must be odd and at least 5")
        if self.n_steps < 100:
            raise ConfigError("n_steps must be at least 100")
        if self.k_count < 0 or self.trials < 0:
            raise ConfigError("k_count and trials must be nonnegative")
        for a in (self.fstar_anchor, self.f2_anchor):
            if a:
                _parse_anchor(a)

    def as_dict(self) -> dict:
        return asdict(self)


def _coerce(name: str, raw: str):
    types = {f.name: f.type for f in fields(ScenarioConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    t = str(types[name])
    raw = raw.strip()
    try:
        if t.startswith("int"):
            return int(raw)
        if t.startswith("float | None"):
            return None if raw.lower() in ("", "none") else float(raw)
        if t.startswith("float"):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw


def parse_pairs(lines, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Apply ``key = value`` lines (``#`` starts a comment) on top of ``base``."""
    vals = {}
    for ln, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        vals[key] = _coerce(key, raw)
    try:
        return replace(base or ScenarioConfig(), **vals)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | None = None, overrides=()) -> ScenarioConfig:
    cfg = ScenarioConfig()
    if path:
        try:
            with open(path) as fh:
                cfg = parse_pairs(fh, cfg)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_pairs(overrides, cfg)


def profile_for(cfg: ScenarioConfig, name: str | None = None):
    """Build the named profile and validate it against its nominal anchors."""
    name = name or cfg.profile
    spec, seed = PROFILES[name]
    override = {"fstar": cfg.fstar_anchor, "f2": cfg.f2_anchor}.get(name, "")
    built_spec = replace(spec, anchors=(_parse_anchor(override),)) if override else spec
    p = build_profile(built_spec)
    rep = validate_profile(p, requirements=spec.anchors, anchor_tol=cfg.anchor_tol)
    return p, rep, seed


def require_valid(name: str, rep) -> None:
    if not rep.passed:
        raise ValidationFailure(f"profile {name} failed validation: {', '.join(rep.failures())}")


def _floquet_list(M) -> list:
    ev = floquet_multipliers(M)
    ev = sorted(ev, key=lambda z: (round(float(z.real), 9), round(float(z.imag), 9)))
    return [[float(z.real), float(z.imag)] for z in ev]


def analyze_orbit(p, cfg: ScenarioConfig, rho_seed: float) -> dict:
    """Every index and orbit quantity for the circular orbit at energy cfg.k."""
    k = cfg.k
    cyl = orbit_cylinder(p, k, cfg.epsilon, cfg.samples, rho_seed=rho_seed)
    orb = cyl.center
    tp = cyl.Tprime_analytic
    traj = integrate_orbit(p, orb.state(), orb.T, cfg.n_steps, cfg.rk_tol)
    lp = linearized_flow(p, traj)
    M = monodromy(lp)
    nu = nullity(M, cfg.nullity_tol)
    mu = cz_index(lp, cfg.snap_tol)
    sp = split_path(p, traj, lp, cylinder_tangent(p, orb), tp)
    mu_t = transverse_cz_index(sp, cfg.snap_tol)
    mu_r = mu_rab(mu, cyl.chi)
    f2 = as_system(p).fields(orb.rho)[2]
    K = orb.a * f2
    trace_expected = 2 * math.cos(math.sqrt(K) * orb.T) if K > 0 else 2 * math.cosh(math.sqrt(-K) * orb.T)
    trace = float(np.trace(sp.split.transverse_block))
    angle = rotation_angle(sp.split.transverse_block) if abs(trace) < 2 else float("nan")
    thm = verify_index_theorem(p, orb, cfg.N)
    dui = duistermaat_check(thm.i_T, mu)
    checks = {
        "theorem_free_vs_fixed": thm.holds,
        "duistermaat": dui.holds,
        "mu_rab_equals_transverse": mu_r == mu_t,
        "free_index_equals_mu_rab": Fraction(thm.i_free) == mu_r,
        "nullity_one": nu == 1,
        "cylinder_block_tprime": abs(sp.split.tprime_from_block - tp) <= 1e-3 * abs(tp),
        "transverse_trace": abs(trace - trace_expected) <= 1e-5,
    }
    return {
        "rho": orb.rho,
        "a": orb.a,
        "T": orb.T,
        "Tprime_analytic": tp,
        "Tprime_fd": cyl.Tprime_fd,
        "Tprime_block": sp.split.tprime_from_block,
        "rhoprime": cyl.rhoprime_analytic,
        "chi": cyl.chi,
        "nullity": nu,
        "floquet": _floquet_list(M),
        "K": K,
        "transverse_trace": trace,
        "transverse_trace_expected": trace_expected,
        "rotation_angle": angle,
        "irrationality_margin": irrationality_margin(angle) if angle == angle else None,
        "mu_cz": half_str(mu),
        "mu_cz_transverse": half_str(mu_t),
        "mu_rab": half_str(mu_r),
        "i_T": thm.i_T,
        "i_free": thm.i_free,
        "N": cfg.N,
        "checks": checks,
    }


def _bundle(cfg: ScenarioConfig, body: dict) -> dict:
    return {"tool": "orbitindex", "version": __version__, "config": cfg.as_dict(), **body}


def scenario_paper_s2(cfg: ScenarioConfig) -> tuple[int, dict]:
    """Run both orbit scenarios; returns (exit code, report)."""
    orbits = {}
    first_fail = None
    for name in ("fstar", "f2"):
        p, rep, seed = profile_for(cfg, name)
        require_valid(name, rep)
        res = analyze_orbit(p, replace(cfg, profile=name), seed)
        chi_exp, jump_exp = EXPECTED[name]
        res["mane_upper_bound"] = rep.mane_upper_bound
        res["checks"]["mane_below_half"] = rep.mane_upper_bound < 0.5
        res["checks"]["chi_expected"] = res["chi"] == chi_exp
        res["checks"]["index_jump_expected"] = res["i_free"] - res["i_T"] == jump_exp
        orbits[name] = res
        for key, ok in res["checks"].items():
            if not ok and first_fail is None:
                first_fail = f"{name}.{key}"
    report = _bundle(cfg, {"scenario": "paper-s2", "orbits": orbits, "first_failure": first_fail,
                           "passed": first_fail is None})
    return (0 if first_fail is None else 3), report


def shear_path(Tprime: float, T: float = 1.0, n: int = 301) -> SymplecticPath:
    t = np.linspace(0.0, T, n)
    mats = np.array([[[1.0, 0.0], [-s * Tprime / T, 1.0]] for s in t])
    return SymplecticPath(t, mats)


def shear_calibration(orientation: int = 1) -> dict:
    """rs_maslov of the shear family against 1/2 sign(-T')."""
    rows = []
    for tp in (-1.0, 0.0, 1.0):
        got = rs_maslov(shear_path(tp), orientation=orientation)
        want = Fraction(int(np.sign(-tp)), 2)
        rows.append({"Tprime": tp, "index": half_str(got), "expected": half_str(want), "pass": got == want})
    return {"rows": rows, "passed": all(r["pass"] for r in rows)}


def selftest(cfg: ScenarioConfig, flip_crossing_sign: bool = False) -> tuple[int, dict]:
    cal = shear_calibration(-1 if flip_crossing_sign else 1)
    suite = run_cf_suite(cfg.trials, cfg.seed, oracle=False)
    ax = axiom_checks()
    failed = [name for name, ok in (("shear_calibration", cal["passed"]), ("cf_suite", suite.passed),
                                    ("axioms", ax["passed"])) if not ok]
    report = _bundle(cfg, {"selftest": {"shear_calibration": cal, "cf_suite": suite.as_dict(), "axioms": ax},
                           "failed": failed, "passed": not failed})
    return (0 if not failed else 3), report
