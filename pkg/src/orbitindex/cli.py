"""Command-line front end.

    orbitindex profile validate   [--config FILE] [--set key=value ...]
    orbitindex orbit find         ... [--trajectory-csv PATH]
    orbitindex cylinder scan      ... [--csv PATH]
    orbitindex indices run        ...
    orbitindex scenario paper-s2  ...
    orbitindex selftest           ... [--flip-crossing-sign]

Exit codes: 0 pass, 2 validation failure, 3 numerical failure, 4 config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .dynamics import integrate_orbit
from .errors import ConfigError, OrbitIndexError
from .orbits import find_circular_orbit, scan_energy, write_scan_csv
from .scenario import (
    _bundle,
    analyze_orbit,
    load_config,
    profile_for,
    require_valid,
    scenario_paper_s2,
    selftest,
)


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, NaN written as null."""

    def clean(x):
        if isinstance(x, dict):
            return {str(k): clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, (bool, np.bool_)):
            return bool(x)
        if isinstance(x, (np.integer,)):
            return int(x)
        if isinstance(x, (float, np.floating)):
            return None if x != x else float(x)
        return x

    return json.dumps(clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(report: dict, out: str | None) -> None:
    text = dumps(report)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_profile_validate(cfg, args):
    p, rep, _ = profile_for(cfg)
    _emit(_bundle(cfg, {"profile": cfg.profile, "validation": rep.as_dict()}), args.out)
    if args.profile_csv:
        p.to_csv(args.profile_csv)
    return 0 if rep.passed else 2


def cmd_orbit_find(cfg, args):
    p, rep, seed = profile_for(cfg)
    require_valid(cfg.profile, rep)
    orb = find_circular_orbit(p, cfg.k, cfg.rho_seed or seed)
    body = {"orbit": {"k": orb.k, "rho": orb.rho, "a": orb.a, "T": orb.T}}
    if args.trajectory_csv:
        traj = integrate_orbit(p, orb.state(), orb.T, cfg.n_steps, cfg.rk_tol)
        traj.to_csv(args.trajectory_csv, p)
        body["orbit"]["energy_drift"] = traj.energy_drift
    _emit(_bundle(cfg, body), args.out)
    return 0


def cmd_cylinder_scan(cfg, args):
    p, rep, seed = profile_for(cfg)
    require_valid(cfg.profile, rep)
    ks = np.linspace(cfg.k_min, cfg.k_max, cfg.k_count) if cfg.k_count else []
    rows = scan_energy(p, ks, cfg.rho_seed or seed, k_seed=cfg.k)
    if args.csv:
        write_scan_csv(rows, args.csv)
    else:
        write_scan_csv(rows, sys.stdout)
    return 0 if all(r.status == "ok" for r in rows) else 3


def cmd_indices_run(cfg, args):
    p, rep, seed = profile_for(cfg)
    require_valid(cfg.profile, rep)
    res = analyze_orbit(p, cfg, cfg.rho_seed or seed)
    _emit(_bundle(cfg, {"orbit": res, "passed": all(res["checks"].values())}), args.out)
    return 0 if all(res["checks"].values()) else 3


def cmd_scenario(cfg, args):
    code, report = scenario_paper_s2(cfg)
    _emit(report, args.out)
    if code:
        print(f"first failing check: {report['first_failure']}", file=sys.stderr)
    return code


def cmd_selftest(cfg, args):
    code, report = selftest(cfg, flip_crossing_sign=args.flip_crossing_sign)
    _emit(report, args.out)
    if code:
        print(f"selftest failed: {', '.join(report['failed'])}", file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="plain-text key = value file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--out", help="write the JSON report here instead of stdout")

    ap = argparse.ArgumentParser(prog="orbitindex", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="group", required=True)

    def group(name, help_text):
        g = sub.add_parser(name, help=help_text)
        return g.add_subparsers(dest="action", required=True)

    g = group("profile", "magnetic profile tools")
    c = g.add_parser("validate", parents=[common])
    c.add_argument("--profile-csv", help="also write r, f, f', f'' on the validation grid")
    c.set_defaults(func=cmd_profile_validate)

    g = group("orbit", "circular orbits")
    c = g.add_parser("find", parents=[common])
    c.add_argument("--trajectory-csv", help="write the integrated orbit for plotting")
    c.set_defaults(func=cmd_orbit_find)

    g = group("cylinder", "orbit cylinders")
    c = g.add_parser("scan", parents=[common])
    c.add_argument("--csv", help="write the T(k) table here instead of stdout")
    c.set_defaults(func=cmd_cylinder_scan)

    g = group("indices", "index computations")
    c = g.add_parser("run", parents=[common])
    c.set_defaults(func=cmd_indices_run)

    g = group("scenario", "end-to-end scenarios")
    c = g.add_parser("paper-s2", parents=[common])
    c.set_defaults(func=cmd_scenario)

    c = sub.add_parser("selftest", parents=[common], help="spectral-flow suite and shear calibration")
    c.add_argument("--flip-crossing-sign", action="store_true", help="inject a sign fault; calibration must fail")
    c.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.out:
            args.out = os.path.join(cfg.output_dir, args.out) if not os.path.isabs(args.out) else args.out
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OrbitIndexError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
