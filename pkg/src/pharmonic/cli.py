"""Command-line front end: ``pharmonic solve|sweep|verify``.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import analysis as an
from . import config as cfgmod
from .errors import ConfigError, PHarmonicError
from .integrate import SolutionProfile, solve
from .serialize import fmt, load_profile, solution_document, write_json, write_profile_csv
from .suite import run_builtin, run_checks

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pharmonic", description="Rotationally symmetric p-harmonic map solver")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("solve", "solve one configuration"),
        ("sweep", "solve a parameter grid and write phase.csv"),
        ("verify", "run property checks; with no --config runs the built-in suite"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="key = value config file")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--rmax", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--alpha0", type=float)
        p.add_argument("--n", type=int)
        p.add_argument("--p", type=float)
        p.add_argument("--source", help="warp as kind[:k=v,...], e.g. power:m=2")
        p.add_argument("--target", help="warp as kind[:k=v,...]")
        p.add_argument("--jobs", type=int)
    return ap


def _overlay_warp(raw: dict, role: str, text: str):
    kind, _, rest = text.partition(":")
    for key in [k for k in raw if k.startswith(role + ".")]:
        del raw[key]
    raw[role] = kind.strip()
    for item in filter(None, (s.strip() for s in rest.split(","))):
        k, eq, v = item.partition("=")
        if not eq:
            raise ConfigError(f"--{role}: expected k=v, got {item!r}", key=role)
        raw[f"{role}.{k.strip()}"] = v.strip()


def raw_config(args) -> dict[str, str]:
    """File keys overlaid with command-line flags."""
    raw = cfgmod.load(args.config) if args.config else {}
    for flag, key in (("n", "n"), ("p", "p"), ("alpha0", "alpha0"), ("rmax", "r_max"), ("tol", "tol"), ("jobs", "jobs")):
        v = getattr(args, flag)
        if v is not None:
            raw[key] = repr(v)
    if args.out is not None:
        raw["out"] = str(args.out)
    for role in ("source", "target"):
        v = getattr(args, role)
        if v is not None:
            _overlay_warp(raw, role, v)
    return raw


def _report(profile: SolutionProfile, alpha0) -> dict:
    try:
        rep = an.classify_regime(profile)
        doc = rep.to_dict()
        observed = rep.regime
    except (PHarmonicError, ValueError) as exc:
        doc = {"regime": an.RegimeKind.UNDETERMINED.value, "params": {}, "evidence": [], "windows": {},
               "notes": [f"classification failed: {exc}"]}
        observed = an.Regime(an.RegimeKind.UNDETERMINED)
    if alpha0 is not None and alpha0 > 0:
        try:
            pred = an.predict_regime(profile.spec, alpha0, observed=profile)
            doc["prediction"] = {"regime": pred.kind.value, "params": pred.params,
                                 "consistent": an.consistent(pred, observed)}
        except PHarmonicError as exc:
            doc["prediction"] = {"regime": None, "note": str(exc)}
    return doc


def _solve_point(cfg: cfgmod.RunConfig) -> SolutionProfile:
    return solve(cfg.spec(), cfg.alpha0, cfg.r_max, cfg.tol, start=cfg.start,
                 epsilon_hint=cfg.epsilon, per_decade=cfg.per_decade)


def write_run(cfg: cfgmod.RunConfig, out: Path) -> tuple[SolutionProfile, dict]:
    out.mkdir(parents=True, exist_ok=True)
    prof = _solve_point(cfg)
    write_profile_csv(out / "profile.csv", prof)
    write_json(out / "solution.json", solution_document(prof, cfg.alpha0, cfg.start))
    rep = _report(prof, cfg.alpha0)
    write_json(out / "report.json", rep)
    return prof, rep


def run_solve(cfg: cfgmod.RunConfig) -> int:
    if cfg.sweep:
        raise ConfigError("solve takes no sweep axes; use the sweep subcommand", key="sweep")
    prof, rep = write_run(cfg, cfg.out)
    print(f"termination: {prof.termination}")
    print(f"regime: {rep['regime']} {rep['params'] or ''}".rstrip())
    if prof.termination.kind.value != "ReachedRMax":
        print(f"note: integration stopped early at r = {prof.termination.r:.6g}")
    return EXIT_OK


def _sweep_worker(args):
    idx, cfg = args
    row = {"regime": an.RegimeKind.UNDETERMINED.value, "exponent": "", "termination": "", "note": ""}
    try:
        prof, rep = write_run(cfg, cfg.out / "points" / f"{idx:04d}")
        row["regime"] = rep["regime"]
        row["termination"] = str(prof.termination)
        row["exponent"] = _exponent(prof)
        if rep["notes"]:
            row["note"] = "; ".join(rep["notes"])
    except (PHarmonicError, ValueError, ArithmeticError) as exc:
        row["note"] = f"{type(exc).__name__}: {exc}"
    return row


def _exponent(prof: SolutionProfile) -> str:
    """Fitted alpha' exponent on the tail window, or empty when it cannot be fitted."""
    if prof.trivial:
        return ""
    window = (prof.r_end / 2.0, prof.r_end)
    try:
        slope, _, _ = an.fit_asymptotic_exponent(prof, window)
    except (PHarmonicError, ValueError):
        return ""
    return fmt(slope) if math.isfinite(slope) else ""


def run_sweep(cfg: cfgmod.RunConfig) -> int:
    if not cfg.sweep:
        raise ConfigError("sweep needs at least one sweep.<axis> key", key="sweep")
    points = cfg.points()
    cfg.out.mkdir(parents=True, exist_ok=True)
    tasks = list(enumerate(points))
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_sweep_worker, tasks))
    else:
        rows = [_sweep_worker(t) for t in tasks]
    cols = ["n", "p", "alpha0"] + cfg.warp_param_columns() + ["regime", "exponent", "termination", "note"]
    with open(cfg.out / "phase.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for pt, row in zip(points, rows):
            a0 = "" if pt.alpha0 is None else fmt(pt.alpha0)
            w.writerow([pt.n, fmt(pt.p), a0] + [fmt(v) for v in pt.warp_param_values()]
                       + [row["regime"], row["exponent"], row["termination"], row["note"]])
    print(f"{len(rows)} points written to {cfg.out / 'phase.csv'}")
    return EXIT_OK


def run_verify(cfg) -> int:
    """Checks on a stored profile (StoredVerify) or an inline solve (RunConfig)."""
    if isinstance(cfg, cfgmod.StoredVerify):
        try:
            prof = load_profile(cfg.profile)
        except (FileNotFoundError, ValueError) as exc:
            raise ConfigError(f"key 'profile': {exc}", key="profile") from None
        label = str(cfg.profile)
    else:
        if cfg.sweep:
            raise ConfigError("verify takes no sweep axes", key="sweep")
        prof = _solve_point(cfg)
        label = "inline"
    return write_verify(cfg.out, run_checks(label, prof, cfg.check_enabled, cfg.verify_params))


def write_verify(out: Path, results: list[dict]) -> int:
    out.mkdir(parents=True, exist_ok=True)
    passed = all(r["passed"] for r in results)
    write_json(out / "verify.json", {"passed": passed, "checks": results})
    for r in results:
        status = "SKIP" if r["skipped"] else ("PASS" if r["passed"] else "FAIL")
        where = "" if r["first_violation_r"] is None else f" first violation at r = {r['first_violation_r']:.6g}"
        print(f"{status} {r['run']}: {r['check']}{where}")
    print(f"verify: {'all checks passed' if passed else 'FAILED'}")
    return EXIT_OK if passed else EXIT_VERIFY


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify" and args.config is None and not any(
            getattr(args, k) is not None for k in ("n", "p", "alpha0", "source", "target", "rmax")
        ):
            tol = args.tol if args.tol is not None else 1e-10
            return write_verify(args.out or Path("out"), run_builtin(tol))
        raw = raw_config(args)
        base = args.config.parent if args.config else Path(".")
        if args.command == "verify" and "profile" in raw:
            return run_verify(cfgmod.build_stored(raw, base))
        cfg = cfgmod.build(raw)
        if args.command == "solve":
            return run_solve(cfg)
        if args.command == "sweep":
            return run_sweep(cfg)
        return run_verify(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PHarmonicError, ArithmeticError, ValueError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
