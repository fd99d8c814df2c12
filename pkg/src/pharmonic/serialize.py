"""CSV and JSON persistence of profiles and reports."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .integrate import SolutionProfile, StartupSummary, StepStats, TerminationEvent
from .ode import ProblemSpec, euler_lagrange_residual
from .warp import make_profile

PROFILE_HEADER = ("r", "alpha", "alpha_prime", "theta")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_profile_csv(path, profile: SolutionProfile) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_HEADER)
        for row in zip(profile.r, profile.alpha, profile.alpha_prime, profile.theta):
            w.writerow([fmt(v) for v in row])


def read_profile_csv(path):
    """Return (r, alpha, alpha_prime, theta) arrays; the header must match exactly."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != PROFILE_HEADER:
        raise ValueError(f"{path}: expected header {','.join(PROFILE_HEADER)}")
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float).reshape(-1, 4)
    return data[:, 0], data[:, 1], data[:, 2], data[:, 3]


def spec_from_dict(d: dict) -> ProblemSpec:
    return ProblemSpec(
        n=int(d["n"]),
        p=float(d["p"]),
        f=make_profile(d["f"]["kind"], **d["f"]["params"]),
        g=make_profile(d["g"]["kind"], **d["g"]["params"]),
    )


def fd_residual_max(profile: SolutionProfile) -> float:
    """Largest equation residual with alpha'' from finite differences of stored alpha'."""
    if profile.trivial or len(profile.r) < 3:
        return 0.0
    app = np.gradient(profile.alpha_prime, profile.r)
    res = euler_lagrange_residual(profile.spec, profile.r, profile.alpha, profile.alpha_prime, app)
    return float(np.max(np.abs(res)))


def solution_document(profile: SolutionProfile, alpha0=None, start=None) -> dict:
    su = profile.startup
    doc = {
        "spec": profile.spec.to_dict(),
        "alpha0": alpha0,
        "start": None if start is None else {"r": start.r, "alpha": start.alpha, "alpha_prime": start.alpha_prime},
        "phi0": None if su is None else su.phi0,
        "alpha_pp0": None if su is None else su.alpha_pp0,
        "handoff_r": profile.handoff_r,
        "termination": profile.termination.to_dict(),
        "stats": _clean(profile.stats.to_dict()),
        "startup": None if su is None else su.to_dict(),
        "trivial": profile.trivial,
        "nodes": len(profile.r),
        "residual_summary": {"fd_residual_max": fd_residual_max(profile)},
    }
    return doc


def _clean(obj):
    # json has no inf/nan; map them to None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(doc), fh, indent=2)
        fh.write("\n")


def load_profile(directory) -> SolutionProfile:
    """Rebuild a profile from ``profile.csv`` plus ``solution.json`` in a run directory."""
    d = Path(directory)
    if d.is_file():
        d = d.parent
    csv_path, json_path = d / "profile.csv", d / "solution.json"
    for p in (csv_path, json_path):
        if not p.exists():
            raise FileNotFoundError(f"missing {p}")
    doc = json.loads(json_path.read_text())
    spec = spec_from_dict(doc["spec"])
    r, a, ap, th = read_profile_csv(csv_path)
    stats = StepStats(**{k: (math.inf if v is None else v) for k, v in doc["stats"].items()})
    su = doc.get("startup")
    return SolutionProfile(
        spec=spec,
        handoff_r=float(doc["handoff_r"]),
        r=r,
        alpha=a,
        alpha_prime=ap,
        theta=th,
        termination=TerminationEvent.from_dict(doc["termination"]),
        stats=stats,
        startup=None if su is None else StartupSummary(**su),
        trivial=bool(doc.get("trivial", False)),
    )
