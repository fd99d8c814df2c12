"""Run configuration: flat ``key = value`` text with dotted keys.

Example::

    # hyperbolic trichotomy
    n = 3
    p = 3
    source = hyperbolic
    target = hyperbolic
    alpha0 = 0.5
    r_max = 30
    sweep.alpha0 = 0.5, 1.0, 2.0

Warp parameters use ``source.<name>`` / ``target.<name>`` (e.g. ``source.m = 2``),
an interior start uses ``start.r``, ``start.alpha``, ``start.alpha_prime``,
sweep axes are comma lists under ``sweep.``, and checks are toggled with
``verify.<check> = true|false``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .ode import ProblemSpec, StatePoint
from .warp import KIND_PARAMS, WarpKind, make_profile

CHECKS = ("monotonicity", "energy_slope", "cone", "cone_separation", "energy_floor", "vanishing_order", "barrier")
_SCALARS = {"n", "p", "alpha0", "r_max", "tol", "out", "jobs", "epsilon", "per_decade", "source", "target"}
_VERIFY_PARAMS = {"a", "b", "window", "cone_c", "C2", "C", "rate", "lower"}
_ALIASES = {"rmax": "r_max"}


def parse_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """Parse key-value lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq or not key:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw.strip()!r}", key=key or None)
        key = _ALIASES.get(key, key)
        if key in out:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}", key=key)
        out[key] = value.strip()
    return out


@dataclass
class RunConfig:
    n: int
    p: float
    source: str
    source_params: dict
    target: str
    target_params: dict
    r_max: float
    alpha0: Optional[float] = None
    start: Optional[StatePoint] = None
    tol: float = 1e-10
    out: Path = Path("out")
    jobs: int = 1
    epsilon: float = 0.05
    per_decade: int = 200
    sweep: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    verify_params: dict = field(default_factory=dict)
    def spec(self) -> ProblemSpec:
        return ProblemSpec(
            self.n,
            self.p,
            make_profile(self.source, **self.source_params),
            make_profile(self.target, **self.target_params),
        )

    def warp_param_columns(self) -> list[str]:
        cols = [f"source.{k}" for k in sorted(KIND_PARAMS[WarpKind(self.source)])]
        return cols + [f"target.{k}" for k in sorted(KIND_PARAMS[WarpKind(self.target)])]

    def warp_param_values(self) -> list[float]:
        f = make_profile(self.source, **self.source_params)
        g = make_profile(self.target, **self.target_params)
        return [v for _, v in f.params] + [v for _, v in g.params]

    def points(self) -> list["RunConfig"]:
        """Sweep grid in lexicographic order over the axes n, p, alpha0, source.*, target.*."""
        if not self.sweep:
            return [self]
        order = sorted(self.sweep, key=_axis_rank)
        combos = itertools.product(*(self.sweep[a] for a in order))
        pts = []
        for combo in combos:
            cfg = replace(self, sweep={}, source_params=dict(self.source_params), target_params=dict(self.target_params))
            for axis, val in zip(order, combo):
                _set_axis(cfg, axis, val)
            pts.append(cfg)
        return pts

    def check_enabled(self, name: str) -> bool:
        return self.verify.get(name, True)


def _axis_rank(axis: str):
    base = {"n": 0, "p": 1, "alpha0": 2}
    if axis in base:
        return (base[axis], axis)
    return (3 if axis.startswith("source.") else 4, axis)


def _set_axis(cfg: RunConfig, axis: str, val: float):
    if axis == "n":
        cfg.n = int(val)
    elif axis == "p":
        cfg.p = float(val)
    elif axis == "alpha0":
        cfg.alpha0 = float(val)
    elif axis.startswith("source."):
        cfg.source_params[axis.split(".", 1)[1]] = float(val)
    elif axis.startswith("target."):
        cfg.target_params[axis.split(".", 1)[1]] = float(val)


def _num(raw: dict, key: str, kind=float, required=True, default=None):
    if key not in raw:
        if required:
            raise ConfigError(f"missing required key {key!r}", key=key)
        return default
    try:
        v = kind(raw[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot read {raw[key]!r} as {kind.__name__}", key=key) from None
    if isinstance(v, float) and not math.isfinite(v):
        raise ConfigError(f"key {key!r} must be finite", key=key)
    return v


def _bool(key, text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"key {key!r}: expected true or false, got {text!r}", key=key)


def _float_list(key, text):
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ConfigError(f"sweep axis {key!r} is empty", key=key)
    try:
        return sorted(float(s) for s in items)
    except ValueError:
        raise ConfigError(f"sweep axis {key!r}: not a list of numbers: {text!r}", key=key) from None


def verify_section(raw: dict[str, str]) -> tuple[dict, dict]:
    """Check toggles and check parameters from the ``verify.`` keys."""
    verify, vparams = {}, {}
    for key, val in raw.items():
        if key.startswith("verify."):
            name = key.split(".", 1)[1]
            if name in CHECKS:
                verify[name] = _bool(key, val)
            elif name in _VERIFY_PARAMS:
                if name == "lower":
                    if val not in ("p-1", "min"):
                        raise ConfigError("key 'verify.lower' must be 'p-1' or 'min'", key=key)
                    vparams[name] = val
                elif name == "window":
                    parts = [s.strip() for s in val.split(",")]
                    if len(parts) != 2:
                        raise ConfigError("key 'verify.window' needs 'lo, hi'", key=key)
                    try:
                        vparams[name] = (float(parts[0]), float(parts[1]))
                    except ValueError:
                        raise ConfigError(f"key 'verify.window': not numbers: {val!r}", key=key) from None
                else:
                    vparams[name] = _num(raw, key)
            else:
                raise ConfigError(f"unknown key {key!r}", key=key)
    return verify, vparams


def build(raw: dict[str, str]) -> RunConfig:
    """Validate a flat key-value mapping into a RunConfig."""
    for key in raw:
        head = key.split(".", 1)[0]
        if key in _SCALARS or head in ("source", "target", "start", "sweep", "verify"):
            continue
        raise ConfigError(f"unknown key {key!r}", key=key)

    warps = {}
    for role in ("source", "target"):
        if role not in raw:
            raise ConfigError(f"missing required key {role!r}", key=role)
        kind = raw[role].strip().lower()
        try:
            wk = WarpKind(kind)
        except ValueError:
            raise ConfigError(f"key {role!r}: unknown warp kind {raw[role]!r}", key=role) from None
        params = {}
        for key, val in raw.items():
            if key.startswith(role + "."):
                name = key.split(".", 1)[1]
                if name not in KIND_PARAMS[wk]:
                    raise ConfigError(f"unknown key {key!r} for warp kind {kind!r}", key=key)
                params[name] = _num(raw, key)
        try:
            make_profile(wk, **params)
        except ValueError as exc:
            raise ConfigError(f"key {role!r}: {exc}", key=role) from None
        warps[role] = (wk.value, params)

    n = _num(raw, "n", int)
    p = _num(raw, "p")
    r_max = _num(raw, "r_max")
    if r_max <= 0:
        raise ConfigError("key 'r_max' must be positive", key="r_max")
    tol = _num(raw, "tol", required=False, default=1e-10)
    if not (1e-14 < tol < 1e-2):
        raise ConfigError("key 'tol' must lie in (1e-14, 1e-2)", key="tol")

    start_keys = [k for k in raw if k.startswith("start.")]
    start = None
    if start_keys:
        vals = {}
        for name in ("r", "alpha", "alpha_prime"):
            vals[name] = _num(raw, f"start.{name}")
        extra = set(start_keys) - {"start.r", "start.alpha", "start.alpha_prime"}
        if extra:
            k = sorted(extra)[0]
            raise ConfigError(f"unknown key {k!r}", key=k)
        try:
            start = StatePoint(vals["r"], vals["alpha"], vals["alpha_prime"])
        except ValueError as exc:
            raise ConfigError(f"key 'start.r': {exc}", key="start.r") from None
    alpha0 = _num(raw, "alpha0", required=False)
    sweep = {}
    for key, val in raw.items():
        if key.startswith("sweep."):
            axis = key.split(".", 1)[1]
            if axis not in ("n", "p", "alpha0") and not (
                axis.startswith("source.") or axis.startswith("target.")
            ):
                raise ConfigError(f"unknown sweep axis {key!r}", key=key)
            if axis.startswith(("source.", "target.")):
                role, name = axis.split(".", 1)
                if name not in KIND_PARAMS[WarpKind(warps[role][0])]:
                    raise ConfigError(f"unknown sweep axis {key!r} for warp kind {warps[role][0]!r}", key=key)
            sweep[axis] = _float_list(key, val)
    if start is None and alpha0 is None and "alpha0" not in sweep:
        raise ConfigError("missing required key 'alpha0' (or start.r/start.alpha/start.alpha_prime)", key="alpha0")
    if start is not None and (alpha0 is not None or "alpha0" in sweep):
        raise ConfigError("give either 'alpha0' or an interior start, not both", key="alpha0")

    verify, vparams = verify_section(raw)

    jobs = _num(raw, "jobs", int, required=False, default=1)
    if jobs < 1:
        raise ConfigError("key 'jobs' must be at least 1", key="jobs")
    cfg = RunConfig(
        n=n,
        p=p,
        source=warps["source"][0],
        source_params=warps["source"][1],
        target=warps["target"][0],
        target_params=warps["target"][1],
        r_max=r_max,
        alpha0=alpha0,
        start=start,
        tol=tol,
        out=Path(raw.get("out", "out")),
        jobs=jobs,
        epsilon=_num(raw, "epsilon", required=False, default=0.05),
        per_decade=_num(raw, "per_decade", int, required=False, default=200),
        sweep=sweep,
        verify=verify,
        verify_params=vparams,
    )
    for pt in cfg.points():
        try:
            pt.spec()
        except ValueError as exc:
            key = "n" if "n must" in str(exc) else "p" if "p must" in str(exc) else None
            raise ConfigError(f"invalid problem: {exc}", key=key) from None
    return cfg


@dataclass
class StoredVerify:
    """Checks on a profile already on disk; its spec comes from solution.json."""

    profile: Path
    out: Path
    verify: dict
    verify_params: dict

    def check_enabled(self, name: str) -> bool:
        return self.verify.get(name, True)


def build_stored(raw: dict[str, str], base_dir: Path = Path(".")) -> StoredVerify:
    for key in raw:
        if key not in ("profile", "out") and not key.startswith("verify."):
            raise ConfigError(f"key {key!r} cannot be combined with 'profile' (the stored run carries its spec)", key=key)
    verify, vparams = verify_section(raw)
    return StoredVerify(base_dir / raw["profile"], Path(raw.get("out", "out")), verify, vparams)


def load(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", key="config") from None
    return parse_text(text, str(path))
