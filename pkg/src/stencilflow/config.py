"""Run configuration files: ``key = value`` lines, ``#`` comments.

Every key is optional; omitted keys take the values in :data:`DEFAULTS`.
List values are comma separated.  ``re`` sets the viscosity as
``lid_speed * length / re`` with the cavity length taken as ``lx``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .cfd import FluidParams, SolverConfig

__all__ = ["ConfigError", "RunConfig", "DEFAULTS", "load_config", "parse_config"]


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line


def _float(s):
    v = float(s)
    if not math.isfinite(v) and v != math.inf:
        raise ValueError(s)
    return v


def _int(s):
    return int(s, 10)


def _ints(n):
    def parse(s):
        vals = tuple(int(p, 10) for p in s.split(","))
        if n is not None and len(vals) != n:
            raise ValueError(s)
        return vals
    return parse


def _floats(n):
    def parse(s):
        vals = tuple(float(p) for p in s.split(","))
        if len(vals) != n:
            raise ValueError(s)
        return vals
    return parse


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(s)
        return s
    return parse


def _tile(s):
    if s in ("", "plan"):
        return None
    return _ints(3)(s)


def _str(s):
    return s


# key -> (parser, default, description)
SCHEMA: dict[str, tuple[Callable[[str], Any], Any, str]] = {
    "grid": (_ints(3), (32, 32, 3), "cells along x,y,z"),
    "lengths": (_floats(3), (1.0, 1.0, 1.0), "box size along x,y,z"),
    "re": (_float, 100.0, "Reynolds number lid_speed*lx/nu"),
    "density": (_float, 1.0, "fluid density"),
    "lid_speed": (_float, 1.0, "lid velocity along +x"),
    "body_force": (_floats(3), (0.0, 0.0, 0.0), "body force per unit mass"),
    "alpha": (_float, 0.0, "donor-cell blend of the advective fluxes"),
    "sigma": (_float, 0.5, "time step safety factor"),
    "eps": (_float, 1e-6, "pressure iteration tolerance on max|div u|"),
    "omega": (_float, 1.7, "over-relaxation factor"),
    "max_sweeps": (_int, 500, "pressure sweeps per step at most"),
    "output_every": (_int, 100, "progress line every N steps"),
    "steady_tol": (_float, 1e-6, "steady when max|du|/dt falls to this"),
    "max_time": (_float, math.inf, "stop at this time even if not steady"),
    "max_steps": (_int, 1_000_000, "stop after this many steps"),
    "z_boundary": (_choice("symmetry", "wall"), "symmetry", "z faces of the cavity"),
    "workers": (_int, 1, "number of workers"),
    "mode": (_choice("plain", "overlap"), "plain", "exchange scheduling"),
    "tile": (_tile, None, "tile override tx,ty,tz (plan tiles when unset)"),
    "ghost": (_int, 1, "ghost layers per side"),
    "backend": (_choice("auto", "numpy", "compiled"), "auto", "kernel backend"),
    "staging": (_choice("copy", "view"), "copy", "cached binding staging"),
    "steps": (_int, 10, "fixed step count for benchmarks"),
    "output_dir": (_str, ".", "directory for outputs"),
    "profiles": (_str, "profiles.csv", "centreline profile file"),
    "residuals": (_str, "residuals.csv", "per-step residual log"),
    "dump_fields": (_choice("yes", "no"), "yes", "write gathered fields as SFG1"),
}

DEFAULTS = {k: v[1] for k, v in SCHEMA.items()}


@dataclass
class RunConfig:
    solver: SolverConfig
    fluid: FluidParams
    workers: int = 1
    mode: str = "plain"
    tile: tuple[int, int, int] | None = None
    ghost: int = 1
    backend: str = "auto"
    staging: str = "copy"
    steps: int = 10
    output_dir: Path = Path(".")
    profiles: str = "profiles.csv"
    residuals: str = "residuals.csv"
    dump_fields: bool = True
    values: dict = field(default_factory=dict)

    def output(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.output_dir / p


def parse_config(text: str, path: str | None = None) -> RunConfig:
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if key in values:
            raise ConfigError(f"key {key!r} given twice", lineno, path)
        try:
            values[key] = SCHEMA[key][0](value)
        except ValueError:
            raise ConfigError(f"bad value {value!r} for {key} ({SCHEMA[key][2]})", lineno, path) from None
        lines[key] = lineno
    merged = {**DEFAULTS, **values}

    def check(key, ok, why):
        if not ok:
            raise ConfigError(f"bad value for {key}: {why}", lines.get(key), path)

    check("workers", merged["workers"] >= 1, "need at least one worker")
    check("ghost", merged["ghost"] >= 1, "kernels read one layer of neighbours")
    check("steps", merged["steps"] >= 0, "must not be negative")
    check("lid_speed", merged["lid_speed"] > 0, "must be positive")
    if merged["tile"] is not None:
        check("tile", min(merged["tile"]) >= 1, "tile sizes must be positive")
    try:
        solver = SolverConfig(
            extents=merged["grid"], lengths=merged["lengths"], re=merged["re"],
            sigma=merged["sigma"], eps=merged["eps"], omega=merged["omega"],
            max_sweeps=merged["max_sweeps"], output_every=merged["output_every"],
            steady_tol=merged["steady_tol"], max_time=merged["max_time"],
            max_steps=merged["max_steps"], z_boundary=merged["z_boundary"],
        )
    except ValueError as exc:
        key = _blame(str(exc), lines)
        raise ConfigError(f"bad value: {exc}", lines.get(key), path) from None
    try:
        fluid = FluidParams(
            nu=merged["lid_speed"] * merged["lengths"][0] / merged["re"],
            density=merged["density"], body_force=merged["body_force"],
            lid_speed=merged["lid_speed"], alpha=merged["alpha"],
        )
    except ValueError as exc:
        key = _blame(str(exc), lines)
        raise ConfigError(f"bad value: {exc}", lines.get(key), path) from None
    return RunConfig(
        solver=solver, fluid=fluid, workers=merged["workers"], mode=merged["mode"],
        tile=merged["tile"], ghost=merged["ghost"], backend=merged["backend"],
        staging=merged["staging"], steps=merged["steps"],
        output_dir=Path(merged["output_dir"]), profiles=merged["profiles"],
        residuals=merged["residuals"], dump_fields=merged["dump_fields"] == "yes",
        values=merged,
    )


_BLAME = {
    "CFL": "sigma", "over-relaxation": "omega", "pressure tolerance": "eps", "Reynolds": "re",
    "max_sweeps": "max_sweeps", "output_every": "output_every", "steady_tol": "steady_tol",
    "extents": "grid", "lengths": "lengths", "density": "density", "blend": "alpha",
    "viscosity": "re", "z_boundary": "z_boundary",
}


def _blame(message: str, lines: dict) -> str | None:
    for needle, key in _BLAME.items():
        if needle in message:
            return key
    return None


def load_config(path) -> RunConfig:
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from None
    return parse_config(text, path)
