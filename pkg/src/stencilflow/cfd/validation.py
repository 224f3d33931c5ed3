"""Centreline profiles, reference comparison and the Taylor-Green vortex."""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

from ..grid import MovingLid, NoSlipWall, Symmetry, face_index, scatter
from .solver import CfdState, FluidParams, SolverConfig, init_state

__all__ = [
    "Profiles",
    "centerline_profiles",
    "read_profiles",
    "write_profiles",
    "reference_profiles",
    "profile_deviation",
    "init_taylor_green",
    "taylor_green_fields",
    "taylor_green_error",
    "mirror_asymmetry",
    "field_mirror_asymmetry",
]


@dataclass
class Profiles:
    """``u`` sampled at heights ``y`` and ``v`` sampled at abscissae ``x``."""

    y: np.ndarray
    u: np.ndarray
    x: np.ndarray
    v: np.ndarray


def _sample(values: np.ndarray, coords: np.ndarray, at: float) -> np.ndarray:
    """Linear interpolation along axis 0 at coordinate ``at``."""
    k = int(np.searchsorted(coords, at))
    if k < len(coords) and coords[k] == at:
        return values[k]
    if k == 0 or k == len(coords):
        raise ValueError(f"coordinate {at} outside sampled range")
    w = (at - coords[k - 1]) / (coords[k] - coords[k - 1])
    return (1.0 - w) * values[k - 1] + w * values[k]


def _wall_value(state: CfdState, name: str, face: str) -> float:
    bc = state.driver.boundaries.get(name, {})
    cond = bc.get(face_index(face))
    if isinstance(cond, (NoSlipWall, MovingLid)):
        return float(cond.value)
    raise ValueError(f"{name} has no wall value on face {face}")


def centerline_profiles(state: CfdState) -> Profiles:
    """u along x = Lx/2 and v along y = Ly/2, both in the middle z plane.

    Face values are interpolated linearly onto the lines; the wall values
    close each profile.
    """
    cfg = state.config
    nx, ny, nz = cfg.extents
    lx, ly, lz = cfg.lengths
    dx, dy, dz = cfg.spacing
    vx = state.gathered("vx")
    vy = state.gathered("vy")
    zc = (np.arange(nz) + 0.5) * dz
    zmid = 0.5 * lz

    def midz(a):
        return _sample(np.moveaxis(a, 2, 0), zc, zmid) if nz > 1 else a[:, :, 0]

    u2 = midz(vx)  # (nx, ny)
    v2 = midz(vy)
    # vx faces sit at x = (i+1) dx; the x- wall face (value 0 for a wall) closes the row
    xf = np.concatenate([[0.0], (np.arange(nx) + 1) * dx])
    u_line = _sample(np.concatenate([np.full((1, ny), _wall_value(state, "vx", "x-")), u2]), xf, 0.5 * lx)
    yc = (np.arange(ny) + 0.5) * dy
    y = np.concatenate([[0.0], yc, [ly]])
    u = np.concatenate([[_wall_value(state, "vx", "y-")], u_line, [_wall_value(state, "vx", "y+")]])

    yf = np.concatenate([[0.0], (np.arange(ny) + 1) * dy])
    v_line = _sample(np.concatenate([np.full((1, nx), _wall_value(state, "vy", "y-")), v2.T]), yf, 0.5 * ly)
    xc = (np.arange(nx) + 0.5) * dx
    x = np.concatenate([[0.0], xc, [lx]])
    v = np.concatenate([[_wall_value(state, "vy", "x-")], v_line, [_wall_value(state, "vy", "x+")]])
    return Profiles(y, u, x, v)


def write_profiles(path, prof: Profiles, header: Sequence[str] = ()) -> None:
    with open(path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("y,u\n")
        for a, b in zip(prof.y, prof.u):
            fh.write(f"{float(a)!r},{float(b)!r}\n")
        fh.write("x,v\n")
        for a, b in zip(prof.x, prof.v):
            fh.write(f"{float(a)!r},{float(b)!r}\n")


def read_profiles(path) -> Profiles:
    """Parse the two-section ``y,u`` / ``x,v`` format (``#`` lines are comments)."""
    sections: dict[str, list[tuple[float, float]]] = {}
    current = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cols = [c.strip() for c in line.split(",")]
            if len(cols) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns, got {len(cols)}")
            if tuple(cols) in (("y", "u"), ("x", "v")):
                current = cols[0] + cols[1]
                if current in sections:
                    raise ValueError(f"{path}:{lineno}: duplicate section {','.join(cols)}")
                sections[current] = []
                continue
            if current is None:
                raise ValueError(f"{path}:{lineno}: data before a 'y,u' or 'x,v' header")
            try:
                sections[current].append((float(cols[0]), float(cols[1])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not a number in {line!r}") from None
    for key in ("yu", "xv"):
        if not sections.get(key):
            raise ValueError(f"{path}: missing or empty section {key[0]},{key[1]}")
    yu = np.array(sorted(sections["yu"]))
    xv = np.array(sorted(sections["xv"]))
    return Profiles(yu[:, 0], yu[:, 1], xv[:, 0], xv[:, 1])


def reference_profiles() -> Profiles:
    """The packaged Re = 100 reference table."""
    with resources.as_file(resources.files("stencilflow").joinpath("data/ghia_re100.csv")) as path:
        return read_profiles(path)


def profile_deviation(computed: Profiles, reference: Profiles) -> tuple[float, float]:
    """Max ``|computed - reference|`` at the reference points, for u and for v.

    Computed profiles are interpolated linearly to the reference coordinates.
    """
    du = np.abs(np.interp(reference.y, computed.y, computed.u) - reference.u)
    dv = np.abs(np.interp(reference.x, computed.x, computed.v) - reference.v)
    return float(du.max()), float(dv.max())


def mirror_asymmetry(state: CfdState) -> float:
    """Largest departure from mirror symmetry about the mid-z plane."""
    return field_mirror_asymmetry(*(state.gathered(n) for n in ("vx", "vy", "vz")))


def field_mirror_asymmetry(vx: np.ndarray, vy: np.ndarray, vz: np.ndarray) -> float:
    """:func:`mirror_asymmetry` on gathered velocity arrays."""
    out = max(float(np.max(np.abs(vx - vx[:, :, ::-1]))), float(np.max(np.abs(vy - vy[:, :, ::-1]))))
    # vz sits on z faces: face k mirrors to face nz-2-k with the sign flipped
    if vz.shape[2] > 1:
        inner = vz[:, :, :-1]
        out = max(out, float(np.max(np.abs(inner + inner[:, :, ::-1]))))
    return out


# -- Taylor-Green -------------------------------------------------------------


def taylor_green_fields(n: int, t: float, nu: float, density: float = 1.0):
    """Analytic ``(vx, vy, p)`` on the staggered ``n x n x 1`` grid over [0, 2pi]^2."""
    h = 2.0 * math.pi / n
    xc = (np.arange(n) + 0.5) * h
    xf = (np.arange(n) + 1.0) * h
    decay = math.exp(-2.0 * nu * t)
    vx = (np.sin(xf)[:, None] * np.cos(xc)[None, :] * decay)[:, :, None]
    vy = (-np.cos(xc)[:, None] * np.sin(xf)[None, :] * decay)[:, :, None]
    p = (0.25 * density * (np.cos(2.0 * xc)[:, None] + np.cos(2.0 * xc)[None, :]) * decay * decay)[:, :, None]
    return vx, vy, p


def init_taylor_green(
    n: int,
    nu: float,
    *,
    sigma: float = 0.5,
    eps: float = 1e-10,
    omega: float = 1.7,
    max_sweeps: int = 2000,
    **kwargs,
) -> CfdState:
    """Box of side 2pi, periodic in x and y, one cell thick between symmetry
    planes in z, holding the decaying vortex at t = 0."""
    h = 2.0 * math.pi / n
    config = SolverConfig(
        extents=(n, n, 1), lengths=(2.0 * math.pi, 2.0 * math.pi, h),
        re=1.0 / nu, sigma=sigma, eps=eps, omega=omega, max_sweeps=max_sweeps,
    )
    params = FluidParams(nu=nu)
    planes = {"z-": Symmetry(), "z+": Symmetry()}
    bcs = {name: dict(planes) for name in ("vx", "vy", "vz", "p")}
    state = init_state(config, params, bcs, periodic=(True, True, False), **kwargs)
    vx, vy, p = taylor_green_fields(n, 0.0, nu, params.density)
    scatter(vx, state.fields["vx"])
    scatter(vy, state.fields["vy"])
    scatter(p, state.fields["p"])
    state.driver.exchange_ghosts([state.fields[k] for k in ("vx", "vy", "vz", "p")], bcs=True)
    return state


def taylor_green_error(state: CfdState, t: float | None = None, params: FluidParams | None = None) -> float:
    """Volume-weighted L2 norm of the velocity error against the analytic vortex."""
    params = params or state.params
    t = state.t if t is None else t
    n = state.config.extents[0]
    vx, vy, _ = taylor_green_fields(n, t, params.nu, params.density)
    ex = state.gathered("vx") - vx
    ey = state.gathered("vy") - vy
    ez = state.gathered("vz")
    dx, dy, dz = state.config.spacing
    return math.sqrt(float(np.sum(ex * ex) + np.sum(ey * ey) + np.sum(ez * ez)) * dx * dy * dz)
