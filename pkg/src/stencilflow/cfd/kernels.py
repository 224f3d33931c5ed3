"""Point functions of the flow solver and their registration from ``cfd.ccl``.

Velocities live on cell faces (``vx`` at ``i+1/2``), pressure and the
relaxation coefficient at cell centres.  Runtime constants (time step,
spacing, viscosity, ...) arrive through ``env``.
"""

from __future__ import annotations

from importlib import resources

from ..codegen import build_plan
from ..descriptor import parse_descriptor, validate_all
from ..executor import Executor, absolute, where

__all__ = [
    "FIELDS",
    "load_cfd_descriptors",
    "register_cfd_kernels",
    "update_velocity",
    "pressure_sweep",
    "divergence",
]

FIELDS = ("vx", "vy", "vz", "p", "rcoef", "div")


def update_velocity(vx, vy, vz, p, density, env):
    """Explicit momentum step: donor-cell blended advective fluxes, viscous
    diffusion, body force and the pressure gradient."""
    dt = env.dt
    a = env.alpha
    nu = env.nu
    cx = 0.25 / env.dx
    cy = 0.25 / env.dy
    cz = 0.25 / env.dz
    rx2 = 1.0 / (env.dx * env.dx)
    ry2 = 1.0 / (env.dy * env.dy)
    rz2 = 1.0 / (env.dz * env.dz)

    # x component, at (i+1/2, j, k)
    u = vx()
    ue = u + vx(1, 0, 0)
    uw = vx(-1, 0, 0) + u
    fux = (ue * ue + a * absolute(ue) * (u - vx(1, 0, 0))
           - uw * uw - a * absolute(uw) * (vx(-1, 0, 0) - u)) * cx
    vn = vy() + vy(1, 0, 0)
    vs = vy(0, -1, 0) + vy(1, -1, 0)
    fuy = (vn * (u + vx(0, 1, 0)) + a * absolute(vn) * (u - vx(0, 1, 0))
           - vs * (vx(0, -1, 0) + u) - a * absolute(vs) * (vx(0, -1, 0) - u)) * cy
    wt = vz() + vz(1, 0, 0)
    wb = vz(0, 0, -1) + vz(1, 0, -1)
    fuz = (wt * (u + vx(0, 0, 1)) + a * absolute(wt) * (u - vx(0, 0, 1))
           - wb * (vx(0, 0, -1) + u) - a * absolute(wb) * (vx(0, 0, -1) - u)) * cz
    visu = nu * ((vx(1, 0, 0) - 2.0 * u + vx(-1, 0, 0)) * rx2
                 + (vx(0, 1, 0) - 2.0 * u + vx(0, -1, 0)) * ry2
                 + (vx(0, 0, 1) - 2.0 * u + vx(0, 0, -1)) * rz2)
    gpx = (p(1, 0, 0) - p()) / (density * env.dx)
    u_new = u + dt * (env.fx - fux - fuy - fuz + visu - gpx)

    # y component, at (i, j+1/2, k)
    v = vy()
    ue = vx() + vx(0, 1, 0)
    uw = vx(-1, 0, 0) + vx(-1, 1, 0)
    fvx = (ue * (v + vy(1, 0, 0)) + a * absolute(ue) * (v - vy(1, 0, 0))
           - uw * (vy(-1, 0, 0) + v) - a * absolute(uw) * (vy(-1, 0, 0) - v)) * cx
    vn = v + vy(0, 1, 0)
    vs = vy(0, -1, 0) + v
    fvy = (vn * vn + a * absolute(vn) * (v - vy(0, 1, 0))
           - vs * vs - a * absolute(vs) * (vy(0, -1, 0) - v)) * cy
    wt = vz() + vz(0, 1, 0)
    wb = vz(0, 0, -1) + vz(0, 1, -1)
    fvz = (wt * (v + vy(0, 0, 1)) + a * absolute(wt) * (v - vy(0, 0, 1))
           - wb * (vy(0, 0, -1) + v) - a * absolute(wb) * (vy(0, 0, -1) - v)) * cz
    visv = nu * ((vy(1, 0, 0) - 2.0 * v + vy(-1, 0, 0)) * rx2
                 + (vy(0, 1, 0) - 2.0 * v + vy(0, -1, 0)) * ry2
                 + (vy(0, 0, 1) - 2.0 * v + vy(0, 0, -1)) * rz2)
    gpy = (p(0, 1, 0) - p()) / (density * env.dy)
    v_new = v + dt * (env.fy - fvx - fvy - fvz + visv - gpy)

    # z component, at (i, j, k+1/2)
    w = vz()
    ue = vx() + vx(0, 0, 1)
    uw = vx(-1, 0, 0) + vx(-1, 0, 1)
    fwx = (ue * (w + vz(1, 0, 0)) + a * absolute(ue) * (w - vz(1, 0, 0))
           - uw * (vz(-1, 0, 0) + w) - a * absolute(uw) * (vz(-1, 0, 0) - w)) * cx
    vn = vy() + vy(0, 0, 1)
    vs = vy(0, -1, 0) + vy(0, -1, 1)
    fwy = (vn * (w + vz(0, 1, 0)) + a * absolute(vn) * (w - vz(0, 1, 0))
           - vs * (vz(0, -1, 0) + w) - a * absolute(vs) * (vz(0, -1, 0) - w)) * cy
    wt = w + vz(0, 0, 1)
    wb = vz(0, 0, -1) + w
    fwz = (wt * wt + a * absolute(wt) * (w - vz(0, 0, 1))
           - wb * wb - a * absolute(wb) * (vz(0, 0, -1) - w)) * cz
    visw = nu * ((vz(1, 0, 0) - 2.0 * w + vz(-1, 0, 0)) * rx2
                 + (vz(0, 1, 0) - 2.0 * w + vz(0, -1, 0)) * ry2
                 + (vz(0, 0, 1) - 2.0 * w + vz(0, 0, -1)) * rz2)
    gpz = (p(0, 0, 1) - p()) / (density * env.dz)
    w_new = w + dt * (env.fz - fwx - fwy - fwz + visw - gpz)

    return {"vx": u_new, "vy": v_new, "vz": w_new}


def pressure_sweep(vx, vy, vz, p, rcoef, density, omega, idx, env):
    """Relax the cells of colour ``env.colour``.

    Each point owns its three high faces.  Exactly one of the two cells
    sharing a face has the active colour, so every face receives the
    correction of one cell; the neighbour's divergence is rebuilt from the
    pre-sweep faces.
    """
    dt = env.dt
    rdx = 1.0 / env.dx
    rdy = 1.0 / env.dy
    rdz = 1.0 / env.dz
    i, j, k = idx
    on = (i + j + k) % 2 == env.colour

    d_c = (vx() - vx(-1, 0, 0)) * rdx + (vy() - vy(0, -1, 0)) * rdy + (vz() - vz(0, 0, -1)) * rdz
    d_e = (vx(1, 0, 0) - vx()) * rdx + (vy(1, 0, 0) - vy(1, -1, 0)) * rdy + (vz(1, 0, 0) - vz(1, 0, -1)) * rdz
    d_n = (vx(0, 1, 0) - vx(-1, 1, 0)) * rdx + (vy(0, 1, 0) - vy()) * rdy + (vz(0, 1, 0) - vz(0, 1, -1)) * rdz
    d_t = (vx(0, 0, 1) - vx(-1, 0, 1)) * rdx + (vy(0, 0, 1) - vy(0, -1, 1)) * rdy + (vz(0, 0, 1) - vz()) * rdz

    phi_c = where(on, -omega * d_c * rcoef() / dt, 0.0)
    phi_e = where(on, 0.0, -omega * d_e * rcoef(1, 0, 0) / dt)
    phi_n = where(on, 0.0, -omega * d_n * rcoef(0, 1, 0) / dt)
    phi_t = where(on, 0.0, -omega * d_t * rcoef(0, 0, 1) / dt)

    return {
        "vx": vx() + dt * (phi_c - phi_e) * rdx,
        "vy": vy() + dt * (phi_c - phi_n) * rdy,
        "vz": vz() + dt * (phi_c - phi_t) * rdz,
        "p": p() + density * phi_c,
    }


def divergence(vx, vy, vz, div, env):
    rdx = 1.0 / env.dx
    rdy = 1.0 / env.dy
    rdz = 1.0 / env.dz
    return {"div": (vx() - vx(-1, 0, 0)) * rdx + (vy() - vy(0, -1, 0)) * rdy + (vz() - vz(0, 0, -1)) * rdz}


POINT_FUNCTIONS = {
    "UPDATE_VELOCITY": update_velocity,
    "PRESSURE_SWEEP": pressure_sweep,
    "DIVERGENCE": divergence,
}


def load_cfd_descriptors():
    """Parse and validate the packaged ``cfd.ccl``."""
    text = resources.files("stencilflow").joinpath("kernels/cfd.ccl").read_text()
    return validate_all(parse_descriptor(text), FIELDS)


def register_cfd_kernels(ex: Executor) -> dict:
    handles = {}
    for desc in load_cfd_descriptors():
        handles[desc.name] = ex.register_kernel(build_plan(desc), POINT_FUNCTIONS[desc.name])
    return handles
