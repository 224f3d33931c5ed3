"""Incompressible flow on a staggered grid: explicit momentum step plus an
iterative cell-by-cell pressure/velocity correction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ..executor import Exchange, Executor, Reduce, RunKernel, Schedule, run_schedule
from ..grid import (
    Domain,
    Driver,
    MovingLid,
    NoSlipWall,
    Outflow,
    Symmetry,
    decompose,
    gather,
    scatter,
)
from .kernels import register_cfd_kernels

__all__ = [
    "FluidParams",
    "SolverConfig",
    "StepRecord",
    "CfdState",
    "SolverDiverged",
    "init_state",
    "init_cavity",
    "compute_dt",
    "provisional_velocity",
    "pressure_iteration",
    "advance",
    "run_to_steady",
    "kinetic_energy",
]

VELOCITY = ("vx", "vy", "vz")
STAGGER = {"vx": (0.5, 0.0, 0.0), "vy": (0.0, 0.5, 0.0), "vz": (0.0, 0.0, 0.5)}


class SolverDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class FluidParams:
    nu: float
    density: float = 1.0
    body_force: tuple[float, float, float] = (0.0, 0.0, 0.0)
    lid_speed: float = 1.0
    alpha: float = 0.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"viscosity must be positive, got {self.nu}")
        if not self.density > 0:
            raise ValueError(f"density must be positive, got {self.density}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"upwind blend must lie in [0, 1], got {self.alpha}")
        object.__setattr__(self, "body_force", tuple(float(f) for f in self.body_force))


@dataclass(frozen=True)
class SolverConfig:
    """Grid, time-step and pressure-iteration settings.

    ``lengths`` are the physical box sizes; spacing is ``lengths/extents``.
    A step counts as steady when ``max|u_new - u_old| / dt <= steady_tol``;
    ``max_time`` and ``max_steps`` bound runs that never get there.
    """

    extents: tuple[int, int, int] = (32, 32, 3)
    lengths: tuple[float, float, float] = (1.0, 1.0, 1.0)
    re: float = 100.0
    sigma: float = 0.5
    eps: float = 1e-6
    omega: float = 1.7
    max_sweeps: int = 500
    output_every: int = 100
    steady_tol: float = 1e-6
    max_time: float = math.inf
    max_steps: int = 1_000_000
    z_boundary: str = "symmetry"

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(int(n) for n in self.extents))
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        if len(self.extents) != 3 or min(self.extents) < 1:
            raise ValueError(f"bad extents {self.extents}")
        if len(self.lengths) != 3 or not min(self.lengths) > 0:
            raise ValueError(f"bad lengths {self.lengths}")
        if not self.re > 0:
            raise ValueError(f"Reynolds number must be positive, got {self.re}")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"CFL safety factor must lie in (0, 1), got {self.sigma}")
        if not self.eps > 0:
            raise ValueError(f"pressure tolerance must be positive, got {self.eps}")
        if not 1.0 <= self.omega < 2.0:
            raise ValueError(f"over-relaxation must lie in [1, 2), got {self.omega}")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.output_every < 1:
            raise ValueError("output_every must be at least 1")
        if not self.steady_tol > 0:
            raise ValueError("steady_tol must be positive")
        if self.z_boundary not in ("symmetry", "wall"):
            raise ValueError(f"z_boundary must be 'symmetry' or 'wall', got {self.z_boundary!r}")

    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(l / n for l, n in zip(self.lengths, self.extents))

    @property
    def nu(self) -> float:
        """Viscosity for unit lid speed and unit cavity length."""
        return 1.0 / self.re


@dataclass
class StepRecord:
    step: int
    time: float
    dt: float
    residual: float
    sweeps: int
    converged: bool
    change: float


@dataclass
class CfdState:
    driver: Driver
    executor: Executor
    params: FluidParams
    config: SolverConfig
    mode: str = "plain"
    t: float = 0.0
    step: int = 0
    dt: float = 0.0
    history: list[StepRecord] = field(default_factory=list)

    @property
    def fields(self):
        return self.driver.fields

    @property
    def deco(self):
        return self.driver.deco

    def env(self, dt: float) -> dict:
        dx, dy, dz = self.config.spacing
        fx, fy, fz = self.params.body_force
        return {
            "dt": dt, "dx": dx, "dy": dy, "dz": dz,
            "nu": self.params.nu, "alpha": self.params.alpha,
            "fx": fx, "fy": fy, "fz": fz,
        }

    def gathered(self, name: str) -> np.ndarray:
        return gather(self.fields[name])

    def close(self):
        self.driver.close()


PROVISIONAL = Schedule([
    Exchange(("vx", "vy", "vz", "p")),
    RunKernel("UPDATE_VELOCITY"),
    Exchange(VELOCITY),
])

SWEEP = Schedule([
    RunKernel("PRESSURE_SWEEP", env={"colour": 0}),
    Exchange(VELOCITY),
    RunKernel("PRESSURE_SWEEP", env={"colour": 1}),
    Exchange(VELOCITY),
    RunKernel("DIVERGENCE"),
    Reduce("div", "residual"),
])


def relaxation_coefficients(config: SolverConfig, periodic: Sequence[bool], ghost: int = 1) -> np.ndarray:
    """Per cell ``1 / sum(1/h^2)`` over the faces that may move, padded by
    ``ghost`` layers (wrapped on periodic axes, zero behind walls)."""
    n = config.extents
    h = config.spacing
    total = np.zeros(n)
    for a in range(3):
        shape = [1, 1, 1]
        shape[a] = n[a]
        movable = np.full(n[a], 2.0)
        if not periodic[a]:
            movable[0] -= 1.0
            movable[-1] -= 1.0
        total = total + (movable / (h[a] * h[a])).reshape(shape)
    r = np.divide(1.0, total, out=np.zeros_like(total), where=total > 0)
    for a in range(3):
        width = [(0, 0)] * 3
        width[a] = (ghost, ghost)
        r = np.pad(r, width, mode="wrap" if periodic[a] else "constant")
    return r


def init_state(
    config: SolverConfig,
    params: FluidParams,
    bcs: dict,
    periodic: Sequence[bool] = (False, False, False),
    *,
    workers: int = 1,
    mode: str = "plain",
    tile: Sequence[int] | None = None,
    backend: str = "auto",
    staging: str = "copy",
    proc_grid: Sequence[int] | None = None,
    ghost: int = 1,
) -> CfdState:
    """Allocate the solver fields on a fresh decomposition and register the kernels.

    Periodic axes need an even number of cells so that the red-black
    colouring of the pressure sweep is consistent across the seam.
    """
    periodic = tuple(bool(p) for p in periodic)
    for a in range(3):
        if periodic[a] and config.extents[a] % 2:
            raise ValueError(f"periodic axis {a} needs an even cell count, got {config.extents[a]}")
    domain = Domain(config.extents, config.spacing)
    deco = decompose(domain, workers, ghost, periodic=periodic, proc_grid=proc_grid)
    driver = Driver(deco)
    try:
        for name in VELOCITY:
            driver.allocate(name, STAGGER[name], bc=bcs.get(name))
        driver.allocate("p", bc=bcs.get("p"))
        driver.allocate("div")
        rcoef = driver.allocate("rcoef")
        scatter(relaxation_coefficients(config, periodic, ghost), rcoef)
        ex = Executor(driver, backend=backend, tile=tile, staging=staging)
        register_cfd_kernels(ex)
    except BaseException:
        driver.close()
        raise
    state = CfdState(driver, ex, params, config, mode=mode)
    driver.exchange_ghosts([driver.fields[n] for n in ("vx", "vy", "vz", "p")], bcs=True)
    return state


def cavity_boundaries(config: SolverConfig, lid_speed: float) -> dict:
    """No-slip box, lid moving in +x on the y+ face; z faces are symmetry
    planes (quasi-2D) or walls."""
    wall = NoSlipWall(0.0)
    zb = Symmetry() if config.z_boundary == "symmetry" else wall
    out = {}
    for name in VELOCITY:
        spec = {face: wall for face in ("x-", "x+", "y-", "y+")}
        spec["z-"] = spec["z+"] = zb
        out[name] = spec
    out["vx"]["y+"] = MovingLid(lid_speed)
    out["p"] = {face: Outflow() for face in ("x-", "x+", "y-", "y+", "z-", "z+")}
    return out


def init_cavity(
    config: SolverConfig,
    params: FluidParams | None = None,
    **kwargs,
) -> CfdState:
    """Fluid at rest in a unit-length box, lid speed ``U``; viscosity ``U*L/Re``."""
    if params is None:
        params = FluidParams(nu=config.nu)
    else:
        params = replace(params, nu=params.lid_speed * 1.0 / config.re)
    return init_state(config, params, cavity_boundaries(config, params.lid_speed), **kwargs)


def velocity_maxima(state: CfdState) -> tuple[float, float, float]:
    return tuple(state.driver.reduce_max_abs(state.fields[n]) for n in VELOCITY)


def compute_dt(state: CfdState, params: FluidParams | None = None, config: SolverConfig | None = None) -> float:
    """``sigma * min(h_a / max|u_a|, 1 / (2 nu sum 1/h_a^2))``; zero velocities impose no limit."""
    params = params or state.params
    config = config or state.config
    h = config.spacing
    limits = [1.0 / (2.0 * params.nu * sum(1.0 / (ha * ha) for ha in h))]
    for ha, umax in zip(h, velocity_maxima(state)):
        if not math.isfinite(umax):
            raise SolverDiverged(f"non-finite velocity at step {state.step}, t={state.t:.6g}")
        if umax > 0.0:
            limits.append(ha / umax)
    return config.sigma * min(limits)


def provisional_velocity(state: CfdState, dt: float, params: FluidParams | None = None) -> CfdState:
    params = params or state.params
    if params is not state.params:
        state.params = params
    run_schedule(state.executor, PROVISIONAL, mode=state.mode, params={"density": params.density}, env=state.env(dt))
    for name, umax in zip(VELOCITY, velocity_maxima(state)):
        if not math.isfinite(umax):
            raise SolverDiverged(f"non-finite {name} after the momentum update at step {state.step + 1}")
    return state


def pressure_iteration(state: CfdState, dt: float, config: SolverConfig | None = None) -> tuple[CfdState, int, float]:
    """Sweep until ``max|div u| <= eps`` or ``max_sweeps``; returns (state, sweeps, residual)."""
    config = config or state.config
    env = state.env(dt)
    params = {"density": state.params.density, "omega": config.omega}
    results: dict = {}
    sweeps = 0
    residual = math.inf
    while sweeps < config.max_sweeps:
        run_schedule(state.executor, SWEEP, mode=state.mode, params=params, env=env, results=results)
        sweeps += 1
        residual = results["residual"]
        if math.isnan(residual):
            raise SolverDiverged(f"non-finite divergence in pressure sweep {sweeps} of step {state.step + 1}")
        if residual <= config.eps:
            break
    state.driver.exchange_ghosts([state.fields["p"]], bcs=True)
    return state, sweeps, residual


def _snapshot(state: CfdState) -> list[list[np.ndarray]]:
    return [[f.interior(r).copy() for r in range(state.deco.nworkers)] for f in (state.fields[n] for n in VELOCITY)]


def _max_change(state: CfdState, before) -> float:
    def work(rank):
        out = 0.0
        for f, old in zip((state.fields[n] for n in VELOCITY), before):
            out = max(out, float(np.max(np.abs(f.interior(rank) - old[rank]))))
        return out

    partials = state.driver.pool.run(work)
    return max(partials)


def advance(
    state: CfdState,
    n_steps: int,
    config: SolverConfig | None = None,
    *,
    t_end: float | None = None,
    callback: Callable[[CfdState, StepRecord], None] | None = None,
) -> CfdState:
    """Take ``n_steps`` time steps (fewer if ``t_end`` is reached first; the
    last step is shortened to land on it)."""
    config = config or state.config
    for _ in range(n_steps):
        if t_end is not None and state.t >= t_end:
            break
        dt = compute_dt(state, state.params, config)
        if t_end is not None and state.t + dt > t_end:
            dt = t_end - state.t
        before = _snapshot(state)
        provisional_velocity(state, dt)
        _, sweeps, residual = pressure_iteration(state, dt, config)
        state.t += dt
        state.step += 1
        state.dt = dt
        rec = StepRecord(state.step, state.t, dt, residual, sweeps, residual <= config.eps,
                         _max_change(state, before) / dt)
        state.history.append(rec)
        if callback is not None:
            callback(state, rec)
    return state


def run_to_steady(
    state: CfdState,
    config: SolverConfig | None = None,
    callback: Callable[[CfdState, StepRecord], None] | None = None,
) -> bool:
    """Advance until the steady criterion holds; False if a time/step cap hit first."""
    config = config or state.config
    while state.step < config.max_steps and state.t < config.max_time:
        advance(state, 1, config, callback=callback)
        if state.history[-1].change <= config.steady_tol:
            return True
    return False


def kinetic_energy(state: CfdState) -> float:
    """``0.5 * sum(u^2) * cell volume``, face values taken as they are stored."""
    dx, dy, dz = state.config.spacing
    total = 0.0
    for name in VELOCITY:
        a = gather(state.fields[name])
        total += float(np.sum(a * a))
    return 0.5 * total * dx * dy * dz
