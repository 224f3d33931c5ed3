"""Incompressible Navier-Stokes solver built from registered stencil kernels."""

from .kernels import FIELDS, load_cfd_descriptors, register_cfd_kernels
from .solver import (
    CfdState,
    FluidParams,
    SolverConfig,
    SolverDiverged,
    StepRecord,
    advance,
    cavity_boundaries,
    compute_dt,
    init_cavity,
    init_state,
    kinetic_energy,
    pressure_iteration,
    provisional_velocity,
    run_to_steady,
)

__all__ = [
    "FIELDS",
    "load_cfd_descriptors",
    "register_cfd_kernels",
    "CfdState",
    "FluidParams",
    "SolverConfig",
    "SolverDiverged",
    "StepRecord",
    "advance",
    "cavity_boundaries",
    "compute_dt",
    "init_cavity",
    "init_state",
    "kinetic_energy",
    "pressure_iteration",
    "provisional_velocity",
    "run_to_steady",
]
