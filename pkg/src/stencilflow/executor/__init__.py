"""Execution of kernel plans over decomposed grids."""

from .core import (
    REGIONS,
    DuplicateKernel,
    Executor,
    ExecutorError,
    HaloAccessError,
    InvalidGhostError,
    KernelHandle,
    SignatureMismatch,
    TransferLedger,
    TransferRecord,
    debug_bounds_enabled,
)
from .pointops import absolute, maximum, minimum, where
from .schedule import MODES, Exchange, PhysicalBC, Reduce, RunKernel, Schedule, ScheduleError, run_schedule

__all__ = [
    "REGIONS",
    "MODES",
    "Executor",
    "ExecutorError",
    "SignatureMismatch",
    "DuplicateKernel",
    "HaloAccessError",
    "InvalidGhostError",
    "KernelHandle",
    "TransferLedger",
    "TransferRecord",
    "debug_bounds_enabled",
    "where",
    "maximum",
    "minimum",
    "absolute",
    "RunKernel",
    "Exchange",
    "PhysicalBC",
    "Reduce",
    "Schedule",
    "ScheduleError",
    "run_schedule",
]
