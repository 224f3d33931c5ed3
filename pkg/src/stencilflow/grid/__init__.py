"""Domain decomposition, distributed fields and ghost exchange."""

from .domain import FACES, Decomposition, DecompositionError, Domain, decompose, face_index, split_extent
from .driver import Driver, gather, scatter
from .field import (
    BoundaryError,
    BoundarySpec,
    DistributedField,
    MovingLid,
    NoSlipWall,
    Outflow,
    Symmetry,
    TopologyError,
)
from .io import read_sfg1, write_csv_slice, write_sfg1
from .workers import HaloMessage, Mailbox, WorkerAborted, WorkerPool

__all__ = [
    "FACES",
    "Domain",
    "Decomposition",
    "DecompositionError",
    "decompose",
    "face_index",
    "split_extent",
    "Driver",
    "gather",
    "scatter",
    "DistributedField",
    "NoSlipWall",
    "MovingLid",
    "Symmetry",
    "Outflow",
    "BoundarySpec",
    "BoundaryError",
    "TopologyError",
    "read_sfg1",
    "write_sfg1",
    "write_csv_slice",
    "HaloMessage",
    "Mailbox",
    "WorkerPool",
    "WorkerAborted",
]
