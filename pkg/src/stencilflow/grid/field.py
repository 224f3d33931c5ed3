"""Distributed fields, physical boundary conditions and ghost filling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .domain import FACES, Decomposition, face_index
from .workers import HaloMessage, Mailbox

__all__ = [
    "DistributedField",
    "NoSlipWall",
    "MovingLid",
    "Symmetry",
    "Outflow",
    "BoundaryCondition",
    "BoundarySpec",
    "BoundaryError",
    "TopologyError",
    "normalize_bc",
    "set_wall_faces",
    "fill_physical_axis",
    "exchange_rank",
]


class BoundaryError(ValueError):
    pass


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class NoSlipWall:
    """Fixed wall value for the component (0 for a resting wall)."""

    value: float = 0.0


@dataclass(frozen=True)
class MovingLid:
    speed: float = 1.0

    @property
    def value(self) -> float:
        return self.speed


@dataclass(frozen=True)
class Symmetry:
    pass


@dataclass(frozen=True)
class Outflow:
    pass


BoundaryCondition = Union[NoSlipWall, MovingLid, Symmetry, Outflow]
BoundarySpec = Mapping[str, BoundaryCondition]


def normalize_bc(bc: BoundarySpec | None) -> dict[int, BoundaryCondition]:
    if bc is None:
        return {}
    return {face_index(k): v for k, v in bc.items()}


class DistributedField:
    """One scalar component split over the workers of a decomposition.

    ``locals[rank]`` holds the block plus ``ghost`` layers per side, stored
    x-fastest (Fortran order).  ``stagger[a]`` is 0.5 when values sit on the
    high face of each cell along axis ``a``: a face-centred component at
    ``(i+1/2, j, k)`` is stored at index ``(i, j, k)``.
    """

    def __init__(self, name: str, deco: Decomposition, stagger: Sequence[float] = (0.0, 0.0, 0.0), fill: float = 0.0):
        self.name = name
        self.deco = deco
        self.stagger = tuple(float(s) for s in stagger)
        if any(s not in (0.0, 0.5) for s in self.stagger):
            raise ValueError(f"stagger offsets must be 0 or 1/2, got {stagger}")
        self.locals = [np.full(deco.local_shape(r), fill, dtype=np.float64, order="F") for r in range(deco.nworkers)]
        self.ghost_valid = [[False] * 6 for _ in range(deco.nworkers)]

    def __repr__(self):
        return f"DistributedField({self.name!r}, workers={self.deco.nworkers}, stagger={self.stagger})"

    @property
    def ghost(self) -> int:
        return self.deco.ghost

    def interior_slices(self, rank: int) -> tuple[slice, slice, slice]:
        g = self.deco.ghost
        return tuple(slice(g, g + n) for n in self.deco.block_shape(rank))

    def interior(self, rank: int) -> np.ndarray:
        return self.locals[rank][self.interior_slices(rank)]

    def staggered(self, axis: int) -> bool:
        return self.stagger[axis] == 0.5

    def invalidate_ghosts(self, rank: int | None = None):
        ranks = range(self.deco.nworkers) if rank is None else (rank,)
        for r in ranks:
            self.ghost_valid[r] = [False] * 6

    def ghosts_valid(self, rank: int, faces: Sequence[int] = range(6)) -> bool:
        return all(self.ghost_valid[rank][f] for f in faces)

    def copy(self, name: str | None = None) -> "DistributedField":
        out = DistributedField.__new__(DistributedField)
        out.name = name or self.name
        out.deco = self.deco
        out.stagger = self.stagger
        out.locals = [a.copy(order="F") for a in self.locals]
        out.ghost_valid = [list(v) for v in self.ghost_valid]
        return out


def _axis_slice(arr: np.ndarray, axis: int, index) -> tuple:
    sl = [slice(None)] * 3
    sl[axis] = index
    return tuple(sl)


def set_wall_faces(field: DistributedField, rank: int, bc: Mapping[int, BoundaryCondition]) -> None:
    """Impose the boundary value on normal components whose wall face is an
    interior index (the high face of a staggered axis)."""
    deco = field.deco
    arr = field.locals[rank]
    g = deco.ghost
    for axis in range(3):
        if not field.staggered(axis):
            continue
        face = 2 * axis + 1
        if not deco.is_physical(rank, face):
            continue
        cond = bc.get(face)
        if cond is None:
            raise BoundaryError(f"field {field.name}: no boundary condition for physical face {FACES[face]}")
        n = deco.block_shape(rank)[axis]
        edge = g + n - 1
        if isinstance(cond, (NoSlipWall, MovingLid)):
            arr[_axis_slice(arr, axis, edge)] = cond.value
        elif isinstance(cond, Symmetry):
            arr[_axis_slice(arr, axis, edge)] = 0.0


def fill_physical_axis(field: DistributedField, rank: int, axis: int, bc: Mapping[int, BoundaryCondition]) -> None:
    """Fill the ghost layers of the physical faces along ``axis``.

    The whole extent of the other two axes is filled, ghosts included, so
    that later axes see complete rows.
    """
    deco = field.deco
    g = deco.ghost
    if g == 0:
        return
    arr = field.locals[rank]
    n = deco.block_shape(rank)[axis]
    stag = field.staggered(axis)
    for side in (0, 1):
        face = 2 * axis + side
        if not deco.is_physical(rank, face):
            continue
        cond = bc.get(face)
        if cond is None:
            raise BoundaryError(f"field {field.name}: no boundary condition for physical face {FACES[face]}")
        wall = 0.0 if isinstance(cond, (Symmetry, Outflow)) else cond.value
        sign = -1.0 if stag else 1.0
        for m in range(g):
            if side == 0:
                ghost, edge = g - 1 - m, g
                # staggered: local index g-1 is the wall face itself
                src = g - 1 + m if stag else g + m
            else:
                ghost, edge = g + n + m, g + n - 1
                src = g + n - 2 - m if stag else g + n - 1 - m
            dst = _axis_slice(arr, axis, ghost)
            if isinstance(cond, Outflow):
                arr[dst] = arr[_axis_slice(arr, axis, edge)]
            elif stag and side == 0 and m == 0:
                arr[dst] = wall
            elif isinstance(cond, Symmetry):
                arr[dst] = sign * arr[_axis_slice(arr, axis, src)]
            else:
                arr[dst] = 2.0 * wall - arr[_axis_slice(arr, axis, src)]
        field.ghost_valid[rank][face] = True


def _slab(deco: Decomposition, rank: int, axis: int, region: str, side: int) -> tuple[slice, slice, slice]:
    """Index box for the exchange along ``axis``.

    ``region`` is ``"send"`` (interior cells next to the face) or ``"recv"``
    (the ghost layers).  Axes already exchanged are covered including their
    ghosts; later axes cover the interior only.
    """
    g = deco.ghost
    shape = deco.block_shape(rank)
    out = []
    for a in range(3):
        n = shape[a]
        if a == axis:
            if region == "send":
                out.append(slice(g, 2 * g) if side == 0 else slice(n, n + g))
            else:
                out.append(slice(0, g) if side == 0 else slice(n + g, n + 2 * g))
        elif a < axis:
            out.append(slice(0, n + 2 * g))
        else:
            out.append(slice(g, g + n))
    return tuple(out)


def exchange_rank(
    fields: Sequence[DistributedField],
    rank: int,
    mailbox: Mailbox,
    bcs: Mapping[str, Mapping[int, BoundaryCondition]] | None = None,
    epoch: int = 0,
    prologue: bool = True,
) -> None:
    """One worker's share of a two-phase ghost exchange.

    Axes are processed x, y, z; each phase ships slabs widened by the ghosts
    filled in earlier phases, so edge and corner ghosts come out right.
    With ``bcs`` (field name -> face -> condition) physical faces are filled
    in the same phase as the exchange along that axis.  ``prologue=False``
    skips setting wall faces, for callers that have already done so.
    """
    if not fields:
        return
    deco = fields[0].deco
    g = deco.ghost
    neighbors = deco.neighbors[rank]
    if bcs is not None and prologue:
        for f in fields:
            set_wall_faces(f, rank, bcs.get(f.name, {}))
    for axis in range(3):
        if g > 0:
            for side in (0, 1):
                nb = neighbors[2 * axis + side]
                if nb is None:
                    continue
                box = _slab(deco, rank, axis, "send", side)
                for f in fields:
                    data = f.locals[rank][box]
                    mailbox.send(HaloMessage(
                        source=rank,
                        dest=nb,
                        face=2 * axis + (1 - side),
                        field=f.name,
                        data=data.flatten(order="C"),
                        shape=data.shape,
                        tag=(epoch, f.name, axis, side),
                    ))
            for side in (0, 1):
                nb = neighbors[2 * axis + side]
                if nb is None:
                    continue
                box = _slab(deco, rank, axis, "recv", side)
                for f in fields:
                    msg = mailbox.recv(nb, rank, (epoch, f.name, axis, 1 - side))
                    target = f.locals[rank][box]
                    if msg.shape != target.shape:
                        raise TopologyError(
                            f"halo for {f.name} from worker {nb} has shape {msg.shape}, expected {target.shape}"
                        )
                    target[...] = msg.data.reshape(msg.shape, order="C")
                    f.ghost_valid[rank][2 * axis + side] = True
        if bcs is not None:
            for f in fields:
                fill_physical_axis(f, rank, axis, bcs.get(f.name, {}))
