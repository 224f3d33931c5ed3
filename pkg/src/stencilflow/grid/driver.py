"""The driver: field storage, ghost exchange, boundaries and reductions."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .domain import Decomposition
from .field import (
    BoundarySpec,
    DistributedField,
    TopologyError,
    exchange_rank,
    fill_physical_axis,
    normalize_bc,
    set_wall_faces,
)
from .workers import WorkerPool

__all__ = ["Driver", "gather", "scatter"]


def gather(field: DistributedField) -> np.ndarray:
    """Assemble the interiors into one global array (x-fastest storage)."""
    deco = field.deco
    out = np.empty(deco.domain.extents, dtype=np.float64, order="F")
    for rank, (lo, hi) in enumerate(deco.blocks):
        out[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = field.interior(rank)
    return out


def scatter(array: np.ndarray, field: DistributedField) -> DistributedField:
    """Copy a global array into ``field``.

    ``array`` is either the global interior or the global interior padded by
    ``ghost`` layers per side, in which case ghosts are copied too.
    """
    deco = field.deco
    g = deco.ghost
    extents = deco.domain.extents
    padded = tuple(n + 2 * g for n in extents)
    array = np.asarray(array, dtype=np.float64)
    if array.shape == tuple(extents):
        for rank, (lo, hi) in enumerate(deco.blocks):
            field.interior(rank)[...] = array[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
            field.invalidate_ghosts(rank)
    elif array.shape == padded:
        for rank, (lo, hi) in enumerate(deco.blocks):
            field.locals[rank][...] = array[
                lo[0]:hi[0] + 2 * g, lo[1]:hi[1] + 2 * g, lo[2]:hi[2] + 2 * g
            ]
            field.ghost_valid[rank] = [True] * 6
    else:
        raise TopologyError(f"array of shape {array.shape} fits neither {tuple(extents)} nor {padded}")
    return field


class Driver:
    """Owns a decomposition, its worker pool and the fields allocated on it."""

    def __init__(self, deco: Decomposition, pool: WorkerPool | None = None):
        self.deco = deco
        self.pool = pool or WorkerPool(deco.nworkers)
        if self.pool.n != deco.nworkers:
            raise TopologyError(f"pool of {self.pool.n} workers for {deco.nworkers} blocks")
        self.fields: dict[str, DistributedField] = {}
        self.boundaries: dict[str, dict[int, object]] = {}
        self._epoch = 0

    @property
    def mailbox(self):
        return self.pool.mailbox

    def close(self):
        self.pool.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- storage ---------------------------------------------------------------

    def allocate(
        self,
        name: str,
        stagger: Sequence[float] = (0.0, 0.0, 0.0),
        bc: BoundarySpec | None = None,
        fill: float = 0.0,
    ) -> DistributedField:
        if name in self.fields:
            raise ValueError(f"field {name!r} already allocated")
        f = DistributedField(name, self.deco, stagger, fill)
        self.fields[name] = f
        if bc is not None:
            self.boundaries[name] = normalize_bc(bc)
        return f

    def set_boundary(self, name: str, bc: BoundarySpec) -> None:
        self.boundaries[name] = normalize_bc(bc)

    def _check(self, fields: Iterable[DistributedField]) -> list[DistributedField]:
        fields = list(fields)
        for f in fields:
            if f.deco != self.deco:
                raise TopologyError(f"field {f.name} lives on a different decomposition")
        return fields

    def _bcs_for(self, fields, bcs):
        if bcs is True:
            return {f.name: self.boundaries.get(f.name, {}) for f in fields}
        if bcs is None or bcs is False:
            return None
        return {name: normalize_bc(spec) for name, spec in bcs.items()}

    # -- communication ---------------------------------------------------------

    def exchange_rank(self, rank: int, fields: Sequence[DistributedField], bcs=None) -> None:
        """Worker ``rank``'s share of :meth:`exchange_ghosts`; call from that worker."""
        exchange_rank(fields, rank, self.mailbox, self._bcs_for(fields, bcs))

    def exchange_ghosts(self, fields: Iterable[DistributedField], bcs=None) -> None:
        """Copy neighbour interiors into inter-worker ghost layers.

        With ``bcs=True`` the registered boundary conditions are applied to
        physical faces axis by axis during the exchange (x, then y, then z),
        which keeps edge and corner ghosts consistent; a mapping supplies
        conditions explicitly.  Without ``bcs`` physical ghosts are untouched.
        """
        fields = self._check(fields)
        resolved = self._bcs_for(fields, bcs)
        self.pool.run(lambda rank: exchange_rank(fields, rank, self.mailbox, resolved))

    def apply_physical_boundary(self, field: DistributedField, bc: BoundarySpec | None = None) -> DistributedField:
        """Fill ghost layers on physical faces (x faces first, then y, then z)."""
        (field,) = self._check([field])
        spec = normalize_bc(bc) if bc is not None else self.boundaries.get(field.name, {})

        def work(rank):
            set_wall_faces(field, rank, spec)
            for axis in range(3):
                fill_physical_axis(field, rank, axis, spec)

        self.pool.run(work)
        return field

    # -- reductions ------------------------------------------------------------

    def reduce_max_abs(self, field: DistributedField) -> float:
        """Global max of ``|value|`` over interiors, combined in worker order."""
        (field,) = self._check([field])
        partials = self.pool.run(lambda rank: float(np.max(np.abs(field.interior(rank)))))
        out = 0.0
        for p in partials:
            if math.isnan(p) or p > out:
                out = p
                if math.isnan(p):
                    break
        return out

    def reduce_sum(self, field: DistributedField) -> float:
        """Global sum over interiors; per-worker partials are added in worker order."""
        (field,) = self._check([field])
        partials = self.pool.run(lambda rank: float(np.sum(field.interior(rank))))
        total = 0.0
        for p in partials:
            total += p
        return total

    def gather(self, field: DistributedField) -> np.ndarray:
        return gather(field)

    def scatter(self, array: np.ndarray, field: DistributedField) -> DistributedField:
        return scatter(array, field)
