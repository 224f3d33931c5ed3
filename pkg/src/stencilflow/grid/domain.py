"""Global geometry and its split among workers."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Sequence

__all__ = [
    "FACES",
    "Domain",
    "Decomposition",
    "DecompositionError",
    "decompose",
    "split_extent",
    "face_index",
]

FACES = ("x-", "x+", "y-", "y+", "z-", "z+")


def face_index(face: str | int) -> int:
    if isinstance(face, int):
        if not 0 <= face < 6:
            raise ValueError(f"bad face index {face}")
        return face
    try:
        return FACES.index(face)
    except ValueError:
        raise ValueError(f"unknown face {face!r}; expected one of {FACES}") from None


class DecompositionError(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    extents: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(int(n) for n in self.extents))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if len(self.extents) != 3 or min(self.extents) < 1:
            raise ValueError(f"extents must be three positive integers, got {self.extents}")
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise ValueError(f"spacing must be three positive numbers, got {self.spacing}")

    @property
    def cells(self) -> int:
        nx, ny, nz = self.extents
        return nx * ny * nz

    @property
    def lengths(self) -> tuple[float, float, float]:
        return tuple(n * h for n, h in zip(self.extents, self.spacing))


def split_extent(n: int, parts: int) -> list[tuple[int, int]]:
    """Balanced split of ``range(n)``; remainder cells go to the lowest blocks."""
    base, rem = divmod(n, parts)
    out, lo = [], 0
    for c in range(parts):
        size = base + (1 if c < rem else 0)
        out.append((lo, lo + size))
        lo += size
    return out


@dataclass(frozen=True)
class Decomposition:
    """A ``px x py x pz`` grid of workers, each owning one block.

    Worker ids run x-fastest: ``rank = cx + px * (cy + py * cz)``.
    ``neighbors[rank][face]`` is a worker id or ``None`` for a physical
    boundary; periodic axes wrap (possibly onto the same worker).
    """

    domain: Domain
    proc_grid: tuple[int, int, int]
    ghost: int
    periodic: tuple[bool, bool, bool] = (False, False, False)
    splits: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "proc_grid", tuple(int(p) for p in self.proc_grid))
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))
        if self.ghost < 0:
            raise DecompositionError("ghost width must be >= 0")
        if min(self.proc_grid) < 1:
            raise DecompositionError(f"bad processor grid {self.proc_grid}")
        for axis, (n, p) in enumerate(zip(self.domain.extents, self.proc_grid)):
            if p > n:
                raise DecompositionError(f"axis {'xyz'[axis]}: {p} blocks for {n} cells")
        object.__setattr__(
            self, "splits", tuple(split_extent(n, p) for n, p in zip(self.domain.extents, self.proc_grid))
        )
        for axis in range(3):
            sizes = [hi - lo for lo, hi in self.splits[axis]]
            smallest = min(sizes)
            split = self.proc_grid[axis] > 1
            if (split and smallest <= self.ghost) or smallest < self.ghost:
                raise DecompositionError(
                    f"infeasible: axis {'xyz'[axis]} block of {smallest} cells with ghost width {self.ghost}"
                )

    @property
    def nworkers(self) -> int:
        px, py, pz = self.proc_grid
        return px * py * pz

    def coords(self, rank: int) -> tuple[int, int, int]:
        px, py, _ = self.proc_grid
        return rank % px, (rank // px) % py, rank // (px * py)

    def rank_of(self, coords: Sequence[int]) -> int:
        px, py, _ = self.proc_grid
        cx, cy, cz = coords
        return cx + px * (cy + py * cz)

    @cached_property
    def blocks(self) -> list[tuple[tuple[int, int, int], tuple[int, int, int]]]:
        """Per worker ``(lo, hi)`` global index bounds, ``hi`` exclusive."""
        out = []
        for rank in range(self.nworkers):
            c = self.coords(rank)
            lo = tuple(self.splits[a][c[a]][0] for a in range(3))
            hi = tuple(self.splits[a][c[a]][1] for a in range(3))
            out.append((lo, hi))
        return out

    def block_shape(self, rank: int) -> tuple[int, int, int]:
        lo, hi = self.blocks[rank]
        return tuple(h - l for l, h in zip(lo, hi))

    def local_shape(self, rank: int) -> tuple[int, int, int]:
        return tuple(n + 2 * self.ghost for n in self.block_shape(rank))

    @cached_property
    def neighbors(self) -> list[tuple[int | None, ...]]:
        table = []
        for rank in range(self.nworkers):
            c = self.coords(rank)
            faces = []
            for axis in range(3):
                p = self.proc_grid[axis]
                for step in (-1, 1):
                    cc = list(c)
                    cc[axis] += step
                    if 0 <= cc[axis] < p:
                        faces.append(self.rank_of(cc))
                    elif self.periodic[axis]:
                        cc[axis] %= p
                        faces.append(self.rank_of(cc))
                    else:
                        faces.append(None)
            table.append(tuple(faces))
        return table

    def is_physical(self, rank: int, face: int) -> bool:
        return self.neighbors[rank][face] is None

    def interface_area(self) -> int:
        return _interface_area(self.domain.extents, self.proc_grid, self.periodic)


def _interface_area(extents, grid, periodic) -> int:
    nx, ny, nz = extents
    faces = (ny * nz, nx * nz, nx * ny)
    total = 0
    for axis in range(3):
        p = grid[axis]
        cuts = p if (periodic[axis] and p > 1) else p - 1
        total += cuts * faces[axis]
    return total


def decompose(
    domain: Domain,
    workers: int,
    ghost: int,
    periodic: Sequence[bool] = (False, False, False),
    proc_grid: Sequence[int] | None = None,
) -> Decomposition:
    """Split ``domain`` among ``workers``.

    Without an explicit ``proc_grid`` the factorization with the smallest
    total inter-worker surface is chosen; ties prefer larger ``px``, then
    larger ``py``.  Along a split axis every block must be wider than the
    ghost width.
    """
    if workers < 1:
        raise DecompositionError("workers must be >= 1")
    if ghost < 0:
        raise DecompositionError("ghost width must be >= 0")
    periodic = tuple(bool(p) for p in periodic)
    if proc_grid is not None:
        if _prod(proc_grid) != workers:
            raise DecompositionError(f"processor grid {tuple(proc_grid)} does not hold {workers} workers")
        return Decomposition(domain, tuple(proc_grid), ghost, periodic)

    best = None
    last_error = None
    for grid in product(range(1, workers + 1), repeat=3):
        if _prod(grid) != workers:
            continue
        try:
            deco = Decomposition(domain, grid, ghost, periodic)
        except DecompositionError as exc:
            last_error = exc
            continue
        key = (deco.interface_area(), -grid[0], -grid[1])
        if best is None or key < best[0]:
            best = (key, deco)
    if best is None:
        raise DecompositionError(
            f"infeasible: no split of {domain.extents} among {workers} workers with ghost width {ghost}"
            + (f" ({last_error})" if last_error else "")
        )
    return best[1]


def _prod(xs) -> int:
    out = 1
    for x in xs:
        out *= int(x)
    return out
