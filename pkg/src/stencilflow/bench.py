"""Strong-scaling benchmark of the cavity solver over worker counts and modes."""

from __future__ import annotations

import csv
import hashlib
import io
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .cfd import SolverConfig, advance, init_cavity
from .config import RunConfig

__all__ = ["BenchRow", "BenchReport", "bench", "field_checksum"]

COLUMNS = ("workers", "mode", "grid", "wall_s", "cell_updates_per_s", "speedup", "bytes_staged", "checksum")


@dataclass(frozen=True)
class BenchRow:
    workers: int
    mode: str
    grid: tuple[int, int, int]
    wall_s: float
    cell_updates_per_s: float
    speedup: float
    bytes_staged: int
    checksum: str

    def values(self) -> tuple:
        return (
            self.workers, self.mode, "x".join(map(str, self.grid)), f"{self.wall_s:.6f}",
            f"{self.cell_updates_per_s:.6g}", f"{self.speedup:.6f}", self.bytes_staged, self.checksum,
        )


@dataclass
class BenchReport:
    """Rows in run order; speedups are relative to the first row."""

    rows: list[BenchRow]
    steps: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow(r.values())
        return buf.getvalue()

    def to_table(self) -> str:
        cells = [COLUMNS] + [tuple(str(v) for v in r.values()) for r in self.rows]
        widths = [max(len(row[c]) for row in cells) for c in range(len(COLUMNS))]
        lines = ["  ".join(v.rjust(wd) for v, wd in zip(row, widths)) for row in cells]
        lines.insert(1, "  ".join("-" * wd for wd in widths))
        return "\n".join(lines)

    def checksums(self) -> dict[tuple[int, str], str]:
        return {(r.workers, r.mode): r.checksum for r in self.rows}


def field_checksum(state) -> str:
    """SHA-256 (first 16 hex digits) of the gathered velocity and pressure."""
    h = hashlib.sha256()
    for name in ("vx", "vy", "vz", "p"):
        h.update(np.ascontiguousarray(state.gathered(name)).tobytes())
    return h.hexdigest()[:16]


def _warm_up(cfg: RunConfig) -> None:
    # loads or compiles the kernels once so no timed row pays for it
    small = replace(cfg.solver, extents=(8, 8, 4), max_sweeps=2)
    state = init_cavity(small, cfg.fluid, backend=cfg.backend, staging=cfg.staging, mode="plain")
    try:
        advance(state, 1)
    finally:
        state.close()


def bench(
    cfg: RunConfig,
    workers: Sequence[int],
    modes: Sequence[str],
    steps: int | None = None,
) -> BenchReport:
    """Run ``steps`` cavity steps for every (workers, mode) pair.

    The timed region covers the steps only; allocation, kernel
    registration and the warm-up run are excluded.
    """
    steps = cfg.steps if steps is None else steps
    solver: SolverConfig = cfg.solver
    cells = int(np.prod(solver.extents))
    _warm_up(cfg)
    rows: list[BenchRow] = []
    base = None
    for n in workers:
        for mode in modes:
            state = init_cavity(
                solver, cfg.fluid, workers=n, mode=mode, tile=cfg.tile,
                backend=cfg.backend, staging=cfg.staging, ghost=cfg.ghost,
            )
            try:
                state.executor.ledger.reset()
                t0 = time.perf_counter()
                advance(state, steps, t_end=None)
                wall = time.perf_counter() - t0
                staged = state.executor.ledger.total
                digest = field_checksum(state)
            finally:
                state.close()
            if base is None:
                base = wall
                speedup = 1.0
            else:
                speedup = base / wall if wall > 0 else float("inf")
            rate = cells * steps / wall if wall > 0 else float("inf")
            rows.append(BenchRow(n, mode, solver.extents, wall, rate, speedup, staged, digest))
    return BenchReport(rows, steps)
