"""Running execution plans over the local blocks of a decomposition."""

from __future__ import annotations

import ast
import inspect
import os
import textwrap
import threading
from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ..codegen import ExecutionPlan
from ..descriptor import Intent
from ..grid import Driver, DistributedField
from ..grid.field import exchange_rank, set_wall_faces

__all__ = [
    "ExecutorError",
    "SignatureMismatch",
    "DuplicateKernel",
    "HaloAccessError",
    "InvalidGhostError",
    "KernelHandle",
    "TransferRecord",
    "TransferLedger",
    "Executor",
    "debug_bounds_enabled",
    "REGIONS",
]

REGIONS = ("all", "interior", "boundary")
RESERVED_ARGS = ("idx", "env")


class ExecutorError(RuntimeError):
    pass


class SignatureMismatch(ExecutorError):
    def __init__(self, kernel: str, binding: str, detail: str):
        super().__init__(f"signature-mismatch({binding}) in kernel {kernel}: {detail}")
        self.binding = binding


class DuplicateKernel(ExecutorError):
    pass


class HaloAccessError(ExecutorError):
    pass


class InvalidGhostError(ExecutorError):
    pass


def scan_read_extents(fn: Callable, plan: ExecutionPlan) -> dict[str, tuple[int, ...]]:
    """Largest offsets at which each read binding is accessed, found from the source.

    Bindings whose accesses cannot be resolved to integer literals are
    assumed to use the full plan halo.
    """
    reads = plan.inputs
    try:
        tree = ast.parse(textwrap.dedent(inspect.getsource(fn)))
    except (OSError, TypeError, SyntaxError):
        return {n: tuple(plan.halo) for n in reads}
    ext = {n: [0] * 6 for n in reads}
    callees = set()
    for node in ast.walk(tree):
        if not (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in ext):
            continue
        callees.add(id(node.func))
        try:
            offs = [ast.literal_eval(a) for a in node.args]
        except ValueError:
            offs = None
        if offs is None or node.keywords or len(offs) > 3 or not all(type(o) is int for o in offs):
            ext[node.func.id] = list(plan.halo)
            continue
        offs += [0] * (3 - len(offs))
        e = ext[node.func.id]
        for a, o in enumerate(offs):
            e[2 * a] = max(e[2 * a], -o)
            e[2 * a + 1] = max(e[2 * a + 1], o)
    # an accessor used other than by a direct call may be read anywhere
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and node.id in ext and id(node) not in callees:
            ext[node.id] = list(plan.halo)
    return {n: tuple(e) for n, e in ext.items()}


def debug_bounds_enabled() -> bool:
    return os.environ.get("SF_DEBUG_BOUNDS", "") not in ("", "0")


@dataclass
class KernelHandle:
    name: str
    plan: ExecutionPlan
    fn: Callable
    arg_names: tuple[str, ...]
    compiled: Any = None
    # per read binding: how far it is read towards each face, in FACES order
    read_extent: dict[str, tuple[int, ...]] = field(default_factory=dict)

    @property
    def halo_reads(self) -> list[str]:
        """Read bindings accessed at a non-zero offset."""
        return [n for n in self.reads if any(self.read_extent.get(n, self.plan.halo))]

    @property
    def reads(self) -> list[str]:
        return self.plan.inputs

    @property
    def writes(self) -> list[str]:
        return self.plan.outputs


@dataclass
class TransferRecord:
    kernel: str
    region: str
    tiles: int = 0
    bytes_in: int = 0
    bytes_out: int = 0


@dataclass
class TransferLedger:
    """Bytes moved between field storage and tile scratch, per kernel run."""

    records: list[TransferRecord] = field(default_factory=list)

    @property
    def bytes_in(self) -> int:
        return sum(r.bytes_in for r in self.records)

    @property
    def bytes_out(self) -> int:
        return sum(r.bytes_out for r in self.records)

    @property
    def total(self) -> int:
        return self.bytes_in + self.bytes_out

    def reset(self):
        self.records.clear()


class _Accessor:
    __slots__ = ("name", "src", "o0", "o1", "o2", "n0", "n1", "n2", "halo", "check")

    def __init__(self, name, src, origin, shape, halo, check):
        self.name = name
        self.src = src
        self.o0, self.o1, self.o2 = origin
        self.n0, self.n1, self.n2 = shape
        self.halo = halo
        self.check = check

    def __call__(self, di: int = 0, dj: int = 0, dk: int = 0):
        if self.check:
            h = self.halo
            if not (-h[0] <= di <= h[1] and -h[2] <= dj <= h[3] and -h[4] <= dk <= h[5]):
                raise HaloAccessError(
                    f"read of {self.name} at offset ({di},{dj},{dk}) outside halo {h}"
                )
        a = self.o0 + di
        b = self.o1 + dj
        c = self.o2 + dk
        return self.src[a:a + self.n0, b:b + self.n1, c:c + self.n2]


class _Scratch:
    """Staging buffer for one cached binding, marched plane-batch by plane-batch along z."""

    __slots__ = ("array", "depth", "z_lo", "z_hi", "loaded")

    def __init__(self, wx, wy, depth, allocate=True):
        self.array = np.empty((wx, wy, depth), dtype=np.float64, order="F") if allocate else None
        self.depth = 0
        self.z_lo = self.z_hi = None
        self.loaded = 0


def _boxes(shape, g, halo, region):
    """Local index boxes making up ``region`` of a block of ``shape``."""
    full_lo = [g, g, g]
    full_hi = [g + n for n in shape]
    if region == "all":
        return [(tuple(full_lo), tuple(full_hi))]
    in_lo = [g + halo[2 * a] for a in range(3)]
    in_hi = [max(in_lo[a], g + shape[a] - halo[2 * a + 1]) for a in range(3)]
    empty = any(in_hi[a] <= in_lo[a] for a in range(3))
    if region == "interior":
        return [] if empty else [(tuple(in_lo), tuple(in_hi))]
    if region != "boundary":
        raise ExecutorError(f"unknown region {region!r}")
    if empty:
        return [(tuple(full_lo), tuple(full_hi))]
    out = []
    lo = list(full_lo)
    hi = list(full_hi)
    for a in range(3):
        # slabs along axis a, restricted to the interior range of earlier axes
        low = (tuple(lo), tuple(hi[:a] + [in_lo[a]] + hi[a + 1:]))
        high = (tuple(lo[:a] + [in_hi[a]] + lo[a + 1:]), tuple(hi))
        for box in (low, high):
            if all(box[1][d] > box[0][d] for d in range(3)):
                out.append(box)
        lo[a], hi[a] = in_lo[a], in_hi[a]
    return out


def _tiles(box, tile):
    (l0, l1, l2), (h0, h1, h2) = box
    for z in range(l2, h2, tile[2]):
        for y in range(l1, h1, tile[1]):
            for x in range(l0, h0, tile[0]):
                yield (x, y, z), (min(x + tile[0], h0), min(y + tile[1], h1), min(z + tile[2], h2))


class _Run:
    """Everything one kernel invocation needs, shared by all workers."""

    def __init__(self, ex: "Executor", kernel: KernelHandle, fields, params, env, region_label):
        self.kernel = kernel
        self.plan = kernel.plan.with_tile(ex.tile) if ex.tile is not None else kernel.plan
        self.fields = fields
        self.params = params
        self.env = env
        self.records = [TransferRecord(kernel.name, region_label) for _ in range(ex.driver.deco.nworkers)]
        self.back = {}
        for name in kernel.writes:
            f = fields[name]
            for rank in range(ex.driver.deco.nworkers):
                self.back[(name, rank)] = ex._back_buffer(f, rank)


class Executor:
    """Registers kernels and runs them on a :class:`~stencilflow.grid.Driver`.

    ``backend`` is ``"numpy"`` (point functions evaluated on whole tiles),
    ``"compiled"`` (point functions translated into numba loop nests) or
    ``"auto"`` (compiled when numba is importable and the function can be
    translated).  ``tile`` overrides every plan's tile; ``march`` is the
    number of z-planes staged per step (default: the whole tile depth).
    ``staging="view"`` reads cached bindings in place instead of copying the
    window into scratch; front buffers are never written while a kernel
    runs, so results and ledger totals are the same as with ``"copy"``.
    """

    def __init__(
        self,
        driver: Driver,
        *,
        backend: str = "numpy",
        debug: bool | None = None,
        tile: Sequence[int] | None = None,
        march: int | None = None,
        staging: str = "copy",
    ):
        if backend not in ("numpy", "compiled", "auto"):
            raise ExecutorError(f"unknown backend {backend!r}")
        self.driver = driver
        self.backend = backend
        self.debug = debug_bounds_enabled() if debug is None else debug
        self.tile = None if tile is None else tuple(int(t) for t in tile)
        if self.tile is not None and (len(self.tile) != 3 or min(self.tile) < 1):
            raise ExecutorError(f"bad tile {tile}")
        if march is not None and march < 1:
            raise ExecutorError("march must be >= 1")
        self.march = march
        if staging not in ("copy", "view"):
            raise ExecutorError(f"unknown staging mode {staging!r}")
        self.staging = staging
        self.kernels: dict[str, KernelHandle] = {}
        self.ledger = TransferLedger()
        self._backs: dict[tuple[int, int], np.ndarray] = {}

    # -- registration ----------------------------------------------------------

    def register_kernel(self, plan: ExecutionPlan, fn: Callable) -> KernelHandle:
        if plan.kernel_name in self.kernels:
            raise DuplicateKernel(f"kernel {plan.kernel_name} is already registered")
        try:
            sig = inspect.signature(fn)
        except (TypeError, ValueError) as exc:
            raise SignatureMismatch(plan.kernel_name, "?", f"cannot inspect {fn!r}") from exc
        names = []
        for p in sig.parameters.values():
            if p.kind in (p.VAR_POSITIONAL, p.VAR_KEYWORD):
                raise SignatureMismatch(plan.kernel_name, p.name, "variadic parameters are not allowed")
            names.append(p.name)
        expected = plan.field_names + list(plan.params)
        for name in expected:
            if name not in names:
                raise SignatureMismatch(plan.kernel_name, name, "point function does not accept it")
        for name in names:
            if name not in expected and name not in RESERVED_ARGS:
                raise SignatureMismatch(plan.kernel_name, name, "not a binding or parameter of the plan")
        handle = KernelHandle(plan.kernel_name, plan, fn, tuple(names), read_extent=scan_read_extents(fn, plan))
        if self.backend in ("compiled", "auto"):
            from .compile import CompileError, compile_kernel

            try:
                handle.compiled = compile_kernel(handle)
            except CompileError:
                if self.backend == "compiled":
                    raise
        self.kernels[plan.kernel_name] = handle
        return handle

    def kernel(self, name: str | KernelHandle) -> KernelHandle:
        if isinstance(name, KernelHandle):
            return name
        try:
            return self.kernels[name]
        except KeyError:
            raise ExecutorError(f"unknown kernel {name!r}") from None

    # -- buffers ---------------------------------------------------------------

    def _back_buffer(self, f: DistributedField, rank: int) -> np.ndarray:
        key = (id(f), rank)
        buf = self._backs.get(key)
        front = f.locals[rank]
        if buf is None or buf.shape != front.shape or buf is front:
            buf = np.empty_like(front, order="F")
            self._backs[key] = buf
        return buf

    # -- running ---------------------------------------------------------------

    def _resolve(self, kernel, fields, params, env):
        k = self.kernel(kernel)
        source = self.driver.fields if fields is None else fields
        bound = {}
        for name in k.plan.field_names:
            if name not in source:
                raise ExecutorError(f"kernel {k.name}: no field bound to {name!r}")
            f = source[name]
            if f.deco != self.driver.deco:
                raise ExecutorError(f"kernel {k.name}: field {name} lives on another decomposition")
            bound[name] = f
        params = dict(params or {})
        values = {}
        for p in k.plan.params:
            if p not in params:
                raise ExecutorError(f"kernel {k.name}: parameter {p!r} not supplied")
            values[p] = params[p]
        if env is None:
            env = SimpleNamespace()
        elif isinstance(env, Mapping):
            env = SimpleNamespace(**env)
        return k, bound, values, env

    def run_kernel(
        self,
        kernel: str | KernelHandle,
        fields: Mapping[str, DistributedField] | None = None,
        params: Mapping[str, Any] | None = None,
        region: str = "all",
        env: Any = None,
    ) -> None:
        """Evaluate the point function on every point of ``region`` of every block.

        Reads see the values from before the call; outputs are committed once
        the whole region of a block is done.
        """
        if region not in REGIONS:
            raise ExecutorError(f"unknown region {region!r}")
        k, bound, values, env = self._resolve(kernel, fields, params, env)
        run = _Run(self, k, bound, values, env, region)

        def work(rank):
            self._compute_rank(run, rank, region)
            self._commit_rank(run, rank, region)

        self.driver.pool.run(work)
        self._record(run)

    def run_overlapped(
        self,
        kernel: str | KernelHandle,
        exchange: Sequence[DistributedField],
        bcs=None,
        fields: Mapping[str, DistributedField] | None = None,
        params: Mapping[str, Any] | None = None,
        env: Any = None,
    ) -> None:
        """Ghost exchange of ``exchange`` concurrent with the interior of the
        kernel, then the boundary shell once the exchange has completed."""
        k, bound, values, env = self._resolve(kernel, fields, params, env)
        run = _Run(self, k, bound, values, env, "overlap")
        driver = self.driver
        xfields = list(exchange)
        resolved = driver._bcs_for(xfields, bcs)

        def work(rank):
            if resolved is not None:
                for f in xfields:
                    set_wall_faces(f, rank, resolved.get(f.name, {}))
            failure: list[BaseException] = []

            def comm():
                try:
                    exchange_rank(xfields, rank, driver.mailbox, resolved, prologue=False)
                except BaseException as exc:
                    failure.append(exc)

            t = threading.Thread(target=comm, name=f"sf-comm-{rank}")
            t.start()
            try:
                self._compute_rank(run, rank, "interior")
            finally:
                t.join()
            if failure:
                raise failure[0]
            self._compute_rank(run, rank, "boundary")
            self._commit_rank(run, rank, "all")

        driver.pool.run(work)
        self._record(run)

    def _record(self, run: _Run):
        total = TransferRecord(run.kernel.name, run.records[0].region)
        for r in run.records:
            total.tiles += r.tiles
            total.bytes_in += r.bytes_in
            total.bytes_out += r.bytes_out
        self.ledger.records.append(total)

    def _check_ghosts(self, run: _Run, rank: int):
        for name in run.kernel.reads:
            f = run.fields[name]
            extent = run.kernel.read_extent.get(name, run.plan.halo)
            for face in range(6):
                if extent[face] > 0 and not f.ghost_valid[rank][face]:
                    raise InvalidGhostError(
                        f"kernel {run.kernel.name} reads {name} across face {face} of worker {rank} "
                        "but its ghosts are stale"
                    )

    def _compute_rank(self, run: _Run, rank: int, region: str) -> None:
        plan = run.plan
        deco = self.driver.deco
        g = deco.ghost
        halo = plan.halo
        if max(halo) > g:
            raise ExecutorError(f"kernel {plan.kernel_name} needs halo {max(halo)} but ghost width is {g}")
        if self.debug and region in ("all", "boundary"):
            self._check_ghosts(run, rank)
        shape = deco.block_shape(rank)
        block_lo = deco.blocks[rank][0]
        record = run.records[rank]
        k = run.kernel
        compiled = k.compiled if self.backend != "numpy" else None
        cached_reads = [b.name for b in plan.bindings if b.cached and b.intent.reads]
        cached_writes = [b.name for b in plan.bindings if b.cached and b.intent.writes]
        check = self.debug
        march_default = self.march
        copy_in = self.staging == "copy"

        for box in _boxes(shape, g, halo, region):
            for lo, hi in _tiles(box, plan.tile):
                record.tiles += 1
                wx = hi[0] - lo[0] + halo[0] + halo[1]
                wy = hi[1] - lo[1] + halo[2] + halo[3]
                depth = hi[2] - lo[2]
                step = depth if march_default is None else min(march_default, depth)
                hz = halo[4] + halo[5]
                scratch = {name: _Scratch(wx, wy, step + hz, copy_in) for name in cached_reads}
                for z0 in range(lo[2], hi[2], step):
                    z1 = min(z0 + step, hi[2])
                    clo = (lo[0], lo[1], z0)
                    chi = (hi[0], hi[1], z1)
                    sources = {}
                    for name in k.reads:
                        front = run.fields[name].locals[rank]
                        if name in scratch:
                            sc = scratch[name]
                            record.bytes_in += self._stage(sc, front, clo, chi, halo, copy_in)
                            if copy_in:
                                sources[name] = (sc.array, (halo[0], halo[2], halo[4]))
                            else:
                                sources[name] = (front, clo)
                        else:
                            sources[name] = (front, clo)
                    for name in cached_writes:
                        record.bytes_out += 8 * (chi[0] - clo[0]) * (chi[1] - clo[1]) * (chi[2] - clo[2])
                    gidx = tuple(block_lo[a] + clo[a] - g for a in range(3))
                    if compiled is not None:
                        compiled(run, rank, sources, clo, chi, gidx)
                    else:
                        self._eval_numpy(run, rank, sources, clo, chi, gidx, check)

    @staticmethod
    def _stage(sc: _Scratch, front: np.ndarray, clo, chi, halo, copy_in: bool = True) -> int:
        """Bring the z-window for planes [clo[2], chi[2]) into scratch; return bytes loaded."""
        x0, x1 = clo[0] - halo[0], chi[0] + halo[1]
        y0, y1 = clo[1] - halo[2], chi[1] + halo[3]
        want_lo, want_hi = clo[2] - halo[4], chi[2] + halo[5]
        arr = sc.array
        if sc.z_lo is not None and sc.z_lo < want_lo < sc.z_hi:
            # rotate: keep the planes the new window shares with the old one
            keep = sc.z_hi - want_lo
            start = want_lo - sc.z_lo
            if copy_in:
                arr[:, :, :keep] = arr[:, :, start:start + keep].copy()
            load_lo = sc.z_hi
            offset = keep
        else:
            load_lo = want_lo
            offset = 0
        n = want_hi - load_lo
        if copy_in:
            arr[:, :, offset:offset + n] = front[x0:x1, y0:y1, load_lo:want_hi]
        sc.z_lo, sc.z_hi = want_lo, want_hi
        sc.depth = want_hi - want_lo
        return 8 * (x1 - x0) * (y1 - y0) * n

    def _eval_numpy(self, run: _Run, rank, sources, clo, chi, gidx, check):
        k = run.kernel
        plan = run.plan
        shape = tuple(chi[a] - clo[a] for a in range(3))
        kwargs = {}
        for name in k.plan.field_names:
            if name in sources:
                src, origin = sources[name]
                kwargs[name] = _Accessor(name, src, origin, shape, plan.halo, check)
            else:
                kwargs[name] = _write_only(name)
        kwargs.update(run.params)
        if "idx" in k.arg_names:
            kwargs["idx"] = (
                np.arange(gidx[0], gidx[0] + shape[0]).reshape(-1, 1, 1),
                np.arange(gidx[1], gidx[1] + shape[1]).reshape(1, -1, 1),
                np.arange(gidx[2], gidx[2] + shape[2]).reshape(1, 1, -1),
            )
        if "env" in k.arg_names:
            kwargs["env"] = run.env
        result = k.fn(**kwargs)
        self._store(run, rank, result, clo, chi, check)

    def _store(self, run: _Run, rank, result, clo, chi, check):
        k = run.kernel
        if not isinstance(result, Mapping):
            raise ExecutorError(f"kernel {k.name}: point function must return a mapping of outputs")
        outputs = k.writes
        for name, value in result.items():
            if name not in outputs:
                raise ExecutorError(f"kernel {k.name}: writes {name!r}, which is not an output binding")
            target = run.back[(name, rank)][clo[0]:chi[0], clo[1]:chi[1], clo[2]:chi[2]]
            if check and np.ndim(value) and np.shape(value) != target.shape:
                raise HaloAccessError(
                    f"kernel {k.name}: write to {name} has shape {np.shape(value)}, expected {target.shape}"
                )
            target[...] = value
        if check:
            missing = set(outputs) - set(result)
            if missing:
                raise ExecutorError(f"kernel {k.name}: outputs {sorted(missing)} not written")

    def _commit_rank(self, run: _Run, rank: int, region: str) -> None:
        deco = self.driver.deco
        for name in run.kernel.writes:
            f = run.fields[name]
            back = run.back[(name, rank)]
            if region == "all":
                self._backs[(id(f), rank)] = f.locals[rank]
                f.locals[rank] = back
            else:
                for lo, hi in _boxes(deco.block_shape(rank), deco.ghost, run.plan.halo, region):
                    box = tuple(slice(l, h) for l, h in zip(lo, hi))
                    f.locals[rank][box] = back[box]
            f.invalidate_ghosts(rank)


class _write_only:
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name

    def __call__(self, *offsets):
        raise ExecutorError(f"{self.name} has intent OUT and cannot be read")
