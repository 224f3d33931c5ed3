"""Kernel sequences with interleaved exchanges, and their plain/overlapped execution."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence, Union

from .core import REGIONS, Executor, ExecutorError

__all__ = [
    "RunKernel",
    "Exchange",
    "PhysicalBC",
    "Reduce",
    "Schedule",
    "ScheduleError",
    "run_schedule",
    "MODES",
]

MODES = ("plain", "overlap")


class ScheduleError(ExecutorError):
    pass


@dataclass(frozen=True)
class RunKernel:
    """Run a registered kernel; ``env`` entries override the schedule-wide env."""

    kernel: str
    region: str = "all"
    env: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self):
        if self.region not in REGIONS:
            raise ScheduleError(f"unknown region {self.region!r}")
        if isinstance(self.env, Mapping):
            object.__setattr__(self, "env", tuple(sorted(self.env.items())))


@dataclass(frozen=True)
class Exchange:
    """Ghost exchange of ``fields``; physical boundaries are filled too unless disabled."""

    fields: tuple[str, ...]
    boundaries: bool = True

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))


@dataclass(frozen=True)
class PhysicalBC:
    fields: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))


@dataclass(frozen=True)
class Reduce:
    field: str
    target: str
    op: str = "max_abs"

    def __post_init__(self):
        if self.op not in ("max_abs", "sum"):
            raise ScheduleError(f"unknown reduction {self.op!r}")


Step = Union[RunKernel, Exchange, PhysicalBC, Reduce]


@dataclass
class Schedule:
    steps: list[Step] = field(default_factory=list)

    def __iter__(self):
        return iter(self.steps)

    def __len__(self):
        return len(self.steps)

    def dry_run(self, ex: Executor, fields: Mapping[str, Any] | None = None, cycles: int = 2) -> None:
        """Check that every halo-reading kernel sees freshly exchanged inputs.

        The starting state is taken from the fields' current ghost flags; the
        sequence is replayed ``cycles`` times so that reads at the top of the
        schedule are checked against writes at its bottom.
        """
        source = ex.driver.fields if fields is None else fields
        clean: dict[str, bool] = {}

        def is_clean(name):
            if name not in clean:
                f = source.get(name)
                clean[name] = f is not None and all(all(v) for v in f.ghost_valid)
            return clean[name]

        for cycle in range(cycles):
            for pos, step in enumerate(self.steps):
                if isinstance(step, RunKernel):
                    k = ex.kernel(step.kernel)
                    for name in k.plan.field_names:
                        if name not in source:
                            raise ScheduleError(f"step {pos}: kernel {k.name} binds unknown field {name!r}")
                    if step.region != "interior":
                        for name in k.halo_reads:
                            if not is_clean(name):
                                raise ScheduleError(
                                    f"step {pos}: kernel {k.name} reads the halo of {name} "
                                    "without an exchange since it was last written"
                                    + (" (in the previous cycle)" if cycle else "")
                                )
                    for name in k.writes:
                        clean[name] = False
                elif isinstance(step, Exchange):
                    for name in step.fields:
                        if name not in source:
                            raise ScheduleError(f"step {pos}: exchange of unknown field {name!r}")
                        clean[name] = True
                elif isinstance(step, (PhysicalBC, Reduce)):
                    names = step.fields if isinstance(step, PhysicalBC) else (step.field,)
                    for name in names:
                        if name not in source:
                            raise ScheduleError(f"step {pos}: unknown field {name!r}")
                else:
                    raise ScheduleError(f"step {pos}: unknown step {step!r}")


def run_schedule(
    ex: Executor,
    schedule: Schedule | Sequence[Step],
    steps: int = 1,
    mode: str = "plain",
    params: Mapping[str, Mapping[str, Any]] | Mapping[str, Any] | None = None,
    env: Any = None,
    fields: Mapping[str, Any] | None = None,
    results: dict | None = None,
) -> dict:
    """Execute ``schedule`` ``steps`` times and return the reduction results.

    ``params`` maps kernel names to parameter mappings, or is one mapping
    shared by all kernels.  In overlap mode an exchange directly followed by
    ``RunKernel(region="all")`` runs the interior of that kernel while the
    exchange is in flight and the boundary shell afterwards.
    """
    if mode not in MODES:
        raise ScheduleError(f"unknown mode {mode!r}")
    if not isinstance(schedule, Schedule):
        schedule = Schedule(list(schedule))
    results = {} if results is None else results
    if steps <= 0 or not schedule.steps:
        return results
    schedule.dry_run(ex, fields, cycles=2 if steps > 1 else 1)
    driver = ex.driver
    source = driver.fields if fields is None else fields
    params = params or {}

    def env_for(step):
        if not step.env:
            return env
        merged = dict(vars(env)) if env is not None and not isinstance(env, Mapping) else dict(env or {})
        merged.update(step.env)
        return merged

    def params_for(name):
        p = params.get(name) if name in params and isinstance(params.get(name), Mapping) else None
        return p if p is not None else params

    seq = schedule.steps
    for _ in range(steps):
        i = 0
        while i < len(seq):
            step = seq[i]
            if isinstance(step, Exchange):
                nxt = seq[i + 1] if i + 1 < len(seq) else None
                xfields = [source[n] for n in step.fields]
                if mode == "overlap" and isinstance(nxt, RunKernel) and nxt.region == "all":
                    ex.run_overlapped(
                        nxt.kernel,
                        xfields,
                        bcs=True if step.boundaries else None,
                        fields=source,
                        params=params_for(nxt.kernel),
                        env=env_for(nxt),
                    )
                    i += 2
                    continue
                driver.exchange_ghosts(xfields, bcs=True if step.boundaries else None)
            elif isinstance(step, RunKernel):
                ex.run_kernel(step.kernel, source, params_for(step.kernel), step.region, env=env_for(step))
            elif isinstance(step, PhysicalBC):
                for name in step.fields:
                    driver.apply_physical_boundary(source[name])
            elif isinstance(step, Reduce):
                f = source[step.field]
                results[step.target] = driver.reduce_max_abs(f) if step.op == "max_abs" else driver.reduce_sum(f)
            i += 1
    return results
