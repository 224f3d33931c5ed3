"""Execution plans and generated kernel headers.

A validated descriptor becomes two artifacts: an :class:`ExecutionPlan`,
which the executor runs, and a :class:`RenderedHeader`, the macro layer a
device kernel would include.  The header text is deterministic so it can be
kept as a golden file.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from .descriptor import Intent, KernelDescriptor, KernelType

__all__ = [
    "TemplateId",
    "Binding",
    "ExecutionPlan",
    "RenderedHeader",
    "CodegenError",
    "list_templates",
    "build_plan",
    "render_header",
    "plan_line",
    "write_generated",
]


class TemplateId(enum.Enum):
    THREEDBLOCK = "3DBLOCK"


_TEMPLATE_FOR_TYPE = {KernelType.THREEDBLOCK: TemplateId.THREEDBLOCK}


class CodegenError(ValueError):
    pass


def list_templates() -> list[TemplateId]:
    return list(TemplateId)


@dataclass(frozen=True)
class Binding:
    name: str
    intent: Intent
    cached: bool


@dataclass(frozen=True)
class ExecutionPlan:
    kernel_name: str
    tile: tuple[int, int, int]
    halo: tuple[int, int, int, int, int, int]
    bindings: tuple[Binding, ...]
    params: tuple[str, ...]
    template: TemplateId = TemplateId.THREEDBLOCK

    @property
    def field_names(self) -> list[str]:
        return [b.name for b in self.bindings]

    @property
    def inputs(self) -> list[str]:
        return [b.name for b in self.bindings if b.intent.reads]

    @property
    def outputs(self) -> list[str]:
        return [b.name for b in self.bindings if b.intent.writes]

    @property
    def reads_halo(self) -> bool:
        return any(self.halo)

    def halo_axis(self, axis: int) -> tuple[int, int]:
        return self.halo[2 * axis], self.halo[2 * axis + 1]

    def binding(self, name: str) -> Binding:
        for b in self.bindings:
            if b.name == name:
                return b
        raise KeyError(name)

    def with_tile(self, tile: Sequence[int]) -> "ExecutionPlan":
        tile = tuple(int(t) for t in tile)
        if len(tile) != 3 or min(tile) < 1:
            raise CodegenError(f"bad tile {tile}")
        return ExecutionPlan(self.kernel_name, tile, self.halo, self.bindings, self.params, self.template)


@dataclass(frozen=True)
class RenderedHeader:
    kernel_name: str
    text: str
    declared_signature: tuple[tuple[str, str], ...]


def _require_validated(desc: KernelDescriptor):
    if not isinstance(desc.kernel_type, KernelType) or any(
        g.intent is None or g.cached is None for g in desc.var_groups
    ):
        raise CodegenError(f"descriptor {desc.name} has not been validated")


def build_plan(validated: KernelDescriptor) -> ExecutionPlan:
    _require_validated(validated)
    bindings = tuple(
        Binding(name, g.intent, g.cached) for g in validated.var_groups for name in g.names
    )
    return ExecutionPlan(
        kernel_name=validated.name,
        tile=tuple(validated.tile),
        halo=tuple(validated.stencil),
        bindings=bindings,
        params=tuple(validated.parameter_names),
        template=_TEMPLATE_FOR_TYPE[validated.kernel_type],
    )


_AXES = "XYZ"


def render_header(validated: KernelDescriptor, template: TemplateId | str = TemplateId.THREEDBLOCK) -> RenderedHeader:
    """Render the macro header binding a point function to tiled field access."""
    try:
        template = template if isinstance(template, TemplateId) else TemplateId(template)
    except ValueError:
        raise CodegenError(f"unknown-template({template})") from None
    plan = build_plan(validated)
    if plan.template is not template:
        raise CodegenError(f"kernel {plan.kernel_name} uses template {plan.template.value}, not {template.value}")

    k = plan.kernel_name
    guard = f"SF_KERNEL_{k.upper()}_H"
    out = [
        f"/* {k}.h.generated -- kernel header for template {template.value}. Do not edit. */",
        f"#ifndef {guard}",
        f"#define {guard}",
        "",
        "/* tile: a TX x TY cross-section marched plane by plane along z */",
    ]
    for axis, t in zip(_AXES, plan.tile):
        out.append(f"#define SF_{k}_TILE_{axis} {t}")
    out.append("")
    out.append("/* stencil radii: reads are legal for -LO..+HI along each axis */")
    for a, axis in enumerate(_AXES):
        lo, hi = plan.halo_axis(a)
        out.append(f"#define SF_{k}_HALO_{axis}_LO {lo}")
        out.append(f"#define SF_{k}_HALO_{axis}_HI {hi}")
    out.append("")
    out.append(f"#define SF_{k}_CHECK_OFFSET(di, dj, dk) \\")
    checks = []
    for a, (axis, var) in enumerate(zip(_AXES, ("di", "dj", "dk"))):
        checks.append(f"SF_STATIC_RANGE({var}, -SF_{k}_HALO_{axis}_LO, SF_{k}_HALO_{axis}_HI)")
    out.append("  (" + " && ".join(checks) + ")")
    out.append("")
    out.append("/* index */")
    out.append(f"#define SF_{k}_INDEX(i, j, k) SF_GLOBAL_INDEX(i, j, k)")
    out.append("")
    out.append("/* field accessors */")
    signature: list[tuple[str, str]] = []
    for b in plan.bindings:
        source = "SF_SCRATCH" if b.cached else "SF_GLOBAL"
        buf = "front" if b.intent is Intent.SEPARATEINOUT else "field"
        out.append(f"/* {b.name}: intent {b.intent.value}, {'cached' if b.cached else 'uncached'} */")
        if b.intent.reads:
            out.append(
                f"#define I3D_{b.name}(di, dj, dk) "
                f"({source}({b.name}, {buf}, di, dj, dk) + 0 * sizeof(char[SF_{k}_CHECK_OFFSET(di, dj, dk) ? 1 : -1]))"
            )
        if b.intent.writes:
            target = "back" if b.intent is Intent.SEPARATEINOUT else "field"
            out.append(f"#define O3D_{b.name} SF_STORE({b.name}, {target}, 0, 0, 0)")
        signature.append((b.name, "field-accessor"))
    out.append("")
    out.append("/* parameters */")
    for p in plan.params:
        out.append(f"#define SF_PARAM_{p} SF_CONSTANT({p})")
        signature.append((p, "parameter"))
    signature.append(("i,j,k", "index"))
    out.append("")
    out.append(f"#define SF_{k}_DECLARE_SIGNATURE \\")
    decl = [f"SF_ACCESSOR({b.name})" for b in plan.bindings] + [f"SF_PARAMETER({p})" for p in plan.params]
    decl.append("SF_INDEX(i, j, k)")
    out.append("  " + ", ".join(decl))
    out.append("")
    out.append(f"#endif /* {guard} */")
    return RenderedHeader(k, "\n".join(out) + "\n", tuple(signature))


def plan_line(plan: ExecutionPlan) -> str:
    """One ``plans.txt`` line: name, tile, halo, bindings."""
    tile = ",".join(map(str, plan.tile))
    halo = ",".join(map(str, plan.halo))
    binds = ";".join(f"{b.name}:{b.intent.value}:{'cached' if b.cached else 'uncached'}" for b in plan.bindings)
    return f"{plan.kernel_name} tile={tile} halo={halo} bindings={binds} params={','.join(plan.params)}"


def write_generated(validated: Iterable[KernelDescriptor], outdir: str | os.PathLike) -> list[str]:
    """Write ``<kernel>.h.generated`` files and ``plans.txt`` into ``outdir``."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    lines = []
    for d in validated:
        header = render_header(d)
        path = os.path.join(outdir, f"{d.name}.h.generated")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header.text)
        written.append(path)
        lines.append(plan_line(build_plan(d)))
    path = os.path.join(outdir, "plans.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    written.append(path)
    return written
