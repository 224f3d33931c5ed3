"""Kernel descriptor language (``.ccl`` files).

A descriptor declares, per kernel, the template it instantiates, the stencil
radii and tile shape, the fields it touches (with caching and intent), and
its scalar parameters::

    CCTK_CUDA_KERNEL UPDATE_VELOCITY
       TYPE=3DBLOCK
       STENCIL="1,1,1,1,1,1"
       TILE="16,16,16"
    {
      CCTK_CUDA_KERNEL_VARIABLE CACHED=YES INTENT=SEPARATEINOUT
      {
        vx, vy, vz
      } "VELOCITY"
      CCTK_CUDA_KERNEL_PARAMETER
      {
        density
      } "DENSITY"
    }

STENCIL radii are ordered ``x-, x+, y-, y+, z-, z+``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, Sequence

from . import peg

__all__ = [
    "GRAMMAR_TEXT",
    "Intent",
    "KernelType",
    "VariableGroup",
    "ParameterGroup",
    "KernelDescriptor",
    "DescriptorError",
    "DescriptorSyntaxError",
    "ValidationError",
    "descriptor_grammar",
    "parse_descriptor",
    "load_descriptor",
    "validate",
    "render",
]

GRAMMAR_TEXT = r"""
file       <- ws (kernel ws)*
kernel     <- 'CCTK_CUDA_KERNEL' ws ident ws attrs '{' ws item* '}'
attrs      <- (attr ws)*
attr       <- key ws? '=' ws? value
item       <- vargroup / paramgroup
vargroup   <- 'CCTK_CUDA_KERNEL_VARIABLE' ws attrs '{' ws namelist ws '}' ws string ws
paramgroup <- 'CCTK_CUDA_KERNEL_PARAMETER' ws '{' ws namelist ws '}' ws string ws
namelist   <- ident (ws? ',' ws? ident)*
value      <- string / word
key        <- ident
ident      <- [A-Za-z_] [A-Za-z0-9_]*
word       <- [A-Za-z0-9_]+
string     <- '"' (!'"' .)* '"'
ws         <- (space / comment)*
space      <- [ \t\r\n]
comment    <- '#' (!'\n' .)*
"""


class Intent(enum.Enum):
    IN = "IN"
    OUT = "OUT"
    INOUT = "INOUT"
    SEPARATEINOUT = "SEPARATEINOUT"

    @property
    def reads(self) -> bool:
        return self is not Intent.OUT

    @property
    def writes(self) -> bool:
        return self is not Intent.IN


class KernelType(enum.Enum):
    THREEDBLOCK = "3DBLOCK"


class DescriptorError(ValueError):
    pass


class DescriptorSyntaxError(DescriptorError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ValidationError(DescriptorError):
    """Semantic problem with a parsed descriptor.

    ``kind`` is one of ``unknown-variable``, ``unsupported-type``,
    ``bad-stencil``, ``bad-tile``, ``duplicate-variable``,
    ``duplicate-parameter``, ``bad-name``, ``missing-attribute``.
    """

    def __init__(self, kind: str, subject: str, detail: str = ""):
        msg = f"{kind}({subject})" + (f": {detail}" if detail else "")
        super().__init__(msg)
        self.kind = kind
        self.subject = subject


@dataclass(frozen=True)
class VariableGroup:
    names: tuple[str, ...]
    description: str
    cached: bool | None = None
    intent: Intent | None = None


@dataclass(frozen=True)
class ParameterGroup:
    names: tuple[str, ...]
    description: str


@dataclass(frozen=True)
class KernelDescriptor:
    name: str
    kernel_type: KernelType | str | None
    stencil: tuple[int, ...] | None
    tile: tuple[int, ...] | None
    var_groups: tuple[VariableGroup, ...] = ()
    parameters: tuple[ParameterGroup, ...] = ()

    @property
    def variables(self) -> list[str]:
        return [n for g in self.var_groups for n in g.names]

    @property
    def parameter_names(self) -> list[str]:
        return [n for g in self.parameters for n in g.names]


@lru_cache(maxsize=None)
def descriptor_grammar() -> peg.Grammar:
    return peg.compile_grammar(GRAMMAR_TEXT)


# -- parsing -------------------------------------------------------------------

_KERNEL_KEYS = ("TYPE", "STENCIL", "TILE")
_VARIABLE_KEYS = ("CACHED", "INTENT")


def _unquote(text: str) -> str:
    return text[1:-1] if text.startswith('"') else text


def _int_list(source: str, node: peg.ParseTree, key: str) -> tuple[int, ...]:
    raw = _unquote(node.text(source))
    try:
        return tuple(int(part.strip()) for part in raw.split(","))
    except ValueError:
        line, col = peg.line_col(source, node.start)
        raise DescriptorSyntaxError(f"{key} expects comma-separated integers, got {raw!r}", line, col) from None


def _attrs(source: str, node: peg.ParseTree, allowed: Sequence[str]) -> dict[str, peg.ParseTree]:
    out: dict[str, peg.ParseTree] = {}
    for attr in node.find("attr"):
        key_node = attr.find("key")[0]
        key = key_node.text(source)
        line, col = peg.line_col(source, key_node.start)
        if key not in allowed:
            raise DescriptorSyntaxError(f"unknown attribute {key!r}", line, col)
        if key in out:
            raise DescriptorSyntaxError(f"duplicate attribute {key!r}", line, col)
        out[key] = attr.find("value")[0]
    return out


def _names(source: str, node: peg.ParseTree) -> tuple[str, ...]:
    return tuple(n.text(source) for n in node.find("namelist")[0].find("ident"))


def _kernel(source: str, node: peg.ParseTree) -> KernelDescriptor:
    name = node.find("ident")[0].text(source)
    attrs = _attrs(source, node.find("attrs")[0], _KERNEL_KEYS)
    ktype = _unquote(attrs["TYPE"].text(source)) if "TYPE" in attrs else None
    stencil = _int_list(source, attrs["STENCIL"], "STENCIL") if "STENCIL" in attrs else None
    tile = _int_list(source, attrs["TILE"], "TILE") if "TILE" in attrs else None

    groups: list[VariableGroup] = []
    params: list[ParameterGroup] = []
    for item in node.find("item"):
        inner = item.children[0]
        desc = _unquote(inner.find("string")[0].text(source))
        if inner.rule == "paramgroup":
            params.append(ParameterGroup(_names(source, inner), desc))
            continue
        vattrs = _attrs(source, inner.find("attrs")[0], _VARIABLE_KEYS)
        cached = intent = None
        if "CACHED" in vattrs:
            raw = _unquote(vattrs["CACHED"].text(source)).upper()
            if raw not in ("YES", "NO"):
                line, col = peg.line_col(source, vattrs["CACHED"].start)
                raise DescriptorSyntaxError(f"CACHED must be YES or NO, got {raw!r}", line, col)
            cached = raw == "YES"
        if "INTENT" in vattrs:
            raw = _unquote(vattrs["INTENT"].text(source)).upper()
            try:
                intent = Intent(raw)
            except ValueError:
                line, col = peg.line_col(source, vattrs["INTENT"].start)
                raise DescriptorSyntaxError(f"unknown INTENT {raw!r}", line, col) from None
        groups.append(VariableGroup(_names(source, inner), desc, cached, intent))
    return KernelDescriptor(name, ktype, stencil, tile, tuple(groups), tuple(params))


def parse_descriptor(text: str) -> list[KernelDescriptor]:
    """Parse descriptor text into raw descriptors, in file order.

    Values are converted lexically (integer lists, YES/NO, intents) but no
    defaults are applied; see :func:`validate`.
    """
    try:
        tree = peg.parse(descriptor_grammar(), text)
    except peg.NoMatch as exc:
        raise DescriptorSyntaxError(str(exc), exc.line, exc.column) from None
    return [_kernel(text, k) for k in tree.find("kernel")]


def load_descriptor(path) -> list[KernelDescriptor]:
    with open(path, encoding="utf-8") as fh:
        return parse_descriptor(fh.read())


# -- validation ----------------------------------------------------------------


def _is_ident(name: str) -> bool:
    return bool(name) and (name[0].isalpha() or name[0] == "_") and all(
        c.isalnum() or c == "_" for c in name
    ) and name.isascii()


def validate(raw: KernelDescriptor, known_fields: Iterable[str]) -> KernelDescriptor:
    """Apply defaults and check a parsed descriptor against the known fields."""
    known = set(known_fields)
    if not _is_ident(raw.name):
        raise ValidationError("bad-name", raw.name)

    if raw.kernel_type is None:
        raise ValidationError("missing-attribute", "TYPE")
    try:
        ktype = raw.kernel_type if isinstance(raw.kernel_type, KernelType) else KernelType(raw.kernel_type)
    except ValueError:
        raise ValidationError("unsupported-type", str(raw.kernel_type)) from None

    stencil = raw.stencil if raw.stencil is not None else (0,) * 6
    if len(stencil) != 6:
        raise ValidationError("bad-stencil", raw.name, f"expected 6 radii, got {len(stencil)}")
    if any(r < 0 for r in stencil):
        raise ValidationError("bad-stencil", raw.name, "radii must be >= 0")

    if raw.tile is None:
        raise ValidationError("missing-attribute", "TILE")
    if len(raw.tile) != 3:
        raise ValidationError("bad-tile", raw.name, f"expected 3 extents, got {len(raw.tile)}")
    if any(t < 1 for t in raw.tile):
        raise ValidationError("bad-tile", raw.name, "tile extents must be >= 1")

    seen: set[str] = set()
    groups = []
    for g in raw.var_groups:
        if not g.names:
            raise ValidationError("bad-name", raw.name, "empty variable group")
        for n in g.names:
            if n in seen:
                raise ValidationError("duplicate-variable", n)
            if n not in known:
                raise ValidationError("unknown-variable", n)
            seen.add(n)
        groups.append(replace(
            g,
            cached=False if g.cached is None else g.cached,
            intent=Intent.IN if g.intent is None else g.intent,
        ))

    pseen: set[str] = set()
    for pg in raw.parameters:
        for n in pg.names:
            if n in seen:
                raise ValidationError("duplicate-variable", n, "declared as both variable and parameter")
            if n in pseen:
                raise ValidationError("duplicate-parameter", n)
            pseen.add(n)

    return KernelDescriptor(raw.name, ktype, tuple(stencil), tuple(raw.tile), tuple(groups), raw.parameters)


def validate_all(raws: Sequence[KernelDescriptor], known_fields: Iterable[str]) -> list[KernelDescriptor]:
    known = list(known_fields)
    names: set[str] = set()
    out = []
    for raw in raws:
        if raw.name in names:
            raise ValidationError("bad-name", raw.name, "kernel name repeated in file")
        names.add(raw.name)
        out.append(validate(raw, known))
    return out


# -- rendering -----------------------------------------------------------------


def _type_text(kt) -> str:
    return kt.value if isinstance(kt, KernelType) else str(kt)


def render(descriptors: Sequence[KernelDescriptor]) -> str:
    """Canonical text for ``descriptors``; ``parse_descriptor`` inverts it."""
    blocks = []
    for d in descriptors:
        lines = [f"CCTK_CUDA_KERNEL {d.name}"]
        if d.kernel_type is not None:
            lines.append(f"   TYPE={_type_text(d.kernel_type)}")
        if d.stencil is not None:
            lines.append('   STENCIL="' + ",".join(map(str, d.stencil)) + '"')
        if d.tile is not None:
            lines.append('   TILE="' + ",".join(map(str, d.tile)) + '"')
        lines.append("{")
        for g in d.var_groups:
            head = "  CCTK_CUDA_KERNEL_VARIABLE"
            if g.cached is not None:
                head += " CACHED=" + ("YES" if g.cached else "NO")
            if g.intent is not None:
                head += f" INTENT={g.intent.value}"
            lines += [head, "  {", "    " + ", ".join(g.names), f'  }} "{g.description}"']
        for p in d.parameters:
            lines += ["  CCTK_CUDA_KERNEL_PARAMETER", "  {", "    " + ", ".join(p.names), f'  }} "{p.description}"']
        lines.append("}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
