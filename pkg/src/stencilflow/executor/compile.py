"""Translation of point functions into numba loop nests.

The translated kernel iterates ``k, j, i`` (``i`` innermost, matching the
x-fastest storage).  Every accessor call ``f(di, dj, dk)`` becomes an indexed
load; the offsets must be integer literals and are checked against the halo
when the kernel is translated.  The final ``return {...}`` becomes stores into
the output buffers.
"""

from __future__ import annotations

import ast
import builtins
import hashlib
import importlib.util
import inspect
import math
import numbers
import os
import sys
import textwrap
from pathlib import Path

import numpy as np

from . import pointops
from .core import ExecutorError, HaloAccessError, KernelHandle

__all__ = ["CompileError", "compile_kernel", "translate", "cache_dir"]


class CompileError(ExecutorError):
    pass


def cache_dir() -> Path:
    root = os.environ.get("SF_CACHE_DIR")
    if root:
        path = Path(root)
    else:
        base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
        path = Path(base) / "stencilflow"
    path.mkdir(parents=True, exist_ok=True)
    return path


_PRELUDE = '''\
import math
import numpy as np
from numba import njit


@njit(inline="always")
def _sf_maximum(a, b):
    return a if (a > b or a != a) else b


@njit(inline="always")
def _sf_minimum(a, b):
    return a if (a < b or a != a) else b

'''

_HELPERS = {
    pointops.maximum: "_sf_maximum",
    pointops.minimum: "_sf_minimum",
    pointops.absolute: "abs",
    np.maximum: "_sf_maximum",
    np.minimum: "_sf_minimum",
    np.abs: "abs",
    abs: "abs",
}
_WHERE = (pointops.where, np.where)
_LOOP = ("_sf_i", "_sf_j", "_sf_k")


def _offset(node: ast.expr, kernel: str) -> int:
    try:
        value = ast.literal_eval(node)
    except ValueError:
        raise CompileError(f"{kernel}: accessor offsets must be integer literals") from None
    if not isinstance(value, int) or isinstance(value, bool):
        raise CompileError(f"{kernel}: accessor offsets must be integer literals")
    return value


class _Rewriter(ast.NodeTransformer):
    def __init__(self, handle: KernelHandle, globals_: dict):
        self.h = handle
        self.plan = handle.plan
        self.globals = globals_
        self.readable = set(handle.plan.inputs)
        self.fields = set(handle.plan.field_names)
        self.params = set(handle.plan.params)
        self.env_names: list[str] = []
        self.locals: set[str] = set()

    def fail(self, node, why):
        raise CompileError(f"kernel {self.h.name}, line {getattr(node, 'lineno', '?')}: {why}")

    def resolve(self, node):
        """The global object a Name/Attribute chain refers to, or None."""
        if isinstance(node, ast.Name):
            if node.id in self.locals or node.id in self.fields or node.id in self.params:
                return None
            if node.id in self.globals:
                return self.globals[node.id]
            return getattr(builtins, node.id, None)
        if isinstance(node, ast.Attribute):
            base = self.resolve(node.value)
            if base is not None and inspect.ismodule(base):
                return getattr(base, node.attr, None)
        return None

    def visit_Call(self, node: ast.Call):
        func = node.func
        if isinstance(func, ast.Name) and func.id in self.fields:
            if func.id not in self.readable:
                self.fail(node, f"{func.id} has intent OUT and cannot be read")
            if node.keywords or len(node.args) > 3:
                self.fail(node, "accessors take up to three positional offsets")
            offs = [_offset(a, self.h.name) for a in node.args] + [0] * (3 - len(node.args))
            halo = self.plan.halo
            for a in range(3):
                if not -halo[2 * a] <= offs[a] <= halo[2 * a + 1]:
                    raise HaloAccessError(
                        f"kernel {self.h.name}: read of {func.id} at offset {tuple(offs)} outside halo {halo}"
                    )
            index = []
            for a in range(3):
                expr = f"{func.id}__o{a} + {_LOOP[a]}"
                if offs[a]:
                    expr += f" + ({offs[a]})"
                index.append(expr)
            return ast.parse(f"{func.id}[{', '.join(index)}]", mode="eval").body
        target = self.resolve(func)
        args = [self.visit(a) for a in node.args]
        if node.keywords:
            self.fail(node, "keyword arguments are not supported in point functions")
        if any(target is w for w in _WHERE):
            if len(args) != 3:
                self.fail(node, "where takes three arguments")
            return ast.IfExp(test=args[0], body=args[1], orelse=args[2])
        for obj, name in _HELPERS.items():
            if target is obj:
                return ast.Call(func=ast.Name(name, ast.Load()), args=args, keywords=[])
        if target is not None and (getattr(target, "__module__", None) in ("math",) or isinstance(target, np.ufunc)):
            node.func = self.visit(func)
            node.args = args
            return node
        self.fail(node, f"call to {ast.unparse(func)} is not supported")

    def visit_Attribute(self, node: ast.Attribute):
        if isinstance(node.value, ast.Name) and node.value.id == "env":
            name = f"env__{node.attr}"
            if name not in self.env_names:
                self.env_names.append(name)
            return ast.Name(name, ast.Load())
        target = self.resolve(node)
        if isinstance(target, numbers.Number) and not isinstance(target, bool):
            return ast.Constant(float(target) if isinstance(target, float) else target)
        base = self.resolve(node.value)
        if base is math or base is np:
            return ast.Attribute(value=ast.Name("math" if base is math else "np", ast.Load()), attr=node.attr, ctx=ast.Load())
        self.fail(node, f"attribute {ast.unparse(node)} is not supported")

    def visit_Subscript(self, node: ast.Subscript):
        if isinstance(node.value, ast.Name) and node.value.id == "idx":
            try:
                axis = ast.literal_eval(node.slice)
            except ValueError:
                axis = None
            if axis not in (0, 1, 2):
                self.fail(node, "idx must be indexed with 0, 1 or 2")
            return ast.parse(f"(_sf_g{axis} + {_LOOP[axis]})", mode="eval").body
        self.fail(node, "subscripts are not supported in point functions")

    def visit_UnaryOp(self, node: ast.UnaryOp):
        node.operand = self.visit(node.operand)
        if isinstance(node.op, ast.Invert):
            # masks are scalar booleans here
            return ast.UnaryOp(op=ast.Not(), operand=node.operand)
        return node

    def visit_BinOp(self, node: ast.BinOp):
        node.left = self.visit(node.left)
        node.right = self.visit(node.right)
        if isinstance(node.op, ast.BitAnd):
            return ast.BoolOp(op=ast.And(), values=[node.left, node.right])
        if isinstance(node.op, ast.BitOr):
            return ast.BoolOp(op=ast.Or(), values=[node.left, node.right])
        return node

    def visit_Name(self, node: ast.Name):
        n = node.id
        if n in self.locals or n in self.params:
            return node
        if n in self.fields:
            self.fail(node, f"{n} must be called with offsets")
        if n in ("idx", "env"):
            self.fail(node, f"{n} can only be used as {n}[axis]" if n == "idx" else "env can only be used as env.name")
        target = self.resolve(node)
        if isinstance(target, numbers.Number) and not isinstance(target, bool):
            return ast.Constant(float(target) if isinstance(target, float) else target)
        if isinstance(target, bool):
            return ast.Constant(target)
        if target is math:
            return ast.Name("math", ast.Load())
        if target is np:
            return ast.Name("np", ast.Load())
        self.fail(node, f"name {n!r} is not a binding, parameter, local or numeric constant")


def translate(handle: KernelHandle) -> tuple[str, list[str], list[str]]:
    """Source of the loop-nest function, its read bindings and env names."""
    fn = handle.fn
    try:
        src = textwrap.dedent(inspect.getsource(fn))
    except (OSError, TypeError) as exc:
        raise CompileError(f"kernel {handle.name}: source of point function unavailable") from exc
    tree = ast.parse(src)
    fdef = tree.body[0]
    if not isinstance(fdef, ast.FunctionDef):
        raise CompileError(f"kernel {handle.name}: point function must be a plain def")
    globals_ = dict(getattr(fn, "__globals__", {}))
    if fn.__closure__:
        for name, cell in zip(fn.__code__.co_freevars, fn.__closure__):
            globals_[name] = cell.cell_contents
    rw = _Rewriter(handle, globals_)
    plan = handle.plan
    outputs = plan.outputs
    body: list[ast.stmt] = []
    stmts = list(fdef.body)
    if stmts and isinstance(stmts[0], ast.Expr) and isinstance(stmts[0].value, ast.Constant) and isinstance(stmts[0].value.value, str):
        stmts = stmts[1:]
    if not stmts or not isinstance(stmts[-1], ast.Return) or not isinstance(stmts[-1].value, ast.Dict):
        raise CompileError(f"kernel {handle.name}: point function must end with 'return {{...}}'")
    for st in stmts[:-1]:
        if isinstance(st, ast.Pass):
            continue
        if isinstance(st, ast.Assign) and len(st.targets) == 1:
            tgt = st.targets[0]
            if isinstance(tgt, ast.Name):
                value = rw.visit(st.value)
                rw.locals.add(tgt.id)
                body.append(ast.Assign(targets=[ast.Name(tgt.id, ast.Store())], value=value))
                continue
            if (
                isinstance(tgt, ast.Tuple)
                and isinstance(st.value, ast.Name)
                and st.value.id == "idx"
                and len(tgt.elts) == 3
                and all(isinstance(e, ast.Name) for e in tgt.elts)
            ):
                for a, e in enumerate(tgt.elts):
                    rw.locals.add(e.id)
                    body.append(ast.parse(f"{e.id} = _sf_g{a} + {_LOOP[a]}").body[0])
                continue
        if isinstance(st, ast.AugAssign) and isinstance(st.target, ast.Name) and st.target.id in rw.locals:
            body.append(ast.AugAssign(target=ast.Name(st.target.id, ast.Store()), op=st.op, value=rw.visit(st.value)))
            continue
        raise CompileError(
            f"kernel {handle.name}, line {st.lineno}: only assignments are allowed before the return"
        )
    ret = stmts[-1].value
    written = []
    values = []
    for key, value in zip(ret.keys, ret.values):
        if not isinstance(key, ast.Constant) or key.value not in outputs:
            raise CompileError(f"kernel {handle.name}: returned key {ast.unparse(key) if key else '**'} is not an output")
        written.append(key.value)
        values.append(rw.visit(value))
    missing = set(outputs) - set(written)
    if missing:
        raise CompileError(f"kernel {handle.name}: outputs {sorted(missing)} are not written")
    for name, value in zip(written, values):
        body.append(ast.Assign(targets=[ast.Name(f"_sf_v_{name}", ast.Store())], value=value))
    for name in written:
        body.append(ast.parse(
            f"{name}__out[_sf_c0 + _sf_i, _sf_c1 + _sf_j, _sf_c2 + _sf_k] = _sf_v_{name}"
        ).body[0])

    reads = list(plan.inputs)
    args = []
    for r in reads:
        args += [r, f"{r}__o0", f"{r}__o1", f"{r}__o2"]
    args += [f"{w}__out" for w in outputs]
    args += ["_sf_c0", "_sf_c1", "_sf_c2", "_sf_n0", "_sf_n1", "_sf_n2", "_sf_g0", "_sf_g1", "_sf_g2"]
    args += list(plan.params) + rw.env_names
    inner = "\n".join("                " + ast.unparse(ast.fix_missing_locations(s)) for s in body)
    text = (
        f"@njit(cache=True, error_model='numpy')\n"
        f"def _sf_kernel({', '.join(args)}):\n"
        f"    for _sf_k in range(_sf_n2):\n"
        f"        for _sf_j in range(_sf_n1):\n"
        f"            for _sf_i in range(_sf_n0):\n"
        f"{inner}\n"
    )
    return text, reads, rw.env_names


class CompiledKernel:
    """Callable used by :class:`~stencilflow.executor.core.Executor` for one tile chunk."""

    def __init__(self, handle: KernelHandle, func, reads, env_names, path):
        self.handle = handle
        self.func = func
        self.reads = reads
        self.env_names = env_names
        self.path = path

    def __call__(self, run, rank, sources, clo, chi, gidx):
        args = []
        for name in self.reads:
            arr, origin = sources[name]
            args += [arr, origin[0], origin[1], origin[2]]
        for name in self.handle.plan.outputs:
            args.append(run.back[(name, rank)])
        args += list(clo)
        args += [chi[a] - clo[a] for a in range(3)]
        args += list(gidx)
        for p in self.handle.plan.params:
            args.append(run.params[p])
        for e in self.env_names:
            attr = e[len("env__"):]
            if not hasattr(run.env, attr):
                raise ExecutorError(f"kernel {self.handle.name}: env has no attribute {attr!r}")
            args.append(getattr(run.env, attr))
        self.func(*args)


def compile_kernel(handle: KernelHandle) -> CompiledKernel:
    try:
        import numba  # noqa: F401
    except ImportError as exc:
        raise CompileError("numba is not installed") from exc
    text, reads, env_names = translate(handle)
    module_src = _PRELUDE + "\n" + text
    digest = hashlib.sha1(module_src.encode()).hexdigest()[:16]
    modname = f"_sf_{handle.name.lower()}_{digest}"
    path = cache_dir() / f"{modname}.py"
    if not path.exists():
        tmp = path.with_suffix(f".{os.getpid()}.tmp")
        tmp.write_text(module_src)
        os.replace(tmp, path)
    module = sys.modules.get(modname)
    if module is None:
        spec = importlib.util.spec_from_file_location(modname, path)
        module = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(module)
        sys.modules[modname] = module
    return CompiledKernel(handle, module._sf_kernel, reads, env_names, path)
