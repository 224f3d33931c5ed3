"""A small packrat parsing-expression-grammar engine.

Grammars are written one definition per line::

    name <- expression

with single-quoted literals (``\\'`` and ``\\\\`` escapes), ASCII character
classes ``[a-zA-Z_]``, ``.`` for any character, postfix ``*`` ``+`` ``?``,
prefix ``&`` and ``!`` predicates, juxtaposition for sequence, ``/`` for
ordered choice, parentheses for grouping and ``#`` comments.  A definition
ends where the next ``name <-`` begins, so several short rules may share a
line.  Whitespace is never implicit: grammars spell it out.

Semantics are standard Ford-style PEG: ordered choice commits to the first
alternative that succeeds, repetition is greedy and predicates consume
nothing.  Each :func:`match` call memoizes ``(rule, position)`` results in a
private table, so every pair is evaluated at most once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

__all__ = [
    "Literal",
    "CharClass",
    "AnyChar",
    "Sequence",
    "Choice",
    "ZeroOrMore",
    "OneOrMore",
    "Optional",
    "And",
    "Not",
    "RuleRef",
    "Grammar",
    "ParseTree",
    "MatchStats",
    "PegError",
    "GrammarSyntaxError",
    "UndefinedRuleError",
    "LeftRecursionError",
    "NoMatch",
    "compile_grammar",
    "match",
    "parse",
    "line_col",
]


# -- expressions ---------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    text: str


@dataclass(frozen=True)
class CharClass:
    ranges: tuple[tuple[str, str], ...]

    def accepts(self, ch: str) -> bool:
        return any(lo <= ch <= hi for lo, hi in self.ranges)


@dataclass(frozen=True)
class AnyChar:
    pass


@dataclass(frozen=True)
class Sequence:
    items: tuple["Expression", ...]


@dataclass(frozen=True)
class Choice:
    alternatives: tuple["Expression", ...]


@dataclass(frozen=True)
class ZeroOrMore:
    expr: "Expression"


@dataclass(frozen=True)
class OneOrMore:
    expr: "Expression"


@dataclass(frozen=True)
class Optional:
    expr: "Expression"


@dataclass(frozen=True)
class And:
    expr: "Expression"


@dataclass(frozen=True)
class Not:
    expr: "Expression"


@dataclass(frozen=True)
class RuleRef:
    name: str


Expression = Union[
    Literal, CharClass, AnyChar, Sequence, Choice, ZeroOrMore, OneOrMore,
    Optional, And, Not, RuleRef,
]


@dataclass(frozen=True)
class Grammar:
    rules: dict[str, Expression]
    start: str

    def __post_init__(self):
        if self.start not in self.rules:
            raise UndefinedRuleError(self.start)
        for name, expr in self.rules.items():
            for ref in _references(expr):
                if ref not in self.rules:
                    raise UndefinedRuleError(ref, referenced_from=name)


@dataclass
class ParseTree:
    rule: str
    span: tuple[int, int]
    children: list["ParseTree"] = field(default_factory=list)

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]

    def text(self, source: str) -> str:
        return source[self.span[0]:self.span[1]]

    def find(self, rule: str) -> list["ParseTree"]:
        """Direct children produced by ``rule``."""
        return [c for c in self.children if c.rule == rule]

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def shape(self):
        """Nested ``(rule, span, children)`` tuples, convenient for comparisons."""
        return (self.rule, self.span, tuple(c.shape() for c in self.children))


@dataclass
class MatchStats:
    """Instrumentation filled in by :func:`match`.

    ``evaluations`` counts rule-body evaluations; ``distinct`` counts the
    distinct ``(rule, position)`` pairs among them.
    """

    evaluations: int = 0
    distinct: int = 0
    memo_hits: int = 0


# -- errors --------------------------------------------------------------------


class PegError(Exception):
    pass


class GrammarSyntaxError(PegError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class UndefinedRuleError(PegError):
    def __init__(self, name: str, referenced_from: str | None = None):
        where = f" (referenced from {referenced_from!r})" if referenced_from else ""
        super().__init__(f"undefined rule {name!r}{where}")
        self.name = name


class LeftRecursionError(PegError):
    def __init__(self, cycle: list[str]):
        super().__init__("left recursion: " + " -> ".join(cycle))
        self.cycle = cycle


class NoMatch(PegError):
    """Raised when the input does not match; ``position`` is the farthest
    offset any terminal was tried at."""

    def __init__(self, position: int, expected: frozenset[str], source: str):
        self.position = position
        self.expected = expected
        self.line, self.column = line_col(source, position)
        exp = ", ".join(sorted(expected)) if expected else "end of input"
        super().__init__(
            f"no match at line {self.line}, column {self.column} (offset {position}); expected {exp}"
        )


def line_col(source: str, offset: int) -> tuple[int, int]:
    line = source.count("\n", 0, offset) + 1
    col = offset - (source.rfind("\n", 0, offset) + 1) + 1
    return line, col


# -- grammar notation ----------------------------------------------------------

_IDENT_START = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_"
_IDENT_CONT = _IDENT_START + "0123456789"
_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", "]": "]", "-": "-", "[": "["}


class _NotationReader:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0

    def error(self, message: str, pos: int | None = None):
        line, col = line_col(self.src, self.pos if pos is None else pos)
        raise GrammarSyntaxError(message, line, col)

    def skip(self):
        src = self.src
        while self.pos < len(src):
            ch = src[self.pos]
            if ch in " \t\r\n":
                self.pos += 1
            elif ch == "#":
                nl = src.find("\n", self.pos)
                self.pos = len(src) if nl < 0 else nl + 1
            else:
                break

    def peek(self, s: str) -> bool:
        return self.src.startswith(s, self.pos)

    def ident(self) -> str | None:
        src = self.src
        if self.pos < len(src) and src[self.pos] in _IDENT_START:
            start = self.pos
            self.pos += 1
            while self.pos < len(src) and src[self.pos] in _IDENT_CONT:
                self.pos += 1
            return src[start:self.pos]
        return None

    def at_definition(self) -> bool:
        save = self.pos
        try:
            if self.ident() is None:
                return False
            self.skip()
            return self.peek("<-")
        finally:
            self.pos = save

    def grammar(self) -> tuple[dict[str, Expression], str | None]:
        rules: dict[str, Expression] = {}
        start = None
        self.skip()
        while self.pos < len(self.src):
            at = self.pos
            name = self.ident()
            if name is None:
                self.error("expected rule name")
            self.skip()
            if not self.peek("<-"):
                self.error("expected '<-'")
            self.pos += 2
            self.skip()
            expr = self.choice()
            if name in rules:
                self.error(f"duplicate rule {name!r}", at)
            rules[name] = expr
            start = start or name
            self.skip()
            if self.peek(";"):
                self.pos += 1
                self.skip()
        return rules, start

    def choice(self) -> Expression:
        alts = [self.sequence()]
        while True:
            self.skip()
            if not self.peek("/"):
                break
            self.pos += 1
            self.skip()
            alts.append(self.sequence())
        return alts[0] if len(alts) == 1 else Choice(tuple(alts))

    def sequence(self) -> Expression:
        items = []
        while True:
            self.skip()
            if self.pos >= len(self.src) or self.src[self.pos] in "/);" or self.at_definition():
                break
            items.append(self.prefixed())
        if not items:
            self.error("empty expression")
        return items[0] if len(items) == 1 else Sequence(tuple(items))

    def prefixed(self) -> Expression:
        if self.peek("&") or self.peek("!"):
            op = self.src[self.pos]
            self.pos += 1
            self.skip()
            inner = self.prefixed()
            return And(inner) if op == "&" else Not(inner)
        return self.suffixed()

    def suffixed(self) -> Expression:
        expr = self.primary()
        while self.pos < len(self.src) and self.src[self.pos] in "*+?":
            op = self.src[self.pos]
            self.pos += 1
            expr = {"*": ZeroOrMore, "+": OneOrMore, "?": Optional}[op](expr)
        return expr

    def primary(self) -> Expression:
        src = self.src
        if self.pos >= len(src):
            self.error("unexpected end of grammar")
        ch = src[self.pos]
        if ch == "(":
            self.pos += 1
            self.skip()
            expr = self.choice()
            self.skip()
            if not self.peek(")"):
                self.error("expected ')'")
            self.pos += 1
            return expr
        if ch == "'":
            return Literal(self.quoted())
        if ch == "[":
            return self.char_class()
        if ch == ".":
            self.pos += 1
            return AnyChar()
        name = self.ident()
        if name is None:
            self.error(f"unexpected character {ch!r}")
        return RuleRef(name)

    def escape(self) -> str:
        self.pos += 1
        if self.pos >= len(self.src):
            self.error("dangling escape")
        ch = self.src[self.pos]
        if ch not in _ESCAPES:
            self.error(f"unknown escape '\\{ch}'")
        self.pos += 1
        return _ESCAPES[ch]

    def quoted(self) -> str:
        start = self.pos
        self.pos += 1
        out = []
        while True:
            if self.pos >= len(self.src) or self.src[self.pos] == "\n":
                self.error("unterminated literal", start)
            ch = self.src[self.pos]
            if ch == "'":
                self.pos += 1
                break
            if ch == "\\":
                out.append(self.escape())
            else:
                out.append(ch)
                self.pos += 1
        if not out:
            self.error("empty literal", start)
        return "".join(out)

    def class_char(self) -> str:
        if self.src[self.pos] == "\\":
            return self.escape()
        ch = self.src[self.pos]
        self.pos += 1
        return ch

    def char_class(self) -> CharClass:
        start = self.pos
        self.pos += 1
        ranges = []
        while True:
            if self.pos >= len(self.src) or self.src[self.pos] == "\n":
                self.error("unterminated character class", start)
            if self.src[self.pos] == "]":
                self.pos += 1
                break
            lo = self.class_char()
            hi = lo
            if self.peek("-") and not self.peek("-]"):
                self.pos += 1
                hi = self.class_char()
            if ord(lo) > 127 or ord(hi) > 127:
                self.error("character classes are ASCII only", start)
            if lo > hi:
                self.error(f"reversed range {lo}-{hi}", start)
            ranges.append((lo, hi))
        if not ranges:
            self.error("empty character class", start)
        return CharClass(tuple(ranges))


def _references(expr: Expression):
    if isinstance(expr, RuleRef):
        yield expr.name
    elif isinstance(expr, Sequence):
        for e in expr.items:
            yield from _references(e)
    elif isinstance(expr, Choice):
        for e in expr.alternatives:
            yield from _references(e)
    elif isinstance(expr, (ZeroOrMore, OneOrMore, Optional, And, Not)):
        yield from _references(expr.expr)


def _nullable_rules(rules: dict[str, Expression]) -> set[str]:
    nullable: set[str] = set()

    def can_be_empty(e: Expression) -> bool:
        if isinstance(e, Literal | CharClass | AnyChar):
            return False
        if isinstance(e, RuleRef):
            return e.name in nullable
        if isinstance(e, Sequence):
            return all(can_be_empty(x) for x in e.items)
        if isinstance(e, Choice):
            return any(can_be_empty(x) for x in e.alternatives)
        if isinstance(e, OneOrMore):
            return can_be_empty(e.expr)
        return True  # *, ?, &, !

    changed = True
    while changed:
        changed = False
        for name, expr in rules.items():
            if name not in nullable and can_be_empty(expr):
                nullable.add(name)
                changed = True
    return nullable


def _check_left_recursion(rules: dict[str, Expression]) -> None:
    nullable = _nullable_rules(rules)

    def empty(e: Expression) -> bool:
        if isinstance(e, Literal | CharClass | AnyChar):
            return False
        if isinstance(e, RuleRef):
            return e.name in nullable
        if isinstance(e, Sequence):
            return all(empty(x) for x in e.items)
        if isinstance(e, Choice):
            return any(empty(x) for x in e.alternatives)
        if isinstance(e, OneOrMore):
            return empty(e.expr)
        return True

    def leading(e: Expression) -> set[str]:
        # rules that may be entered at the same position, before any input is consumed
        if isinstance(e, RuleRef):
            return {e.name}
        if isinstance(e, Sequence):
            out: set[str] = set()
            for item in e.items:
                out |= leading(item)
                if not empty(item):
                    break
            return out
        if isinstance(e, Choice):
            return set().union(*(leading(a) for a in e.alternatives))
        if isinstance(e, (ZeroOrMore, OneOrMore, Optional, And, Not)):
            return leading(e.expr)
        return set()

    graph = {name: sorted(leading(expr)) for name, expr in rules.items()}
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(name: str):
        state[name] = 1
        stack.append(name)
        for nxt in graph[name]:
            if state.get(nxt) == 1:
                raise LeftRecursionError(stack[stack.index(nxt):] + [nxt])
            if nxt not in state:
                visit(nxt)
        stack.pop()
        state[name] = 2

    for name in rules:
        if name not in state:
            visit(name)


def compile_grammar(source: str, start: str | None = None) -> Grammar:
    """Compile grammar notation into a :class:`Grammar`.

    The first definition is the start rule unless ``start`` is given.
    """
    reader = _NotationReader(source)
    rules, first = reader.grammar()
    if first is None:
        raise GrammarSyntaxError("grammar has no rules", 1, 1)
    grammar = Grammar(rules, start or first)
    _check_left_recursion(rules)
    return grammar


# -- matching ------------------------------------------------------------------

_FAIL = -1


class _Matcher:
    def __init__(self, grammar: Grammar, text: str, memoize: bool, stats: MatchStats):
        self.rules = grammar.rules
        self.text = text
        self.memoize = memoize
        self.memo: dict[tuple[str, int], tuple[int, list[ParseTree] | None]] = {}
        self.seen: set[tuple[str, int]] = set()
        self.stats = stats
        self.farthest = 0
        self.expected: set[str] = set()

    def fail_at(self, pos: int, what: str):
        if pos > self.farthest:
            self.farthest = pos
            self.expected = {what}
        elif pos == self.farthest:
            self.expected.add(what)

    def rule(self, name: str, pos: int) -> tuple[int, list[ParseTree]]:
        key = (name, pos)
        if self.memoize and key in self.memo:
            self.stats.memo_hits += 1
            end, node = self.memo[key]
            return end, ([] if node is None else [node])
        self.stats.evaluations += 1
        if key not in self.seen:
            self.seen.add(key)
            self.stats.distinct += 1
        end, children = self.eval(self.rules[name], pos)
        node = None if end == _FAIL else ParseTree(name, (pos, end), children)
        if self.memoize:
            self.memo[key] = (end, node)
        return end, ([] if node is None else [node])

    def eval(self, e: Expression, pos: int) -> tuple[int, list[ParseTree]]:
        text = self.text
        if isinstance(e, Literal):
            if text.startswith(e.text, pos):
                return pos + len(e.text), []
            self.fail_at(pos, repr(e.text))
            return _FAIL, []
        if isinstance(e, CharClass):
            if pos < len(text) and e.accepts(text[pos]):
                return pos + 1, []
            self.fail_at(pos, "[" + "".join(lo if lo == hi else f"{lo}-{hi}" for lo, hi in e.ranges) + "]")
            return _FAIL, []
        if isinstance(e, AnyChar):
            if pos < len(text):
                return pos + 1, []
            self.fail_at(pos, "any character")
            return _FAIL, []
        if isinstance(e, RuleRef):
            return self.rule(e.name, pos)
        if isinstance(e, Sequence):
            children: list[ParseTree] = []
            for item in e.items:
                pos, kids = self.eval(item, pos)
                if pos == _FAIL:
                    return _FAIL, []
                children.extend(kids)
            return pos, children
        if isinstance(e, Choice):
            for alt in e.alternatives:
                end, kids = self.eval(alt, pos)
                if end != _FAIL:
                    return end, kids
            return _FAIL, []
        if isinstance(e, (ZeroOrMore, OneOrMore)):
            children = []
            count = 0
            while True:
                end, kids = self.eval(e.expr, pos)
                if end == _FAIL or (end == pos and count > 0):
                    break
                children.extend(kids)
                count += 1
                if end == pos:
                    break  # nullable body: one empty match is all we take
                pos = end
            if isinstance(e, OneOrMore) and count == 0:
                return _FAIL, []
            return pos, children
        if isinstance(e, Optional):
            end, kids = self.eval(e.expr, pos)
            return (pos, []) if end == _FAIL else (end, kids)
        if isinstance(e, And):
            end, _ = self.eval(e.expr, pos)
            return (_FAIL, []) if end == _FAIL else (pos, [])
        if isinstance(e, Not):
            end, _ = self.eval(e.expr, pos)
            if end == _FAIL:
                return pos, []
            self.fail_at(pos, "not " + _describe(e.expr))
            return _FAIL, []
        raise TypeError(f"not an expression: {e!r}")


def _describe(e: Expression) -> str:
    if isinstance(e, Literal):
        return repr(e.text)
    if isinstance(e, RuleRef):
        return e.name
    return type(e).__name__


def match(
    grammar: Grammar,
    rule: str,
    text: str,
    *,
    memoize: bool = True,
    stats: MatchStats | None = None,
) -> ParseTree:
    """Match ``rule`` against a prefix of ``text``.

    Returns the parse tree of the matched prefix.  Raises :class:`NoMatch`
    carrying the farthest position reached when the rule fails.
    """
    if rule not in grammar.rules:
        raise UndefinedRuleError(rule)
    m = _Matcher(grammar, text, memoize, stats if stats is not None else MatchStats())
    end, nodes = m.rule(rule, 0)
    if end == _FAIL:
        raise NoMatch(m.farthest, frozenset(m.expected), text)
    return nodes[0]


def parse(grammar: Grammar, text: str, rule: str | None = None) -> ParseTree:
    """Like :func:`match` but the whole input must be consumed."""
    rule = rule or grammar.start
    m = _Matcher(grammar, text, True, MatchStats())
    end, nodes = m.rule(rule, 0)
    if end == _FAIL:
        raise NoMatch(m.farthest, frozenset(m.expected), text)
    if end != len(text):
        if m.farthest <= end:
            m.farthest, m.expected = end, set()
        raise NoMatch(m.farthest, frozenset(m.expected), text)
    return nodes[0]
