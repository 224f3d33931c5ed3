"""Random small grammars and inputs for the PEG property tests."""

from __future__ import annotations

import random

from stencilflow import peg

ALPHABET = "abc"


def _expr(rng: random.Random, names: list[str], depth: int) -> str:
    leaf = depth <= 0 or rng.random() < 0.3
    if leaf:
        kind = rng.choice(["lit", "lit", "cls", "any", "ref", "ref"])
        if kind == "lit":
            return "'" + "".join(rng.choice(ALPHABET) for _ in range(rng.randint(1, 2))) + "'"
        if kind == "cls":
            lo = rng.choice(ALPHABET)
            hi = rng.choice([c for c in ALPHABET if c >= lo])
            return f"[{lo}-{hi}]"
        if kind == "any":
            return "."
        return rng.choice(names)
    kind = rng.choice(["seq", "choice", "star", "plus", "opt", "and", "not"])
    if kind == "seq":
        return " ".join(_expr(rng, names, depth - 1) for _ in range(rng.randint(2, 3)))
    if kind == "choice":
        return "(" + " / ".join(_expr(rng, names, depth - 1) for _ in range(rng.randint(2, 3))) + ")"
    inner = "(" + _expr(rng, names, depth - 1) + ")"
    return {"star": inner + "*", "plus": inner + "+", "opt": inner + "?", "and": "&" + inner, "not": "!" + inner}[kind]


def random_grammar(rng: random.Random) -> tuple[str, peg.Grammar]:
    """Grammar text and its compiled form; left-recursive draws are redrawn."""
    while True:
        names = [f"R{i}" for i in range(rng.randint(1, 4))]
        text = "\n".join(f"{n} <- {_expr(rng, names, 3)}" for n in names)
        try:
            return text, peg.compile_grammar(text)
        except peg.LeftRecursionError:
            continue


def random_input(rng: random.Random) -> str:
    return "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, 10)))


def outcome(grammar: peg.Grammar, text: str, memoize: bool, stats: peg.MatchStats | None = None):
    try:
        return ("tree", peg.match(grammar, grammar.start, text, memoize=memoize, stats=stats).shape())
    except peg.NoMatch as exc:
        return ("fail", exc.position)
