"""Semantic type algebra.

Types are either atoms (entity, event, or box-valued) or function types
built as ordered pairs.  Entity atoms may carry a syntactic tag (``sj``,
``oj``, ``io``) naming the grammatical slot that can saturate them; a
tagged entity satisfies a requirement for a bare entity, never the
reverse.  That single asymmetric rule is what rules composition orders
in or out.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union


class TypeSyntaxError(ValueError):
    """A type expression could not be parsed."""


_TAGS = ("sj", "oj", "io")


@dataclass(frozen=True)
class Atom:
    kind: str  # "e" | "s" | "t"
    tag: Optional[str] = None  # only on "e"

    def __post_init__(self) -> None:
        if self.kind not in ("e", "s", "t"):
            raise ValueError(f"unknown atom kind {self.kind!r}")
        if self.tag is not None and (self.kind != "e" or self.tag not in _TAGS):
            raise ValueError(f"invalid tag {self.tag!r} on atom {self.kind!r}")


@dataclass(frozen=True)
class Fn:
    input: "SemType"
    output: "SemType"


SemType = Union[Atom, Fn]

E = Atom("e")
S = Atom("s")
T = Atom("t")
E_SJ = Atom("e", "sj")
E_OJ = Atom("e", "oj")
E_IO = Atom("e", "io")

# "e_ob" is accepted as an alternate spelling of the object tag.
_ATOMS = {"e": E, "s": S, "t": T, "e_sj": E_SJ, "e_oj": E_OJ, "e_ob": E_OJ, "e_io": E_IO}

_TOKEN = re.compile(r"e_sj|e_oj|e_ob|e_io|[est()]")


def _tokenize(text: str) -> list[str]:
    tokens = []
    i = 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(text, i)
        if not m:
            raise TypeSyntaxError(f"unexpected character {text[i]!r} at position {i} in {text!r}")
        tokens.append(m.group())
        i = m.end()
    return tokens


def parse_type(text: str) -> SemType:
    """Parse the parenthesized pair notation, e.g. ``((et)((et)t))``."""
    tokens = _tokenize(text)
    pos = 0

    def parse_one() -> SemType:
        nonlocal pos
        if pos >= len(tokens):
            raise TypeSyntaxError(f"unexpected end of type in {text!r}")
        tok = tokens[pos]
        pos += 1
        if tok in _ATOMS:
            return _ATOMS[tok]
        if tok == "(":
            left = parse_one()
            right = parse_one()
            if pos >= len(tokens) or tokens[pos] != ")":
                raise TypeSyntaxError(f"pair with more or fewer than two members in {text!r}")
            pos += 1
            return Fn(left, right)
        raise TypeSyntaxError(f"unexpected {tok!r} in {text!r}")

    result = parse_one()
    if pos != len(tokens):
        raise TypeSyntaxError(f"trailing tokens after type in {text!r}")
    return result


def format_type(t: SemType) -> str:
    if isinstance(t, Atom):
        return t.kind if t.tag is None else f"{t.kind}_{t.tag}"
    return f"({format_type(t.input)}{format_type(t.output)})"


def matches(provided: SemType, required: SemType) -> bool:
    """True when `provided` can stand wherever `required` is demanded.

    Comparison is structural; at each atomic position the atoms must be
    equal, or the required atom is a bare entity and the provided one a
    tagged entity.  The relation is unidirectional.
    """
    if isinstance(provided, Atom) and isinstance(required, Atom):
        if provided == required:
            return True
        return required == E and provided.kind == "e" and provided.tag is not None
    if isinstance(provided, Fn) and isinstance(required, Fn):
        return matches(provided.input, required.input) and matches(provided.output, required.output)
    return False


def compatible(a: SemType, b: SemType) -> bool:
    """Symmetric variant of `matches`: equal up to entity-tag refinement."""
    return matches(a, b) or matches(b, a)


def apply_type(func: SemType, arg: SemType) -> Optional[SemType]:
    """Result type of applying `func` to `arg`, or None when illegal.

    This is the one rule that rejects impossible composition orders: a
    function type accepts an argument only under `matches`, and the
    output type is returned unchanged.
    """
    if isinstance(func, Fn) and matches(arg, func.input):
        return func.output
    return None
