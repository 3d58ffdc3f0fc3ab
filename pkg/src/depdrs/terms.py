"""Typed lambda terms over DRS values.

A term is built from lambda abstraction and application plus a small set
of box-building constructors: one-place predicates, binary roles,
conjunction (box merge), negation, presupposition, and referent
introduction.  Referents are first-class `drs.Variable` literals,
allocated fresh per template instantiation; lambda variables are named
and capture-avoiding.

Normalization reduces every beta redex and collapses saturated
constructors into `DrsConst` leaves (a DRS with "holes": free variables
standing for enclosing lambda parameters).  Because the types are
simple, reduction terminates; a step ceiling is enforced defensively.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

from . import drs as _d
from .semtypes import (
    Atom,
    E,
    Fn,
    S,
    SemType,
    T,
    TypeSyntaxError,
    compatible,
    format_type,
    matches,
    parse_type,
)


class TermError(Exception):
    pass


class TermTypeError(TermError):
    pass


class TermSyntaxError(TermError):
    pass


class ReductionLimitError(TermError):
    pass


# markers used inside lexicon templates; resolved at instantiation
LEMMA_MARKER = "«LEMMA»"
SENSE_MARKER = "«SENSE»"
ROLE_MARKER = "«ROLE:{}»"
_ROLE_MARKER_RE = re.compile(r"«ROLE:([a-z]+)»")


@dataclass(frozen=True)
class Var:
    name: str
    type: SemType


@dataclass(frozen=True)
class Lam:
    param: str
    param_type: SemType
    body: "Term"


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"


@dataclass(frozen=True)
class Ref:
    """A DRS referent literal used as an entity- or event-typed term."""

    var: _d.Variable


@dataclass(frozen=True)
class PredTerm:
    lemma: str
    sense: str
    arg: "Term"


@dataclass(frozen=True)
class RoleTerm:
    label: str
    first: "Term"
    second: "Term"


@dataclass(frozen=True)
class Conj:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Neg:
    inner: "Term"


@dataclass(frozen=True)
class Presup:
    asserting: "Term"
    presupposed: "Term"


@dataclass(frozen=True)
class Exists:
    """Introduce `ref` as a referent of the box denoted by `body`."""

    ref: _d.Variable
    body: "Term"


@dataclass(frozen=True)
class DrsConst:
    """A reduced DRS value.

    `holes` maps enclosing lambda parameter names to variables free in
    the embedded structure; every other free variable is a shared
    referent literal bound by the wider term context.
    """

    drs: _d.Drs
    holes: tuple[tuple[str, _d.Variable], ...] = ()

    def hole_map(self) -> dict[str, _d.Variable]:
        return dict(self.holes)


Term = Union[Var, Lam, App, Ref, PredTerm, RoleTerm, Conj, Neg, Presup, Exists, DrsConst]

_fresh_counter = itertools.count(1)


def fresh_var(sort: str) -> _d.Variable:
    """Globally fresh referent; uniqueness keeps independently instantiated
    templates from accidentally sharing referents before they combine."""
    return _d.Variable(sort, next(_fresh_counter))


def _sort_of_type(t: SemType) -> str:
    if isinstance(t, Atom) and t.kind == "e":
        return _d.ENTITY
    if t == S:
        return _d.EVENT
    raise TermTypeError(f"no referent sort for type {format_type(t)}")


def _holes(pairs: dict[str, _d.Variable]) -> tuple[tuple[str, _d.Variable], ...]:
    return tuple(sorted(pairs.items()))


# ---------------------------------------------------------------------------
# structural helpers


def _children(t: Term) -> tuple[Term, ...]:
    if isinstance(t, Lam):
        return (t.body,)
    if isinstance(t, App):
        return (t.fn, t.arg)
    if isinstance(t, PredTerm):
        return (t.arg,)
    if isinstance(t, RoleTerm):
        return (t.first, t.second)
    if isinstance(t, Conj):
        return (t.left, t.right)
    if isinstance(t, Neg):
        return (t.inner,)
    if isinstance(t, Presup):
        return (t.asserting, t.presupposed)
    if isinstance(t, Exists):
        return (t.body,)
    return ()


def free_names(t: Term) -> set[str]:
    """Names of free lambda variables, including DRS-constant holes."""
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Lam):
        return free_names(t.body) - {t.param}
    if isinstance(t, DrsConst):
        return {name for name, _ in t.holes}
    out: set[str] = set()
    for c in _children(t):
        out |= free_names(c)
    return out


def literal_vars(t: Term) -> list[_d.Variable]:
    """Referent literals in first-occurrence order: Ref leaves, Exists
    binders, and non-hole free variables of DRS constants."""
    seen: dict[_d.Variable, None] = {}

    def walk(t: Term) -> None:
        if isinstance(t, Ref):
            seen.setdefault(t.var)
        elif isinstance(t, Exists):
            seen.setdefault(t.ref)
            walk(t.body)
        elif isinstance(t, DrsConst):
            hole_vals = {v for _, v in t.holes}
            for v in _d.free_variables(t.drs):
                if v not in hole_vals:
                    seen.setdefault(v)
        else:
            for c in _children(t):
                walk(c)

    walk(t)
    return list(seen)


def rename_literals(t: Term, mapping: dict[_d.Variable, _d.Variable]) -> Term:
    if not mapping:
        return t
    if isinstance(t, Ref):
        return Ref(mapping.get(t.var, t.var))
    if isinstance(t, Exists):
        return Exists(mapping.get(t.ref, t.ref), rename_literals(t.body, mapping))
    if isinstance(t, DrsConst):
        holes = _holes({n: mapping.get(v, v) for n, v in t.holes})
        return DrsConst(_d.rename(t.drs, mapping), holes)
    if isinstance(t, Var):
        return t
    return _rebuild(t, [rename_literals(c, mapping) for c in _children(t)])


def _rebuild(t: Term, kids: list[Term]) -> Term:
    if isinstance(t, Lam):
        return Lam(t.param, t.param_type, kids[0])
    if isinstance(t, App):
        return App(kids[0], kids[1])
    if isinstance(t, PredTerm):
        return PredTerm(t.lemma, t.sense, kids[0])
    if isinstance(t, RoleTerm):
        return RoleTerm(t.label, kids[0], kids[1])
    if isinstance(t, Conj):
        return Conj(kids[0], kids[1])
    if isinstance(t, Neg):
        return Neg(kids[0])
    if isinstance(t, Presup):
        return Presup(kids[0], kids[1])
    if isinstance(t, Exists):
        return Exists(t.ref, kids[0])
    return t


def _rename_free_var(t: Term, old: str, new: str) -> Term:
    """Rename free occurrences of a lambda variable (hole keys included)."""
    if isinstance(t, Var):
        return Var(new, t.type) if t.name == old else t
    if isinstance(t, Lam):
        if t.param == old:
            return t
        return Lam(t.param, t.param_type, _rename_free_var(t.body, old, new))
    if isinstance(t, DrsConst):
        hm = t.hole_map()
        if old in hm:
            v = hm.pop(old)
            if new in hm:
                merged = _d.rename(t.drs, {v: hm[new]})
                return DrsConst(merged, _holes(hm))
            hm[new] = v
            return DrsConst(t.drs, _holes(hm))
        return t
    if isinstance(t, Ref):
        return t
    return _rebuild(t, [_rename_free_var(c, old, new) for c in _children(t)])


def _refresh_introduced(t: Term) -> Term:
    """Fresh copies of referents the term introduces itself.

    Used when substitution duplicates a value: each copy must introduce
    its own referents, while literals shared with the surrounding term
    stay shared.
    """
    intro: list[_d.Variable] = []

    def collect(t: Term) -> None:
        if isinstance(t, Exists):
            intro.append(t.ref)
        for c in _children(t):
            collect(c)

    collect(t)
    if not intro:
        return t
    return rename_literals(t, {v: fresh_var(v.sort) for v in intro})


# ---------------------------------------------------------------------------
# typing


def type_of(t: Term) -> SemType:
    """Bottom-up type, with subtype-aware application.

    Variables carry their binding type, so open terms type as well as
    closed ones.
    """
    if isinstance(t, Var):
        return t.type
    if isinstance(t, Ref):
        if t.var.sort == _d.ENTITY:
            return E
        if t.var.sort == _d.EVENT:
            return S
        raise TermTypeError(f"box variable {t.var} used as a term")
    if isinstance(t, Lam):
        return Fn(t.param_type, type_of(t.body))
    if isinstance(t, App):
        ft = type_of(t.fn)
        if not isinstance(ft, Fn):
            raise TermTypeError(
                f"cannot apply non-function {format_term(t.fn)} of type {format_type(ft)}"
            )
        at = type_of(t.arg)
        if not matches(at, ft.input):
            raise TermTypeError(
                f"cannot apply {format_term(t.fn)} of type {format_type(ft)} "
                f"to {format_term(t.arg)} of type {format_type(at)}"
            )
        return ft.output
    if isinstance(t, PredTerm):
        at = type_of(t.arg)
        if not (isinstance(at, Atom) and at.kind in ("e", "s")):
            raise TermTypeError(
                f"predicate argument {format_term(t.arg)} has type {format_type(at)}, "
                "expected an entity or event"
            )
        return T
    if isinstance(t, RoleTerm):
        for part in (t.first, t.second):
            pt = type_of(part)
            if not (isinstance(pt, Atom) and pt.kind in ("e", "s")):
                raise TermTypeError(
                    f"role argument {format_term(part)} has type {format_type(pt)}, "
                    "expected an entity or event"
                )
        return T
    if isinstance(t, (Conj, Presup)):
        for part in _children(t):
            pt = type_of(part)
            if pt != T:
                raise TermTypeError(
                    f"box operator over {format_term(part)} of type {format_type(pt)}"
                )
        return T
    if isinstance(t, Neg):
        if type_of(t.inner) != T:
            raise TermTypeError(f"negation over non-box {format_term(t.inner)}")
        return T
    if isinstance(t, Exists):
        if type_of(t.body) != T:
            raise TermTypeError(f"referent introduction over non-box {format_term(t.body)}")
        return T
    if isinstance(t, DrsConst):
        return T
    raise TermTypeError(f"unknown term {t!r}")


# ---------------------------------------------------------------------------
# substitution and reduction


def substitute(t: Term, name: str, value: Term) -> Term:
    """Capture-avoiding substitution of `value` for free `name` in `t`.

    The value's type must be compatible (equal up to entity-tag
    refinement, in either direction) with each occurrence's declared
    type.  If substitution duplicates the value, later copies re-allocate
    the referents the value introduces.
    """
    vt = type_of(value)
    vfree = free_names(value)
    uses = [0]

    def copy_of_value() -> Term:
        uses[0] += 1
        return value if uses[0] == 1 else _refresh_introduced(value)

    def sub(t: Term) -> Term:
        if isinstance(t, Var):
            if t.name != name:
                return t
            if not compatible(vt, t.type):
                raise TermTypeError(
                    f"substituting {format_term(value)} of type {format_type(vt)} "
                    f"for {name} of type {format_type(t.type)}"
                )
            return copy_of_value()
        if isinstance(t, Lam):
            if t.param == name:
                return t
            if t.param in vfree:
                fresh = _fresh_name(t.param, vfree | free_names(t.body))
                body = _rename_free_var(t.body, t.param, fresh)
                return Lam(fresh, t.param_type, sub(body))
            return Lam(t.param, t.param_type, sub(t.body))
        if isinstance(t, DrsConst):
            hm = t.hole_map()
            if name not in hm:
                return t
            hv = hm.pop(name)
            if isinstance(value, Var):
                if not compatible(vt, E if hv.sort == _d.ENTITY else S):
                    raise TermTypeError(
                        f"cannot bind {format_term(value)} of type {format_type(vt)} "
                        f"into a {hv.sort}-sorted slot"
                    )
                if value.name in hm:
                    return DrsConst(_d.rename(t.drs, {hv: hm[value.name]}), _holes(hm))
                hm[value.name] = hv
                return DrsConst(t.drs, _holes(hm))
            if isinstance(value, Ref):
                return DrsConst(_d.rename(t.drs, {hv: value.var}), _holes(hm))
            raise TermTypeError(
                f"cannot bind non-atomic value {format_term(value)} into a box slot"
            )
        if isinstance(t, Ref):
            return t
        return _rebuild(t, [sub(c) for c in _children(t)])

    return sub(t)


def _fresh_name(base: str, taken: set[str]) -> str:
    i = 1
    while f"{base}_{i}" in taken:
        i += 1
    return f"{base}_{i}"


def _collapse_arg(arg: Term, holes: dict[str, _d.Variable]) -> Optional[_d.Variable]:
    """Variable for an atomic argument, extending `holes` for lambda vars."""
    if isinstance(arg, Ref):
        return arg.var
    if isinstance(arg, Var):
        if arg.name in holes:
            return holes[arg.name]
        at = type_of(arg)
        holes[arg.name] = fresh_var(_sort_of_type(at))
        return holes[arg.name]
    return None


def _fresh_box() -> _d.Variable:
    return fresh_var(_d.BOX)


def _conj_dc(a: DrsConst, b: DrsConst) -> DrsConst:
    am, bm = a.hole_map(), b.hole_map()
    unify = {bm[n]: am[n] for n in am.keys() & bm.keys() if bm[n] != am[n]}
    bdrs = _d.rename(b.drs, unify)
    merged = _d.merge(a.drs, bdrs)
    holes = dict(am)
    for n, v in bm.items():
        holes.setdefault(n, am.get(n, v))
    return DrsConst(merged, _holes(holes))


def _neg_dc(a: DrsConst) -> DrsConst:
    nb = _fresh_box()
    wrapper = _d.Box(nb, (), (_d.Not(a.drs.main),))
    return DrsConst(
        _d.Drs(boxes=a.drs.boxes + (wrapper,), main=nb, links=a.drs.links), a.holes
    )


def _presup_dc(a: DrsConst, b: DrsConst) -> DrsConst:
    am, bm = a.hole_map(), b.hole_map()
    unify = {bm[n]: am[n] for n in am.keys() & bm.keys() if bm[n] != am[n]}
    bdrs = _d.rename(b.drs, unify)
    adrs, bdrs = _d.adjoin(a.drs, bdrs)
    links = adrs.links + bdrs.links + ((_d.PRESUPPOSITION, adrs.main, bdrs.main),)
    holes = dict(am)
    for n, v in bm.items():
        holes.setdefault(n, am.get(n, v))
    return DrsConst(
        _d.Drs(boxes=adrs.boxes + bdrs.boxes, main=adrs.main, links=links), _holes(holes)
    )


def _intro_dc(ref: _d.Variable, a: DrsConst) -> DrsConst:
    if ref in _d.bound_variables(a.drs):
        raise TermError(f"referent {ref} introduced twice")
    boxes = tuple(
        _d.Box(b.id, b.referents + (ref,), b.conditions) if b.id == a.drs.main else b
        for b in a.drs.boxes
    )
    return DrsConst(_d.Drs(boxes=boxes, main=a.drs.main, links=a.drs.links), a.holes)


def beta_reduce(t: Term, max_steps: int = 200_000) -> Term:
    """Normal form: no redex remains and saturated box constructors are
    collapsed into DRS constants."""
    budget = [max_steps]

    def norm(t: Term) -> Term:
        budget[0] -= 1
        if budget[0] < 0:
            raise ReductionLimitError("reduction step ceiling exceeded")
        if isinstance(t, (Var, Ref, DrsConst)):
            return t
        if isinstance(t, Lam):
            return Lam(t.param, t.param_type, norm(t.body))
        if isinstance(t, App):
            fn = norm(t.fn)
            arg = norm(t.arg)
            if isinstance(fn, Lam):
                return norm(substitute(fn.body, fn.param, arg))
            return App(fn, arg)
        if isinstance(t, PredTerm):
            arg = norm(t.arg)
            holes: dict[str, _d.Variable] = {}
            v = _collapse_arg(arg, holes)
            if v is None:
                return PredTerm(t.lemma, t.sense, arg)
            box = _d.Box(_fresh_box(), (), (_d.Pred(t.lemma, t.sense, v),))
            return DrsConst(_d.Drs(boxes=(box,), main=box.id), _holes(holes))
        if isinstance(t, RoleTerm):
            first = norm(t.first)
            second = norm(t.second)
            holes = {}
            v1 = _collapse_arg(first, holes)
            v2 = _collapse_arg(second, holes)
            if v1 is None or v2 is None:
                return RoleTerm(t.label, first, second)
            box = _d.Box(_fresh_box(), (), (_d.Role(t.label, v1, v2),))
            return DrsConst(_d.Drs(boxes=(box,), main=box.id), _holes(holes))
        if isinstance(t, Conj):
            left = norm(t.left)
            right = norm(t.right)
            if isinstance(left, DrsConst) and isinstance(right, DrsConst):
                return _conj_dc(left, right)
            return Conj(left, right)
        if isinstance(t, Neg):
            inner = norm(t.inner)
            if isinstance(inner, DrsConst):
                return _neg_dc(inner)
            return Neg(inner)
        if isinstance(t, Presup):
            asserting = norm(t.asserting)
            presupposed = norm(t.presupposed)
            if isinstance(asserting, DrsConst) and isinstance(presupposed, DrsConst):
                return _presup_dc(asserting, presupposed)
            return Presup(asserting, presupposed)
        if isinstance(t, Exists):
            body = norm(t.body)
            if isinstance(body, DrsConst):
                return _intro_dc(t.ref, body)
            return Exists(t.ref, body)
        raise TermError(f"unknown term {t!r}")

    return norm(t)


def reduce_to_drs(t: Term, max_steps: int = 200_000) -> _d.Drs:
    """Normalize a closed box-typed term all the way to a DRS."""
    nf = beta_reduce(t, max_steps)
    if isinstance(nf, DrsConst) and not nf.holes:
        return nf.drs
    raise TermError(f"term did not reduce to a closed DRS: {format_term(nf)}")


# ---------------------------------------------------------------------------
# canonical keys (alpha-equivalence up to referent identity)


def canonical_key(t: Term) -> str:
    """Serialization invariant under renaming of lambda variables and
    referent literals; used for deduplication and stable ordering.

    Lambda binders serialize by de Bruijn level and constant holes by the
    binder they point at.  Shared referent literals are numbered by the
    lexicographically best assignment over per-sort permutations (the
    count is tiny in practice; a deterministic fallback applies past 6).
    """
    lits = literal_vars(t)
    by_sort: dict[str, list[_d.Variable]] = {}
    for v in lits:
        by_sort.setdefault(v.sort, []).append(v)
    groups = sorted(by_sort.items())

    def litmap_for(ordered_groups) -> dict[_d.Variable, str]:
        mapping: dict[_d.Variable, str] = {}
        for vs in ordered_groups:
            for i, v in enumerate(vs):
                mapping[v] = f"g{v.sort}{i}"
        return mapping

    n_perms = 1
    for _, vs in groups:
        for k in range(2, len(vs) + 1):
            n_perms *= k
    if not lits or n_perms == 1:
        return _serialize(t, litmap_for([vs for _, vs in groups]))
    if n_perms > 720:
        # deterministic but not fully renaming-invariant; unreachable for
        # lexicon-derived terms, which keep at most a few shared referents
        ordered = [sorted(vs) for _, vs in groups]
        return _serialize(t, litmap_for(ordered))
    best = None
    for perm_set in itertools.product(
        *(itertools.permutations(vs) for _, vs in groups)
    ):
        mapping: dict[_d.Variable, str] = {}
        for vs in perm_set:
            for i, v in enumerate(vs):
                mapping[v] = f"g{v.sort}{i}"
        s = _serialize(t, mapping)
        if best is None or s < best:
            best = s
    return best


def _serialize(t: Term, litmap: dict[_d.Variable, str]) -> str:
    def ser(t: Term, depth: int, env: dict[str, int]) -> str:
        if isinstance(t, Var):
            if t.name in env:
                return f"v{env[t.name]}"
            return f"free:{t.name}:{format_type(t.type)}"
        if isinstance(t, Lam):
            env2 = dict(env)
            env2[t.param] = depth
            return f"(L {format_type(t.param_type)} {ser(t.body, depth + 1, env2)})"
        if isinstance(t, App):
            return f"(A {ser(t.fn, depth, env)} {ser(t.arg, depth, env)})"
        if isinstance(t, Ref):
            return litmap.get(t.var, str(t.var))
        if isinstance(t, PredTerm):
            return f"(P {t.lemma} {t.sense} {ser(t.arg, depth, env)})"
        if isinstance(t, RoleTerm):
            return (
                f"(R {t.label} {ser(t.first, depth, env)} {ser(t.second, depth, env)})"
            )
        if isinstance(t, Conj):
            return f"(& {ser(t.left, depth, env)} {ser(t.right, depth, env)})"
        if isinstance(t, Neg):
            return f"(! {ser(t.inner, depth, env)})"
        if isinstance(t, Presup):
            return f"(PS {ser(t.asserting, depth, env)} {ser(t.presupposed, depth, env)})"
        if isinstance(t, Exists):
            tok = litmap.get(t.ref, str(t.ref))
            return f"(E {tok} {ser(t.body, depth, env)})"
        if isinstance(t, DrsConst):
            return _serialize_const(t, env, litmap)
        raise TermError(f"unknown term {t!r}")

    return ser(t, 0, {})


def _serialize_const(
    t: DrsConst, env: dict[str, int], litmap: dict[_d.Variable, str]
) -> str:
    pin_tokens: dict[_d.Variable, str] = {}
    for name, v in t.holes:
        pin_tokens[v] = f"h{env[name]}" if name in env else f"h:{name}"
    hole_vals = {v for _, v in t.holes}
    for v in _d.free_variables(t.drs):
        if v not in hole_vals:
            pin_tokens.setdefault(v, litmap.get(v, str(v)))
    pinned = tuple(sorted(pin_tokens, key=lambda v: pin_tokens[v]))
    canon, mapping = _d.canonicalize(t.drs, pinned)
    rendered: dict[_d.Variable, str] = {}
    for old, tok in pin_tokens.items():
        rendered[mapping[old]] = tok
    lines = []
    for clause in _d.to_clauses(canon).clauses:
        fields = []
        for field in clause:
            m = _d._VAR_TOKEN.match(field)
            if m:
                v = _d.Variable(m.group(1), int(m.group(2)))
                fields.append(rendered.get(v, field))
            else:
                fields.append(field)
        lines.append(" ".join(fields))
    return "(D main=" + str(mapping[t.drs.main]) + " | " + " ; ".join(lines) + ")"


def alpha_equal(a: Term, b: Term) -> bool:
    return canonical_key(a) == canonical_key(b)


# ---------------------------------------------------------------------------
# textual notation (used by lexicon files and diagnostics)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")


def _term_tokens(text: str) -> Iterator[tuple[str, str]]:
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "\\.()[]:@,":
            yield ch, ch
            i += 1
            continue
        m = _IDENT.match(text, i)
        if not m:
            raise TermSyntaxError(f"unexpected character {ch!r} at {i} in {text!r}")
        yield "ident", m.group()
        i = m.end()
    yield "eof", ""


@dataclass
class _OpTok:
    name: str  # AND | NOT | PRESUP | LEMMA | role slot


class _TermParser:
    """Recursive-descent parser for the lexicon term notation.

    Grammar (application is juxtaposition, left-associative)::

        term  := '\\' NAME ':' TYPE '.' term
               | 'EXISTS' '@' NAME ':' ('e'|'s') '.' term
               | atom+
        atom  := '(' term ')' | '@' NAME | 'AND' | 'NOT' | 'PRESUP'
               | 'LEMMA' | 'ROLE' '[' SLOT ']' | NAME
    """

    def __init__(self, text: str):
        self.text = text
        self.tokens = list(_term_tokens(text))
        self.pos = 0
        self.ref_sorts: dict[str, str] = {}
        self.refs: dict[str, _d.Variable] = {}
        self._scan_ref_declarations()

    def _scan_ref_declarations(self) -> None:
        toks = self.tokens
        for i, (kind, val) in enumerate(toks):
            if kind == "ident" and val == "EXISTS":
                if (
                    i + 4 < len(toks)
                    and toks[i + 1][0] == "@"
                    and toks[i + 2][0] == "ident"
                    and toks[i + 3][0] == ":"
                    and toks[i + 4][0] == "ident"
                ):
                    name, sort = toks[i + 2][1], toks[i + 4][1]
                    if sort not in ("e", "s"):
                        raise TermSyntaxError(
                            f"referent {name!r} declared with sort {sort!r}; use e or s"
                        )
                    if name in self.ref_sorts:
                        raise TermSyntaxError(f"referent @{name} introduced twice")
                    self.ref_sorts[name] = _d.ENTITY if sort == "e" else _d.EVENT

    def peek(self) -> tuple[str, str]:
        return self.tokens[self.pos]

    def take(self, kind: str) -> str:
        k, v = self.tokens[self.pos]
        if k != kind:
            raise TermSyntaxError(f"expected {kind!r}, found {v!r} in {self.text!r}")
        self.pos += 1
        return v

    def parse(self) -> Term:
        t = self.term({})
        if self.peek()[0] != "eof":
            raise TermSyntaxError(f"trailing input after term in {self.text!r}")
        return t

    def _ref(self, name: str) -> Ref:
        if name not in self.ref_sorts:
            raise TermSyntaxError(f"referent @{name} is never introduced by EXISTS")
        if name not in self.refs:
            self.refs[name] = fresh_var(self.ref_sorts[name])
        return Ref(self.refs[name])

    def term(self, env: dict[str, SemType]) -> Term:
        kind, val = self.peek()
        if kind == "\\":
            self.take("\\")
            name = self.take("ident")
            self.take(":")
            ptype = self._type()
            self.take(".")
            env2 = dict(env)
            env2[name] = ptype
            return Lam(name, ptype, self.term(env2))
        if kind == "ident" and val == "EXISTS":
            self.take("ident")
            self.take("@")
            name = self.take("ident")
            self.take(":")
            self.take("ident")  # sort, already recorded
            self.take(".")
            return Exists(self._ref(name).var, self.term(env))
        parts = [self.atom(env)]
        while self.peek()[0] in ("(", "@") or (
            self.peek()[0] == "ident" and self.peek()[1] != "EXISTS"
        ):
            parts.append(self.atom(env))
        return self._fold(parts)

    def _type(self) -> SemType:
        # a type is a single parenthesized token run or one atom
        kind, val = self.peek()
        if kind == "(":
            depth = 0
            out = []
            while True:
                k, v = self.peek()
                if k == "eof":
                    raise TermSyntaxError(f"unterminated type in {self.text!r}")
                out.append(v)
                self.pos += 1
                if k == "(":
                    depth += 1
                elif k == ")":
                    depth -= 1
                    if depth == 0:
                        break
            return parse_type("".join(out))
        if kind == "ident":
            self.pos += 1
            try:
                return parse_type(val)
            except TypeSyntaxError as exc:
                raise TermSyntaxError(str(exc)) from exc
        raise TermSyntaxError(f"expected a type, found {val!r} in {self.text!r}")

    def atom(self, env: dict[str, SemType]) -> Term:
        kind, val = self.peek()
        if kind == "(":
            self.take("(")
            t = self.term(env)
            self.take(")")
            return t
        if kind == "@":
            self.take("@")
            return self._ref(self.take("ident"))
        if kind == "ident":
            self.take("ident")
            if val in ("AND", "NOT", "PRESUP", "LEMMA"):
                return _OpTok(val)  # type: ignore[return-value]
            if val == "ROLE":
                self.take("[")
                slot = self.take("ident")
                self.take("]")
                return _OpTok(f"ROLE:{slot}")  # type: ignore[return-value]
            if val not in env:
                raise TermSyntaxError(f"unbound variable {val!r} in {self.text!r}")
            return Var(val, env[val])
        raise TermSyntaxError(f"unexpected {val!r} in {self.text!r}")

    def _fold(self, parts: list) -> Term:
        head, args = parts[0], parts[1:]
        if isinstance(head, _OpTok):
            return self._operator(head.name, args)
        t = head
        for a in args:
            if isinstance(a, _OpTok):
                raise TermSyntaxError(f"operator {a.name} used as an argument")
            t = App(t, a)
        return t

    def _operator(self, name: str, args: list) -> Term:
        for a in args:
            if isinstance(a, _OpTok):
                raise TermSyntaxError(f"operator {a.name} used as an argument")
        if name == "AND":
            if len(args) != 2:
                raise TermSyntaxError("AND takes exactly two arguments")
            return Conj(args[0], args[1])
        if name == "NOT":
            if len(args) != 1:
                raise TermSyntaxError("NOT takes exactly one argument")
            return Neg(args[0])
        if name == "PRESUP":
            if len(args) != 2:
                raise TermSyntaxError("PRESUP takes exactly two arguments")
            return Presup(args[0], args[1])
        if name == "LEMMA":
            if len(args) == 1:
                return PredTerm(LEMMA_MARKER, SENSE_MARKER, args[0])
            if len(args) == 2:
                return RoleTerm(LEMMA_MARKER, args[0], args[1])
            raise TermSyntaxError("LEMMA takes one argument (predicate) or two (role)")
        if name.startswith("ROLE:"):
            if len(args) != 2:
                raise TermSyntaxError("ROLE[..] takes exactly two arguments")
            return RoleTerm(ROLE_MARKER.format(name[5:]), args[0], args[1])
        raise TermSyntaxError(f"unknown operator {name}")


def parse_term(text: str) -> Term:
    return _TermParser(text).parse()


def role_marker_slot(label: str) -> Optional[str]:
    m = _ROLE_MARKER_RE.fullmatch(label)
    return m.group(1) if m else None


def format_term(t: Term) -> str:
    """Readable rendering in the input notation (for diagnostics)."""
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Lam):
        return f"\\{t.param}:{format_type(t.param_type)}. {format_term(t.body)}"
    if isinstance(t, App):
        fn = format_term(t.fn)
        if isinstance(t.fn, Lam):
            fn = f"({fn})"
        arg = format_term(t.arg)
        if not isinstance(t.arg, (Var, Ref)):
            arg = f"({arg})"
        return f"{fn} {arg}"
    if isinstance(t, Ref):
        return f"@{t.var}"
    if isinstance(t, PredTerm):
        return f"{t.lemma}({format_term(t.arg)})"
    if isinstance(t, RoleTerm):
        return f"{t.label}({format_term(t.first)}, {format_term(t.second)})"
    if isinstance(t, Conj):
        return f"AND ({format_term(t.left)}) ({format_term(t.right)})"
    if isinstance(t, Neg):
        return f"NOT ({format_term(t.inner)})"
    if isinstance(t, Presup):
        return f"PRESUP ({format_term(t.asserting)}) ({format_term(t.presupposed)})"
    if isinstance(t, Exists):
        sort = "e" if t.ref.sort == _d.ENTITY else "s"
        return f"EXISTS @{t.ref}:{sort}. {format_term(t.body)}"
    if isinstance(t, DrsConst):
        clauses = "; ".join(" ".join(c) for c in _d.to_clauses(t.drs).clauses)
        holes = ", ".join(f"{n}->{v}" for n, v in t.holes)
        return f"DRS[{clauses} | holes: {holes}]"
    return repr(t)
