"""Discourse representation structures.

A `Drs` is a set of boxes (referents plus conditions) with one main box,
negation conditions pointing at sub-boxes, and labelled box-to-box links
(presupposition and discourse relations).  The module also owns the flat
clause serialization used for interchange and scoring, plus merging and
alpha-normalization.

Alpha-normalization does more than renumber: it reorders boxes and
conditions canonically (variable-colour refinement with stable
tie-breaks), so two structures are alpha-equivalent exactly when their
normal forms are structurally equal.  Condition order inside a box is
otherwise preserved from construction and carries no meaning.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

BOX = "b"
ENTITY = "x"
EVENT = "e"

PRESUPPOSITION = "PRESUPPOSITION"


class DrsError(ValueError):
    """A structure violates a DRS invariant."""


@dataclass(frozen=True, order=True)
class Variable:
    sort: str  # "b" | "x" | "e"
    index: int

    def __str__(self) -> str:
        return f"{self.sort}{self.index}"


@dataclass(frozen=True)
class Pred:
    lemma: str
    sense: str
    arg: Variable


@dataclass(frozen=True)
class Role:
    label: str
    first: Variable
    second: Variable


@dataclass(frozen=True)
class Not:
    box: Variable


Condition = Union[Pred, Role, Not]


@dataclass(frozen=True)
class Box:
    id: Variable
    referents: tuple[Variable, ...] = ()
    conditions: tuple[Condition, ...] = ()


@dataclass(frozen=True)
class Drs:
    boxes: tuple[Box, ...]
    main: Variable
    links: tuple[tuple[str, Variable, Variable], ...] = ()


def empty_drs() -> Drs:
    box = Box(Variable(BOX, 1))
    return Drs(boxes=(box,), main=box.id)


def _condition_vars(c: Condition) -> tuple[Variable, ...]:
    if isinstance(c, Pred):
        return (c.arg,)
    if isinstance(c, Role):
        return (c.first, c.second)
    return (c.box,)


def variables(d: Drs) -> list[Variable]:
    """All variables in order of first occurrence (box ids included)."""
    seen: dict[Variable, None] = {}
    for box in d.boxes:
        seen.setdefault(box.id)
        for r in box.referents:
            seen.setdefault(r)
        for c in box.conditions:
            for v in _condition_vars(c):
                seen.setdefault(v)
    for _, f, t in d.links:
        seen.setdefault(f)
        seen.setdefault(t)
    return list(seen)


def bound_variables(d: Drs) -> set[Variable]:
    """Box ids plus every referent declared by some box."""
    out: set[Variable] = set()
    for box in d.boxes:
        out.add(box.id)
        out.update(box.referents)
    return out


def free_variables(d: Drs) -> list[Variable]:
    bound = bound_variables(d)
    return [v for v in variables(d) if v not in bound]


def rename(d: Drs, mapping: dict[Variable, Variable]) -> Drs:
    if not mapping:
        return d

    def m(v: Variable) -> Variable:
        return mapping.get(v, v)

    def mc(c: Condition) -> Condition:
        if isinstance(c, Pred):
            return Pred(c.lemma, c.sense, m(c.arg))
        if isinstance(c, Role):
            return Role(c.label, m(c.first), m(c.second))
        return Not(m(c.box))

    boxes = tuple(
        Box(m(b.id), tuple(m(r) for r in b.referents), tuple(mc(c) for c in b.conditions))
        for b in d.boxes
    )
    links = tuple((lab, m(f), m(t)) for lab, f, t in d.links)
    return Drs(boxes=boxes, main=m(d.main), links=links)


def validate(d: Drs) -> None:
    """Raise DrsError naming the violated invariant."""
    ids = [b.id for b in d.boxes]
    if len(set(ids)) != len(ids):
        raise DrsError("duplicate box ids")
    idset = set(ids)
    if d.main not in idset:
        raise DrsError("main box missing from box set")
    for b in d.boxes:
        if b.id.sort != BOX:
            raise DrsError(f"box id {b.id} is not box-sorted")
        for r in b.referents:
            if r.sort == BOX:
                raise DrsError(f"box variable {r} declared as a referent")
        for c in b.conditions:
            if isinstance(c, Pred) and c.arg.sort not in (ENTITY, EVENT):
                raise DrsError(f"predicate argument {c.arg} is not an entity or event")
            if isinstance(c, Not) and c.box not in idset:
                raise DrsError(f"negation targets unknown box {c.box}")
    for lab, f, t in d.links:
        if f not in idset or t not in idset:
            raise DrsError(f"link {lab} endpoint missing from box set")
    # acyclicity over negation edges and links
    edges: dict[Variable, list[Variable]] = {i: [] for i in idset}
    for b in d.boxes:
        for c in b.conditions:
            if isinstance(c, Not):
                edges[b.id].append(c.box)
    for _, f, t in d.links:
        edges[f].append(t)
    state: dict[Variable, int] = {}

    def visit(n: Variable) -> None:
        state[n] = 1
        for nxt in edges[n]:
            if state.get(nxt) == 1:
                raise DrsError("box reference graph contains a cycle")
            if nxt not in state:
                visit(nxt)
        state[n] = 2

    for n in idset:
        if n not in state:
            visit(n)


def _next_indices(ds: Iterable[Drs]) -> dict[str, int]:
    top = {BOX: 0, ENTITY: 0, EVENT: 0}
    for d in ds:
        for v in variables(d):
            top[v.sort] = max(top.get(v.sort, 0), v.index)
    return top


def _avoid(b: Drs, taken: set[Variable], ds: Iterable[Drs]) -> Drs:
    """Rename b's bound variables that collide with `taken`.

    Free variables are left untouched: a free variable is bound by the
    surrounding term context, and identical free variables on both sides
    of a merge denote a deliberately shared referent.
    """
    nxt = _next_indices(ds)
    ren: dict[Variable, Variable] = {}
    for v in bound_variables(b):
        if v in taken:
            nxt[v.sort] += 1
            ren[v] = Variable(v.sort, nxt[v.sort])
    return rename(b, ren)


def merge(a: Drs, b: Drs) -> Drs:
    """Fuse b into a's main box.

    b's bound variables are renamed away from a's inventory; b's main-box
    referents and conditions are appended to a's main box, and b's other
    boxes and links are carried over with endpoints retargeted.
    """
    b = _avoid(b, set(variables(a)), (a, b))
    retarget = {b.main: a.main}
    b = rename(b, retarget)
    bmain = next(x for x in b.boxes if x.id == a.main)
    boxes = []
    for box in a.boxes:
        if box.id == a.main:
            boxes.append(
                Box(box.id, box.referents + bmain.referents, box.conditions + bmain.conditions)
            )
        else:
            boxes.append(box)
    boxes.extend(box for box in b.boxes if box.id != a.main)
    return Drs(boxes=tuple(boxes), main=a.main, links=a.links + b.links)


def adjoin(a: Drs, b: Drs) -> tuple[Drs, Drs]:
    """Make b's bound variables disjoint from a without fusing anything."""
    return a, _avoid(b, set(variables(a)), (a, b))


# ---------------------------------------------------------------------------
# canonicalization


def _cond_sig(c: Condition, colour: dict[Variable, int]) -> tuple:
    if isinstance(c, Pred):
        return (0, c.lemma, c.sense, colour[c.arg])
    if isinstance(c, Role):
        return (1, c.label, colour[c.first], colour[c.second])
    return (2, colour[c.box])


def _refine(d: Drs, pinned: tuple[Variable, ...]) -> dict[Variable, int]:
    """Colour refinement over variables (box ids included).

    Pinned variables seed distinct colours in their given order, so a
    caller can make externally-shared variables canonical.
    """
    allvars = variables(d)
    pin_rank = {v: i for i, v in enumerate(pinned)}
    sig0 = {
        v: (v.sort, pin_rank.get(v, -1), v == d.main)
        for v in allvars
    }
    colour = _compress(sig0)
    for _ in range(len(allvars) + 2):
        occ: dict[Variable, list] = {v: [] for v in allvars}
        for b in d.boxes:
            bcol = colour[b.id]
            for r in b.referents:
                occ[r].append((0, bcol))
            box_sig = []
            for c in b.conditions:
                s = _cond_sig(c, colour)
                box_sig.append(s)
                for pos, v in enumerate(_condition_vars(c)):
                    occ[v].append((1, bcol, s, pos))
            occ[b.id].append((2, tuple(sorted(box_sig)), tuple(sorted(colour[r] for r in b.referents))))
        for lab, f, t in d.links:
            occ[f].append((3, lab, colour[t]))
            occ[t].append((4, lab, colour[f]))
        sigs = {v: (colour[v], tuple(sorted(occ[v]))) for v in allvars}
        new = _compress(sigs)
        if len(set(new.values())) == len(set(colour.values())):
            colour = new
            break
        colour = new
    return colour


def _compress(sigs: dict[Variable, tuple]) -> dict[Variable, int]:
    ranked = {s: i for i, s in enumerate(sorted(set(sigs.values())))}
    return {v: ranked[s] for v, s in sigs.items()}


def canonicalize(d: Drs, pinned: tuple[Variable, ...] = ()) -> tuple[Drs, dict[Variable, Variable]]:
    """Canonical form of d plus the variable mapping applied.

    Pinned variables (externally bound; typically free in d) are numbered
    first, in the order given, and must not be renumbered relative to each
    other.  Everything else — box order, condition order within each box,
    link order, variable numbering — is derived from structure alone.
    """
    colour = _refine(d, pinned)
    orig_box_pos = {b.id: i for i, b in enumerate(d.boxes)}
    rest = sorted(
        (b for b in d.boxes if b.id != d.main),
        key=lambda b: (colour[b.id], orig_box_pos[b.id]),
    )
    box_order = [next(b for b in d.boxes if b.id == d.main)] + rest

    ordered_boxes = []
    for b in box_order:
        refs = sorted(b.referents, key=lambda r: (colour[r], b.referents.index(r)))
        conds = sorted(
            b.conditions,
            key=lambda c: (_cond_sig(c, colour), b.conditions.index(c)),
        )
        ordered_boxes.append(Box(b.id, tuple(refs), tuple(conds)))

    counters = {BOX: 0, ENTITY: 0, EVENT: 0}
    mapping: dict[Variable, Variable] = {}

    def number(v: Variable) -> None:
        if v not in mapping:
            counters[v.sort] = counters.get(v.sort, 0) + 1
            mapping[v] = Variable(v.sort, counters[v.sort])

    for v in pinned:
        number(v)
    for b in ordered_boxes:
        number(b.id)
    for b in ordered_boxes:
        for r in b.referents:
            number(r)
        for c in b.conditions:
            for v in _condition_vars(c):
                number(v)
    for _, f, t in d.links:
        number(f)
        number(t)

    new_boxes = []
    for b in ordered_boxes:
        refs = tuple(sorted((mapping[r] for r in b.referents), key=lambda v: v.index))
        conds = []
        for c in b.conditions:
            if isinstance(c, Pred):
                conds.append(Pred(c.lemma, c.sense, mapping[c.arg]))
            elif isinstance(c, Role):
                conds.append(Role(c.label, mapping[c.first], mapping[c.second]))
            else:
                conds.append(Not(mapping[c.box]))
        new_boxes.append(Box(mapping[b.id], refs, tuple(conds)))
    links = tuple(
        sorted(
            ((lab, mapping[f], mapping[t]) for lab, f, t in d.links),
            key=lambda l: (l[0], l[1], l[2]),
        )
    )
    return Drs(boxes=tuple(new_boxes), main=mapping[d.main], links=links), mapping


def alpha_normalize(d: Drs) -> Drs:
    """Deterministic renumbering: main box first, canonical order inside."""
    return canonicalize(d)[0]


def alpha_equivalent(a: Drs, b: Drs) -> bool:
    return alpha_normalize(a) == alpha_normalize(b)


# ---------------------------------------------------------------------------
# clause format

_VAR_TOKEN = re.compile(r"^([a-z])(\d+)$")


@dataclass(frozen=True)
class ClauseSet:
    """Flat clause representation: one tuple of whitespace-free fields per clause."""

    clauses: tuple[tuple[str, ...], ...]

    def serialize(self) -> str:
        return "\n".join(" ".join(clause) for clause in self.clauses)

    def variables(self) -> dict[str, list[str]]:
        """Variable names grouped by sort letter, in order of appearance."""
        out: dict[str, list[str]] = {}
        for clause in self.clauses:
            for i, field in enumerate(clause):
                if i == 1:
                    continue  # operator position
                m = _VAR_TOKEN.match(field)
                if m:
                    out.setdefault(m.group(1), [])
                    if field not in out[m.group(1)]:
                        out[m.group(1)].append(field)
        return out


def is_var_field(field: str) -> bool:
    return bool(_VAR_TOKEN.match(field))


def to_clauses(d: Drs) -> ClauseSet:
    """Flatten to clauses: REF per referent, one clause per condition, one per link."""
    clauses: list[tuple[str, ...]] = []
    for b in d.boxes:
        bid = str(b.id)
        for r in b.referents:
            clauses.append((bid, "REF", str(r)))
        for c in b.conditions:
            if isinstance(c, Pred):
                clauses.append((bid, c.lemma, f'"{c.sense}"', str(c.arg)))
            elif isinstance(c, Role):
                clauses.append((bid, c.label, str(c.first), str(c.second)))
            else:
                clauses.append((bid, "NOT", str(c.box)))
    for lab, f, t in d.links:
        clauses.append((str(f), lab, str(t)))
    return ClauseSet(tuple(clauses))


def parse_clauses(text: str) -> list[ClauseSet]:
    """Parse a clause-format file: one clause per line, '%' comments,
    blank lines separating DRSs."""
    sets: list[ClauseSet] = []
    current: list[tuple[str, ...]] = []
    saw_content = False
    for line in text.splitlines():
        line = line.split("%", 1)[0].strip()
        if not line:
            if current:
                sets.append(ClauseSet(tuple(current)))
                current = []
            continue
        saw_content = True
        current.append(tuple(line.split()))
    if current:
        sets.append(ClauseSet(tuple(current)))
    elif saw_content and not sets:
        sets.append(ClauseSet(()))
    return sets


def clauses_to_text(sets: Iterable[ClauseSet]) -> str:
    return "\n\n".join(cs.serialize() for cs in sets) + "\n"
