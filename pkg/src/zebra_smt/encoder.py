"""Deterministic compiler from structured clues to SMT-LIB, plus model decoding.

Every (entity, attribute-category) cell becomes one ``Int`` constant named
``<Entity>_<Category>``. Ordinal categories hold positions ``1..N``;
categories whose labels are all integers hold those integers; every other
category holds codes ``1..N`` documented in a ``; Category: 1 is X, ...``
comment so that the grader can read the model back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import names
from .puzzle import (
    Before,
    Category,
    EitherOr,
    Is,
    IsNot,
    Neighbor,
    Offset,
    Puzzle,
    StructuredClue,
    clue_to_dict,
)
from .smt import (
    SmtScript,
    SolverConfig,
    SolverOutcome,
    comment_lines,
    parse_lookup_table,
    parse_scoped_lookup,
    run_solver,
)


class EncodingError(Exception):
    pass


class NoStructuredClues(EncodingError):
    pass


class UnsupportedClue(EncodingError):
    pass


# -- naming and codes ------------------------------------------------------


def constant_names(puzzle: Puzzle) -> dict[tuple[str, str], str]:
    """Map ``(entity, category)`` to its SMT constant; collisions get ``_2``, ``_3``..."""
    out: dict[tuple[str, str], str] = {}
    used: set[str] = set()
    for entity in puzzle.anchor.values:
        for cat in puzzle.attributes:
            base = f"{names.sanitize(entity)}_{names.sanitize(cat.name)}"
            name, i = base, 2
            while name in used:
                name, i = f"{base}_{i}", i + 1
            used.add(name)
            out[(entity, cat.name)] = name
    return out


def is_numeric(cat: Category) -> bool:
    return cat.kind == "nominal" and all(names.as_int(v) is not None for v in cat.values)


def value_code(cat: Category, index: int) -> int:
    if is_numeric(cat):
        return names.as_int(cat.values[index])  # type: ignore[return-value]
    return index + 1


def _int(v: int) -> str:
    return str(v) if v >= 0 else f"(- {-v})"


# -- clue compilation ------------------------------------------------------


@dataclass
class _Ctx:
    puzzle: Puzzle
    consts: dict[tuple[str, str], str]

    @property
    def entities(self) -> tuple[str, ...]:
        return self.puzzle.anchor.values

    def is_anchor(self, cat: Category) -> bool:
        return cat.name == self.puzzle.anchor.name

    def ref(self, ref: str) -> tuple[Category, int]:
        try:
            return self.puzzle.resolve_value(ref)
        except KeyError:
            raise UnsupportedClue(f"clue references unknown value {ref!r}") from None

    def has(self, entity: str, cat: Category, idx: int) -> str:
        return f"(= {self.consts[(entity, cat.name)]} {_int(value_code(cat, idx))})"

    def together(self, a: str, b: str) -> str:
        """Formula: values ``a`` and ``b`` belong to the same entity."""
        (ca, ia), (cb, ib) = self.ref(a), self.ref(b)
        if ca.name == cb.name:
            return "true" if ia == ib else "false"
        if self.is_anchor(ca):
            return self.has(ca.values[ia], cb, ib)
        if self.is_anchor(cb):
            return self.has(cb.values[ib], ca, ia)
        arms = [f"(and {self.has(e, ca, ia)} {self.has(e, cb, ib)})" for e in self.entities]
        return "(or " + "\n            ".join(arms) + ")"

    def position(self, ref: str, ordinal: Category) -> str:
        """Term: the position of ``ref``'s entity along ``ordinal``."""
        cat, idx = self.ref(ref)
        if cat.name == ordinal.name:
            return str(idx + 1)
        if self.is_anchor(cat):
            if self.is_anchor(ordinal):
                return str(idx + 1)
            return self.consts[(cat.values[idx], ordinal.name)]
        # a value of another category: select the entity holding it
        def pos_of(e: str) -> str:
            if self.is_anchor(ordinal):
                return str(self.entities.index(e) + 1)
            return self.consts[(e, ordinal.name)]

        term = pos_of(self.entities[-1])
        for e in reversed(self.entities[:-1]):
            term = f"(ite {self.has(e, cat, idx)} {pos_of(e)} {term})"
        return term

    def ordinal(self, name: str) -> Category:
        try:
            cat = self.puzzle.category(name)
        except KeyError:
            raise UnsupportedClue(f"unknown category {name!r}") from None
        if cat.kind != "ordinal":
            raise UnsupportedClue(f"{name!r} is not an ordinal category")
        return cat

    def clue(self, clue: StructuredClue) -> str:
        if isinstance(clue, Is):
            return self.together(clue.a, clue.b)
        if isinstance(clue, IsNot):
            return f"(not {self.together(clue.a, clue.b)})"
        if isinstance(clue, EitherOr):
            return f"(xor {self.together(clue.a, clue.c)}\n     {self.together(clue.b, clue.c)})"
        if isinstance(clue, (Offset, Neighbor, Before)):
            ordinal = self.ordinal(clue.category)
            a, b = self.position(clue.a, ordinal), self.position(clue.b, ordinal)
            if isinstance(clue, Offset):
                shifted = f"(+ {b} {clue.k})" if clue.k > 0 else f"(- {b} {-clue.k})"
                return f"(= {a} {shifted})"
            if isinstance(clue, Neighbor):
                return f"(or (= {a} (+ {b} 1)) (= {a} (- {b} 1)))"
            return f"(< {a} {b})"
        raise UnsupportedClue(f"unsupported clue {clue!r}")


def _describe(clue: StructuredClue) -> str:
    if clue.text:
        return clue.text
    fields = clue_to_dict(clue)
    kind = fields.pop("type")
    return f"{kind}: " + ", ".join(f"{k}={v}" for k, v in fields.items())


def encode(puzzle: Puzzle) -> SmtScript:
    if puzzle.structured_clues is None:
        raise NoStructuredClues(f"puzzle {puzzle.id!r} has no structured clues")
    consts = constant_names(puzzle)
    ctx = _Ctx(puzzle, consts)
    # NL clue text doubles as the comment when the two lists line up
    paired = len(puzzle.clues) == len(puzzle.structured_clues)
    out = ["(set-logic QF_LIA)", ""]

    # numeric categories keep their own numbers, so their table is the identity
    coded = [c for c in puzzle.attributes if c.kind == "nominal"]
    if coded:
        out.append("; Lookup table")
        for cat in coded:
            pairs = ", ".join(f"{value_code(cat, i)} is {v}" for i, v in enumerate(cat.values))
            out.append(f"; {cat.name}: {pairs}")
        out.append("")

    for cat in puzzle.attributes:
        out.append(f"; {cat.name} of each {puzzle.anchor.name.lower()}")
        for entity in puzzle.anchor.values:
            out.append(f"(declare-const {consts[(entity, cat.name)]} Int)")
        out.append("")

    for cat in puzzle.attributes:
        codes = [_int(value_code(cat, i)) for i in range(cat.size)]
        out.append(f"; {cat.name} values are in {{{', '.join(codes)}}}")
        out.append("(assert (and")
        for entity in puzzle.anchor.values:
            c = consts[(entity, cat.name)]
            out.append("(or " + " ".join(f"(= {c} {code})" for code in codes) + ")")
        out.append("))")
        out.append("")

    for i, clue in enumerate(puzzle.structured_clues):
        text = clue.text or (puzzle.clues[i] if paired else _describe(clue))
        out.append("; " + " ".join(text.split()))
        out.append(f"(assert {ctx.clue(clue)})")
        out.append("")

    for cat in puzzle.attributes:
        out.append(f"; Distinct {cat.name.lower()}")
        cells = " ".join(consts[(e, cat.name)] for e in puzzle.anchor.values)
        out.append(f"(assert (distinct {cells}))")
        out.append("")

    out += ["(check-sat)", "(get-model)", ""]
    return SmtScript("\n".join(out), provenance="reference-encoder")


# -- decoding --------------------------------------------------------------


@dataclass(frozen=True)
class Assignment:
    entity: str
    category: str
    value: str
    position: int | None = None


@dataclass
class DecodeIssue:
    name: str
    kind: str  # "unmapped-code" | "unknown-name"
    detail: str = ""


@dataclass
class Decoded:
    assignments: list[Assignment] = field(default_factory=list)
    issues: list[DecodeIssue] = field(default_factory=list)

    def __iter__(self):
        return iter(self.assignments)

    def __len__(self):
        return len(self.assignments)


def _lookup_for(
    cat: Category, scoped: dict[str, dict[int, str]]
) -> dict[int, str] | None:
    for label, table in scoped.items():
        hit = names.resolve(label, [cat.name])
        if hit and hit[1] == 0:
            return table
    return None


def decode_value(
    cat: Category,
    value: int | str,
    global_table: dict[int, str],
    scoped: dict[str, dict[int, str]],
) -> str | None:
    """Translate a model value into a label of ``cat``; None when unmapped.

    String values are returned as given (matched to the category's spelling
    when possible) so a wrong label is graded as wrong rather than unmapped.
    """
    if isinstance(value, str):
        idx = cat.index(value)
        if idx is None and cat.kind == "ordinal":
            num = names.ordinal_number(value)
            if num is not None and 1 <= num <= cat.size:
                idx = num - 1
        return cat.values[idx] if idx is not None else value

    numeric_labels = {names.as_int(v): v for v in cat.values if names.as_int(v) is not None}
    if cat.kind == "ordinal":
        if len(numeric_labels) == cat.size and value in numeric_labels:
            return numeric_labels[value]
        if 1 <= value <= cat.size:
            return cat.values[value - 1]
        return None
    table = _lookup_for(cat, scoped)
    if table and value in table:
        return table[value]
    label = global_table.get(value)
    if label is not None and cat.index(label) is not None:
        return label
    if value in numeric_labels:
        return numeric_labels[value]
    return label


def decode_model(
    outcome: SolverOutcome, puzzle: Puzzle, script_text: str | None = None
) -> Decoded:
    """Turn ``<Entity>_<Category>`` bindings into assignments.

    Lookup tables come from ``outcome.lookup_comments`` and, when given, the
    comment lines of ``script_text``.
    """
    comments = list(outcome.lookup_comments)
    if script_text:
        comments += [c for c in comment_lines(script_text) if c not in comments]
    joined = "\n".join(comments)
    global_table = parse_lookup_table(joined)
    scoped = parse_scoped_lookup(joined)

    exact = {v: k for k, v in constant_names(puzzle).items()}
    entities = list(puzzle.anchor.values)
    cat_names = [c.name for c in puzzle.attributes]
    result = Decoded()
    for fun in outcome.model:
        key = exact.get(fun.name) or names.split_constant(fun.name, entities, cat_names)
        if key is None:
            result.issues.append(DecodeIssue(fun.name, "unknown-name", "does not name an entity and category"))
            continue
        entity, cat_name = key
        cat = puzzle.category(cat_name)
        if fun.sort not in ("Int", "String"):
            result.issues.append(DecodeIssue(fun.name, "unknown-name", f"unsupported sort {fun.sort}"))
            continue
        label = decode_value(cat, fun.value, global_table, scoped)
        if label is None:
            result.issues.append(DecodeIssue(fun.name, "unmapped-code", f"{fun.value} has no {cat.name} label"))
            continue
        idx = cat.index(label)
        result.assignments.append(
            Assignment(entity, cat.name, label, idx + 1 if cat.kind == "ordinal" and idx is not None else None)
        )
    return result


# -- uniqueness ------------------------------------------------------------


def check_uniqueness(
    puzzle: Puzzle, outcome: SolverOutcome, cfg: SolverConfig | None = None
) -> str:
    """Re-solve with the found model excluded: ``"unique"`` iff that is unsat."""
    script = encode(puzzle)
    consts = set(constant_names(puzzle).values())
    eqs = [
        f"(= {f.name} {_int(int(f.value))})"
        for f in outcome.model
        if f.name in consts and f.sort == "Int"
    ]
    if not eqs:
        raise EncodingError("outcome has no model over the puzzle's constants")
    body = script.text.replace("(check-sat)\n(get-model)\n", "")
    text = body + "; exclude the model found so far\n(assert (not (and " + " ".join(eqs) + ")))\n(check-sat)\n"
    again = run_solver(SmtScript(text, "reference-encoder", script.iteration + 1), cfg)
    if again.errors:
        raise EncodingError(f"solver reported errors: {again.errors[0].render()}")
    return "unique" if again.status == "unsat" else "not-unique"
