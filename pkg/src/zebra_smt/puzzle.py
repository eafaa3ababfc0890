"""Puzzles, categories, structured clues and answer keys.

A dataset file is a YAML stream with one document per puzzle (JSON and
JSON-lines files are accepted too)::

    id: ostrich-race
    source: handmade
    difficulty: easy
    categories:
      - {name: Ostrich, kind: nominal, values: [Bridget, Kermit, Ophelia, Stretch]}
      - {name: Place, kind: ordinal, values: [first, second, third, fourth]}
      - {name: Number, kind: nominal, values: ["105", "118", "126", "128"]}
    clues:
      - Ophelia finished second.
    structured_clues:
      - {type: is, a: Ophelia, b: second}
    solution:
      anchor: Ostrich
      rows:
        Kermit: {Place: first, Number: "118"}
        ...

Value references inside structured clues are plain labels, or
``Category:Label`` when a label occurs in more than one category.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Union

import yaml

from .names import normalize

KINDS = ("nominal", "ordinal")
DIFFICULTIES = ("easy", "medium", "unknown")


class DatasetError(Exception):
    """Base class for dataset problems; carries the puzzle id and field."""

    def __init__(self, message: str, puzzle_id: str | None = None, field: str | None = None):
        self.puzzle_id = puzzle_id
        self.field = field
        where = []
        if puzzle_id is not None:
            where.append(f"puzzle {puzzle_id!r}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class DatasetParseError(DatasetError):
    pass


class DatasetValidationError(DatasetError):
    pass


@dataclass(frozen=True)
class Category:
    name: str
    kind: str
    values: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(str(v) for v in self.values))

    @property
    def size(self) -> int:
        return len(self.values)

    def index(self, label: str) -> int | None:
        """0-based index of ``label`` under label normalization."""
        key = normalize(label)
        for i, v in enumerate(self.values):
            if normalize(v) == key:
                return i
        return None


# -- structured clues ------------------------------------------------------


@dataclass(frozen=True)
class Is:
    """Two values belong to the same entity."""

    a: str
    b: str
    text: str | None = None


@dataclass(frozen=True)
class IsNot:
    a: str
    b: str
    text: str | None = None


@dataclass(frozen=True)
class Offset:
    """position(a) == position(b) + k along an ordinal category."""

    a: str
    b: str
    category: str
    k: int
    text: str | None = None


@dataclass(frozen=True)
class Neighbor:
    a: str
    b: str
    category: str
    text: str | None = None


@dataclass(frozen=True)
class EitherOr:
    """``c`` belongs to the same entity as exactly one of ``a`` and ``b``."""

    a: str
    b: str
    c: str
    text: str | None = None


@dataclass(frozen=True)
class Before:
    a: str
    b: str
    category: str
    text: str | None = None


StructuredClue = Union[Is, IsNot, Offset, Neighbor, EitherOr, Before]

CLUE_TYPES: dict[str, type] = {
    "is": Is,
    "is_not": IsNot,
    "offset": Offset,
    "neighbor": Neighbor,
    "either_or": EitherOr,
    "before": Before,
}
_CLUE_TAGS = {cls: tag for tag, cls in CLUE_TYPES.items()}


def clue_to_dict(clue: StructuredClue) -> dict[str, Any]:
    out: dict[str, Any] = {"type": _CLUE_TAGS[type(clue)]}
    for name in clue.__dataclass_fields__:
        value = getattr(clue, name)
        if value is not None:
            out[name] = value
    return out


def clue_from_dict(raw: dict[str, Any]) -> StructuredClue:
    raw = dict(raw)
    tag = str(raw.pop("type", "")).strip().lower().replace("-", "_")
    cls = CLUE_TYPES.get(tag)
    if cls is None:
        raise ValueError(f"unknown clue type {tag!r}")
    try:
        if "k" in raw:
            raw["k"] = int(raw["k"])
        for key in ("a", "b", "c"):
            if key in raw:
                raw[key] = str(raw[key])
        return cls(**raw)
    except TypeError as exc:
        raise ValueError(f"bad fields for {tag!r} clue: {exc}") from None


def clue_refs(clue: StructuredClue) -> list[str]:
    if isinstance(clue, EitherOr):
        return [clue.a, clue.b, clue.c]
    return [clue.a, clue.b]


# -- answer key ------------------------------------------------------------


@dataclass(frozen=True)
class SolutionKey:
    anchor: str
    rows: dict[str, dict[str, str]]

    def assignments(self) -> Iterator[tuple[str, str, str]]:
        for entity, row in self.rows.items():
            for category, value in row.items():
                yield entity, category, value

    def to_dict(self) -> dict[str, Any]:
        return {
            "anchor": self.anchor,
            "rows": {e: dict(row) for e, row in self.rows.items()},
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "SolutionKey":
        rows = {
            str(entity): {str(c): str(v) for c, v in (row or {}).items()}
            for entity, row in (raw.get("rows") or {}).items()
        }
        return cls(anchor=str(raw["anchor"]), rows=rows)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, allow_unicode=True)

    @classmethod
    def loads(cls, text: str) -> "SolutionKey":
        return cls.from_dict(yaml.safe_load(text))


# -- puzzle ----------------------------------------------------------------


@dataclass(frozen=True)
class Puzzle:
    id: str
    categories: tuple[Category, ...]
    clues: tuple[str, ...]
    solution: SolutionKey
    source: str = ""
    structured_clues: tuple[StructuredClue, ...] | None = None
    difficulty: str = "unknown"

    @property
    def n(self) -> int:
        return self.categories[0].size

    @property
    def anchor(self) -> Category:
        return self.category(self.solution.anchor)

    @property
    def attributes(self) -> tuple[Category, ...]:
        """Every non-anchor category, in declaration order."""
        anchor = normalize(self.solution.anchor)
        return tuple(c for c in self.categories if normalize(c.name) != anchor)

    @property
    def total_assignments(self) -> int:
        return self.n * (len(self.categories) - 1)

    def category(self, name: str) -> Category:
        key = normalize(name)
        for c in self.categories:
            if normalize(c.name) == key:
                return c
        raise KeyError(name)

    def has_category(self, name: str) -> bool:
        return any(normalize(c.name) == normalize(name) for c in self.categories)

    def resolve_value(self, ref: str) -> tuple[Category, int]:
        """Resolve a clue value reference to ``(category, index)``.

        Raises KeyError when the reference is unknown or ambiguous.
        """
        if ":" in ref:
            cat_name, label = ref.split(":", 1)
            if self.has_category(cat_name):
                cat = self.category(cat_name)
                idx = cat.index(label)
                if idx is None:
                    raise KeyError(ref)
                return cat, idx
        hits = [(c, c.index(ref)) for c in self.categories if c.index(ref) is not None]
        if len(hits) != 1:
            raise KeyError(ref)
        return hits[0]  # type: ignore[return-value]

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "source": self.source,
            "difficulty": self.difficulty,
            "categories": [
                {"name": c.name, "kind": c.kind, "values": list(c.values)}
                for c in self.categories
            ],
            "clues": list(self.clues),
        }
        if self.structured_clues is not None:
            out["structured_clues"] = [clue_to_dict(c) for c in self.structured_clues]
        out["solution"] = self.solution.to_dict()
        return out

    def render(self) -> str:
        """Plain-text statement of the puzzle as handed to an agent."""
        lines = [f"Puzzle {self.id}", "", "Categories:"]
        for c in self.categories:
            lines.append(f"- {c.name} ({c.kind}): {', '.join(c.values)}")
        lines += ["", "Clues:"]
        lines += [f"{i}. {clue}" for i, clue in enumerate(self.clues, 1)]
        return "\n".join(lines)


# -- validation ------------------------------------------------------------


@dataclass
class KeyReport:
    """Outcome of :func:`validate_key`: one entry per checked invariant."""

    checks: list[tuple[str, bool, str]] = field(default_factory=list)
    assignments: int = 0

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.checks)

    def failures(self) -> list[tuple[str, str]]:
        return [(name, detail) for name, passed, detail in self.checks if not passed]

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append((name, passed, detail))


def validate_key(puzzle: Puzzle) -> KeyReport:
    """Check that the answer key is a complete bijection for every category."""
    report = KeyReport()
    key = puzzle.solution
    if not puzzle.has_category(key.anchor):
        report.add("anchor", False, f"anchor category {key.anchor!r} not declared")
        return report
    report.add("anchor", True)
    anchor = puzzle.anchor

    entities: dict[int, str] = {}
    bad_rows = []
    for entity in key.rows:
        idx = anchor.index(entity)
        if idx is None or idx in entities:
            bad_rows.append(entity)
        else:
            entities[idx] = entity
    missing_rows = [v for i, v in enumerate(anchor.values) if i not in entities]
    detail = ""
    if missing_rows:
        detail = f"incomplete bijection: no row for {', '.join(missing_rows)}"
    if bad_rows:
        detail = (detail + "; " if detail else "") + f"unknown or repeated rows {bad_rows}"
    report.add(f"rows:{anchor.name}", not (missing_rows or bad_rows), detail)

    count = 0
    for cat in puzzle.attributes:
        seen: dict[int, str] = {}
        problems = []
        for entity, row in key.rows.items():
            value = next((v for c, v in row.items() if normalize(c) == normalize(cat.name)), None)
            if value is None:
                problems.append(f"{entity} has no {cat.name}")
                continue
            idx = cat.index(value)
            if idx is None:
                problems.append(f"{entity}: {value!r} is not a {cat.name} value")
            elif idx in seen:
                problems.append(f"bijection violated: {value!r} used by {seen[idx]} and {entity}")
            else:
                seen[idx] = entity
                count += 1
        unused = [v for i, v in enumerate(cat.values) if i not in seen]
        if unused and not problems:
            problems.append(f"incomplete bijection: {', '.join(unused)} unused")
        report.add(f"bijection:{cat.name}", not problems, "; ".join(problems))

    for entity, row in key.rows.items():
        extra = [c for c in row if not puzzle.has_category(c) or normalize(c) == normalize(key.anchor)]
        if extra:
            report.add(f"columns:{entity}", False, f"unexpected categories {extra}")
    report.assignments = count
    report.add(
        "total",
        count == puzzle.total_assignments,
        f"{count} of {puzzle.total_assignments} assignments",
    )
    return report


def _check_puzzle(p: Puzzle) -> None:
    fail = lambda fld, msg: DatasetValidationError(msg, p.id, fld)  # noqa: E731
    if len(p.categories) < 2:
        raise fail("categories", "need at least 2 categories")
    names = [normalize(c.name) for c in p.categories]
    if len(set(names)) != len(names):
        raise fail("categories", "category names repeat")
    for c in p.categories:
        if c.kind not in KINDS:
            raise fail(f"categories.{c.name}.kind", f"kind must be one of {KINDS}, got {c.kind!r}")
        if any(not v.strip() for v in c.values):
            raise fail(f"categories.{c.name}.values", "empty value label")
        normed = [normalize(v) for v in c.values]
        if len(set(normed)) != len(normed):
            raise fail(f"categories.{c.name}.values", "value labels are not distinct")
    sizes = {c.size for c in p.categories}
    if len(sizes) != 1:
        raise fail("categories", f"categories differ in size: {sorted(sizes)}")
    if p.n < 2:
        raise fail("categories", "need at least 2 entities")
    if p.difficulty not in DIFFICULTIES:
        raise fail("difficulty", f"must be one of {DIFFICULTIES}")
    for i, clue in enumerate(p.structured_clues or ()):
        fld = f"structured_clues[{i}]"
        for ref in clue_refs(clue):
            try:
                p.resolve_value(ref)
            except KeyError:
                raise fail(fld, f"unknown or ambiguous value {ref!r}") from None
        refs = [p.resolve_value(r) for r in clue_refs(clue)]
        if refs[0] == refs[1] or (isinstance(clue, EitherOr) and len(set(refs)) != 3):
            raise fail(fld, "clue relates a value to itself")
        if isinstance(clue, (Offset, Neighbor, Before)):
            if not p.has_category(clue.category):
                raise fail(fld, f"unknown category {clue.category!r}")
            if p.category(clue.category).kind != "ordinal":
                raise fail(fld, f"{clue.category!r} is not ordinal")
        if isinstance(clue, Offset) and clue.k == 0:
            raise fail(fld, "offset k must be non-zero")
    report = validate_key(p)
    if not report.ok:
        name, detail = report.failures()[0]
        fld = "solution." + name.split(":", 1)[-1] if ":" in name else "solution"
        raise fail(fld, detail)


def puzzle_from_dict(raw: dict[str, Any]) -> Puzzle:
    pid = str(raw.get("id", "")) or None
    try:
        categories = tuple(
            Category(name=str(c["name"]), kind=str(c.get("kind", "nominal")), values=tuple(c["values"]))
            for c in raw["categories"]
        )
        structured = raw.get("structured_clues")
        puzzle = Puzzle(
            id=str(raw["id"]),
            source=str(raw.get("source", "")),
            difficulty=str(raw.get("difficulty") or "unknown"),
            categories=categories,
            clues=tuple(str(c) for c in raw.get("clues") or ()),
            structured_clues=None
            if structured is None
            else tuple(clue_from_dict(c) for c in structured),
            solution=SolutionKey.from_dict(raw["solution"]),
        )
    except KeyError as exc:
        raise DatasetParseError(f"missing required field {exc.args[0]!r}", pid, str(exc.args[0])) from None
    except (TypeError, ValueError, AttributeError) as exc:
        raise DatasetParseError(str(exc), pid) from None
    _check_puzzle(puzzle)
    return puzzle


def _documents(path: Path) -> list[Any]:
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".jsonl":
            return [json.loads(line) for line in text.splitlines() if line.strip()]
        if path.suffix == ".json":
            data = json.loads(text)
            return data if isinstance(data, list) else [data]
        return [d for d in yaml.safe_load_all(text) if d is not None]
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise DatasetParseError(f"{path}: {exc}") from None


def load_dataset(path: str | Path) -> list[Puzzle]:
    """Load and validate every puzzle in ``path``."""
    path = Path(path)
    if not path.exists():
        raise DatasetParseError(f"{path}: no such file")
    puzzles = []
    seen = set()
    for doc in _documents(path):
        if not isinstance(doc, dict):
            raise DatasetParseError(f"{path}: each document must be a mapping")
        puzzle = puzzle_from_dict(doc)
        if puzzle.id in seen:
            raise DatasetValidationError("duplicate puzzle id", puzzle.id, "id")
        seen.add(puzzle.id)
        puzzles.append(puzzle)
    return puzzles


def dump_dataset(puzzles: list[Puzzle]) -> str:
    return yaml.safe_dump_all(
        [p.to_dict() for p in puzzles], sort_keys=False, allow_unicode=True
    )


def bundled_dataset_path() -> Path:
    return Path(__file__).parent / "data" / "puzzles.yaml"


def find_puzzle(puzzles: list[Puzzle], puzzle_id: str) -> Puzzle:
    for p in puzzles:
        if p.id == puzzle_id:
            return p
    raise KeyError(f"unknown puzzle id {puzzle_id!r}")
