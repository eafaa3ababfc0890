"""Deterministic autograding of solver models against an answer key."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable

from . import names
from .encoder import Decoded, decode_model
from .puzzle import Category, Puzzle
from .smt import SmtScript, SolverOutcome

CORRECT, INCORRECT, UNMAPPED = "correct", "incorrect", "unmapped"


@dataclass(frozen=True)
class Verdict:
    entity: str
    category: str
    expected: str
    got: str | None
    result: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "entity": self.entity,
            "category": self.category,
            "expected": self.expected,
            "got": self.got,
            "result": self.result,
        }


@dataclass
class GradeReport:
    puzzle_id: str
    verdicts: list[Verdict]
    correct_matches: int
    total_matches: int
    no_model: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def partial_score(self) -> Fraction:
        return Fraction(self.correct_matches, self.total_matches)

    @property
    def solved_fully(self) -> bool:
        return self.correct_matches == self.total_matches

    def to_dict(self) -> dict[str, Any]:
        return {
            "puzzle_id": self.puzzle_id,
            "correct_matches": self.correct_matches,
            "total_matches": self.total_matches,
            "partial_score": float(self.partial_score),
            "partial_score_exact": str(self.partial_score),
            "solved_fully": self.solved_fully,
            "no_model": self.no_model,
            "notes": list(self.notes),
            "verdicts": [v.to_dict() for v in self.verdicts],
        }


def _canonical(cat: Category, label: str) -> int | None:
    """Index of ``label`` within ``cat``; ordinal words count as positions."""
    idx = cat.index(label)
    if idx is not None:
        return idx
    if cat.kind == "ordinal":
        num = names.ordinal_number(label)
        if num is not None and 1 <= num <= cat.size:
            return num - 1
    return None


def same_value(cat: Category, expected: str, got: str) -> bool:
    a, b = _canonical(cat, expected), _canonical(cat, got)
    if a is not None and b is not None:
        return a == b
    return names.normalize(expected) == names.normalize(got)


def grade_assignments(puzzle: Puzzle, decoded: Decoded, notes: Iterable[str] = ()) -> GradeReport:
    """Compare decoded assignments with the key, one verdict per key cell.

    Cells the model never mentions count as incorrect, so the denominator is
    always the puzzle's full assignment count.
    """
    anchor = puzzle.anchor
    found: dict[tuple[int, str], str] = {}
    for a in decoded.assignments:
        e = anchor.index(a.entity)
        if e is not None:
            found.setdefault((e, names.normalize(a.category)), a.value)
    unmapped: set[tuple[int, str]] = set()
    for issue in decoded.issues:
        if issue.kind != "unmapped-code":
            continue
        split = names.split_constant(issue.name, list(anchor.values), [c.name for c in puzzle.attributes])
        if split:
            unmapped.add((anchor.index(split[0]), names.normalize(split[1])))

    verdicts = []
    correct = 0
    for entity, row in puzzle.solution.rows.items():
        e = anchor.index(entity)
        for cat in puzzle.attributes:
            expected = next(v for c, v in row.items() if names.normalize(c) == names.normalize(cat.name))
            key = (e, names.normalize(cat.name))
            got = found.get(key)
            if got is None:
                result = UNMAPPED if key in unmapped else INCORRECT
            elif same_value(cat, expected, got):
                result = CORRECT
                correct += 1
            else:
                result = INCORRECT
            verdicts.append(Verdict(anchor.values[e], cat.name, expected, got, result))
    return GradeReport(
        puzzle_id=puzzle.id,
        verdicts=verdicts,
        correct_matches=correct,
        total_matches=puzzle.total_assignments,
        notes=list(notes),
    )


def grade(outcome: SolverOutcome | None, script: SmtScript | None, puzzle: Puzzle) -> GradeReport:
    if outcome is None or not outcome.model:
        report = grade_assignments(puzzle, Decoded())
        report.no_model = True
        report.notes.append("no-model")
        return report
    decoded = decode_model(outcome, puzzle, script.text if script else None)
    notes = [f"{i.kind}: {i.name}" for i in decoded.issues]
    return grade_assignments(puzzle, decoded, notes)


def grade_run(puzzle: Puzzle, result) -> tuple[GradeReport, str]:
    """Grade a RunResult, returning the report and the scoring rule used.

    Converged runs are graded on their final model. Otherwise the last
    error-free model of any attempt is used; failing that the score is 0.
    """
    if result.converged:
        return grade(result.final_outcome, result.final_script, puzzle), "converged"
    picked = result.last_error_free()
    if picked is not None:
        outcome, script = picked
        return grade(outcome, script, puzzle), "last-error-free"
    return grade(None, None, puzzle), "none"


@dataclass
class BatchRow:
    config: str
    puzzle_id: str
    report: GradeReport
    rule: str
    converged: bool
    attempts: int
    actions: int


@dataclass
class SummaryRow:
    model: str
    temperature: str
    decomposition: bool
    avg_ps: Fraction
    solved: int
    count: int

    @property
    def solved_pct(self) -> float:
        return 100.0 * self.solved / self.count if self.count else 0.0

    def cells(self) -> list[str]:
        return [
            self.model,
            self.temperature,
            "Yes" if self.decomposition else "No",
            f"{float(self.avg_ps):.3f}",
            f"{self.solved} ({self.solved_pct:.1f}%)",
        ]


SUMMARY_COLUMNS = ["Model", "T", "D", "Avg. PS", "#Solved"]


def summarize(rows: list[BatchRow], model: str, temperature: str, decomposition: bool) -> SummaryRow:
    scores = [r.report.partial_score for r in rows]
    avg = sum(scores, Fraction(0)) / len(scores) if scores else Fraction(0)
    return SummaryRow(
        model=model,
        temperature=temperature,
        decomposition=decomposition,
        avg_ps=avg,
        solved=sum(r.report.solved_fully for r in rows),
        count=len(rows),
    )


def grade_batch(results, model: str = "", temperature: str = "0", decomposition: bool = False):
    """Grade ``(puzzle, RunResult)`` pairs; returns ``(summary, per-puzzle rows)``."""
    rows = []
    for puzzle, result in results:
        report, rule = grade_run(puzzle, result)
        rows.append(
            BatchRow(
                config=model,
                puzzle_id=puzzle.id,
                report=report,
                rule=rule,
                converged=result.converged,
                attempts=len(result.attempts),
                actions=sum(a.actions for a in result.attempts),
            )
        )
    return summarize(rows, model, temperature, decomposition), rows
