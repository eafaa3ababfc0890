"""Agent state, solver feedback and the refinement classifier."""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass, replace
from typing import Any

from ..puzzle import Puzzle
from ..smt import SmtScript, SolverOutcome, model_block, prepare_input

AGENT_KINDS = ("decomposer", "solver", "grader")

ERRORS_PRESENT = "errors-present"
SAT_NO_ERRORS = "sat-no-errors"
UNSAT = "unsat"
NO_SCRIPT = "no-script"
EVALUATIONS = (ERRORS_PRESENT, SAT_NO_ERRORS, UNSAT, NO_SCRIPT)

ITERATIVE = "iterative-refinement"
RADICAL = "radical-refinement"
SUBMIT = "submit"

RADICAL_THRESHOLD = 0.5
RAW_LIMIT = 8 * 1024

SOLVER_ROLE = (
    "You translate logic grid puzzles into SMT-LIB2 scripts for the Z3 solver. "
    "Declare one Int constant per entity and attribute, add a comment lookup table "
    "mapping integer codes to labels, assert every clue, and end with (check-sat) "
    "and (get-model). Reply with a single ```smt2 fenced block."
)
DECOMPOSER_ROLE = (
    "Break the puzzle clues into short atomic statements, one per line, naming the "
    "entities, attributes and relationships involved. Reply with the lines only."
)


@dataclass(frozen=True)
class RolePrompt:
    text: str
    kind: str = "solver"

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("role prompt must be non-empty")
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}")


@dataclass(frozen=True)
class Feedback:
    outcome: SolverOutcome | None
    evaluation: str
    rendered: str


@dataclass(frozen=True)
class Decision:
    kind: str
    similarity: float | None = None
    error_classes: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "similarity": self.similarity, "error_classes": list(self.error_classes)}


@dataclass
class AgentState:
    t: int
    messages: list[dict[str, str]]
    role: RolePrompt
    current_script: SmtScript | None = None
    last_feedback: Feedback | None = None

    def chat(self) -> list[dict[str, str]]:
        """Messages as sent to a client, role prompt first."""
        return [{"role": "system", "content": self.role.text}, *self.messages]

    def act(self, reply: str, script: SmtScript | None) -> "AgentState":
        """Record one agent action."""
        return replace(
            self,
            t=self.t + 1,
            messages=[*self.messages, {"role": "assistant", "content": reply}],
            current_script=script if script is not None else self.current_script,
        )


def perceive_initial(puzzle: Puzzle, role: RolePrompt, decomposition: list[str] | None = None) -> AgentState:
    if not puzzle.clues:
        raise ValueError(f"puzzle {puzzle.id!r} has no clues")
    text = puzzle.render()
    if decomposition:
        text += "\n\nDecomposed clues:\n" + "\n".join(decomposition)
    return AgentState(t=0, messages=[{"role": "user", "content": text}], role=role)


def refine_state(state: AgentState, feedback: Feedback) -> AgentState:
    return replace(
        state,
        messages=[*state.messages, {"role": "user", "content": feedback.rendered}],
        last_feedback=feedback,
    )


def _truncate(raw: str) -> str:
    data = raw.encode("utf-8")
    if len(data) <= RAW_LIMIT:
        return raw
    return data[:RAW_LIMIT].decode("utf-8", "ignore") + "\n... [solver output truncated]"


def evaluate(outcome: SolverOutcome | None) -> Feedback:
    """Classify a solver outcome and render the message fed back to the agent.

    ``None`` stands for a reply from which no script could be extracted.
    """
    if outcome is None:
        return Feedback(
            None,
            NO_SCRIPT,
            "No SMT-LIB script was found in your reply. Reply with the complete script "
            "inside a single ```smt2 fenced block.",
        )
    if outcome.status == "sat" and not outcome.errors and outcome.model:
        return Feedback(
            outcome,
            SAT_NO_ERRORS,
            "The solver reports sat with no errors. Model:\n" + model_block(outcome),
        )
    if outcome.status == "unsat" and not outcome.errors:
        return Feedback(
            outcome,
            UNSAT,
            "The solver reports unsat: the constraints contradict each other. "
            "Revisit the logical relationships between variables and check each clue's encoding.\n"
            + _truncate(outcome.raw),
        )
    lines = [e.render() for e in outcome.errors]
    if not lines:
        lines = [f"The solver returned {outcome.status} without a usable model."]
    return Feedback(
        outcome,
        ERRORS_PRESENT,
        "The solver reported problems. Correct the syntax errors while keeping the logical "
        "relations intact.\n" + "\n".join(lines) + "\n\nFull solver output:\n" + _truncate(outcome.raw),
    )


def _canon(code: str) -> str:
    return re.sub(r"\s+\)", ")", re.sub(r"\(\s+", "(", " ".join(code.split())))


def _top_level_forms(text: str) -> list[str]:
    """One normalized line per top-level S-expression or stray text line."""
    forms: list[str] = []
    depth = 0
    buf: list[str] = []
    for line in text.splitlines():
        code = line.split(";", 1)[0].strip()
        if not code:
            continue
        if depth == 0 and not code.startswith("("):
            forms.append(_canon(code))
            continue
        buf.append(code)
        depth += code.count("(") - code.count(")")
        if depth <= 0:
            forms.append(_canon(" ".join(buf)))
            buf, depth = [], 0
    if buf:
        forms.append(_canon(" ".join(buf)))
    return forms


def script_similarity(a: SmtScript, b: SmtScript) -> float:
    """Line-level similarity of the scripts as the solver receives them.

    Each top-level form is flattened to one canonical line first, so that
    rewrapping or a missing check-sat footer does not count as a change.
    """
    fa = _top_level_forms(prepare_input(a.text))
    fb = _top_level_forms(prepare_input(b.text))
    return difflib.SequenceMatcher(None, fa, fb, autojunk=False).ratio()


def _error_classes(feedback: Feedback | None) -> tuple[str, ...]:
    if feedback is None or feedback.outcome is None:
        return ()
    classes = set()
    for e in feedback.outcome.errors:
        msg = e.message.lower()
        if "expected" in msg or "unexpected" in msg or "invalid" in msg:
            classes.add("syntax")
        elif "unknown constant" in msg or "unknown function" in msg:
            classes.add("undeclared")
        elif "sort" in msg:
            classes.add("sort")
        else:
            classes.add("other")
    return tuple(sorted(classes))


def classify_decision(
    prev: SmtScript | None, next: SmtScript, feedback: Feedback | None, restarted: bool = False
) -> Decision:
    """Label an action as iterative or radical refinement, for analysis only."""
    classes = _error_classes(feedback)
    if prev is None:
        return Decision(RADICAL if restarted else ITERATIVE, None, classes)
    sim = script_similarity(prev, next)
    return Decision(RADICAL if sim < RADICAL_THRESHOLD else ITERATIVE, sim, classes)


def line_delta(prev: SmtScript | None, next: SmtScript) -> list[str]:
    """Unified line diff between consecutive scripts, without file headers."""
    before = prev.text.splitlines() if prev else []
    diff = difflib.unified_diff(before, next.text.splitlines(), lineterm="", n=0)
    return [d for d in diff if not d.startswith(("---", "+++"))]
