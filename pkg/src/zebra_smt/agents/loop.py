"""The decompose, translate, solve, evaluate, refine loop with cold-start retries."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from ..puzzle import Puzzle
from ..smt import NoScriptFound, SmtScript, SolverConfig, SolverOutcome, SolverTimeout, extract_smt, run_solver
from .clients import DECOMPOSE_REQUEST, ClientError, LlmClient
from .state import (
    DECOMPOSER_ROLE,
    SAT_NO_ERRORS,
    SOLVER_ROLE,
    SUBMIT,
    Decision,
    Feedback,
    RolePrompt,
    classify_decision,
    evaluate,
    line_delta,
    perceive_initial,
    refine_state,
)

CONFIRM_REQUEST = (
    "Check that every assignment in this model satisfies every clue. Reply CONFIRMED "
    "if it does; otherwise reply with a corrected script in a ```smt2 fenced block."
)


@dataclass
class RunConfig:
    temperature_schedule: list[float] = field(default_factory=lambda: [0.0, 0.0001, 0.01])
    max_actions: int = 4
    max_retries: int | None = None
    decomposition_enabled: bool = False
    confirm_solution: bool = False
    model_name: str = "scripted"
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        self.temperature_schedule = [float(t) for t in self.temperature_schedule]
        sched = self.temperature_schedule
        if not sched:
            raise ValueError("temperature schedule must be non-empty")
        if any(b < a for a, b in zip(sched, sched[1:])):
            raise ValueError("temperature schedule must be non-decreasing")
        if self.max_actions < 1:
            raise ValueError("max_actions must be at least 1")
        if self.max_retries is None:
            self.max_retries = len(sched) - 1
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")

    @property
    def attempt_temperatures(self) -> list[float]:
        return self.temperature_schedule[: self.max_retries + 1]

    @classmethod
    def from_dict(cls, raw: dict[str, Any] | None, solver: SolverConfig | None = None) -> "RunConfig":
        raw = dict(raw or {})
        known = {"temperature_schedule", "max_actions", "max_retries", "decomposition_enabled",
                 "confirm_solution", "model_name"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown run settings: {', '.join(sorted(unknown))}")
        return cls(**raw, solver=solver or SolverConfig())


@dataclass
class IterationRecord:
    action: int
    reply: str
    script: SmtScript | None
    outcome: SolverOutcome | None
    evaluation: str
    decision: Decision | None
    delta: list[str]
    confirmation: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "action": self.action,
            "reply": self.reply,
            "script": self.script.text if self.script else None,
            "outcome": self.outcome.to_dict() if self.outcome else None,
            "evaluation": self.evaluation,
            "decision": self.decision.to_dict() if self.decision else None,
            "delta": list(self.delta),
            "confirmation": self.confirmation,
        }


@dataclass
class AttemptRecord:
    temperature: float
    actions: int = 0
    iterations: list[IterationRecord] = field(default_factory=list)
    decomposition: list[str] | None = None
    failed: bool = False
    failure: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "temperature": self.temperature,
            "actions": self.actions,
            "decomposition": self.decomposition,
            "failed": self.failed,
            "failure": self.failure,
            "iterations": [it.to_dict() for it in self.iterations],
        }


@dataclass
class RunResult:
    puzzle_id: str
    converged: bool
    attempts: list[AttemptRecord]
    final_outcome: SolverOutcome | None = None
    final_script: SmtScript | None = None

    @property
    def total_actions(self) -> int:
        return sum(a.actions for a in self.attempts)

    def last_error_free(self) -> tuple[SolverOutcome, SmtScript] | None:
        """The most recent model produced without solver errors, if any."""
        for attempt in reversed(self.attempts):
            for it in reversed(attempt.iterations):
                o = it.outcome
                if o is not None and it.script is not None and o.model and not o.errors:
                    return o, it.script
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "puzzle_id": self.puzzle_id,
            "converged": self.converged,
            "attempts": [a.to_dict() for a in self.attempts],
            "final_outcome": self.final_outcome.to_dict() if self.final_outcome else None,
            "final_script": self.final_script.text if self.final_script else None,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


class _NullRecorder:
    def record(self, kind: str, **data: Any) -> None:
        pass


def _ask(client: LlmClient, messages, temperature: float, recorder, attempt: int, action: int | None) -> str:
    """One client request with a single immediate retry on transport failure."""
    for tries in (1, 2):
        recorder.record("prompt", attempt=attempt, action=action, temperature=temperature, messages=messages)
        try:
            text = client.complete(messages, temperature)
        except ClientError as exc:
            recorder.record("client-error", attempt=attempt, action=action, message=str(exc), try_number=tries)
            if tries == 2:
                raise
            continue
        recorder.record("completion", attempt=attempt, action=action, text=text)
        return text
    raise AssertionError("unreachable")


def decompose(puzzle: Puzzle, client: LlmClient, temperature: float = 0.0, recorder=None, attempt: int = 0) -> list[str]:
    """Ask the decomposition agent for atomic clue lines; blank lines are dropped."""
    recorder = recorder or _NullRecorder()
    role = RolePrompt(DECOMPOSER_ROLE, "decomposer")
    messages = [
        {"role": "system", "content": role.text},
        {"role": "user", "content": DECOMPOSE_REQUEST + "\n\n" + puzzle.render()},
    ]
    reply = _ask(client, messages, temperature, recorder, attempt, None)
    return [line.strip() for line in reply.splitlines() if line.strip()]


def _extract(reply: str, action: int) -> SmtScript | None:
    try:
        return extract_smt(reply, action)
    except NoScriptFound:
        return None


def _same_script(a: SmtScript | None, b: SmtScript | None) -> bool:
    return a is not None and b is not None and a.text.strip() == b.text.strip()


def run_feedback_loop(puzzle: Puzzle, client: LlmClient, cfg: RunConfig | None = None, recorder=None) -> RunResult:
    """Run the agent loop over the temperature schedule until a clean sat model.

    Each attempt starts cold from the puzzle text. Within an attempt the agent
    gets at most ``cfg.max_actions`` replies; after each one the script is run
    and the evaluated solver output is appended to the conversation.
    """
    cfg = cfg or RunConfig()
    recorder = recorder or _NullRecorder()
    role = RolePrompt(SOLVER_ROLE, "solver")
    result = RunResult(puzzle.id, False, [])
    last: tuple[SolverOutcome | None, SmtScript | None] = (None, None)

    for index, tau in enumerate(cfg.attempt_temperatures):
        attempt = AttemptRecord(temperature=tau)
        result.attempts.append(attempt)
        try:
            if cfg.decomposition_enabled:
                attempt.decomposition = decompose(puzzle, client, tau, recorder, index)
            state = perceive_initial(puzzle, role, attempt.decomposition)
            prev: SmtScript | None = None
            pending: tuple[SolverOutcome, SmtScript] | None = None

            while state.t < cfg.max_actions:
                action = state.t + 1
                reply = _ask(client, state.chat(), tau, recorder, index, action)
                script = _extract(reply, action)
                state = state.act(reply, script)
                attempt.actions = state.t

                if pending is not None and (script is None or _same_script(script, pending[1])):
                    outcome, accepted = pending
                    attempt.iterations.append(
                        IterationRecord(action, reply, None, None, SAT_NO_ERRORS, Decision(SUBMIT), [], True)
                    )
                    recorder.record("decision", attempt=index, action=action, decision=Decision(SUBMIT).to_dict())
                    result.converged = True
                    result.final_outcome, result.final_script = outcome, accepted
                    return result
                pending = None

                outcome = None
                if script is not None:
                    try:
                        outcome = run_solver(script, cfg.solver)
                    except SolverTimeout as exc:
                        attempt.failed, attempt.failure = True, f"solver-timeout: {exc}"
                        break
                    recorder.record("solver-outcome", attempt=index, action=action, outcome=outcome.to_dict())
                    last = (outcome, script)
                feedback = evaluate(outcome)

                decision = None
                if script is not None:
                    decision = classify_decision(prev, script, state.last_feedback, restarted=index > 0)
                    recorder.record("decision", attempt=index, action=action, decision=decision.to_dict())
                attempt.iterations.append(
                    IterationRecord(
                        action, reply, script, outcome, feedback.evaluation, decision,
                        line_delta(prev, script) if script else [],
                    )
                )
                if script is not None:
                    prev = script

                if feedback.evaluation == SAT_NO_ERRORS:
                    if cfg.confirm_solution and state.t < cfg.max_actions:
                        pending = (outcome, script)
                        state = refine_state(
                            state, Feedback(outcome, SAT_NO_ERRORS, feedback.rendered + "\n" + CONFIRM_REQUEST)
                        )
                        continue
                    recorder.record("decision", attempt=index, action=action, decision=Decision(SUBMIT).to_dict())
                    result.converged = True
                    result.final_outcome, result.final_script = outcome, script
                    return result
                state = refine_state(state, feedback)
        except ClientError as exc:
            attempt.failed, attempt.failure = True, f"client-error: {exc}"

    result.final_outcome, result.final_script = last
    return result
