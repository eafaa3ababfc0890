"""SMT-LIB scripts in, structured solver feedback out.

The solver is an external process that reads SMT-LIB2 on stdin (``z3 -in``
by default). Its reply is parsed leniently: error forms, the verdict token
and any ``define-fun`` bindings are picked out, everything else stays in
``raw``.
"""

from __future__ import annotations

import re
import shutil
import subprocess
from dataclasses import asdict, dataclass, field
from typing import Any, Union

STATUSES = ("sat", "unsat", "unknown", "no-verdict")


class SmtError(Exception):
    pass


class NoScriptFound(SmtError):
    """Agent text contained neither a fenced block nor bare S-expressions."""


class SolverNotFound(SmtError):
    pass


class SolverTimeout(SmtError):
    pass


@dataclass(frozen=True)
class SmtScript:
    text: str
    provenance: str = "agent"
    iteration: int = 0

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("empty SMT-LIB script")


@dataclass(frozen=True)
class SolverError:
    line: int | None
    column: int | None
    message: str

    def render(self) -> str:
        if self.line is None:
            return f'(error "{self.message}")'
        return f'(error "line {self.line} column {self.column}: {self.message}")'


@dataclass(frozen=True)
class DefineFun:
    name: str
    sort: str
    value: Union[int, str]


@dataclass
class SolverOutcome:
    status: str
    errors: list[SolverError] = field(default_factory=list)
    model: list[DefineFun] = field(default_factory=list)
    lookup_comments: list[str] = field(default_factory=list)
    raw: str = ""

    @property
    def has_model(self) -> bool:
        return bool(self.model)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "SolverOutcome":
        return cls(
            status=raw["status"],
            errors=[SolverError(**e) for e in raw.get("errors", [])],
            model=[DefineFun(**d) for d in raw.get("model", [])],
            lookup_comments=list(raw.get("lookup_comments", [])),
            raw=raw.get("raw", ""),
        )


@dataclass(frozen=True)
class SolverConfig:
    executable: str = "z3"
    args: tuple[str, ...] = ("-in",)
    timeout: float = 10.0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("solver timeout must be positive")
        object.__setattr__(self, "args", tuple(self.args))

    @classmethod
    def from_dict(cls, raw: dict[str, Any] | None) -> "SolverConfig":
        raw = raw or {}
        return cls(
            executable=str(raw.get("executable", "z3")),
            args=tuple(raw.get("args", ("-in",))),
            timeout=float(raw.get("timeout", 10.0)),
        )


# -- extraction ------------------------------------------------------------

_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def extract_smt(agent_text: str, iteration: int = 0) -> SmtScript:
    """Pull the SMT-LIB script out of an agent reply.

    The last fenced code block wins. Without fences, a reply whose first
    meaningful line opens an S-expression is taken whole.
    """
    blocks = [b for b in _FENCE.findall(agent_text or "") if b.strip()]
    if blocks:
        return SmtScript(blocks[-1], "agent", iteration)
    for line in (agent_text or "").splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith(";"):
            continue
        if stripped.startswith("("):
            return SmtScript(agent_text, "agent", iteration)
        break
    raise NoScriptFound("no SMT-LIB script in agent reply")


def comment_lines(text: str) -> list[str]:
    return [line.strip() for line in text.splitlines() if line.strip().startswith(";")]


def _strip_comments(text: str) -> str:
    return "\n".join(line.split(";", 1)[0] for line in text.splitlines())


def prepare_input(script_text: str) -> str:
    """Append ``(check-sat)`` and ``(get-model)`` when the script has no check-sat."""
    if re.search(r"\(\s*check-sat\b", _strip_comments(script_text)):
        return script_text
    tail = "" if script_text.endswith("\n") else "\n"
    return script_text + tail + "(check-sat)\n(get-model)\n"


def run_solver(script: SmtScript, cfg: SolverConfig | None = None) -> SolverOutcome:
    cfg = cfg or SolverConfig()
    exe = shutil.which(cfg.executable)
    if exe is None:
        raise SolverNotFound(f"solver executable {cfg.executable!r} not found")
    try:
        proc = subprocess.run(
            [exe, *cfg.args],
            input=prepare_input(script.text),
            capture_output=True,
            text=True,
            timeout=cfg.timeout,
        )
    except subprocess.TimeoutExpired:
        raise SolverTimeout(f"solver exceeded {cfg.timeout}s") from None
    outcome = parse_outcome(proc.stdout + proc.stderr)
    outcome.lookup_comments = comment_lines(script.text) + outcome.lookup_comments
    return outcome


# -- output parsing --------------------------------------------------------

# Tolerates the doubled quotes and hard line breaks seen in copied transcripts.
_ERROR = re.compile(r'\(error\s+"+(?P<msg>.*?)"+\s*\)', re.DOTALL)
_LOCATED = re.compile(r"^line\s+(\d+)\s+column\s+(\d+)\s*:\s*(.*)$", re.DOTALL)
_TOKEN = re.compile(r'\s*(?:(\()|(\))|("(?:[^"]|"")*")|(\|[^|]*\|)|([^\s()"|;]+)|(;[^\n]*))')


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            pos += 1
            continue
        pos = m.end()
        tok = next((g for g in m.groups() if g is not None), None)
        if tok is not None and not tok.startswith(";"):
            tokens.append(tok)
    return tokens


def _read_forms(tokens: list[str]) -> list[Any]:
    """Group tokens into nested lists; unbalanced input is closed off."""
    stack: list[list[Any]] = [[]]
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) > 1:
                done = stack.pop()
                stack[-1].append(done)
        else:
            stack[-1].append(tok)
    while len(stack) > 1:
        done = stack.pop()
        stack[-1].append(done)
    return stack[0]


def _walk(form: Any):
    if isinstance(form, list):
        yield form
        for child in form:
            yield from _walk(child)


def _int_value(form: Any) -> int | None:
    if isinstance(form, str) and re.fullmatch(r"\d+", form):
        return int(form)
    if isinstance(form, list) and len(form) == 2 and form[0] == "-":
        inner = _int_value(form[1])
        return None if inner is None else -inner
    return None


def _define_fun(form: list[Any]) -> DefineFun | None:
    if len(form) != 5 or form[0] != "define-fun" or form[2] != []:
        return None
    name, sort, value = form[1], form[3], form[4]
    if not isinstance(name, str) or not isinstance(sort, str):
        return None
    name = name.strip("|")
    if sort == "Int":
        num = _int_value(value)
        if num is None:
            return None
        return DefineFun(name, "Int", num)
    if sort == "String" and isinstance(value, str) and value.startswith('"'):
        return DefineFun(name, "String", value[1:-1].replace('""', '"'))
    if isinstance(value, str):
        return DefineFun(name, sort, value)
    return None


def parse_outcome(raw: str) -> SolverOutcome:
    errors = []
    for m in _ERROR.finditer(raw):
        msg = " ".join(m.group("msg").split())
        loc = _LOCATED.match(msg)
        if loc:
            errors.append(SolverError(int(loc.group(1)), int(loc.group(2)), loc.group(3)))
        else:
            errors.append(SolverError(None, None, msg))
    rest = _ERROR.sub("", raw)

    status = "no-verdict"
    verdict_at = None
    lines = rest.splitlines()
    for i, line in enumerate(lines):
        if line.strip() in ("sat", "unsat", "unknown"):
            status, verdict_at = line.strip(), i

    model: list[DefineFun] = []
    if status == "sat" and verdict_at is not None:
        after = "\n".join(lines[verdict_at + 1 :])
        seen = set()
        for form in _walk(_read_forms(_tokenize(after))):
            fun = _define_fun(form) if form and form[0] == "define-fun" else None
            if fun and fun.name not in seen:
                seen.add(fun.name)
                model.append(fun)

    return SolverOutcome(
        status=status,
        errors=errors,
        model=model,
        lookup_comments=comment_lines(rest),
        raw=raw,
    )


def _literal(fun: DefineFun) -> str:
    if fun.sort == "Int":
        return str(fun.value) if int(fun.value) >= 0 else f"(- {-int(fun.value)})"
    if fun.sort == "String":
        return '"' + str(fun.value).replace('"', '""') + '"'
    return str(fun.value)


def emit_outcome(outcome: SolverOutcome) -> str:
    """Render an outcome in the solver's own output format."""
    parts = [e.render() for e in outcome.errors]
    if outcome.status != "no-verdict":
        parts.append(outcome.status)
    if outcome.model:
        parts.append("(")
        for fun in outcome.model:
            parts.append(f"  (define-fun {fun.name} () {fun.sort}\n    {_literal(fun)})")
        parts.append(")")
    return "\n".join(parts) + "\n"


def model_block(outcome: SolverOutcome) -> str:
    if not outcome.model:
        return ""
    text = emit_outcome(SolverOutcome(status="sat", model=outcome.model))
    return text.split("\n", 1)[1]


# -- lookup tables ---------------------------------------------------------

_BINDING = re.compile(r"(-?\d+)\s+is\s+([^,;]+?)\s*(?=[,;]|$)")
_SCOPED = re.compile(r"^\s*([^:;]+?)\s*:\s*(.*)$")


def _comment_bodies(text: str) -> list[str]:
    return [line.lstrip(";").strip() for line in comment_lines(text)]


def parse_lookup_table(script_text: str) -> dict[int, str]:
    """Collect ``<int> is <Label>`` bindings from comment lines; last one wins."""
    table: dict[int, str] = {}
    for body in _comment_bodies(script_text):
        for m in _BINDING.finditer(body):
            table[int(m.group(1))] = m.group(2).strip()
    return table


def parse_scoped_lookup(script_text: str) -> dict[str, dict[int, str]]:
    """Per-category tables from lines like ``; Color: 1 is Blue, 2 is Red``."""
    scoped: dict[str, dict[int, str]] = {}
    for body in _comment_bodies(script_text):
        m = _SCOPED.match(body)
        if not m:
            continue
        bindings = list(_BINDING.finditer(m.group(2)))
        if bindings:
            table = scoped.setdefault(m.group(1).strip(), {})
            for b in bindings:
                table[int(b.group(1))] = b.group(2).strip()
    return scoped
