"""Append-only JSON-lines transcripts of agent runs.

Each record carries a ``seq`` number, the puzzle id and an event ``kind``
(prompt, completion, client-error, solver-outcome, decision, grade). There
are no timestamps, so replaying a run reproduces its transcript byte for byte.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any, Iterable

EVENT_KINDS = ("prompt", "completion", "client-error", "solver-outcome", "decision", "grade")


def dumps_event(event: dict[str, Any]) -> str:
    return json.dumps(event, sort_keys=True, ensure_ascii=False)


class Recorder:
    """Buffers the events of one run in memory."""

    def __init__(self, puzzle_id: str):
        self.puzzle_id = puzzle_id
        self.events: list[dict[str, Any]] = []

    def record(self, kind: str, **data: Any) -> None:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown transcript event {kind!r}")
        self.events.append({"kind": kind, "puzzle": self.puzzle_id, **data})


class TranscriptWriter:
    """Numbers events and appends them to a file as they arrive."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")
        self.seq = 0
        self._lock = threading.Lock()

    def write(self, events: Iterable[dict[str, Any]]) -> None:
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            for ev in events:
                self.seq += 1
                fh.write(dumps_event({"seq": self.seq, **ev}) + "\n")


class StreamingRecorder(Recorder):
    """A recorder that writes each event through immediately."""

    def __init__(self, puzzle_id: str, writer: TranscriptWriter):
        super().__init__(puzzle_id)
        self.writer = writer

    def record(self, kind: str, **data: Any) -> None:
        super().record(kind, **data)
        self.writer.write([self.events[-1]])


def read_transcript(path: str | Path) -> list[dict[str, Any]]:
    events = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            events.append(json.loads(line))
    return events
