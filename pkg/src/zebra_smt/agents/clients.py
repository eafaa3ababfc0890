"""Language-model clients: scripted replay, live HTTP and the reference encoder."""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import httpx

from ..encoder import encode
from ..puzzle import Puzzle

DECOMPOSE_REQUEST = "Decompose the clues of this puzzle."


class ClientError(Exception):
    """Transport-level failure; the loop retries once, then fails the attempt."""


class LlmClient(Protocol):
    def complete(self, messages: list[dict[str, str]], temperature: float) -> str: ...


@dataclass
class ScriptedClient:
    """Replays canned replies by request ordinal, deterministically and offline.

    A reply entry is either text or ``{"error": message}``, which raises
    :class:`ClientError` for that request. Requests past the end of the list
    get ``default``; without a default they fail.
    """

    responses: list[str | dict[str, str]] = field(default_factory=list)
    default: str | None = None
    calls: int = 0

    def __post_init__(self):
        self._lock = threading.Lock()

    def complete(self, messages: list[dict[str, str]], temperature: float) -> str:
        with self._lock:
            ordinal = self.calls
            self.calls += 1
        if ordinal < len(self.responses):
            entry = self.responses[ordinal]
        elif self.default is not None:
            entry = self.default
        else:
            raise ClientError(f"scripted client has no reply for request {ordinal + 1}")
        if isinstance(entry, dict):
            raise ClientError(str(entry.get("error", "scripted failure")))
        return entry

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ScriptedClient":
        responses = raw.get("responses", [])
        if isinstance(responses, dict):
            # {ordinal: text}, ordinals 1-based; gaps fall back to the default
            ordered = sorted((int(k), v) for k, v in responses.items())
            last = ordered[-1][0] if ordered else 0
            table = dict(ordered)
            fill = raw.get("default")
            responses = [table.get(i, fill if fill is not None else {"error": "no scripted reply"})
                         for i in range(1, last + 1)]
        return cls(list(responses), raw.get("default"))

    @classmethod
    def from_transcript(cls, events: list[dict[str, Any]], puzzle_id: str | None = None) -> "ScriptedClient":
        """Rebuild the replies a recorded run received, client errors included."""
        responses: list[str | dict[str, str]] = []
        for ev in sorted(events, key=lambda e: e.get("seq", 0)):
            if puzzle_id is not None and ev.get("puzzle") != puzzle_id:
                continue
            if ev.get("kind") == "completion":
                responses.append(ev["text"])
            elif ev.get("kind") == "client-error":
                responses.append({"error": ev.get("message", "")})
        return cls(responses)


@dataclass
class ScriptLibrary:
    """Scripted replies for several puzzles, loaded from one file."""

    by_puzzle: dict[str, dict[str, Any]]
    fallback: dict[str, Any] | None = None

    def client_for(self, puzzle: Puzzle) -> ScriptedClient:
        raw = self.by_puzzle.get(puzzle.id, self.fallback)
        if raw is None:
            raise KeyError(f"no scripted replies for puzzle {puzzle.id!r}")
        return ScriptedClient.from_dict(raw)

    @classmethod
    def load(cls, path: str | Path) -> "ScriptLibrary":
        """Accepts ``{"puzzle", "responses"}``, ``{"puzzles": {...}}`` or a transcript (.jsonl)."""
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix == ".jsonl":
            events = [json.loads(line) for line in text.splitlines() if line.strip()]
            ids = dict.fromkeys(ev["puzzle"] for ev in events if "puzzle" in ev)
            by_puzzle = {}
            for pid in ids:
                replay = ScriptedClient.from_transcript(events, pid)
                by_puzzle[pid] = {"responses": replay.responses}
            return cls(by_puzzle)
        raw = json.loads(text)
        if "puzzles" in raw:
            return cls(dict(raw["puzzles"]), raw.get("fallback"))
        if "puzzle" in raw:
            return cls({raw["puzzle"]: raw})
        return cls({}, raw)


@dataclass
class LiveClient:
    """Chat-completion client for an OpenAI-style HTTP endpoint."""

    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 120.0
    transport: httpx.BaseTransport | None = None

    def complete(self, messages: list[dict[str, str]], temperature: float) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise ClientError(f"environment variable {self.api_key_env} is not set")
        body = {"model": self.model, "messages": messages, "temperature": temperature}
        try:
            with httpx.Client(base_url=self.base_url, timeout=self.timeout, transport=self.transport) as http:
                resp = http.post("/chat/completions", json=body, headers={"Authorization": f"Bearer {key}"})
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise ClientError(f"chat request failed: {exc}") from exc
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ClientError(f"malformed chat response: {exc!r}") from exc


@dataclass
class ReferenceClient:
    """Answers every request with the reference encoding of one puzzle."""

    puzzle: Puzzle
    calls: int = 0

    def complete(self, messages: list[dict[str, str]], temperature: float) -> str:
        self.calls += 1
        if messages and messages[-1]["content"].startswith(DECOMPOSE_REQUEST):
            return "\n".join(self.puzzle.clues)
        return "```smt2\n" + encode(self.puzzle).text + "```\n"
