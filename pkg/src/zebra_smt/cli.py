"""Command-line entry point: solve, batch, stats and encode."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import yaml

from . import stats as stats_mod
from .agents import LiveClient, ReferenceClient, RunConfig, ScriptLibrary, run_feedback_loop
from .agents.clients import LlmClient
from .encoder import NoStructuredClues, encode
from .grader import SUMMARY_COLUMNS, grade_batch, grade_run
from .puzzle import DatasetError, Puzzle, bundled_dataset_path, find_puzzle, load_dataset
from .smt import SolverConfig, SolverNotFound
from .transcript import Recorder, StreamingRecorder, TranscriptWriter

EXIT_OK, EXIT_UNSOLVED, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

DETAIL_COLUMNS = [
    "config", "puzzle_id", "correct", "total", "partial_score", "solved",
    "rule", "converged", "attempts", "actions",
]


class ConfigError(Exception):
    pass


@dataclass
class ClientSpec:
    backend: str
    options: dict[str, Any] = field(default_factory=dict)

    def factory(self, base: Path) -> Callable[[Puzzle], LlmClient]:
        if self.backend == "reference":
            return ReferenceClient
        if self.backend == "scripted":
            path = self.options.get("path")
            if not path:
                raise ConfigError("scripted client needs a 'path'")
            try:
                library = ScriptLibrary.load(_resolve(base, path))
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot load scripted replies: {exc}") from None
            return library.client_for
        if self.backend == "live":
            missing = {"base_url", "model"} - set(self.options)
            if missing:
                raise ConfigError(f"live client needs {', '.join(sorted(missing))}")
            opts = {k: self.options[k] for k in ("base_url", "model", "api_key_env", "timeout") if k in self.options}
            return lambda _puzzle: LiveClient(**opts)
        raise ConfigError(f"unknown client backend {self.backend!r}")


@dataclass
class RunSetup:
    name: str
    client: ClientSpec
    run: RunConfig


@dataclass
class AppConfig:
    base: Path
    solver: SolverConfig
    setups: list[RunSetup]
    output_dir: Path
    dataset: Path | None = None
    concurrency: int = 1


def _resolve(base: Path, path: str) -> Path:
    """Resolve ``package:<rel>`` against the bundled data, else relative to ``base``."""
    if path.startswith("package:"):
        return Path(str(resources.files("zebra_smt") / "data" / path[len("package:"):]))
    p = Path(path)
    return p if p.is_absolute() else base / p


def _client_spec(raw: Any) -> ClientSpec:
    if not isinstance(raw, dict) or "backend" not in raw:
        raise ConfigError("client section must name exactly one 'backend'")
    opts = {k: v for k, v in raw.items() if k != "backend"}
    return ClientSpec(str(raw["backend"]), opts)


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    base = path.parent
    try:
        solver = SolverConfig.from_dict(raw.get("solver"))
        setups = []
        entries = raw.get("configurations") or [{}]
        for i, entry in enumerate(entries):
            client = _client_spec(entry.get("client", raw.get("client")))
            run_raw = {**(raw.get("run") or {}), **(entry.get("run") or {})}
            run = RunConfig.from_dict(run_raw, solver)
            name = str(entry.get("name") or run.model_name or f"config-{i + 1}")
            setups.append(RunSetup(name, client, run))
        concurrency = int(raw.get("concurrency", 1))
        if concurrency < 1:
            raise ValueError("concurrency must be at least 1")
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    names = [s.name for s in setups]
    if len(set(names)) != len(names):
        raise ConfigError("configuration names must be unique")
    out = _resolve(base, str(raw.get("output_dir", "out")))
    dataset = _resolve(base, str(raw["dataset"])) if raw.get("dataset") else None
    return AppConfig(base, solver, setups, out, dataset, concurrency)


def _temperature_label(run: RunConfig) -> str:
    temps = run.attempt_temperatures
    return f"{temps[0]:g}" if len(temps) == 1 else "Var."


def _load_puzzles(path: Path | None) -> list[Puzzle]:
    return load_dataset(path or bundled_dataset_path())


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


# -- commands --------------------------------------------------------------


def cmd_solve(args) -> int:
    try:
        cfg = load_config(args.config)
        puzzles = _load_puzzles(Path(args.dataset) if args.dataset else cfg.dataset)
        puzzle = find_puzzle(puzzles, args.puzzle)
        setup = cfg.setups[0]
        client = setup.client.factory(cfg.base)(puzzle)
        out = cfg.output_dir / puzzle.id
        writer = TranscriptWriter(out / "transcript.jsonl")
    except OSError as exc:
        _err(f"output directory not writable: {exc}")
        return EXIT_CONFIG
    except (ConfigError, DatasetError, KeyError) as exc:
        _err(exc.args[0] if exc.args else str(exc))
        return EXIT_CONFIG

    recorder = StreamingRecorder(puzzle.id, writer)
    try:
        result = run_feedback_loop(puzzle, client, setup.run, recorder)
    except SolverNotFound as exc:
        _err(str(exc))
        return EXIT_SOLVER
    report, rule = grade_run(puzzle, result)
    recorder.record("grade", rule=rule, report=report.to_dict())
    (out / "result.json").write_text(result.dumps() + "\n", encoding="utf-8")
    (out / "grade.json").write_text(
        json.dumps({"rule": rule, **report.to_dict()}, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    status = "converged" if result.converged else "not converged"
    print(
        f"{puzzle.id}: {status} after {result.total_actions} action(s) in {len(result.attempts)} attempt(s); "
        f"score {report.correct_matches}/{report.total_matches} ({float(report.partial_score):.3f})"
    )
    return EXIT_OK if report.solved_fully else EXIT_UNSOLVED


def _csv(rows: list[list[Any]], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def run_batch(cfg: AppConfig, puzzles: list[Puzzle]) -> tuple[str, str, dict[str, str]]:
    """Run every configuration over every puzzle.

    Returns the summary CSV, the detail CSV and one transcript per
    configuration, all assembled in dataset order once every run is done.
    """
    summary_rows, detail_rows, transcripts = [], [], {}
    for setup in cfg.setups:
        factory = setup.client.factory(cfg.base)
        clients = [factory(p) for p in puzzles]

        def one(i: int):
            rec = Recorder(puzzles[i].id)
            return rec, run_feedback_loop(puzzles[i], clients[i], setup.run, rec)

        with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
            runs = list(pool.map(one, range(len(puzzles))))

        summary, rows = grade_batch(
            [(p, r) for p, (_, r) in zip(puzzles, runs)],
            setup.name, _temperature_label(setup.run), setup.run.decomposition_enabled,
        )
        lines = []
        seq = 0
        for row, (rec, _) in zip(rows, runs):
            rec.record("grade", rule=row.rule, report=row.report.to_dict())
            for ev in rec.events:
                seq += 1
                lines.append(json.dumps({"seq": seq, **ev}, sort_keys=True, ensure_ascii=False))
        transcripts[setup.name] = "\n".join(lines) + "\n"
        summary_rows.append(summary.cells())
        for row in rows:
            rep = row.report
            detail_rows.append([
                setup.name, row.puzzle_id, rep.correct_matches, rep.total_matches,
                str(rep.partial_score), rep.solved_fully, row.rule, row.converged, row.attempts, row.actions,
            ])
    return _csv(summary_rows, SUMMARY_COLUMNS), _csv(detail_rows, DETAIL_COLUMNS), transcripts


def cmd_batch(args) -> int:
    try:
        cfg = load_config(args.config)
        puzzles = load_dataset(args.dataset)
        if not puzzles:
            raise ConfigError(f"dataset {args.dataset} contains no puzzles")
        if args.concurrency:
            cfg.concurrency = args.concurrency
        summary, detail, transcripts = run_batch(cfg, puzzles)
    except (ConfigError, DatasetError, KeyError) as exc:
        _err(exc.args[0] if exc.args else str(exc))
        return EXIT_CONFIG
    except SolverNotFound as exc:
        _err(str(exc))
        return EXIT_SOLVER

    out = cfg.output_dir
    (out / "transcripts").mkdir(parents=True, exist_ok=True)
    for name, text in transcripts.items():
        (out / "transcripts" / f"{name}.jsonl").write_text(text, encoding="utf-8")
    (out / "results_detail.csv").write_text(detail, encoding="utf-8")
    (out / "results.csv").write_text(summary, encoding="utf-8")
    sys.stdout.write(summary)
    return EXIT_OK


def cmd_stats(args) -> int:
    try:
        report = stats_mod.compute_stats(stats_mod.load_pairs(args.pairs))
    except (OSError, stats_mod.StatsError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    sys.stdout.write(stats_mod.render_stats(report))
    return EXIT_OK


def cmd_encode(args) -> int:
    try:
        puzzle = find_puzzle(_load_puzzles(Path(args.dataset) if args.dataset else None), args.puzzle)
        script = encode(puzzle)
    except NoStructuredClues:
        _err(f"puzzle {args.puzzle!r} has no structured clues to encode")
        return EXIT_CONFIG
    except (DatasetError, KeyError) as exc:
        _err(exc.args[0] if exc.args else str(exc))
        return EXIT_CONFIG
    sys.stdout.write(script.text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zebra-smt", description="Solve logic grid puzzles with an LLM and an SMT solver.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the agent loop on one puzzle")
    p.add_argument("--puzzle", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--dataset")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("batch", help="run every configuration over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--concurrency", type=int)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("stats", help="agreement statistics for auto/human grade pairs")
    p.add_argument("--pairs", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("encode", help="print the reference SMT-LIB encoding of a puzzle")
    p.add_argument("--puzzle", required=True)
    p.add_argument("--dataset")
    p.set_defaults(func=cmd_encode)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
