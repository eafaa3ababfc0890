import json
import shutil
from pathlib import Path

import pytest

from zebra_smt.puzzle import bundled_dataset_path, find_puzzle, load_dataset

FIXTURES = Path(__file__).parent / "fixtures"
REPLAY = Path(__file__).parents[1] / "src" / "zebra_smt" / "data" / "replay" / "ostrich-race.json"

requires_z3 = pytest.mark.skipif(shutil.which("z3") is None, reason="z3 executable not on PATH")

_acceptance: dict[str, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(criterion): ties a test to an acceptance criterion")


@pytest.fixture(scope="session")
def dataset():
    return load_dataset(bundled_dataset_path())


@pytest.fixture(scope="session")
def houses(dataset):
    return find_puzzle(dataset, "three-houses")


@pytest.fixture(scope="session")
def ostriches(dataset):
    return find_puzzle(dataset, "ostrich-race")


@pytest.fixture(scope="session")
def pets(dataset):
    return find_puzzle(dataset, "synthetic-pets")


@pytest.fixture(scope="session")
def replay():
    return json.loads(REPLAY.read_text())


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text()


def pytest_runtest_logreport(report):
    marker = report.keywords.get("acceptance") if hasattr(report, "keywords") else None
    if marker is None or report.when not in ("setup", "call"):
        return
    for name, value in report.user_properties:
        if name == "criterion":
            outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
            if report.when == "call" or outcome != "PASS":
                _acceptance.setdefault(value, []).append(outcome)


def pytest_runtest_setup(item):
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda s: int(s[2:])):
        outcomes = _acceptance[name]
        verdict = "FAIL" if "FAIL" in outcomes else ("SKIP" if "SKIP" in outcomes else "PASS")
        terminalreporter.write_line(f"{name}: {verdict} ({len(outcomes)} check(s))")
