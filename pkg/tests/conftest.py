from pathlib import Path

import pytest

from ctxmed.descriptor import load_descriptor
from ctxmed.ontology import load_knowledge_base_file
from ctxmed.scenario import data_dir, load_scenario

DATA = data_dir()


@pytest.fixture(scope="session")
def data() -> Path:
    return DATA


@pytest.fixture(scope="session")
def kb():
    return load_knowledge_base_file(DATA / "kb.toml")


@pytest.fixture(scope="session")
def descriptors():
    return {p.stem: load_descriptor(p) for p in sorted(DATA.glob("*.xml"))}


@pytest.fixture
def travel():
    """Fresh (kb, scenario) for the failure scenario; scenarios are stateful."""

    def load(name="travel", **kw):
        return load_scenario(DATA / f"{name}.toml", **kw)

    return load


_CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def report(label: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'} {label}" + (f": {detail}" if detail else "")
        request.config.stash[_CRITERIA].append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: l.split(" ", 2)[1]):
            terminalreporter.write_line(line)
