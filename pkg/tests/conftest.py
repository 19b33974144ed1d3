import pytest

from crossdoc.corpus import load_corpus
from crossdoc.kg import load_kg_dir
from crossdoc.cli import fixture_kg_dir
from importlib import resources
from pathlib import Path


FIXTURES = Path(str(resources.files("crossdoc") / "data" / "fixtures"))


@pytest.fixture(scope="session")
def kg():
    return load_kg_dir(fixture_kg_dir())


@pytest.fixture(scope="session")
def fixture_corpus():
    bags, vocab = load_corpus(FIXTURES / "bags.jsonl", FIXTURES / "relations.txt")
    return {b.bag_id: b for b in bags}, vocab


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("#")[1].split()[0])):
            terminalreporter.write_line(line)
