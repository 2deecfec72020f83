from __future__ import annotations

from importlib import resources

import pytest


def fixture_text(name: str) -> str:
    return resources.files("statler.data.fixtures").joinpath(name).read_text(encoding="utf-8")


@pytest.fixture
def reader_example_text() -> str:
    return fixture_text("reader_example.txt")


@pytest.fixture
def writer_example_text() -> str:
    return fixture_text("writer_example.txt")


def split_reader_example(text: str) -> tuple[str, str, str]:
    """(state block, query, completion) of the transcribed reader example."""
    lines = text.rstrip("\n").split("\n")
    q = next(i for i, ln in enumerate(lines) if ln.startswith("# query: "))
    return "\n".join(lines[:q]), lines[q][len("# query: "):], "\n".join(lines[q + 1:])


def split_writer_example(text: str) -> tuple[str, str, str]:
    """(state before, update query, writer output) of the transcribed writer example."""
    return split_reader_example(text)


# --------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion in the summary

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record a criterion outcome: ``criterion(number, title, ok, detail)``."""

    def report(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number} [{title}]: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
        _CRITERIA[number] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
