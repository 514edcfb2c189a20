import time
from contextlib import contextmanager

import pytest

_LINES: list[str] = []


class Criterion:
    """Records one acceptance criterion: notes collected while it runs, then PASS or FAIL."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.notes: list[str] = []

    def note(self, text: str) -> None:
        self.notes.append(text)


@contextmanager
def _criterion(number: int, title: str):
    rec = Criterion(number, title)
    t0 = time.perf_counter()
    status = "FAIL"
    try:
        yield rec
        status = "PASS"
    finally:
        detail = "; ".join(rec.notes)
        line = f"criterion {number:2d} {status}: {title} ({time.perf_counter() - t0:.1f} s) {detail}".rstrip()
        _LINES.append(line)
        print(line)


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
