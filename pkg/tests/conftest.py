import os

import pytest
from hypothesis import settings

from ergmphase.multiplicity import get_tables

settings.register_profile("default", deadline=None, max_examples=60)
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def tables100():
    return get_tables(100)


@pytest.fixture(scope="session")
def tables50():
    return get_tables(50)


@pytest.fixture
def report(request):
    """Record one acceptance line; the terminal summary prints them together."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(number, ok, text):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
