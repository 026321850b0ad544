import pytest

from milnor.corpus import all_germs
from milnor.flows import clear_cache


@pytest.fixture(scope="session")
def corpus():
    return all_germs()


@pytest.fixture(autouse=True)
def _fresh_cache():
    clear_cache()
    yield


# Acceptance outcomes, reported in the terminal summary.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def acceptance():
    return ACCEPTANCE
