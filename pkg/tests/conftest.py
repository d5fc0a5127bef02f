import pytest

from aoma.model import ModelParams


@pytest.fixture
def fig5a():
    return ModelParams(p=0.2, q=0.3, p_s=0.9, beta=0.8, lam=8.0)


@pytest.fixture
def sym():
    return ModelParams(p=0.25, q=0.25, p_s=0.9, beta=0.5, lam=8.0)


# one line per acceptance criterion, shown at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number} ({title}): {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
