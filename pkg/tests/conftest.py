import pytest

from cpdqsap import build_model, parse_instance

TINY_TEXT = """cpd 1
positions 2
rotamers 2 2
unary 1 1 1
unary 2 2 2
pair 1 1 2 2 3
pair 1 2 2 1 1
end
"""

ACCEPTANCE_LINES = []


@pytest.fixture
def tiny():
    return parse_instance(TINY_TEXT)


@pytest.fixture
def tiny_model(tiny):
    return build_model(tiny)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
