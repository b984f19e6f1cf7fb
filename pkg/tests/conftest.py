import pytest

from memstab import build_unit_square_mesh, paper_params

ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def params():
    return paper_params()


@pytest.fixture(scope="session")
def mesh8():
    return build_unit_square_mesh(8)


@pytest.fixture(scope="session")
def mesh16():
    return build_unit_square_mesh(16)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
