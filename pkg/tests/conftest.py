import pytest

from grantfree.system import SystemConfig


@pytest.fixture
def table1():
    """Reference operating point (N=2000, M=100, T=250, c=50) at K=100, L=120."""
    return SystemConfig()


@pytest.fixture
def small_cfg():
    return SystemConfig(n_users=500, n_antennas=50, active_count=20, pilot_len=40)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.rstrip("ab")), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
