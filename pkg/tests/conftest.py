import pytest


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n][1])


@pytest.fixture(scope="session")
def fisher():
    from evans_lab.problem import fisher_problem

    return fisher_problem()
