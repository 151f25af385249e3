import time

import pytest

from pillai_cert.pipeline import PipelineConfig, run_all

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def timed_canonical():
    start = time.perf_counter()
    cert = run_all(PipelineConfig())
    return cert, time.perf_counter() - start


@pytest.fixture(scope="session")
def canonical_certificate(timed_canonical):
    return timed_canonical[0]


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
