import numpy as np
import pytest

from stmtd import _kernels
from stmtd.generators import random_instance
from stmtd.io import synthetic_instance


@pytest.fixture(params=_kernels.available_backends())
def backend(request):
    return _kernels.load_backend(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def synthetic():
    return synthetic_instance()


@pytest.fixture
def small_instance():
    return random_instance(np.random.default_rng(7), n=3)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_log.LINES):
            terminalreporter.write_line(line)
