import numpy as np
import pytest

from flatgp import accel


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    # compile the numba kernels once so timed tests measure math, not JIT
    accel.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    # surface the per-criterion lines even when stdout capture is on
    import sys

    for name, mod in list(sys.modules.items()):
        if name.rpartition(".")[2] == "test_acceptance" and getattr(mod, "RESULTS", None):
            terminalreporter.section("acceptance criteria")
            for line in mod.RESULTS:
                terminalreporter.write_line(line)
            break
