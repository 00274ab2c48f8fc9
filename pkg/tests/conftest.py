import numpy as np
import pytest

from _helpers import ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile (or load cached) kernels once so timed sections measure runtime only."""
    from tropsand import _kernels

    pts = np.array([3, 5], np.int64)
    _kernels.relax_length(pts, 16, 100)
    _kernels.trial_lengths(2, 0, 4, np.uint64(1), 62, 100)
    _kernels.raster_lengths(2, 1 << 62, 100)
    _kernels.avalanche_lengths(1, 0, 4, np.uint64(1), 62)
    _kernels.sample_block(2, 0, 4, np.uint64(1), 62)
    return True
