import numpy as np
import pytest

from rsac import FrequencyHistogram

# Shakespeare word-use tail sums S_1..S_20
SHAKESPEARE_TAIL = [31534, 17158, 12815, 10523, 9060, 8017, 7180, 6542, 6023, 5593,
                    5229, 4924, 4665, 4423, 4200, 4013, 3832, 3653, 3523, 3396]


@pytest.fixture(scope="session")
def shakespeare():
    return FrequencyHistogram.from_tail_sums(SHAKESPEARE_TAIL)


@pytest.fixture
def small_hist():
    return FrequencyHistogram.from_mapping({1: 3, 2: 2, 3: 1})


def random_tail(rng, n, decay=(0.3, 0.9), scale=1e4):
    """Strictly decreasing positive tail sums with geometric-ish decay."""
    ratios = rng.uniform(*decay, size=n - 1)
    return scale * np.concatenate([[1.0], np.cumprod(ratios)])


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
