import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path_factory, monkeypatch):
    # never touch ~/.cache from the test suite
    root = tmp_path_factory.getbasetemp() / "factor-cache"
    monkeypatch.setenv("SASSDPR_CACHE_DIR", str(root))
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def butter2():
    """Order-2 Butterworth prototype at 0.1 pi."""
    from sassdpr.spectral import design_prototype_lowpass
    return design_prototype_lowpass(2, 0.1 * np.pi)


def pytest_terminal_summary(terminalreporter):
    from _gate import LINES
    if LINES:
        terminalreporter.section("acceptance gate")
        for line in LINES:
            terminalreporter.write_line(line)
