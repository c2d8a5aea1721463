import math
import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def circular(T=45.0, direction=-1, phi0=0.0, periods=1, r=0.1, gamma=1.0):
    return dict(kind="circular", r=r, gamma=gamma, T=T, periods=periods, direction=direction, phi0=phi0)


@pytest.fixture
def fig3a_cfg():
    return circular(T=100.0, direction=-1, phi0=math.pi, periods=4)


_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance():
    """Registry of (criterion -> [(check, ok, detail)]) printed at the end of the run."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[k]
        ok = all(p[1] for p in parts)
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}")
        for name, good, detail in parts:
            terminalreporter.write_line(f"    {'ok  ' if good else 'FAIL'} {name}: {detail}")
