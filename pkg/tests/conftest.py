import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one criterion: ``criterion(n, title, checks, info)`` where
    ``checks`` is a list of ``(label, passed, shown_value)``. Asserts all."""

    def record(n, title, checks, info=""):
        ok = all(bool(c[1]) for c in checks)
        parts = [f"{label}={value}{'' if passed else ' (x)'}" for label, passed, value in checks]
        line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: " + "; ".join(parts)
        if info:
            line += f" | {info}"
        _ACCEPTANCE_LINES[n] = line
        failed = [c[0] for c in checks if not c[1]]
        assert ok, f"criterion {n} failed checks: {failed}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[n])
