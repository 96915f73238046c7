from __future__ import annotations

import numpy as np
import pytest

from fbpde import cubic, perona_malik

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


class AcceptanceLog:
    """Collects one verdict per acceptance criterion for the terminal summary."""

    def record(self, criterion: int, ok: bool, detail: str = "") -> None:
        _ACCEPTANCE[criterion] = (bool(ok), detail)


@pytest.fixture(scope="session")
def acceptance() -> AcceptanceLog:
    return AcceptanceLog()


@pytest.fixture(scope="session")
def cubic_phi():
    return cubic()


@pytest.fixture(scope="session")
def pm_phi():
    return perona_malik()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
