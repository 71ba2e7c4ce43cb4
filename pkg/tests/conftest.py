from __future__ import annotations

import numpy as np
import pytest

from eulerspec import _kernels

_CRITERION_LINES: list[str] = []


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Compile the integration kernels once so individual tests measure the
    # algorithms, not the JIT.
    _kernels.warm_up()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260817)


def record_criterion(name: str, passed: bool, detail: str) -> None:
    _CRITERION_LINES.append(f"{name}: {'PASS' if passed else 'FAIL'} — {detail}")


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
