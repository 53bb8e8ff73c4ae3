from __future__ import annotations

import pytest

from ksplus.synth import GB, PhaseSpec, TaskArchetype
from ksplus.trace import TaskExecutionTrace

_acceptance: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _acceptance.append((name, status, f"{report.duration:.2f}s"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, took in _acceptance:
        terminalreporter.write_line(f"{status:4}  {name}  ({took})")


def make_trace(mem, period=1.0, input_size=GB, execution_id="e0", task="t", workflow="w"):
    times = [i * period for i in range(len(mem))]
    return TaskExecutionTrace.from_samples(
        workflow, task, execution_id, input_size, zip(times, mem), sample_period=period
    )


@pytest.fixture
def two_phase_exact():
    """Zero-noise two-phase archetype: 5.1 GB for 8 s then 10.7 GB for 2 s at 1 GB input."""
    return TaskArchetype(
        "two-phase",
        (PhaseSpec(8e-9, 0.0, 0.6, 4.5 * GB), PhaseSpec(2e-9, 0.0, 1.2, 9.5 * GB)),
    )
