import pytest

from dcm_emulator import REFERENCE_COEFFICIENTS, FaultWindow, run_closed_loop

FAULT_ONSET = 1_000_000_000
FAULT_HORIZON = 1_200_000_000
FAULT_DURATIONS = (15_000, 30_000, 60_000)


@pytest.fixture(scope="session")
def ref_coeffs():
    return REFERENCE_COEFFICIENTS


@pytest.fixture(scope="session")
def nominal_run():
    """Default closed loop, 100 rad/s, 1.5 s."""
    return run_closed_loop(REFERENCE_COEFFICIENTS)


@pytest.fixture(scope="session")
def fault_runs():
    """Nominal and faulted closed-loop runs sharing a 1.0 s fault onset."""
    runs = {0: run_closed_loop(REFERENCE_COEFFICIENTS, horizon=FAULT_HORIZON)}
    for d in FAULT_DURATIONS:
        runs[d] = run_closed_loop(
            REFERENCE_COEFFICIENTS, windows=[FaultWindow(FAULT_ONSET, d)], horizon=FAULT_HORIZON
        )
    return runs


ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    """Record one acceptance line, then assert it."""

    def record(key: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[key] = (bool(ok), detail)
        assert ok, f"criterion {key}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key:<4} {detail}")
