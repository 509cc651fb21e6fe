"""Shared test configuration: acceptance reporting and warning hygiene."""

import warnings

# the sandbox TBB is older than numba wants; the workqueue layer is fine
warnings.filterwarnings("ignore", message=".*TBB.*")

ACCEPTANCE_RESULTS = []


def record_acceptance(name: str, passed: bool, detail: str):
    ACCEPTANCE_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        tag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{tag} {name}: {detail}")
