import pytest

from orma import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # JIT compilation happens here so timed tests measure the algorithms
    kernels.warmup()


# one PASS/FAIL line per acceptance criterion at the end of the run
_CRITERIA: dict[str, list[bool]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if "criterion" not in name:
        return
    key = name.split("criterion_")[1].split("_")[0]
    _CRITERIA.setdefault(key, []).append(report.passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: int(k)):
        outcomes = _CRITERIA[key]
        status = "PASS" if all(outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {key}: {status}")
