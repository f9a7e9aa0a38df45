import math

import pytest

from dotchain import DeviceParams


@pytest.fixture
def pulse_params():
    return DeviceParams(t=0.12, j_e=0.1, u=6.1, k=3.05)


@pytest.fixture
def theta33():
    import numpy as np

    return np.linspace(0.0, math.pi, 33)


_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    label = props.get("criterion")
    if label is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.outcome == "passed" else "FAIL"
        _ACCEPTANCE[label] = (status, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
        status, detail = _ACCEPTANCE[label]
        terminalreporter.write_line(f"{status}  {label}  {detail}")
