import sys
from collections import defaultdict
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CRITERIA = {
    1: "power speedup T^3 verified at depths 1..12, T^2 rejected",
    2: "injection: injective, lands in B, positive jumps, case-2 bound",
    3: "truncated bijection: halving, equal measures, residual bound",
    4: "subset condition and exact transfer of cell measures",
    5: "speedups preserve the measure of every piece",
    6: "ordered group example end to end",
    7: "odometer obstruction and clopen value sets",
    8: "tower invariants, mass identity, nesting",
    9: "tower copy with identity homeomorphism",
}

_outcomes: dict[int, list[bool]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    _outcomes[marker.args[0]].append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, label in CRITERIA.items():
        results = _outcomes.get(n)
        if results is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  {label}")


@pytest.fixture
def binary():
    from cantorspeed import InvariantMeasure, OdometerSystem

    return InvariantMeasure(OdometerSystem((2,)))
