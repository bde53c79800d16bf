import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from affinepath.config import load_params  # noqa: E402

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def configs():
    return CONFIGS


@pytest.fixture
def cir_params():
    return load_params(CONFIGS / "cir.toml")


@pytest.fixture
def heston_params():
    return load_params(CONFIGS / "heston.toml")


@pytest.fixture
def general_params():
    return load_params(CONFIGS / "general.toml")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one summary line per acceptance criterion
_criteria = {}


@pytest.fixture
def record(request):
    def _record(detail):
        _criteria.setdefault(request.node.nodeid, {})["detail"] = detail

    return _record


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" in report.nodeid and report.when == "call":
        _criteria.setdefault(report.nodeid, {})["outcome"] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_criteria, key=lambda s: int(s.split("test_criterion_")[1].split("_")[0])):
        entry = _criteria[nodeid]
        number = nodeid.split("test_criterion_")[1].split("_")[0]
        status = "PASS" if entry.get("outcome") == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry.get('detail', '')}")
