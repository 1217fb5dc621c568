import os

import pytest
from hypothesis import HealthCheck, settings

from switchscreen.net import parse_network

DATA = os.path.join(os.path.dirname(__file__), "data")

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def net1():
    # activating 3-cycle 0 -> 1 -> 2 -> 0
    return parse_network("x0 : (x2)\nx1 : (x0)\nx2 : (x1)\n")


@pytest.fixture(scope="session")
def net12():
    with open(os.path.join(DATA, "net12.txt")) as fh:
        return parse_network(fh.read())


@pytest.fixture(scope="session")
def ctx1(net1):
    from switchscreen.stg import ParameterContext
    return ParameterContext.build(net1)


@pytest.fixture(scope="session")
def ctx12(net12):
    from switchscreen.stg import ParameterContext
    return ParameterContext.build(net12)


# acceptance verdicts, printed again at the end of the run
VERDICTS: list = []


def record(label: str, ok: bool, detail: str = "") -> bool:
    line = f"{label}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
    VERDICTS.append(line)
    print("\n" + line, flush=True)
    return ok


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
