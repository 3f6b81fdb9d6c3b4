import numpy as np
import pytest

from sicampaign import ModelParams, Network, named_network, time_grid

NETWORKS = ("ER", "PL3", "PL2")


@pytest.fixture(scope="session")
def dists():
    return {name: named_network(name) for name in NETWORKS}


@pytest.fixture(scope="session")
def networks3(dists):
    return {name: Network.build(d, 3) for name, d in dists.items()}


@pytest.fixture(scope="session")
def defaults():
    return ModelParams()


@pytest.fixture(scope="session")
def grid():
    return time_grid(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# -- acceptance report ------------------------------------------------------

_CRITERIA: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture(scope="session")
def criterion():
    """``record(number, ok, detail)`` collects one sub-check of an acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _CRITERIA.setdefault(number, []).append((bool(ok), detail))
        print(f"criterion {number}: {'pass' if ok else 'FAIL'}  {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        checks = _CRITERIA[number]
        failed = [d for ok, d in checks if not ok]
        status = "PASS" if not failed else "FAIL"
        note = f"{len(checks)} checks" if not failed else "; ".join(failed)
        terminalreporter.write_line(f"criterion {number}: {status}  ({note})")
