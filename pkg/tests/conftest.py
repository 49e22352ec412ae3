import pytest

from bilgamma.bgcore import BilateralGammaParams, MarketParams
from bilgamma.measures import solve_bilateral_esscher, solve_mmm

DAX = BilateralGammaParams(1.55, 133.96, 0.94, 88.92)


@pytest.fixture(scope="session")
def dax():
    return DAX


@pytest.fixture(scope="session")
def flat_market():
    return MarketParams(r=0.0, q=0.0, s0=5000.0)


@pytest.fixture(scope="session")
def rate_market():
    return MarketParams(r=0.0012, q=0.0, s0=5000.0)


@pytest.fixture(scope="session")
def bilateral_law(dax, flat_market):
    return solve_bilateral_esscher(dax, flat_market).law


@pytest.fixture(scope="session")
def mmm_solution(dax, rate_market):
    return solve_mmm(dax, rate_market)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects one status line per acceptance criterion for the terminal summary."""
    log = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(tag: str, ok: bool, detail: str) -> bool:
        line = f"{tag:5s} {'PASS' if ok else 'FAIL'}  {detail}"
        log.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s[2:5].strip())):
            terminalreporter.write_line(line)
