import numpy as np
import pytest


def random_psd(rng: np.random.Generator, p: int, scale_spread: float = 1.0) -> np.ndarray:
    """Well-conditioned random PSD matrix with strictly positive diagonal."""
    a = rng.standard_normal((p, 2 * p + 2))
    cov = a @ a.T / (2 * p + 2)
    if scale_spread != 1.0:
        d = np.exp(rng.uniform(-scale_spread, scale_spread, size=p))
        cov = cov * np.outer(d, d)
    return 0.5 * (cov + cov.T)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _ACCEPTANCE_RESULTS.append((name, report.outcome.upper()))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS:
        status = "PASS" if outcome == "PASSED" else outcome
        terminalreporter.write_line(f"{status:4s}  {name}")
