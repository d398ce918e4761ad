import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record a named acceptance check; the outcome is set by the test's result."""
    registry = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(number: int, summary: str) -> dict:
        entry = {"summary": summary, "details": [], "passed": False}
        registry[number] = entry
        return entry

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and "criterion" in item.fixturenames:
        registry = item.config.stash.get(ACCEPTANCE, {})
        number = getattr(item.function, "criterion_number", None)
        if number in registry:
            registry[number]["passed"] = report.passed


def pytest_terminal_summary(terminalreporter, config):
    registry = config.stash.get(ACCEPTANCE, {})
    if not registry:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(registry):
        entry = registry[number]
        status = "PASS" if entry["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {entry['summary']}")
        for line in entry["details"]:
            terminalreporter.write_line(f"               {line}")
