import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def acceptance(request):
    """record(k, passed, detail): one result line per acceptance criterion."""
    results = request.config.stash[_RESULTS]

    def record(k: int, passed: bool, detail: str):
        line = f"criterion {k:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        results[k] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
