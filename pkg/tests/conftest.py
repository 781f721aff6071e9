import pytest

_verdicts: dict[int, str] = {}


def _line(number: int, name: str, ok: bool, detail: str = "") -> str:
    return f"criterion {number:>2} {name}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")


@pytest.fixture
def verdict(request):
    """Record the PASS/FAIL line for the test's acceptance criterion and assert on it."""
    number, name = request.node.get_closest_marker("acceptance").args

    def record(ok: bool, detail: str = "") -> None:
        line = _line(number, name, ok, detail)
        _verdicts[number] = line
        print(line)
        assert ok, line

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark and rep.when == "call" and rep.failed and mark.args[0] not in _verdicts:
        _verdicts[mark.args[0]] = _line(*mark.args, False, f"error: {call.excinfo.typename}")


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_verdicts):
            terminalreporter.write_line(_verdicts[number])
