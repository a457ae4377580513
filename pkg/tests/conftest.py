import pytest

_DETAILS: dict[str, str] = {}
_OUTCOMES: dict[int, tuple[str, str]] = {}


@pytest.fixture
def detail(request):
    """Record a one-line summary for the acceptance criterion under test."""

    def note(text: str) -> None:
        _DETAILS[request.node.nodeid] = text

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not rep.failed:
        return
    n = marker.args[0]
    if rep.when == "call" or rep.failed:
        text = _DETAILS.get(item.nodeid, "")
        if rep.failed:
            msg = str(call.excinfo.value).splitlines()[0] if call.excinfo else "error"
            text = f"{text} | {msg}" if text else msg
        _OUTCOMES[n] = ("PASS" if rep.passed else "FAIL", text)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        status, text = _OUTCOMES[n]
        terminalreporter.write_line(f"criterion {n}: {status}: {text}")
