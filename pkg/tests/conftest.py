import pytest

_OUTCOMES = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if call.when == "setup" and call.excinfo is None:
        return
    if call.when == "teardown":
        return
    passed = call.excinfo is None
    if passed:
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    else:
        detail = str(call.excinfo.value).strip().splitlines()[0] if str(call.excinfo.value).strip() else call.excinfo.typename
    _OUTCOMES[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        title, passed, detail = _OUTCOMES[number]
        tr.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail}")


@pytest.fixture
def detail(request):
    """Attach a one-line result description to the acceptance summary."""

    def add(text):
        request.node.user_properties.append(("detail", text))

    return add
