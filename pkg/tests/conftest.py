import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record pass/fail for one acceptance criterion; the test's outcome decides."""
    holder = {}

    def register(number, title):
        holder["key"] = (number, title)
        ACCEPTANCE[(number, title)] = "FAIL"
    yield register
    key = holder.get("key")
    rep = getattr(request.node, "rep_call", None)
    if key is not None and rep is not None and rep.passed:
        ACCEPTANCE[key] = "PASS"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), status in sorted(ACCEPTANCE.items()):
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
