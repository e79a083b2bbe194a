import pytest

_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(number, title): numbered acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    failed_setup = rep.when == "setup" and not rep.passed
    if rep.when == "call" or failed_setup:
        number, title = marker.args
        detail = getattr(item, "acceptance_detail", "")
        _ACCEPTANCE.append((number, title, rep.passed, detail, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, passed, detail, duration in sorted(_ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] {number}. {title} ({duration:.2f}s)"
        if detail:
            line += f": {detail}"
        terminalreporter.write_line(line)
