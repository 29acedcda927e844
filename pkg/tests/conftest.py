import pytest


@pytest.fixture(scope="session")
def verdict(request):
    """Record and print one acceptance line; returns the boolean for asserting."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        with capman.global_and_fixture_disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines")
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
