"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import pytest

_outcomes = {}  # criterion -> list of (clause, passed, detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, clause): acceptance criterion checked by this test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, clause = marker.args
    passed = call.excinfo is None
    detail = dict(item.user_properties).get("detail", "")
    _outcomes.setdefault(number, []).append((clause, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_outcomes):
        clauses = _outcomes[number]
        ok = all(p for _, p, _ in clauses)
        failed = [c for c, p, _ in clauses if not p]
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += "  (failing: " + ", ".join(failed) + ")"
        tr.write_line(line)
        for clause, passed, detail in clauses:
            if detail:
                tr.write_line(f"    {'ok  ' if passed else 'FAIL'} {clause}: {detail}")


@pytest.fixture
def detail(record_property):
    """Attach a one-line measurement to the acceptance summary."""

    def _set(text):
        record_property("detail", text)

    return _set
