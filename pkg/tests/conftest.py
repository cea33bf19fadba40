"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import re

import pytest

_TITLES = {}
_DETAILS = {}
_OUTCOMES = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = re.match(r"test_c(\d\d)_", item.name)
        if m and item.module.__name__.endswith("test_acceptance"):
            doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
            _TITLES[int(m.group(1))] = doc


@pytest.fixture
def measured(request):
    """Per-criterion dict of measured values, echoed in the summary line."""
    m = re.match(r"test_c(\d\d)_", request.node.name)
    key = int(m.group(1)) if m else request.node.name
    return _DETAILS.setdefault(key, {})


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_c(\d\d)_", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    failed = report.failed or (report.when == "call" and report.skipped)
    if failed:
        _OUTCOMES[n] = "FAIL"
    elif report.when == "call" and n not in _OUTCOMES:
        _OUTCOMES[n] = "PASS"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def pytest_terminal_summary(terminalreporter):
    if not _TITLES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_TITLES):
        status = _OUTCOMES.get(n, "NOT RUN")
        detail = ", ".join(f"{k}={_fmt(v)}" for k, v in _DETAILS.get(n, {}).items())
        tr.write_line(f"[{status}] {n:2d}. {_TITLES[n]}" + (f" ({detail})" if detail else ""))
