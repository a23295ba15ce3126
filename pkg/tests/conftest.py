"""Shared fixtures and the per-criterion acceptance summary."""

from __future__ import annotations

import numpy as np
import pytest

_CRITERIA: dict[int, list[tuple[str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): test belongs to acceptance criterion k")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marks = [kw for kw in report.keywords if kw.startswith("criterion_")]
    for m in marks:
        k = int(m.split("_", 1)[1])
        if hasattr(report, "wasxfail"):
            outcome = "xfail"
        else:
            outcome = report.outcome
        _CRITERIA.setdefault(k, []).append((report.nodeid.split("::")[-1], outcome))


def pytest_collection_modifyitems(items):
    for item in items:
        for mark in item.iter_markers("criterion"):
            item.keywords[f"criterion_{mark.args[0]}"] = True


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        results = _CRITERIA[k]
        bad = [name for name, o in results if o not in ("passed",)]
        status = "PASS" if not bad else "FAIL"
        extra = f" (not met: {', '.join(bad)})" if bad else ""
        terminalreporter.write_line(f"criterion {k}: {status} [{len(results)} tests]{extra}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
