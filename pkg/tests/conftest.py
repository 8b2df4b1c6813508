"""Collects acceptance results and prints one PASS/FAIL line per criterion."""
from collections import defaultdict

import pytest

_RESULTS = defaultdict(list)

TITLES = {
    1: "identity suite",
    2: "sampler fidelity",
    3: "analytic vs Monte Carlo",
    4: "sharp rate slopes",
    5: "leading constant",
    6: "remainder order",
    7: "envelope band",
    8: "determinism",
}


@pytest.fixture
def acceptance():
    """``acceptance(criterion, ok, detail)`` records one checked case."""

    def record(criterion: int, ok: bool, detail: str):
        _RESULTS[criterion].append((bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_RESULTS):
        cases = _RESULTS[crit]
        ok = all(c[0] for c in cases)
        failed = [d for good, d in cases if not good]
        shown = failed if failed else [d for _, d in cases]
        tr.write_line(f"criterion {crit} ({TITLES.get(crit, '?')}): {'PASS' if ok else 'FAIL'} | " + "; ".join(shown))
