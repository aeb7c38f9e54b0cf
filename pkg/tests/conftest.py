"""Shared pytest hooks: collects acceptance outcomes and prints one line per criterion."""

from collections import defaultdict

import pytest

ACCEPTANCE_TITLES = {
    1: "strip convergence orders",
    2: "GMRES iteration counts",
    3: "self-convergence orders (kite, q2, q3, q4)",
    4: "energy balance sweep",
    5: "oracle equivalence",
    6: "property suites",
}


def pytest_configure(config):
    config._acceptance = defaultdict(list)


@pytest.fixture
def record(request):
    """``record(criterion, name, passed, detail)`` stores one sub-check outcome."""
    store = request.config._acceptance

    def _record(criterion: int, name: str, passed: bool, detail: str) -> None:
        store[criterion].append((name, bool(passed), detail))
        print(f"criterion {criterion} / {name}: {'PASS' if passed else 'FAIL'}  {detail}")

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = getattr(config, "_acceptance", None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(store):
        subs = store[crit]
        ok = all(p for _, p, _ in subs)
        failed = [f"{n} ({d})" for n, p, d in subs if not p]
        tail = "; ".join(failed) if failed else "; ".join(f"{n}: {d}" for n, _, d in subs)
        terminalreporter.write_line(
            f"CRITERION {crit} {'PASS' if ok else 'FAIL'}  {ACCEPTANCE_TITLES.get(crit, '')}"
            f"  [{sum(p for _, p, _ in subs)}/{len(subs)} sub-checks]  {tail}"
        )
