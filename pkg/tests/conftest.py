import numpy as np
import pytest

from obstreg import Lagrangian, ObstaclePair, ProblemSpec, solve
from obstreg.regularity import ReportOptions, build_theory, tonelli_report


def parabola_pair(n_ref=20001):
    return ObstaclePair("0.5 - 4*(x - 0.5)^2", 10, 0, 1, n_ref=n_ref)


@pytest.fixture(scope="session")
def taut_spec():
    return ProblemSpec(0, 1, 0, 0, Lagrangian.from_expression("v^2", 2), parabola_pair(), 2001)


@pytest.fixture(scope="session")
def taut_result(taut_spec):
    return solve(taut_spec)


@pytest.fixture(scope="session")
def taut_theory(taut_spec, taut_result):
    return build_theory(taut_spec, taut_result.energy, seed=0)


@pytest.fixture(scope="session")
def taut_report(taut_spec, taut_result, taut_theory):
    _, pipeline = taut_theory
    return tonelli_report(taut_spec, theory=pipeline, options=ReportOptions(seed=0),
                          u=taut_result.u, solve_result=taut_result)


@pytest.fixture(scope="session")
def sinh_spec():
    L = Lagrangian.from_expression("v^2 + u^2", 2)
    return ProblemSpec(0, 1, 0, np.sinh(1.0), L, ObstaclePair(-10, 10, 0, 1), 2001)


@pytest.fixture(scope="session")
def taut_tables(taut_theory):
    from obstreg.theory import default_lattice

    _, pipeline = taut_theory
    ks, eps = default_lattice(pipeline.tc)
    return ks, eps, pipeline.tabulate(ks, eps)


# --- acceptance summary --------------------------------------------------------

ACCEPTANCE = {}   # criterion number -> {"title", "outcomes", "notes"}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def _entry(item):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return None
    number, title = mark.args
    return ACCEPTANCE.setdefault(number, {"title": title, "outcomes": [], "notes": []})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    entry = _entry(item)
    if entry is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        entry["outcomes"].append((item.name, rep.passed))


@pytest.fixture
def note(request):
    """Attach a measured value to the acceptance line of the current test."""
    entry = _entry(request.node)

    def add(text):
        if entry is not None:
            entry["notes"].append(text)

    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        entry = ACCEPTANCE[number]
        ok = bool(entry["outcomes"]) and all(p for _, p in entry["outcomes"])
        failed = [name for name, p in entry["outcomes"] if not p]
        line = f"{'PASS' if ok else 'FAIL'}  C{number:<2} {entry['title']}"
        if entry["notes"]:
            line += "  [" + "; ".join(entry["notes"]) + "]"
        if failed:
            line += "  failing: " + ", ".join(failed)
        tr.write_line(line)
