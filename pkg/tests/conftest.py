import numpy as np
import pytest

from comonotone.operators import OperatorSpec


def random_certified_matrix(rng, n, rho):
    """Matrix M with sym(M^{-1}) = rho I + P, P PSD with a zero eigenvalue.

    Its exact comonotonicity modulus is therefore ``rho``.
    """
    g = rng.standard_normal((n, n - 1))
    p = g @ g.T  # rank n-1, so lambda_min(P) = 0
    s = rng.standard_normal((n, n))
    k = s - s.T
    return np.linalg.inv(rho * np.eye(n) + p + k)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def certified_ops():
    gen = np.random.default_rng(7)
    ops = []
    for i in range(20):
        n = int(gen.integers(2, 7))
        rho = float(gen.uniform(-0.8, 0.8))
        m = random_certified_matrix(gen, n, rho)
        ops.append((OperatorSpec.linear(m, rho=rho, name=f"rand{i}"), rho))
    return ops


# --- acceptance summary -----------------------------------------------------------
# Tests marked ``criterion(n, title)`` are grouped; the terminal summary prints
# one PASS/FAIL line per criterion, failing if any of its checks failed.

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion grouping")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    mark = getattr(report, "criterion", None)
    if mark is None:
        return
    number, title = mark
    entry = _CRITERIA.setdefault(number, {"title": title, "failed": [], "count": 0})
    entry["count"] += 1
    if report.failed:
        entry["failed"].append(report.nodeid.split("::")[-1])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "FAIL" if e["failed"] else "PASS"
        line = f"criterion {number} {status}: {e['title']} ({e['count'] - len(e['failed'])}/{e['count']} checks)"
        if e["failed"]:
            line += " failing: " + ", ".join(e["failed"])
        tr.write_line(line)
