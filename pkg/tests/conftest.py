import numpy as np
import pytest

from kldetect.fixture import fixture_path
from kldetect.flowdata import FlowTable, SplitSpec, apply_minmax, fit_minmax, load_csv, train_test_split


def make_table(X, y, names=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    names = names or [f"f{j}" for j in range(X.shape[1])]
    return FlowTable(tuple(names), X, np.asarray(y, dtype=np.int64))


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(c) for c in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture(scope="session")
def fixture_csv():
    return fixture_path()


@pytest.fixture(scope="session")
def fixture_split(fixture_csv):
    """Scaled (train, test) partitions of the shipped fixture, seed 0."""
    table = load_csv(fixture_csv)
    train, test = train_test_split(table, SplitSpec(0.8, 0, True))
    params = fit_minmax(train)
    return apply_minmax(train, params), apply_minmax(test, params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance reporting

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "SKIP" if report.skipped else "PASS" if report.passed else "FAIL"
        prev = _CRITERIA.get(number, (title, "PASS", ""))[1]
        if prev == "FAIL" or (prev == "SKIP" and status == "PASS"):
            status = prev
        detail = ""
        if report.skipped and isinstance(report.longrepr, tuple):
            detail = report.longrepr[2]
        _CRITERIA[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[number]
        line = f"criterion {number:>2} {status}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
