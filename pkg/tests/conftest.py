from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hammerstein.certificate import certify  # noqa: E402
from hammerstein.config import load  # noqa: E402
from hammerstein.hypothesis import classify  # noqa: E402

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA[number] = ("PASS" if rep.passed else "FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        verdict, title = _CRITERIA[number]
        terminalreporter.write_line(f"{verdict} criterion {number:2d}: {title}")


class Pipeline:
    def __init__(self, name: str, lambdas=None):
        self.config = load(name)
        self.kernel = self.config.kernel
        self.report = classify(self.kernel, self.config.cones)
        opts = self.config.certify
        self.cert = certify(self.kernel, self.report, self.config.f,
                            lambdas=opts.lambdas if lambdas is None else lambdas,
                            rhos=opts.rhos(), samples=opts.samples, seed=opts.seed)


@pytest.fixture(scope="session")
def ex1() -> Pipeline:
    return Pipeline("example1.cfg")


@pytest.fixture(scope="session")
def ex2() -> Pipeline:
    return Pipeline("example2.cfg")
