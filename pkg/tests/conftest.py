"""Collects the acceptance-criterion verdicts and prints them after the run."""

import pytest

ACCEPTANCE = {}


class Recorder:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.line = None

    def __call__(self, ok, detail):
        verdict = "PASS" if ok else "FAIL"
        self.line = f"criterion {self.number:2d} {verdict}  {self.title}: {detail}"
        ACCEPTANCE[self.number] = self.line
        print(self.line)
        assert ok, self.line


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    rec = Recorder(*marker.args)
    yield rec
    if rec.line is None:
        ACCEPTANCE[rec.number] = f"criterion {rec.number:2d} FAIL  {rec.title}: raised before a verdict"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
