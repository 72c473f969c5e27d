import textwrap

import pytest

MINIMAL = """
[solver]
nu = 0.01
alpha = 0.1
r = 1.0
N = 8
dt = 0.01
t_end = 0.1

[ic]
kind = random_smooth
seed = 1
"""


@pytest.fixture
def write_config(tmp_path):
    """Write INI text (dedented) to a file and return its path."""

    def _write(text=MINIMAL, name="run.cfg"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text), encoding="utf-8")
        return str(path)

    return _write


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion."""

    def _record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
