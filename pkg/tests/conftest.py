import contextlib
import shutil

import pytest

from statevuln import pipeline

_CRITERIA = []


@contextlib.contextmanager
def criterion(label):
    """Record one acceptance criterion as PASS/FAIL for the terminal summary."""
    try:
        yield
    except pytest.skip.Exception:
        _CRITERIA.append(("SKIP", label))
        raise
    except BaseException:
        _CRITERIA.append(("FAIL", label))
        raise
    else:
        _CRITERIA.append(("PASS", label))


@pytest.fixture
def record_criterion():
    return criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for status, label in _CRITERIA:
        terminalreporter.write_line(f"[{status}] {label}")


@pytest.fixture
def fixture_inputs(tmp_path):
    """A writable copy of the bundled fixture."""
    dest = tmp_path / "inputs"
    shutil.copytree(pipeline.fixture_dir(), dest)
    return dest
