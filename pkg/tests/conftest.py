import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(n, status, detail)."""
    def record(number, status, detail=""):
        _CRITERIA[number] = (status, detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {status:7s} {detail}")


@pytest.fixture
def kitti_tree(tmp_path):
    import synth

    ids = synth.write_dataset(tmp_path / "kitti", n_frames=4, seed=3)
    return tmp_path / "kitti", ids
