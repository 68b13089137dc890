import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scangap import synthetic  # noqa: E402
from scangap.pointcloud import PointCloud  # noqa: E402


@pytest.fixture
def rs():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_scans():
    """Four reduced-resolution street scans (about 5k points each)."""
    scanner = synthetic.Scanner(channels=16, columns=360)
    return synthetic.scan_sequence(4, seed=3, scanner=scanner)


def cloud(points, intensity=None) -> PointCloud:
    return PointCloud(np.asarray(points, dtype=np.float64), intensity)


_CRITERIA: dict[str, str] = {}


def _natural(label: str):
    digits = "".join(ch for ch in label if ch.isdigit())
    return int(digits), label


@pytest.fixture
def report_criterion():
    """Record one acceptance line; the summary prints them in criterion order."""

    def record(label, passed: bool, detail: str) -> bool:
        label = str(label)
        line = f"CRITERION {label:>3}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA[label] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for label in sorted(_CRITERIA, key=_natural):
            terminalreporter.write_line(_CRITERIA[label])
