from __future__ import annotations

import os
from pathlib import Path

import pytest

import _report

# Calibration sweeps are expensive; keep them in a repo-local cache so repeat
# test runs (and the CLI examples in the README) reuse them.  Must be set
# before any test calls into percodetect.mctest.
_CACHE = Path(__file__).resolve().parent.parent / ".cache"
_CACHE.mkdir(exist_ok=True)
os.environ.setdefault("PERCODETECT_CACHE_DIR", str(_CACHE))


@pytest.fixture(scope="session")
def lat55():
    from percodetect.lattice import TriangularLattice

    return TriangularLattice(55)


@pytest.fixture(scope="session")
def table55():
    """Reference micro-canonical table: N=55, 2e5 trials, fixed seed.

    First build takes a minute or two; afterwards it is served from the
    on-disk cache.
    """
    from percodetect import mctest

    return mctest.load_or_sweep(55, 200_000, 424242, jobs=4)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _report.LINES:
        terminalreporter.section("acceptance criteria")
        for line in _report.LINES:
            terminalreporter.write_line(line)
