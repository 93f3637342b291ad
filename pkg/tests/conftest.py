import itertools
import math

import numpy as np
import pytest

from fftu.io import generate_input


def rel_l2(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def legal_grids(shape):
    """Every grid with p_l^2 | n_l."""
    choices = [[p for p in range(1, n + 1) if n % (p * p) == 0] for n in shape]
    return [tuple(g) for g in itertools.product(*choices)]


def audit_placement(blocks, cmap, expected):
    """Check every global element sits at the local position the cyclic map assigns it.

    Returns the number of elements checked; raises AssertionError on the first misplacement.
    """
    checked = 0
    for j in np.ndindex(*cmap.shape):
        s, k = cmap.global_to_local(j)
        got = blocks[cmap.grid.rank(s)][k]
        assert abs(got - expected[j]) <= 1e-9 * max(1.0, float(np.max(np.abs(expected)))), (j, s, k)
        checked += 1
    return checked


@pytest.fixture
def signal():
    return generate_input


_ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL/SKIP line per acceptance criterion for the terminal summary."""

    def record(number, title, ok, detail=""):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        line = f"criterion {number:>2} {status:<4} {title}" + (f"  [{detail}]" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
