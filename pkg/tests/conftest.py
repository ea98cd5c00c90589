import itertools
from pathlib import Path

import numpy as np
import pytest

from classmatch import Instance

ROOT = Path(__file__).resolve().parents[1]
TABLE1_PATH = ROOT / "scripts" / "configs" / "table1.json"


@pytest.fixture
def table1():
    return Instance.load(TABLE1_PATH)


def brute_max_matching(w, r=None):
    """Best matching weight by enumeration; ``r=None`` means any size."""
    n, m = w.shape
    sizes = range(min(n, m) + 1) if r is None else [r]
    best = -np.inf
    for s in sizes:
        if s == 0:
            best = max(best, 0.0)
            continue
        for rows in itertools.combinations(range(n), s):
            for cols in itertools.permutations(range(m), s):
                best = max(best, float(w[list(rows), list(cols)].sum()))
    return best


def brute_valuation(inst, p, bundle):
    bundle = sorted(bundle)
    if not bundle:
        return 0.0
    return brute_max_matching(inst.utilities[np.ix_(inst.class_agents(p), bundle)])


def random_instance(rng, sizes, m):
    return Instance(tuple(sizes), rng.random((sum(sizes), m)))


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(num: int, name: str, ok: bool, detail: str) -> str:
    line = f"criterion {num:>2} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES[num] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[num])
