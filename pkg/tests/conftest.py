import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from srmns.core import make_instance  # noqa: E402

ACCEPTANCE_LINES = []


def record_acceptance(number: int, title: str, passed: bool, detail: str):
    ACCEPTANCE_LINES.append((number, title, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_LINES):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] #{number:>2} {title}: {detail}")


def random_instance(rng, k=None, B=None, T=10, refunds=False, demands=False, p_choices=None):
    k = int(rng.integers(1, 5)) if k is None else k
    lam = rng.dirichlet(np.ones(k))
    lam = lam / lam.sum()
    v = rng.uniform(0.01, 0.95, k)
    if p_choices is not None:
        p = rng.choice(p_choices, k)
    else:
        p = rng.uniform(0.05, 1.0, k)
    r = rng.uniform(0, 1, k) * v if refunds else None
    d = rng.integers(1, 4, k) if demands else None
    B = int(rng.integers(0, 12)) if B is None else B
    return make_instance(lam, v, p, B, T, r, d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
