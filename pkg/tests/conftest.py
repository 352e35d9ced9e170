import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE = {}


def random_psd(rng, n, rank=None, decay=None):
    """Random psd matrix; ``decay`` gives eigenvalues ``i**-decay`` in a random basis."""
    if decay is not None:
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        lam = np.arange(1, n + 1, dtype=float) ** -decay
        A = (Q * lam) @ Q.T
    else:
        G = rng.standard_normal((n, rank or n))
        A = G @ G.T
    return 0.5 * (A + A.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def record(criterion, passed, detail):
    """``passed`` is True/False, or None for report-only criteria."""
    ACCEPTANCE[criterion] = (None if passed is None else bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        status = "PASS" if passed is True else ("FAIL" if passed is False else "REPORT")
        terminalreporter.write_line(f"criterion {key:>2}: {status}  {detail}")
