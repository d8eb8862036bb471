import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from modclust.core import CorrelationMatrix, validate_correlation_matrix  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(label: str, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}".rstrip())
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def corr(values, genes=None, **meta) -> CorrelationMatrix:
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    if genes is None:
        genes = "abcdefghijklmnopqrstuvwxyz"[:n] if n <= 26 else [f"g{i}" for i in range(n)]
    return validate_correlation_matrix(CorrelationMatrix(tuple(genes), v))


def random_similarity(rng, n: int) -> np.ndarray:
    a = rng.uniform(0, 1, (n, n))
    s = np.triu(a, 1)
    s = s + s.T
    np.fill_diagonal(s, 1.0)
    return s
