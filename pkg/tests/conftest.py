import numpy as np
import pytest

from wlocc.state import WClassComponents


def random_state(rng: np.random.Generator, n: int, x0: bool = True) -> WClassComponents:
    """Uniform draw from the simplex of (x_1..x_n, x0)."""
    w = rng.dirichlet(np.ones(n + 1 if x0 else n))
    return WClassComponents(tuple(float(v) for v in w[:n]))


def random_pair(rng, n):
    return random_state(rng, n), random_state(rng, n)


def kron_operator(n: int, party: int, op: np.ndarray) -> np.ndarray:
    """Full 2^n x 2^n matrix of ``op`` on ``party`` (party 1 = leftmost factor)."""
    out = np.eye(1)
    for k in range(1, n + 1):
        out = np.kron(out, op if k == party else np.eye(2))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE: list[str] = []


def record_criterion(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
