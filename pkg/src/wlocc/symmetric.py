"""Tripartite symmetric W-class states and one-shot filters onto W_3.

``|s> = sqrt(1-s)|000> + sqrt(s/3)(|100> + |010> + |001>)``. Two one-shot
strategies are compared for reaching ``W_3``: a single party applies
``A = [[a, b], [0, c]]``, or all three apply the same ``A``. In both cases
``A`` sits on the boundary ``b**2 = (1-a**2)(1-c**2)`` (largest eigenvalue of
``A^dag A`` equal to 1).

The closed forms and the numeric optimizers below are independent routes to
the same optima; tests check one against the other.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError, InfeasiblePoint
from .state import WClassComponents

logger = logging.getLogger(__name__)

PHI = (math.sqrt(5) - 1) / 2
SCAN_POINTS = 10_000
S_ONE_CUTOFF = 1e-9


def _check_s(s: float, open_left: bool = False) -> None:
    if not (0 <= s <= 1) or (open_left and s == 0):
        raise DomainError(f"s = {s!r} outside {'(0, 1]' if open_left else '[0, 1]'}")


def _check_n(n: int) -> None:
    if n != 3:
        raise DomainError(f"symmetric analysis is tripartite only, got n = {n}")


@dataclass(frozen=True)
class SymmetricState:
    s: float
    n: int = 3

    def __post_init__(self):
        _check_s(self.s)
        if self.n < 2:
            raise DomainError("need at least two parties")

    def components(self) -> WClassComponents:
        return WClassComponents((self.s / self.n,) * self.n)


@dataclass(frozen=True)
class FilterParams:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (0 <= self.a <= 1 + 1e-12 and 0 <= self.c <= 1 + 1e-12):
            raise InfeasiblePoint(f"a, c must lie in [0, 1]: a={self.a!r}, c={self.c!r}")

    @property
    def boundary_residual(self) -> float:
        return self.b**2 - (1 - self.a**2) * (1 - self.c**2)

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [0.0, self.c]], dtype=complex)

    def max_eigenvalue(self) -> float:
        m = self.matrix()
        return float(np.linalg.eigvalsh(m.conj().T @ m).max())


class FilterOptimum(NamedTuple):
    value: float
    params: FilterParams


def beta(s: float) -> float:
    _check_s(s)
    return math.sqrt(3 * (1 - s) * (3 + 5 * s))


def p_max_closed(s: float) -> float:
    """Best single-party success probability for ``|s> -> W_3``."""
    _check_s(s)
    return 0.5 * (3 - s - math.sqrt(3 * (1 - s) * (3 + s)))


def q_max_closed(s: float) -> float:
    """Best identical three-party filter success probability for ``|s> -> W_3``."""
    _check_s(s)
    if s > 1 - S_ONE_CUTOFF:
        # numerator and denominator both vanish like sqrt(1-s); the limit is 1
        return 1.0
    bt = beta(s)
    return (3 + 9 * s - bt) ** 2 * (-3 + 3 * s + bt) / (48 * (1 + 2 * s) * (1 - s + bt))


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-12, max_iter: int = 200) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[lo, hi]``; returns ``(argmax, max)``."""
    x1 = hi - PHI * (hi - lo)
    x2 = lo + PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + PHI * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - PHI * (hi - lo)
            f1 = f(x1)
    x = 0.5 * (lo + hi)
    return x, f(x)


def _local_maxima(values: np.ndarray) -> list[int]:
    finite = np.where(np.isfinite(values), values, -np.inf)
    idx = []
    for i in range(len(finite)):
        left = finite[i - 1] if i > 0 else -np.inf
        right = finite[i + 1] if i + 1 < len(finite) else -np.inf
        if np.isfinite(finite[i]) and finite[i] >= left and finite[i] > right:
            idx.append(i)
    return idx


def _bisect(pred: Callable[[float], bool], good: float, bad: float, tol: float = 1e-15) -> float:
    """Boundary between ``good`` (pred true) and ``bad`` (pred false)."""
    while abs(bad - good) > tol:
        mid = 0.5 * (good + bad)
        if pred(mid):
            good = mid
        else:
            bad = mid
    return good


def optimize_single_party(s: float, n: int = 3) -> FilterOptimum:
    """Numerically maximize ``p = c**2 s`` for a filter on one party.

    Matching amplitudes forces ``a = c`` and ``b = -a sqrt(3(1-s)/s)``; the
    filter is physical while ``|b| <= 1 - a**2``. The objective grows with
    ``a``, so a grid scan locates the last feasible point and bisection
    refines the feasibility edge.
    """
    _check_n(n)
    _check_s(s, open_left=True)
    k = math.sqrt(3 * (1 - s) / s)

    def feasible(a: float) -> bool:
        return a * k <= 1 - a * a

    grid = np.linspace(0, 1, SCAN_POINTS + 1)[1:]
    ok = grid * k <= 1 - grid**2
    if not ok.any():
        raise InfeasiblePoint("no feasible filter on the scan grid")
    objective = np.where(ok, grid**2 * s, -np.inf)
    best = int(np.argmax(objective))
    if best + 1 < len(grid):
        a = _bisect(feasible, grid[best], grid[best + 1])
    else:
        a = grid[best]
    b = -a * k
    return FilterOptimum(a * a * s, FilterParams(a, b, a))


def _symmetric_c2(a: float, s: float) -> float:
    if a >= 1:
        return 1.0 if s == 1 else -math.inf
    return 1 - a * a * (1 - s) / (3 * s * (1 - a * a))


def optimize_symmetric_filter(s: float, n: int = 3) -> FilterOptimum:
    """Numerically maximize ``q = a**4 c**2 s`` for the same filter on all three parties.

    ``b = -a sqrt((1-s)/(3s))`` cancels the ``|000>`` amplitude and ``c`` is the
    largest value keeping ``A^dag A <= I``. Coarse scan over ``a``, then golden
    section inside the bracket of the best grid point.
    """
    _check_n(n)
    _check_s(s, open_left=True)
    if s == 1:
        return FilterOptimum(1.0, FilterParams(1.0, 0.0, 1.0))

    def q(a: float) -> float:
        c2 = _symmetric_c2(a, s)
        return a**4 * c2 * s if c2 >= 0 else -math.inf

    grid = np.linspace(0, 1, SCAN_POINTS + 1)[1:-1]
    values = np.array([q(a) for a in grid])
    if not np.isfinite(values).any():
        raise InfeasiblePoint("no feasible filter on the scan grid")
    peaks = _local_maxima(values)
    if len(peaks) > 1:
        logger.warning("symmetric objective has %d local maxima at s=%g", len(peaks), s)
    best = int(np.nanargmax(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    if best + 1 < len(grid) and not math.isfinite(values[best + 1]):
        hi = _bisect(lambda a: _symmetric_c2(a, s) >= 0, grid[best], grid[best + 1])
    a, value = golden_section_max(q, lo, hi)
    c = math.sqrt(max(0.0, _symmetric_c2(a, s)))
    b = -a * math.sqrt((1 - s) / (3 * s))
    return FilterOptimum(value, FilterParams(a, b, c))


def difference(s: float) -> float:
    return p_max_closed(s) - q_max_closed(s)


def crossing_point(tol: float = 1e-13) -> float:
    """The ``s`` in ``(0, 1)`` where the two optima coincide."""
    grid = np.linspace(0.01, 0.99, 99)
    diffs = [difference(s) for s in grid]
    for lo, hi, dlo, dhi in zip(grid, grid[1:], diffs, diffs[1:]):
        if dlo > 0 >= dhi or dlo < 0 <= dhi:
            break
    else:
        raise RuntimeError("no sign change of p_max - q_max on (0, 1)")
    sign_lo = dlo > 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if (difference(mid) > 0) == sign_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


CROSSING_SYMBOLIC = 3 / 61 * (3 + 8 * math.sqrt(3))


def grid_points(grid_step: float) -> list[float]:
    if not (0 < grid_step <= 1):
        raise DomainError(f"grid step {grid_step!r} outside (0, 1]")
    count = math.ceil(1 / grid_step - 1e-9)
    return [min(1.0, i * grid_step) for i in range(count)] + [1.0]


def difference_profile(grid_step: float) -> list[tuple[float, float, float, float]]:
    """Rows ``(s, p_max, q_max, p_max - q_max)`` on ``[0, 1]`` sorted by ``s``."""
    rows = []
    for s in grid_points(grid_step):
        p, q = p_max_closed(s), q_max_closed(s)
        rows.append((s, p, q, p - q))
    return rows


def sign_changes(rows, tol: float = 1e-15) -> int:
    signs = [np.sign(d) for *_, d in rows if abs(d) > tol]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)
