"""W-class state model.

A W-class state on ``n`` qubits is, up to local unitaries, fixed by its
component vector ``x = (x_1, ..., x_n)``; the all-zeros weight
``x0 = 1 - sum(x)`` is always derived. Party indices are 1-based throughout
the public API, matching the ``|vec k>`` labelling of the basis.

The representation is unique for ``n >= 3``. Two-party states are accepted,
but there the components of ``(|01> + |10>)/sqrt(2)`` and its local-unitary
images do not determine the state uniquely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyVector,
    NegativeComponent,
    NotWClassForm,
    PartyOutOfRange,
    SumExceedsOne,
)

EPS = 1e-12
X0_FLOOR = 64 * 2.0**-52  # about 1.4e-14
HEAVY_WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class WClassComponents:
    x: tuple[float, ...]

    def __post_init__(self):
        if len(self.x) == 0:
            raise EmptyVector("component vector must be nonempty")
        for k, v in enumerate(self.x, start=1):
            if not math.isfinite(v):
                raise NegativeComponent(f"component x_{k} = {v} is not finite")
            if v < 0:
                raise NegativeComponent(f"component x_{k} = {v} is negative")
        total = math.fsum(self.x)
        if total > 1 + EPS:
            raise SumExceedsOne(f"components sum to {total!r} > 1")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def x0(self) -> float:
        # a remainder this small is rounding left over from 1 - sum(x)
        rest = 1.0 - math.fsum(self.x)
        return rest if rest > X0_FLOOR else 0.0

    def __getitem__(self, party: int) -> float:
        """Component of ``party``; index 0 returns ``x0``."""
        if party == 0:
            return self.x0
        check_party(self.n, party)
        return self.x[party - 1]

    def as_array(self) -> np.ndarray:
        return np.array(self.x, dtype=float)

    def nonzero_parties(self, tol: float = 0.0) -> list[int]:
        return [k for k, v in enumerate(self.x, start=1) if v > tol]

    def is_product(self) -> bool:
        return len(self.nonzero_parties()) < 2

    def close_to(self, other: "WClassComponents", tol: float = 1e-9) -> bool:
        if self.n != other.n:
            return False
        return all(abs(a - b) <= tol for a, b in zip(self.x, other.x)) and abs(self.x0 - other.x0) <= tol

    def replace(self, party: int, value: float) -> "WClassComponents":
        check_party(self.n, party)
        x = list(self.x)
        x[party - 1] = value
        return WClassComponents(tuple(x))

    def to_json(self) -> dict:
        return {"x": list(self.x)}


def check_party(n: int, party: int) -> None:
    if not 1 <= party <= n:
        raise PartyOutOfRange(f"party {party} outside 1..{n}")


def make_state(values: Sequence[float]) -> WClassComponents:
    """Validate ``values`` as the component vector of a W-class state."""
    return WClassComponents(tuple(float(v) for v in values))


def w_state(n: int) -> WClassComponents:
    return WClassComponents((1.0 / n,) * n)


def state_from_json(record: dict, key: str = "x") -> WClassComponents:
    """Parse a ``{"x": [...]}`` record; raises the make_state errors on bad values."""
    if not isinstance(record, dict) or key not in record:
        raise ValueError(f"state record needs a {key!r} list")
    values = record[key]
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        raise ValueError(f"{key!r} must be a list of numbers")
    return make_state(values)


@dataclass(frozen=True)
class RatioProfile:
    """Componentwise ratios ``r_k = x_k / y_k`` with the ascending sort order.

    ``perm`` lists 1-based parties so that ``r[perm[0]-1] <= r[perm[1]-1] <= ...``;
    ties go to the lower party index and infinite entries sort last.
    """

    r: tuple[float, ...]
    r0: float
    perm: tuple[int, ...]
    zero_targets: frozenset[int] = field(default_factory=frozenset)

    def ratio(self, party: int) -> float:
        return self.r0 if party == 0 else self.r[party - 1]

    def sorted_ratios(self) -> tuple[float, ...]:
        return tuple(self.r[k - 1] for k in self.perm)

    def finite_sorted(self) -> tuple[float, ...]:
        return tuple(v for v in self.sorted_ratios() if math.isfinite(v))


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return math.inf if num > 0 else 0.0


def ratio_profile(x: WClassComponents, y: WClassComponents) -> RatioProfile:
    if x.n != y.n:
        raise DimensionMismatch(f"party counts differ: {x.n} vs {y.n}")
    r = []
    zero = set()
    for k, (a, b) in enumerate(zip(x.x, y.x), start=1):
        if b > 0:
            r.append(a / b)
        else:
            r.append(math.inf)
            zero.add(k)
    # x0 = 0 imposes no constraint whatever y0 is
    r0 = _ratio(x.x0, y.x0)
    perm = tuple(sorted(range(1, x.n + 1), key=lambda k: (r[k - 1], k)))
    return RatioProfile(tuple(r), r0, perm, frozenset(zero))


@dataclass(frozen=True, eq=False)
class Statevector:
    """Dense ``2**n`` amplitude vector; party 1 is the most significant bit."""

    n: int
    amp: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amp, dtype=complex).reshape(-1)
        if amp.size != 2**self.n:
            raise DimensionMismatch(f"expected {2**self.n} amplitudes, got {amp.size}")
        norm = float(np.vdot(amp, amp).real)
        if abs(norm - 1.0) > EPS * max(1, amp.size):
            raise ValueError(f"statevector norm^2 = {norm!r}, expected 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amp", amp)

    def tensor(self) -> np.ndarray:
        return self.amp.reshape((2,) * self.n)


def basis_index(n: int, party: int) -> int:
    """Index of the weight-one basis string with ``party`` excited."""
    return 1 << (n - party)


def to_statevector(x: WClassComponents) -> Statevector:
    amp = np.zeros(2**x.n, dtype=complex)
    amp[0] = math.sqrt(x.x0)
    for k, v in enumerate(x.x, start=1):
        amp[basis_index(x.n, k)] = math.sqrt(v)
    # x0 is clamped at 0, so rescale away a sum that overshoots by <= EPS
    amp /= np.linalg.norm(amp)
    return Statevector(x.n, amp)


def components_from_amplitudes(n: int, amp: np.ndarray) -> WClassComponents:
    """Component vector of a (possibly unnormalized) W-form amplitude vector."""
    amp = np.asarray(amp).reshape(-1)
    weights = np.abs(amp) ** 2
    total = weights.sum()
    if total <= 0:
        raise NotWClassForm("zero vector has no components")
    single = [basis_index(n, k) for k in range(1, n + 1)]
    mask = np.ones(amp.size, dtype=bool)
    mask[0] = False
    mask[single] = False
    if mask.any() and np.abs(amp[mask]).max() / math.sqrt(total) >= HEAVY_WEIGHT_TOL:
        raise NotWClassForm("amplitude present on a basis string of Hamming weight >= 2")
    light = weights[0] + weights[single].sum()
    return WClassComponents(tuple(float(w / light) for w in weights[single]))


def components_from_statevector(v: Statevector) -> WClassComponents:
    """Inverse of :func:`to_statevector`; phases are discarded."""
    return components_from_amplitudes(v.n, v.amp)
