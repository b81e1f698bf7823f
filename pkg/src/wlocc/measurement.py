"""Single-party measurement calculus on component vectors.

An outcome of a measurement by party ``k`` is summarised by a triple
``(p, s, t)``: it occurs with probability ``p``, scales every other party's
component by ``s`` and divides party ``k``'s component by ``t`` (``t = KILL``
sends it to zero). A complete measurement satisfies ``sum p = 1``,
``sum p*s = 1`` and ``sum p/t <= 1``.

Kraus realizations are 2x2 matrices in the ``{|0>, |1>}`` basis of the
measuring qubit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    ComponentOverflow,
    DegenerateComponent,
    InvalidMeasurement,
    InvalidOutcome,
    ProbabilityTooSmall,
    SigmaOutOfRange,
    TargetNotBelow,
    TooFewParties,
)
from .state import EPS, WClassComponents, check_party

KILL = math.inf
UPDATE_TOL = 1e-10


class X0Mode(str, enum.Enum):
    EQUAL_S = "EQUAL_S"  # x0 -> s * x0 exactly
    GEQ_S = "GEQ_S"  # x0 -> something >= s * x0
    FREE = "FREE"  # no constraint (filters that rotate weight out of |vec 0>)


@dataclass(frozen=True)
class OutcomeTriple:
    p: float
    s: float
    t: float
    x0_mode: X0Mode = X0Mode.EQUAL_S

    def __post_init__(self):
        if not (0 < self.p <= 1 + EPS):
            raise InvalidOutcome(f"outcome probability {self.p!r} outside (0, 1]")
        if not (self.s >= 0 and math.isfinite(self.s)):
            raise InvalidOutcome(f"scale s = {self.s!r} must be finite and >= 0")
        if not self.t > 0:
            raise InvalidOutcome(f"divisor t = {self.t!r} must be > 0 or KILL")
        if self.p * self.s > 1 + UPDATE_TOL:
            raise InvalidOutcome(f"p*s = {self.p * self.s!r} > 1")
        if self.p / self.t > 1 + UPDATE_TOL:
            raise InvalidOutcome(f"p/t = {self.p / self.t!r} > 1")

    @property
    def kills(self) -> bool:
        return self.t == KILL

    @property
    def st(self) -> float:
        """``s*t``; a KILL outcome counts as infinite."""
        return math.inf if self.kills else self.s * self.t

    def to_json(self) -> dict:
        return {"p": self.p, "s": self.s, "t": None if self.kills else self.t}


@dataclass(frozen=True, eq=False)
class KrausSet:
    party: int
    ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(m, dtype=complex).reshape(2, 2) for m in self.ops)
        object.__setattr__(self, "ops", ops)
        err = self.completeness_error()
        if err > 1e-12:
            raise InvalidMeasurement(f"sum M^dag M deviates from identity by {err:.3e}")

    def completeness_error(self) -> float:
        total = sum(m.conj().T @ m for m in self.ops)
        return float(np.abs(total - np.eye(2)).max())


@dataclass(frozen=True, eq=False)
class Measurement:
    """A realized measurement: Kraus operators plus the predicted outcome triples.

    ``outcomes[i]`` belongs to ``kraus.ops[i]``; it is ``None`` for an operator
    that occurs with probability zero on the state it was built for. The first
    outcome is the one a protocol continues on.
    """

    party: int
    kind: str
    params: dict
    kraus: KrausSet
    outcomes: tuple[OutcomeTriple | None, ...]

    @property
    def success(self) -> OutcomeTriple:
        return self.outcomes[0]

    def live_outcomes(self) -> list[OutcomeTriple]:
        return [o for o in self.outcomes if o is not None]

    def to_json(self) -> dict:
        return {
            "party": self.party,
            "kind": self.kind,
            "parameters": dict(self.params),
            "outcomes": [o.to_json() for o in self.live_outcomes()],
        }


def apply_update(x: WClassComponents, k: int, o: OutcomeTriple) -> WClassComponents:
    """Component vector after outcome ``o`` of a measurement by party ``k``."""
    check_party(x.n, k)
    xk = x.x[k - 1]
    new = [o.s * v for v in x.x]
    new[k - 1] = 0.0 if o.kills else xk / o.t
    # rounding in x_j is amplified by s, so the allowance grows with it
    tol = EPS * max(1.0, o.s)
    total = math.fsum(new)
    if max(new) > 1 + tol or total > 1 + tol:
        raise ComponentOverflow(f"updated components {new} exceed normalization")
    if total > 1:
        new = [v / total for v in new]
    x0_new = max(0.0, 1.0 - math.fsum(new))
    scaled = o.s * x.x0
    if o.x0_mode is X0Mode.EQUAL_S and abs(x0_new - scaled) > UPDATE_TOL:
        raise InvalidOutcome(f"x0 should scale exactly: got {x0_new!r}, expected {scaled!r}")
    if o.x0_mode is X0Mode.GEQ_S and x0_new < scaled - UPDATE_TOL:
        raise InvalidOutcome(f"x0 = {x0_new!r} fell below s*x0 = {scaled!r}")
    return WClassComponents(tuple(new))


def _diag(a: float, b: float) -> np.ndarray:
    return np.diag([a, b]).astype(complex)


def make_t1(x: WClassComponents, k: int, sigma: float) -> Measurement:
    """Type-1 measurement with success product ``s*p = sigma``.

    Kraus pair ``diag(sqrt(sigma), 1)``, ``diag(sqrt(1-sigma), 0)``. The success
    outcome keeps ``t = p`` and scales ``x0`` exactly by ``s``; the failure
    outcome removes party ``k``'s excitation.
    """
    check_party(x.n, k)
    if not (0 < sigma <= 1):
        raise SigmaOutOfRange(f"sigma = {sigma!r} outside (0, 1]")
    xk = x.x[k - 1]
    if not (0 < xk < 1):
        raise DegenerateComponent(f"T1 needs 0 < x_{k} < 1, got {xk!r}")
    p = sigma * (1 - xk) + xk
    success = OutcomeTriple(p, sigma / p, p, X0Mode.EQUAL_S)
    p_fail = (1 - sigma) * (1 - xk)
    failure = OutcomeTriple(p_fail, 1 / (1 - xk), KILL, X0Mode.EQUAL_S) if p_fail > 0 else None
    ops = (_diag(math.sqrt(sigma), 1.0), _diag(math.sqrt(1 - sigma), 0.0))
    return Measurement(k, "T1", {"sigma": sigma}, KrausSet(k, ops), (success, failure))


def t2_update(x: WClassComponents, k: int, p: float) -> WClassComponents:
    """Success state of a type-2 measurement, written out directly."""
    xk = x.x[k - 1]
    new = [v / p for v in x.x]
    new[k - 1] = 1 - (1 - xk) / p
    return WClassComponents(tuple(new))


def make_t2(x: WClassComponents, k: int, p: float) -> Measurement:
    """Type-2 measurement whose success outcome has probability ``p`` and ``s = 1/p``.

    Completeness forces an outcome with ``a = 1`` to have ``b = 0``, so the
    success operator is ``diag(1, c)`` with ``c**2 = 1 - (1-p)/x_k``. The
    failure operator leaves only ``|vec k>``.
    """
    check_party(x.n, k)
    xk = x.x[k - 1]
    if xk <= 0:
        raise DegenerateComponent(f"T2 needs x_{k} > 0")
    if not (0 < p <= 1):
        raise InvalidOutcome(f"T2 probability {p!r} outside (0, 1]")
    if p <= 1 - xk:
        raise ProbabilityTooSmall(f"p = {p!r} <= 1 - x_{k} = {1 - xk!r}")
    c2 = (xk - 1 + p) / xk
    xk_new = (p - 1 + xk) / p
    success = OutcomeTriple(p, 1 / p, xk / xk_new, X0Mode.EQUAL_S)
    failure = OutcomeTriple(1 - p, 0.0, xk, X0Mode.EQUAL_S) if p < 1 else None
    ops = (_diag(1.0, math.sqrt(c2)), _diag(0.0, math.sqrt(max(0.0, 1 - c2))))
    return Measurement(k, "T2", {"p": p}, KrausSet(k, ops), (success, failure))


def deterministic_lower(x: WClassComponents, k: int, target: float) -> WClassComponents:
    """Lower party ``k``'s component to ``target`` with certainty; ``x0`` absorbs the rest.

    Component-level only: no Kraus realization is constructed.
    """
    check_party(x.n, k)
    xk = x.x[k - 1]
    if not (0 <= target <= xk):
        raise TargetNotBelow(f"target {target!r} not in [0, x_{k} = {xk!r}]")
    if target == xk:
        return x
    return x.replace(k, target)


def lowering_outcome(x: WClassComponents, k: int, target: float) -> OutcomeTriple:
    xk = x.x[k - 1]
    t = KILL if target == 0 else xk / target
    return OutcomeTriple(1.0, 1.0, t, X0Mode.GEQ_S)


def disentangle(x: WClassComponents, k: int, keep_party: bool = False) -> WClassComponents:
    """Detach party ``k``: ``x0 -> x0 + x_k``, other components unchanged.

    With ``keep_party`` the party stays in the vector with component 0 (it is
    left in ``|0>``); otherwise it is dropped and ``n`` shrinks by one.
    """
    check_party(x.n, k)
    if keep_party:
        return x.replace(k, 0.0)
    if x.n < 3:
        raise TooFewParties("disentangling needs at least three parties")
    return WClassComponents(x.x[: k - 1] + x.x[k:])


def disentangle_measurement(x: WClassComponents, k: int) -> Measurement:
    """Two equiprobable outcomes ``(1/sqrt2) [[1, +-i], [0, 0]]``.

    Each maps the party to ``|0>`` and leaves ``|sqrt(x0) +- i sqrt(x_k)|**2 =
    x0 + x_k`` on ``|vec 0>``, so both branches carry the same components.
    """
    check_party(x.n, k)
    r = 1 / math.sqrt(2)
    ops = (
        np.array([[r, 1j * r], [0, 0]]),
        np.array([[r, -1j * r], [0, 0]]),
    )
    half = OutcomeTriple(0.5, 1.0, KILL, X0Mode.GEQ_S)
    return Measurement(k, "DISENTANGLE", {}, KrausSet(k, ops), (half, half))


def filter_outcome(x: WClassComponents, k: int, op: np.ndarray) -> tuple[float, OutcomeTriple | None, WClassComponents | None]:
    """Outcome of an arbitrary local operator ``op`` on party ``k``.

    ``op = Q R`` with ``Q`` unitary; ``Q`` does not change components, and the
    upper-triangular ``R`` keeps the state in W form. Returns
    ``(probability, triple, post_state)``; the last two are ``None`` for a
    probability-zero outcome.
    """
    check_party(x.n, k)
    _, R = np.linalg.qr(np.asarray(op, dtype=complex))
    xk = x.x[k - 1]
    c0 = R[0, 0] * math.sqrt(x.x0) + R[0, 1] * math.sqrt(xk)
    a2 = abs(R[0, 0]) ** 2
    d2 = abs(R[1, 1]) ** 2
    rest = math.fsum(x.x) - xk
    prob = abs(c0) ** 2 + a2 * rest + d2 * xk
    if prob <= 1e-15:
        return 0.0, None, None
    new = [a2 * v / prob for v in x.x]
    new[k - 1] = d2 * xk / prob
    post = WClassComponents(tuple(new))
    s = a2 / prob
    t = KILL if new[k - 1] == 0 else (xk / new[k - 1] if xk > 0 else 1.0)
    if abs(post.x0 - s * x.x0) <= UPDATE_TOL:
        mode = X0Mode.EQUAL_S
    elif post.x0 > s * x.x0:
        mode = X0Mode.GEQ_S
    else:
        mode = X0Mode.FREE
    return prob, OutcomeTriple(min(prob, 1.0), s, t, mode), post


class FilterResult(NamedTuple):
    lam: float
    success_p: float
    state: WClassComponents
    party: int


def _argmax_party(x: WClassComponents) -> int:
    # max() returns the first maximal element, i.e. the lowest index on ties
    return max(range(1, x.n + 1), key=lambda k: (x.x[k - 1], -k))


def zero_x0_filter(x: WClassComponents) -> FilterResult:
    """Filter that removes the ``|vec 0>`` weight, acting on the largest component.

    ``M = sqrt(lam) [[1, -sqrt(x0/x_i)], [0, 1]]`` with the largest ``lam`` for
    which ``M^dag M <= I``. If ``x0`` is already 0 this is the identity.
    """
    if not x.nonzero_parties():
        raise DegenerateComponent("no party carries an excitation")
    i = _argmax_party(x)
    x0 = x.x0
    if x0 == 0:
        return FilterResult(1.0, 1.0, x, i)
    xi = x.x[i - 1]
    lam = 2 * xi / (x0 + 2 * xi + math.sqrt(x0 * x0 + 4 * xi * x0))
    total = 1 - x0
    post = WClassComponents(tuple(v / total for v in x.x))
    return FilterResult(lam, lam * total, post, i)


def x0_filter_operator(x: WClassComponents, party: int, lam: float) -> np.ndarray:
    g = math.sqrt(x.x0 / x.x[party - 1])
    return math.sqrt(lam) * np.array([[1, -g], [0, 1]], dtype=complex)


def complement_operator(m: np.ndarray) -> np.ndarray:
    """``sqrt(I - M^dag M)`` via an eigendecomposition (clipped at 0)."""
    w, v = np.linalg.eigh(np.eye(2) - m.conj().T @ m)
    w = np.clip(w, 0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def x0_filter_measurement(x: WClassComponents) -> Measurement:
    """The zero-x0 filter completed to a two-outcome measurement."""
    res = zero_x0_filter(x)
    i = res.party
    if x.x0 == 0:
        ident = OutcomeTriple(1.0, 1.0, 1.0, X0Mode.EQUAL_S)
        ops = (np.eye(2, dtype=complex), np.zeros((2, 2), dtype=complex))
        return Measurement(i, "X0_FILTER", {"lambda": 1.0}, KrausSet(i, ops), (ident, None))
    m = x0_filter_operator(x, i, res.lam)
    f = complement_operator(m)
    total = 1 - x.x0
    success = OutcomeTriple(res.success_p, 1 / total, total, X0Mode.FREE)
    _, failure, _ = filter_outcome(x, i, f)
    return Measurement(i, "X0_FILTER", {"lambda": res.lam}, KrausSet(i, (m, f)), (success, failure))


@dataclass(frozen=True)
class MonotonicityReport:
    slack: tuple[float, ...]  # x_j - average over outcomes, per party j = 1..n
    ok: bool
    tol: float = field(default=EPS)


def validate_outcomes(outcomes: Sequence[OutcomeTriple], tol: float = EPS) -> None:
    if not outcomes:
        raise InvalidMeasurement("measurement has no outcomes")
    sp = math.fsum(o.p for o in outcomes)
    sps = math.fsum(o.p * o.s for o in outcomes)
    spt = math.fsum(0.0 if o.kills else o.p / o.t for o in outcomes)
    if abs(sp - 1) > tol:
        raise InvalidMeasurement(f"outcome probabilities sum to {sp!r}")
    if abs(sps - 1) > tol:
        raise InvalidMeasurement(f"sum p*s = {sps!r}, expected 1")
    if spt > 1 + tol:
        raise InvalidMeasurement(f"sum p/t = {spt!r} > 1")


def check_monotonicity(x: WClassComponents, k: int, outcomes: Sequence[OutcomeTriple | None]) -> MonotonicityReport:
    """Check that no component grows on average under the measurement."""
    live = [o for o in outcomes if o is not None]
    validate_outcomes(live)
    avg = np.zeros(x.n)
    for o in live:
        avg += o.p * apply_update(x, k, o).as_array()
    slack = tuple(float(v) for v in x.as_array() - avg)
    return MonotonicityReport(slack, all(v >= -EPS for v in slack))
