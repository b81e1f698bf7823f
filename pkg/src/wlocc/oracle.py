"""Dense statevector engine used as ground truth for the component calculus."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotWClassForm, PartyOutOfRange, UnrealizableStep
from .state import Statevector, WClassComponents, components_from_amplitudes

MAX_QUBITS = 20
PROB_FLOOR = 1e-15
MATCH_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LocalAction:
    party: int
    op: np.ndarray

    def __post_init__(self):
        op = np.asarray(self.op, dtype=complex).reshape(2, 2)
        if not np.isfinite(op).all():
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "op", op)


def _apply(amp: np.ndarray, n: int, party: int, op: np.ndarray) -> np.ndarray:
    if not 1 <= party <= n:
        raise PartyOutOfRange(f"party {party} outside 1..{n}")
    psi = amp.reshape((2,) * n)
    out = np.tensordot(op, psi, axes=([1], [party - 1]))
    return np.moveaxis(out, 0, party - 1).reshape(-1)


def apply_local(v: Statevector, a: LocalAction) -> tuple[np.ndarray, float]:
    """Apply ``a.op`` to one qubit; returns the unnormalized amplitudes and their squared norm."""
    out = _apply(v.amp, v.n, a.party, a.op)
    return out, float(np.vdot(out, out).real)


def post_state(n: int, amp: np.ndarray, prob: float) -> Statevector | None:
    if prob <= PROB_FLOOR:
        return None
    return Statevector(n, amp / np.sqrt(prob))


def outcome_probabilities(v: Statevector, party: int, ops) -> list[float]:
    return [apply_local(v, LocalAction(party, m))[1] for m in ops]


def triangular_factor(op: np.ndarray) -> np.ndarray:
    """``R`` from ``op = Q R``; the local unitary ``Q`` does not change components."""
    return np.linalg.qr(np.asarray(op, dtype=complex))[1]


def _components(n: int, amp: np.ndarray) -> WClassComponents | None:
    try:
        return components_from_amplitudes(n, amp)
    except NotWClassForm:
        return None


def expand_protocol(v: Statevector, plan, max_qubits: int = MAX_QUBITS) -> list[np.ndarray]:
    """Unnormalized leaf amplitudes of ``plan`` run on ``v``.

    Each step is rebuilt from the components the oracle reads off its own
    amplitudes. A branch keeps going only while its components equal the
    step's planned success state; every other branch becomes a leaf. The
    squared norm of a leaf is the probability of its path.
    """
    from .protocol import StepKind, step_measurement

    n = v.n
    if n > max_qubits:
        raise ValueError(f"{n} qubits exceeds the dense limit of {max_qubits}")
    for i, step in enumerate(plan.steps, start=1):
        if step.kind is StepKind.DET_LOWER:
            raise UnrealizableStep(f"round {i}: deterministic lowering has no Kraus realization here")

    branches = [np.array(v.amp, dtype=complex)]
    leaves: list[np.ndarray] = []
    for step in plan.steps:
        survivors = []
        for amp in branches:
            meas = step_measurement(step, components_from_amplitudes(n, amp))
            for op in meas.kraus.ops:
                out = _apply(amp, n, step.party, triangular_factor(op))
                if float(np.vdot(out, out).real) <= PROB_FLOOR:
                    continue
                c = _components(n, out)
                if c is not None and c.close_to(step.result, MATCH_TOL):
                    survivors.append(out)
                else:
                    leaves.append(out)
        branches = survivors
    return leaves + branches


def enumerate_protocol(v: Statevector, plan, max_qubits: int = MAX_QUBITS) -> float:
    """Exact success probability: total weight of leaves matching ``plan.target`` within 1e-9."""
    total = 0.0
    for amp in expand_protocol(v, plan, max_qubits):
        c = _components(v.n, amp)
        if c is not None and c.close_to(plan.target, MATCH_TOL):
            total += float(np.vdot(amp, amp).real)
    return total
