"""Conversion protocols: plan synthesis, outcome trees, evaluation and audits.

A plan is a linear schedule of single-party steps. Only the success outcome
of each step continues; every other outcome ends the protocol. The planner
runs in up to five phases:

1. parties whose target component is zero detach (probability one);
2. if the target has no ``|vec 0>`` weight, the largest party filters it out;
3. type-1 rounds pull the lowest ratios up to ``r0``, highest of them first;
4. type-2 rounds raise the common ratio party by party until it reaches 1;
5. parties left above target lower their component deterministically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import (
    DimensionMismatch,
    ProductState,
    StepPreconditionViolated,
    TargetUnreachable,
    UnclassifiedTree,
    UnrealizableStep,
    WClassError,
)
from .measurement import (
    KILL,
    Measurement,
    OutcomeTriple,
    X0Mode,
    apply_update,
    deterministic_lower,
    disentangle,
    disentangle_measurement,
    filter_outcome,
    lowering_outcome,
    make_t1,
    make_t2,
    x0_filter_measurement,
    zero_x0_filter,
)
from .state import WClassComponents, ratio_profile, state_from_json

RATIO_TOL = 1e-12
MATCH_TOL = 1e-9


class StepKind(str, enum.Enum):
    T1 = "T1"
    T2 = "T2"
    DET_LOWER = "DET_LOWER"
    DISENTANGLE = "DISENTANGLE"
    X0_FILTER = "X0_FILTER"


@dataclass(frozen=True, eq=False)
class ProtocolStep:
    party: int
    kind: StepKind
    params: dict
    predicted: OutcomeTriple
    result: WClassComponents  # planned state on the success outcome

    def to_json(self) -> dict:
        return {
            "party": self.party,
            "kind": self.kind.value,
            "params": dict(self.params),
            "predicted": self.predicted.to_json(),
            "result": list(self.result.x),
        }


@dataclass(frozen=True, eq=False)
class ProtocolPlan:
    source: WClassComponents
    target: WClassComponents
    steps: tuple[ProtocolStep, ...]
    predicted_success: float

    def prefix(self) -> "ProtocolPlan":
        """The plan up to its deterministic-lowering tail.

        Lowering steps have probability one, so the prefix has the same
        predicted success; its target is the state reached before the tail.
        """
        steps = tuple(s for s in self.steps if s.kind is not StepKind.DET_LOWER)
        if len(steps) == len(self.steps):
            return self
        if self.steps[: len(steps)] != steps:
            raise ValueError("lowering steps must form the tail of the plan")
        target = steps[-1].result if steps else self.source
        return ProtocolPlan(self.source, target, steps, _product(s.predicted.p for s in steps))

    def to_json(self) -> dict:
        return {
            "source": list(self.source.x),
            "target": {"x": list(self.target.x)},
            "steps": [s.to_json() for s in self.steps],
            "predicted_success": self.predicted_success,
        }


def _product(values) -> float:
    out = 1.0
    for v in values:
        out *= v
    return out


def plan_from_json(record: dict) -> ProtocolPlan:
    """Rebuild a plan written by :meth:`ProtocolPlan.to_json`."""
    source = WClassComponents(tuple(record["source"]))
    target = state_from_json(record["target"])
    steps = []
    for s in record["steps"]:
        pred = s["predicted"]
        t = KILL if pred["t"] is None else pred["t"]
        kind = StepKind(s["kind"])
        mode = X0Mode.FREE if kind is StepKind.X0_FILTER else (
            X0Mode.GEQ_S if kind in (StepKind.DET_LOWER, StepKind.DISENTANGLE) else X0Mode.EQUAL_S)
        steps.append(ProtocolStep(
            s["party"], kind, dict(s["params"]),
            OutcomeTriple(pred["p"], pred["s"], t, mode),
            WClassComponents(tuple(s["result"])),
        ))
    return ProtocolPlan(source, target, tuple(steps), record["predicted_success"])


def step_measurement(step: ProtocolStep, x: WClassComponents) -> Measurement:
    """Kraus realization of ``step`` on the state ``x``."""
    if step.kind is StepKind.T1:
        return make_t1(x, step.party, step.params["sigma"])
    if step.kind is StepKind.T2:
        return make_t2(x, step.party, step.params["p"])
    if step.kind is StepKind.DISENTANGLE:
        return disentangle_measurement(x, step.party)
    if step.kind is StepKind.X0_FILTER:
        return x0_filter_measurement(x)
    raise UnrealizableStep("deterministic lowering has no Kraus realization")


class Branch(NamedTuple):
    outcome: OutcomeTriple
    state: WClassComponents
    continues: bool


def step_outcomes(step: ProtocolStep, x: WClassComponents) -> list[Branch]:
    """Outcomes of ``step`` on ``x`` from the component calculus alone.

    The two disentangling outcomes carry identical components and are merged
    into a single probability-one edge.
    """
    k = step.party
    if step.kind is StepKind.DET_LOWER:
        target = step.params["target"]
        return [Branch(lowering_outcome(x, k, target), deterministic_lower(x, k, target), True)]
    if step.kind is StepKind.DISENTANGLE:
        o = OutcomeTriple(1.0, 1.0, KILL, X0Mode.GEQ_S)
        return [Branch(o, disentangle(x, k, keep_party=True), True)]
    meas = step_measurement(step, x)
    branches = []
    for i, (o, op) in enumerate(zip(meas.outcomes, meas.kraus.ops)):
        if o is None:
            continue
        if step.kind is StepKind.X0_FILTER and i > 0:
            post = filter_outcome(x, k, op)[2]
        elif step.kind is StepKind.X0_FILTER:
            post = zero_x0_filter(x).state
        else:
            post = apply_update(x, k, o)
        branches.append(Branch(o, post, i == 0))
    return branches


class _Builder:
    def __init__(self, x: WClassComponents):
        self.cur = x
        self.steps: list[ProtocolStep] = []

    def push(self, kind: StepKind, party: int, params: dict, outcome: OutcomeTriple, new: WClassComponents):
        self.steps.append(ProtocolStep(party, kind, params, outcome, new))
        self.cur = new


def plan_transform(x: WClassComponents, y: WClassComponents) -> ProtocolPlan:
    """Synthesize the constructive conversion protocol from ``x`` to ``y``.

    The predicted success equals the closed-form lower bound; it is ``min_k r_k``
    whenever the second-smallest ratio is at least ``r0``.
    """
    if x.n != y.n:
        raise DimensionMismatch(f"party counts differ: {x.n} vs {y.n}")
    if x.is_product():
        raise ProductState("source is a product state")
    for k in range(1, x.n + 1):
        if y[k] > 0 and x[k] == 0:
            raise TargetUnreachable(f"party {k} is unentangled in the source but not in the target")

    b = _Builder(x)
    for k in range(1, x.n + 1):
        if y[k] == 0 and b.cur[k] > 0:
            b.push(StepKind.DISENTANGLE, k, {}, OutcomeTriple(1.0, 1.0, KILL, X0Mode.GEQ_S),
                   disentangle(b.cur, k, keep_party=True))

    if y.x0 == 0 and b.cur.x0 > 0 and b.cur.nonzero_parties():
        meas = x0_filter_measurement(b.cur)
        res = zero_x0_filter(b.cur)
        b.push(StepKind.X0_FILTER, res.party, {"lambda": res.lam}, meas.success, res.state)

    active = [k for k in range(1, y.n + 1) if y[k] > 0]

    def ratio(k: int) -> float:
        return b.cur[k] / y[k]

    def ratio0() -> float:
        return b.cur.x0 / y.x0 if y.x0 > 0 else 0.0

    order = sorted(active, key=lambda k: (ratio(k), k))
    if order:
        r0 = ratio0()
        below = [i for i, k in enumerate(order) if r0 > ratio(k) + RATIO_TOL]
        start = 1
        if below:
            h = below[-1] + 1
            for k in reversed(order[:h]):
                sigma = min(1.0, ratio(k) / ratio0())
                meas = make_t1(b.cur, k, sigma)
                b.push(StepKind.T1, k, {"sigma": sigma}, meas.success, apply_update(b.cur, k, meas.success))
            start = h
        _raise_common_ratio(b, y, order, start)

    for k in active:
        if b.cur[k] > y[k] + RATIO_TOL:
            b.push(StepKind.DET_LOWER, k, {"target": y[k]}, lowering_outcome(b.cur, k, y[k]),
                   deterministic_lower(b.cur, k, y[k]))

    predicted = _product(s.predicted.p for s in b.steps)
    return ProtocolPlan(x, y, tuple(b.steps), predicted)


def _raise_common_ratio(b: _Builder, y: WClassComponents, order: list[int], start: int) -> None:
    # Parties order[:idx] share the ratio rho. A type-2 round by order[idx]
    # either matches its ratio to rho (probability 1 - x_k + y_k*rho) or, once
    # rho*(1 - y_k) >= 1 - x_k, takes rho itself and lifts every ratio to >= 1.
    lead = order[0]
    for idx in range(start, len(order)):
        rho = b.cur[lead] / y[lead]
        if rho >= 1 - RATIO_TOL:
            return
        k = order[idx]
        xk, yk = b.cur[k], y[k]
        last = idx == len(order) - 1
        if last or rho * (1 - yk) >= (1 - xk) - RATIO_TOL:
            p = rho
        else:
            p = 1 - xk + yk * rho
            if p >= 1 - 1e-15:
                continue
        meas = make_t2(b.cur, k, p)
        b.push(StepKind.T2, k, {"p": p}, meas.success, apply_update(b.cur, k, meas.success))
        if p == rho:
            return


class EdgeClass(str, enum.Enum):
    INTERMEDIATE = "INTERMEDIATE"
    FAILURE = "FAILURE"


@dataclass(eq=False)
class TreeNode:
    state: WClassComponents
    edges: list["TreeEdge"] = field(default_factory=list)
    success: bool | None = None  # set on leaves by classify()

    @property
    def is_leaf(self) -> bool:
        return not self.edges


@dataclass(eq=False)
class TreeEdge:
    p: float
    outcome: OutcomeTriple
    child: TreeNode
    party: int = 0
    kind: str = ""
    cls: EdgeClass | None = None


@dataclass(eq=False)
class ProtocolTree:
    root: TreeNode
    target: WClassComponents

    def nodes(self) -> Iterator[TreeNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(e.child for e in reversed(node.edges))

    def edges(self) -> Iterator[tuple[TreeNode, TreeEdge]]:
        for node in self.nodes():
            for e in node.edges:
                yield node, e

    def to_json(self) -> dict:
        ids = {id(node): i for i, node in enumerate(self.nodes())}
        return {
            "target": list(self.target.x),
            "nodes": [{"id": ids[id(nd)], "x": list(nd.state.x)} for nd in self.nodes()],
            "edges": [
                {
                    "from": ids[id(parent)], "to": ids[id(e.child)],
                    "party": e.party, "kind": e.kind,
                    **e.outcome.to_json(),
                    "class": None if e.cls is None else e.cls.value,
                }
                for parent, e in self.edges()
            ],
        }


def classify(tree: ProtocolTree, tol: float = MATCH_TOL) -> bool:
    """Mark leaves as success/failure and edges as intermediate/failure.

    Returns whether the tree has any success branch.
    """
    def visit(node: TreeNode) -> bool:
        if node.is_leaf:
            node.success = node.state.close_to(tree.target, tol)
            return node.success
        found = False
        for e in node.edges:
            hit = visit(e.child)
            e.cls = EdgeClass.INTERMEDIATE if hit else EdgeClass.FAILURE
            found = found or hit
        return found

    return visit(tree.root)


def build_tree(x: WClassComponents, plan: ProtocolPlan) -> ProtocolTree:
    """Expand every outcome of every step; failure outcomes are terminal."""
    root = TreeNode(x)
    node = root
    for i, step in enumerate(plan.steps, start=1):
        try:
            branches = step_outcomes(step, node.state)
        except WClassError as exc:
            raise StepPreconditionViolated(str(exc), i) from exc
        nxt = None
        for br in branches:
            child = TreeNode(br.state)
            node.edges.append(TreeEdge(br.outcome.p, br.outcome, child, step.party, step.kind.value))
            if br.continues and nxt is None:
                nxt = child
        node = nxt
    tree = ProtocolTree(root, plan.target)
    classify(tree)
    return tree


def tree_probability(t: ProtocolTree) -> float:
    """Sum over all-intermediate root-to-leaf paths of the product of edge probabilities."""
    for _, e in t.edges():
        if e.cls is None:
            raise UnclassifiedTree("run classify() first")

    def visit(node: TreeNode) -> float:
        if node.is_leaf:
            return 1.0 if node.success else 0.0
        return math.fsum(e.p * visit(e.child) for e in node.edges if e.cls is EdgeClass.INTERMEDIATE)

    if t.root.is_leaf and t.root.success is None:
        raise UnclassifiedTree("run classify() first")
    return visit(t.root)


class MonteCarloResult(NamedTuple):
    estimate: float
    stderr: float


def _uniforms(seed: int, start: int, count: int, width: int) -> np.ndarray:
    # Philox is counter based: trial i always reads 64-bit words
    # [i*width, (i+1)*width) of the stream keyed by seed, whatever the chunking.
    bg = np.random.Philox(key=seed % (1 << 128))
    bg.advance(start * width // 4)
    raw = bg.random_raw(count * width).reshape(count, width)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def monte_carlo(x: WClassComponents, plan: ProtocolPlan, trials: int, seed: int,
                chunk: int = 1 << 16) -> MonteCarloResult:
    """Estimate the success probability by sampling step outcomes."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    probs = []
    node = x
    for i, step in enumerate(plan.steps, start=1):
        try:
            branches = step_outcomes(step, node)
        except WClassError as exc:
            raise StepPreconditionViolated(str(exc), i) from exc
        probs.append(branches[0].outcome.p)
        node = branches[0].state
    if not node.close_to(plan.target, MATCH_TOL):
        return MonteCarloResult(0.0, 0.0)
    probs = np.array(probs)
    m = max(1, len(probs))
    width = 4 * math.ceil(m / 4)
    hits = 0
    for start in range(0, trials, chunk):
        count = min(chunk, trials - start)
        if len(probs) == 0:
            hits += count
            continue
        u = _uniforms(seed, start, count, width)[:, : len(probs)]
        hits += int(np.count_nonzero((u < probs).all(axis=1)))
    est = hits / trials
    return MonteCarloResult(est, math.sqrt(est * (1 - est) / trials))


@dataclass(frozen=True)
class FailureEdgeViolation:
    node: int
    party: int
    kind: str
    p: float
    component: float


@dataclass(frozen=True)
class AuditReport:
    """Necessary conditions for reaching the min-ratio probability.

    ``component`` is the party with the smallest ratio at the root.
    ``failure_violations`` lists failure edges hanging off a success branch
    whose child keeps a nonzero component for that party; ``residuals`` maps
    each internal node to ``x_1 - sum_{intermediate} p * x_1(child)``.
    """

    component: int
    failure_violations: tuple[FailureEdgeViolation, ...]
    residuals: tuple[tuple[int, float], ...]
    tol: float = 1e-12

    @property
    def residual_violations(self) -> tuple[tuple[int, float], ...]:
        return tuple(r for r in self.residuals if abs(r[1]) > self.tol)

    @property
    def empty(self) -> bool:
        return not self.failure_violations and not self.residual_violations


def audit_optimality(t: ProtocolTree, y: WClassComponents, tol: float = 1e-12) -> AuditReport:
    c1 = ratio_profile(t.root.state, y).perm[0]
    ids = {id(node): i for i, node in enumerate(t.nodes())}
    violations = []
    residuals = []

    def visit(node: TreeNode, on_success: bool) -> None:
        if node.is_leaf:
            return
        inter = [e for e in node.edges if e.cls is EdgeClass.INTERMEDIATE]
        if on_success:
            for e in node.edges:
                if e.cls is EdgeClass.FAILURE and e.child.state[c1] > tol:
                    violations.append(FailureEdgeViolation(ids[id(node)], e.party, e.kind, e.p, e.child.state[c1]))
        residuals.append((ids[id(node)], node.state[c1] - math.fsum(e.p * e.child.state[c1] for e in inter)))
        for e in node.edges:
            visit(e.child, on_success and e.cls is EdgeClass.INTERMEDIATE)

    for _, e in t.edges():
        if e.cls is None:
            raise UnclassifiedTree("run classify() first")
    visit(t.root, True)
    return AuditReport(c1, tuple(violations), tuple(residuals), tol)


def star_branch_check(t: ProtocolTree, tol: float = 1e-12) -> bool:
    """Whether some success branch has ``s*t >= 1`` on every edge."""
    def visit(node: TreeNode) -> bool:
        if node.is_leaf:
            return bool(node.success) or node is t.root
        return any(
            e.cls is EdgeClass.INTERMEDIATE and e.outcome.st >= 1 - tol and visit(e.child)
            for e in node.edges
        )

    return visit(t.root)
