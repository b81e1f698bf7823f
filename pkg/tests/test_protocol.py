import json
import math

import numpy as np
import pytest

from conftest import random_state
from wlocc.bounds import achievable_probability, lower_bound, upper_bound
from wlocc.errors import (
    DimensionMismatch,
    ProductState,
    StepPreconditionViolated,
    TargetUnreachable,
    UnclassifiedTree,
)
from wlocc.measurement import (
    KILL,
    OutcomeTriple,
    X0Mode,
    apply_update,
    deterministic_lower,
    lowering_outcome,
    make_t2,
)
from wlocc.oracle import enumerate_protocol
from wlocc.protocol import (
    EdgeClass,
    ProtocolPlan,
    ProtocolStep,
    ProtocolTree,
    StepKind,
    TreeEdge,
    TreeNode,
    audit_optimality,
    build_tree,
    classify,
    monte_carlo,
    plan_from_json,
    plan_transform,
    star_branch_check,
    tree_probability,
)
from wlocc.state import make_state, to_statevector, w_state

PAIR_08 = ([0.2, 0.3, 0.4], [0.25, 0.3, 0.35])
PAIR_H3 = ([0.3, 0.3, 0.3], [0.32, 0.33, 0.30])
# r_1 = r_2 = 6/7 >= r0 = 1/2; one type-2 round by party 3, then party 3 is trimmed
PAIR_T2 = ([0.3, 0.3, 0.3], [0.35, 0.35, 0.1])


def states(pair):
    return make_state(pair[0]), make_state(pair[1])


def full_target(rng, n):
    """Random pair whose target has every component (x0 included) positive."""
    return random_state(rng, n), random_state(rng, n)


class TestPlan:
    def test_min_ratio_example(self):
        x, y = states(PAIR_08)
        plan = plan_transform(x, y)
        assert plan.predicted_success == pytest.approx(0.8, abs=1e-12)
        assert plan.steps[-1].result.close_to(y, 1e-12)

    def test_identity_is_empty(self):
        x = make_state([0.2, 0.3, 0.4])
        plan = plan_transform(x, x)
        assert plan.steps == ()
        assert plan.predicted_success == 1

    def test_chain_example(self):
        x, y = states(PAIR_H3)
        plan = plan_transform(x, y)
        assert plan.predicted_success == pytest.approx(75 / 352, abs=1e-12)
        kinds = [s.kind for s in plan.steps]
        assert kinds[:3] == [StepKind.T1] * 3

    def test_single_t2_round(self):
        x, y = states(PAIR_T2)
        plan = plan_transform(x, y)
        assert [(s.kind, s.party) for s in plan.steps] == [(StepKind.T2, 3), (StepKind.DET_LOWER, 3)]
        assert plan.predicted_success == pytest.approx(6 / 7, abs=1e-12)

    def test_predicted_equals_lower_bound(self, rng):
        for _ in range(1000):
            n = int(rng.integers(3, 7))
            x, y = full_target(rng, n)
            plan = plan_transform(x, y)
            assert plan.predicted_success == pytest.approx(lower_bound(x, y).lower, abs=1e-12)
            final = plan.steps[-1].result if plan.steps else x
            assert final.close_to(y, 1e-9)

    def test_json_round_trip(self):
        x, y = states(PAIR_H3)
        plan = plan_transform(x, y)
        text = json.dumps(plan.to_json())
        back = plan_from_json(json.loads(text))
        assert back.to_json() == plan.to_json()
        assert tree_probability(build_tree(x, back)) == pytest.approx(plan.predicted_success, abs=1e-15)

    def test_prefix_drops_lowering_tail(self):
        x, y = make_state([0.2, 0.3, 0.4]), make_state([0.25, 0.3, 0.3])
        plan = plan_transform(x, y)
        pre = plan.prefix()
        assert plan.steps[-1].kind is StepKind.DET_LOWER
        assert all(s.kind is not StepKind.DET_LOWER for s in pre.steps)
        assert pre.predicted_success == pytest.approx(plan.predicted_success, abs=1e-15)
        assert enumerate_protocol(to_statevector(x), pre) == pytest.approx(plan.predicted_success, abs=1e-10)


class TestDegenerateTargets:
    def test_disentangle(self):
        x, y = make_state([0.2, 0.3, 0.4]), make_state([0.3, 0.0, 0.5])
        plan = plan_transform(x, y)
        assert plan.steps[0].kind is StepKind.DISENTANGLE
        assert plan.predicted_success == pytest.approx(achievable_probability(x, y), abs=1e-12)
        assert enumerate_protocol(to_statevector(x), plan.prefix()) == pytest.approx(
            plan.predicted_success, abs=1e-10)

    def test_x0_filter(self):
        x, y = make_state([0.2, 0.3, 0.4]), w_state(3)
        plan = plan_transform(x, y)
        assert plan.steps[0].kind is StepKind.X0_FILTER
        assert plan.predicted_success == pytest.approx(achievable_probability(x, y), abs=1e-12)
        assert enumerate_protocol(to_statevector(x), plan.prefix()) == pytest.approx(
            plan.predicted_success, abs=1e-10)

    def test_random_degenerate(self, rng):
        for _ in range(50):
            n = int(rng.integers(3, 6))
            x = random_state(rng, n, x0=bool(rng.integers(2)))
            y = random_state(rng, n, x0=bool(rng.integers(2)))
            kill = int(rng.integers(1, n + 1))
            if rng.random() < 0.5:
                y = make_state([0.0 if k == kill else v for k, v in enumerate(y.x, start=1)])
            plan = plan_transform(x, y)
            assert plan.predicted_success == pytest.approx(achievable_probability(x, y), abs=1e-12)
            tree = build_tree(x, plan)
            assert tree_probability(tree) == pytest.approx(plan.predicted_success, abs=1e-12)


class TestErrors:
    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            plan_transform(make_state([0.5, 0.5]), w_state(3))

    def test_product_source(self):
        with pytest.raises(ProductState):
            plan_transform(make_state([0, 0, 0]), w_state(3))

    def test_unreachable(self):
        with pytest.raises(TargetUnreachable):
            plan_transform(make_state([0.5, 0.0, 0.3]), w_state(3))

    def test_step_precondition(self):
        x, y = states(PAIR_08)
        plan = plan_transform(x, y)
        # the final type-2 round needs p > 1 - x_3, which fails for a tiny x_3
        with pytest.raises(StepPreconditionViolated) as err:
            build_tree(make_state([0.45, 0.45, 0.01]), plan)
        assert err.value.round_index >= 1


def chain_tree(probs, target):
    """Hand-built tree: each level has one continuing edge and one dead end."""
    root = TreeNode(make_state([0.3, 0.3, 0.3]))
    node = root
    for i, p in enumerate(probs):
        last = i == len(probs) - 1
        nxt = TreeNode(target if last else make_state([0.3, 0.3, 0.3]))
        node.edges.append(TreeEdge(p, OutcomeTriple(p, 1.0, 1.0, X0Mode.FREE), nxt))
        dead = TreeNode(make_state([0.0, 0.0, 0.0]))
        node.edges.append(TreeEdge(1 - p, OutcomeTriple(1 - p, 0.0, KILL, X0Mode.FREE), dead))
        node = nxt
    tree = ProtocolTree(root, target)
    classify(tree)
    return tree


class TestTree:
    def test_empty_plan(self):
        x = make_state([0.2, 0.3, 0.4])
        tree = build_tree(x, plan_transform(x, x))
        assert tree.root.is_leaf
        assert tree.root.success
        assert tree_probability(tree) == 1

    def test_chain_product(self):
        tree = chain_tree([0.65, 0.9], make_state([0.25, 0.25, 0.25]))
        assert tree_probability(tree) == pytest.approx(0.585, abs=1e-15)

    def test_unclassified_rejected(self):
        root = TreeNode(w_state(3))
        root.edges.append(TreeEdge(1.0, OutcomeTriple(1.0, 1.0, 1.0), TreeNode(w_state(3))))
        with pytest.raises(UnclassifiedTree):
            tree_probability(ProtocolTree(root, w_state(3)))

    def test_chain_example_edges(self):
        x, y = states(PAIR_H3)
        tree = build_tree(x, plan_transform(x, y))
        node, prod = tree.root, 1.0
        while not node.is_leaf:
            edge = next(e for e in node.edges if e.cls is EdgeClass.INTERMEDIATE)
            prod *= edge.p
            node = edge.child
        assert prod == pytest.approx(75 / 352, abs=1e-12)
        assert tree_probability(tree) == pytest.approx(75 / 352, abs=1e-12)

    def test_edges_normalized(self, rng):
        for _ in range(200):
            n = int(rng.integers(3, 7))
            x, y = full_target(rng, n)
            tree = build_tree(x, plan_transform(x, y))
            for node in tree.nodes():
                if node.edges:
                    assert math.fsum(e.p for e in node.edges) == pytest.approx(1, abs=1e-12)

    def test_never_beats_upper_bound(self, rng):
        for _ in range(1000):
            n = int(rng.integers(3, 7))
            x, y = full_target(rng, n)
            prob = tree_probability(build_tree(x, plan_transform(x, y)))
            assert prob <= upper_bound(x, y) + 1e-12

    def test_json(self):
        x, y = states(PAIR_08)
        data = build_tree(x, plan_transform(x, y)).to_json()
        assert len(data["nodes"]) == len(data["edges"]) + 1
        assert {e["class"] for e in data["edges"]} == {"INTERMEDIATE", "FAILURE"}
        json.dumps(data)


class TestMonteCarlo:
    def test_certain_plan(self):
        x = make_state([0.2, 0.3, 0.4])
        res = monte_carlo(x, plan_transform(x, x), 1000, 1)
        assert res.estimate == 1.0 and res.stderr == 0.0

    @pytest.mark.parametrize("pair", [PAIR_08, PAIR_H3])
    def test_within_three_sigma(self, pair):
        x, y = states(pair)
        plan = plan_transform(x, y)
        res = monte_carlo(x, plan, 100_000, 42)
        assert abs(res.estimate - plan.predicted_success) <= 3 * res.stderr

    def test_chunking_is_invisible(self):
        x, y = states(PAIR_H3)
        plan = plan_transform(x, y)
        whole = monte_carlo(x, plan, 5000, 9)
        assert monte_carlo(x, plan, 5000, 9, chunk=37) == whole
        assert monte_carlo(x, plan, 5000, 9, chunk=1) == whole

    def test_seeded(self):
        x, y = states(PAIR_08)
        plan = plan_transform(x, y)
        assert monte_carlo(x, plan, 2000, 3) == monte_carlo(x, plan, 2000, 3)
        assert monte_carlo(x, plan, 2000, 3) != monte_carlo(x, plan, 2000, 4)

    def test_trials_positive(self):
        x = w_state(3)
        with pytest.raises(ValueError):
            monte_carlo(x, plan_transform(x, x), 0, 1)


def suboptimal_t2_plan():
    """Type-2 round with p = 0.8 < 6/7, then lowering back onto the target."""
    x, y = states(PAIR_T2)
    meas = make_t2(x, 3, 0.8)
    cur = apply_update(x, 3, meas.success)
    steps = [ProtocolStep(3, StepKind.T2, {"p": 0.8}, meas.success, cur)]
    for k in (1, 2, 3):
        new = deterministic_lower(cur, k, y[k])
        steps.append(ProtocolStep(k, StepKind.DET_LOWER, {"target": y[k]}, lowering_outcome(cur, k, y[k]), new))
        cur = new
    return x, y, ProtocolPlan(x, y, tuple(steps), 0.8)


class TestAudit:
    def test_identity(self):
        x = make_state([0.2, 0.3, 0.4])
        assert audit_optimality(build_tree(x, plan_transform(x, x)), x).empty

    @pytest.mark.parametrize("pair", [PAIR_08, PAIR_T2])
    def test_min_ratio_protocol_passes(self, pair):
        x, y = states(pair)
        report = audit_optimality(build_tree(x, plan_transform(x, y)), y)
        assert report.empty
        assert max(abs(r) for _, r in report.residuals) <= 1e-12

    def test_suboptimal_plan_flagged(self):
        x, y, plan = suboptimal_t2_plan()
        tree = build_tree(x, plan)
        assert tree_probability(tree) == pytest.approx(0.8, abs=1e-12)
        report = audit_optimality(tree, y)
        assert not report.empty
        assert report.residual_violations

    def test_chain_protocol_is_not_min_ratio(self):
        x, y = states(PAIR_H3)
        assert not audit_optimality(build_tree(x, plan_transform(x, y)), y).empty


class TestStarBranch:
    def test_min_ratio_first_case(self):
        x, y = states(PAIR_T2)
        assert star_branch_check(build_tree(x, plan_transform(x, y)))

    def test_random_r1_case(self, rng):
        hits = 0
        for _ in range(300):
            x, y = full_target(rng, 4)
            if lower_bound(x, y).profile.sorted_ratios()[0] >= x.x0 / y.x0:
                hits += 1
                assert star_branch_check(build_tree(x, plan_transform(x, y)))
        assert hits > 10

    def test_empty_tree(self):
        x = w_state(3)
        assert star_branch_check(build_tree(x, plan_transform(x, x)))

    def test_half_edge(self):
        target = make_state([0.25, 0.25, 0.25])
        root = TreeNode(make_state([0.3, 0.3, 0.3]))
        root.edges.append(TreeEdge(1.0, OutcomeTriple(1.0, 0.5, 1.0, X0Mode.FREE), TreeNode(target)))
        tree = ProtocolTree(root, target)
        classify(tree)
        assert not star_branch_check(tree)

    def test_type1_round_breaks_it(self):
        # r1 < r0 <= r2: the success branch uses a type-1 edge with s*t = sigma < 1
        x, y = states(PAIR_08)
        assert not star_branch_check(build_tree(x, plan_transform(x, y)))


def test_oracle_agrees_on_saturated_pairs(rng):
    done = 0
    while done < 100:
        x, y = full_target(rng, int(rng.integers(3, 6)))
        if not lower_bound(x, y).r1_optimal:
            continue
        done += 1
        plan = plan_transform(x, y)
        got = enumerate_protocol(to_statevector(x), plan.prefix())
        assert got == pytest.approx(upper_bound(x, y), abs=1e-10)
