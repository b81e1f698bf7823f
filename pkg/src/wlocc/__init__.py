"""LOCC conversion of N-qubit W-class states: measurement calculus, protocols, bounds."""

from .bounds import (
    BoundReport,
    achievable_probability,
    distill_bound,
    lower_bound,
    r1_feasible,
    upper_bound,
)
from .measurement import (
    KILL,
    KrausSet,
    Measurement,
    OutcomeTriple,
    X0Mode,
    apply_update,
    check_monotonicity,
    deterministic_lower,
    disentangle,
    make_t1,
    make_t2,
    zero_x0_filter,
)
from .oracle import LocalAction, apply_local, enumerate_protocol
from .protocol import (
    ProtocolPlan,
    ProtocolStep,
    ProtocolTree,
    StepKind,
    audit_optimality,
    build_tree,
    monte_carlo,
    plan_transform,
    star_branch_check,
    tree_probability,
)
from .state import (
    RatioProfile,
    Statevector,
    WClassComponents,
    components_from_statevector,
    make_state,
    ratio_profile,
    to_statevector,
    w_state,
)

__version__ = "0.1.0"
