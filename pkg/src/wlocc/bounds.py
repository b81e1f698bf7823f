"""Closed-form conversion bounds between W-class states."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DimensionMismatch, PreconditionViolated, ZeroComponent
from .measurement import zero_x0_filter
from .state import RatioProfile, WClassComponents, ratio_profile

RATIO_TOL = 1e-12


@dataclass(frozen=True)
class BoundReport:
    upper: float
    lower: float
    r1_optimal: bool
    h: int | None
    profile: RatioProfile

    def to_json(self) -> dict:
        return {
            "upper": self.upper,
            "lower": self.lower,
            "r1_optimal": self.r1_optimal,
            "h": self.h,
            "perm": list(self.profile.perm),
        }


def _check_dims(x: WClassComponents, y: WClassComponents) -> None:
    if x.n != y.n:
        raise DimensionMismatch(f"party counts differ: {x.n} vs {y.n}")


def _require_full_target(y: WClassComponents) -> None:
    if min(y.x) <= 0 or y.x0 <= 0:
        raise PreconditionViolated("target needs every component and x0 positive; "
                                   "reduce degenerate targets first")


def upper_bound(x: WClassComponents, y: WClassComponents) -> float:
    """``min_k x_k / y_k`` over parties with ``y_k > 0``, capped at 1.

    A minimum ratio above 1 means every component already exceeds its target,
    and lowering alone reaches it with certainty.
    """
    _check_dims(x, y)
    finite = [a / b for a, b in zip(x.x, y.x) if b > 0]
    if not finite:
        raise PreconditionViolated("target has no excited party")
    return min(1.0, min(finite))


def r1_feasible(x: WClassComponents, y: WClassComponents) -> bool:
    """Whether the min-ratio bound is attainable: second-smallest ratio >= ``r0``."""
    _check_dims(x, y)
    _require_full_target(y)
    if x.n < 2:
        raise PreconditionViolated("needs at least two parties")
    prof = ratio_profile(x, y)
    return prof.sorted_ratios()[1] >= prof.r0 - RATIO_TOL


def chain_bound(sorted_r: list[float] | tuple[float, ...], r0: float) -> tuple[float, int | None]:
    """Lower bound and ``h`` from ascending ratios.

    If ``r_1 >= r0`` the bound is ``min(1, r_1)``. Otherwise ``h`` is the largest index
    with ``r0 > r_h`` and the bound is ``r_h * prod_{j<h} r_j / r0``.
    """
    if sorted_r[0] >= r0 - RATIO_TOL:
        return min(1.0, sorted_r[0]), None
    h = max(i for i, r in enumerate(sorted_r, start=1) if r0 > r + RATIO_TOL)
    value = sorted_r[h - 1]
    for r in sorted_r[: h - 1]:
        value *= r / r0
    return value, h


def lower_bound(x: WClassComponents, y: WClassComponents) -> BoundReport:
    _check_dims(x, y)
    _require_full_target(y)
    prof = ratio_profile(x, y)
    lower, h = chain_bound(prof.sorted_ratios(), prof.r0)
    return BoundReport(
        upper=min(1.0, min(prof.r)),
        lower=lower,
        r1_optimal=r1_feasible(x, y) if x.n >= 2 else True,
        h=h,
        profile=prof,
    )


def achievable_probability(x: WClassComponents, y: WClassComponents) -> float:
    """Success probability of the constructive protocol, degenerate targets included.

    Parties with ``y_k = 0`` detach first; if ``y0 = 0`` the zero-x0 filter
    runs next and multiplies in its success probability.
    """
    _check_dims(x, y)
    xs = [0.0 if b == 0 else a for a, b in zip(x.x, y.x)]
    cur = WClassComponents(tuple(xs))
    factor = 1.0
    if y.x0 == 0 and cur.x0 > 0 and cur.nonzero_parties():
        res = zero_x0_filter(cur)
        factor, cur = res.success_p, res.state
    active = [k for k in range(1, y.n + 1) if y[k] > 0]
    if not active:
        return factor
    ratios = sorted(cur[k] / y[k] for k in active)
    r0 = cur.x0 / y.x0 if y.x0 > 0 else 0.0
    return factor * chain_bound(ratios, r0)[0]


def distill_bound(x: WClassComponents) -> float:
    """Probability of reaching ``W_N`` through the zero-x0 filter and the min-ratio protocol."""
    if min(x.x) <= 0:
        raise ZeroComponent("a party with zero component cannot be re-entangled")
    n = x.n
    hi, lo, x0 = max(x.x), min(x.x), x.x0
    return 2 * hi * lo * n / (x0 + 2 * hi + math.sqrt(x0 * x0 + 4 * hi * x0))
