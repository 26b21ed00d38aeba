"""Fixed-point budget calibration and budget selection policies.

For a vector ``y`` and its modified version ``y'`` there is (generically) a
single budget at which exponential normalization of ``y'`` lands exactly back
on ``y``.  Everything here revolves around that pivot: finding it, choosing an
operating budget on the confident/unconfident side of it, and translating a
distortion target into a budget.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import Degenerate, LengthMismatch, NonPositiveScore, Unachievable
from .mechanism import (
    MechanismConfig,
    ModifiedVector,
    _as_score_array,
    modify,
    normalize,
    validate_scores,
)

_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# Minimum positive score accepted by the log-ratio seed; smaller is rejected.
_MIN_SCORE = 0.0


@dataclass(frozen=True)
class EpsilonStar:
    """Fixed-point budget: the L1-residual minimizer of ||normalize(y', e) - y||.

    ``pair_seed`` is the closed-form initializer
    ``2 * (ln y_max - ln y_min) / (y'_max - y'_min)``, which is already exact
    whenever an exact solution exists; ``residual`` is the L1 distance at the
    returned value (never worse than at the seed).
    """

    value: float
    residual: float
    pair_seed: float


@dataclass(frozen=True)
class DefensePolicy:
    """Threshold policy: deflate confident outputs, inflate unconfident ones.

    When the top score exceeds ``tau`` the vector counts as confident and is
    normalized with ``eps_confident`` (meant to sit below the fixed point);
    otherwise ``eps_unconfident`` (meant to sit above it) applies.
    """

    tau: float
    eps_confident: float
    eps_unconfident: float

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if self.eps_confident <= 0 or self.eps_unconfident <= 0:
            raise ValueError("both policy budgets must be positive")


def _golden_section_min(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Minimize a unimodal f on [lo, hi]; returns (argmin, min)."""
    x1 = hi - _INV_GOLDEN * (hi - lo)
    x2 = lo + _INV_GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_GOLDEN * (hi - lo)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def epsilon_star(y, y_prime) -> EpsilonStar:
    """Find the budget at which normalizing ``y_prime`` reproduces ``y``.

    Seeds with the closed-form pair formula over the extreme scores, then
    refines by golden-section search of the L1 residual on the bracket
    [seed/10, seed*10].  Raises NonPositiveScore if any score of ``y`` is 0
    (its logarithm is undefined; clamp upstream) and Degenerate when no
    positive budget can work (constant ``y_prime``, or uniform ``y``).
    """
    yv = validate_scores(y)
    if np.any(yv <= _MIN_SCORE):
        raise NonPositiveScore("every score must be strictly positive for the log-ratio seed")
    vp = _as_score_array(y_prime)
    if vp.size != yv.size:
        raise LengthMismatch(f"lengths differ: {yv.size} vs {vp.size}")
    spread = float(vp.max() - vp.min())
    if spread <= 0.0:
        raise Degenerate("modified vector is constant; normalization is uniform for every budget")
    seed = 2.0 * (math.log(float(yv.max())) - math.log(float(yv.min()))) / spread
    if seed <= 0.0:
        raise Degenerate("scores are uniform; no positive budget reproduces them")

    def residual_at(eps: float) -> float:
        return float(np.abs(normalize(vp, eps) - yv).sum())

    value, residual = _golden_section_min(residual_at, seed / 10.0, seed * 10.0)
    seed_residual = residual_at(seed)
    if seed_residual <= residual:
        value, residual = seed, seed_residual
    return EpsilonStar(value=float(value), residual=float(residual), pair_seed=float(seed))


def choose_epsilon(y, policy: DefensePolicy, eps_star: EpsilonStar) -> float:
    """Operating budget for one vector under the threshold policy.

    Confident vectors (top score above tau) get ``eps_confident``,
    which must sit strictly below the fixed point; the rest get
    ``eps_unconfident``, strictly above it.  A budget on the wrong side is
    clamped to 0.9x / 1.1x the fixed point and reported via a warning.
    """
    yv = validate_scores(y)
    star = eps_star.value
    if float(yv.max()) > policy.tau:
        if policy.eps_confident >= star:
            clamped = 0.9 * star
            warnings.warn(
                f"eps_confident={policy.eps_confident} is not below the fixed point "
                f"{star:.6g}; clamped to {clamped:.6g}",
                stacklevel=2,
            )
            return clamped
        return policy.eps_confident
    if policy.eps_unconfident <= star:
        clamped = 1.1 * star
        warnings.warn(
            f"eps_unconfident={policy.eps_unconfident} is not above the fixed point "
            f"{star:.6g}; clamped to {clamped:.6g}",
            stacklevel=2,
        )
        return clamped
    return policy.eps_unconfident


def distortion(y, z) -> tuple[float, float]:
    """L1 and L2 distance between a vector and its defended version."""
    a = np.asarray(y, dtype=np.float64)
    b = np.asarray(z, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    diff = b - a
    return float(np.abs(diff).sum()), float(np.sqrt(np.sum(diff * diff)))


def epsilon_for_distortion(y, y_prime, target_l1: float, side: str) -> float:
    """Budget whose normalization sits at a requested L1 distance from ``y``.

    The distance grows monotonically as the budget moves away from the fixed
    point, so a bisection on the requested side ("above" or "below" the fixed
    point) pins it down to within 1e-4.  Raises Unachievable when the target
    exceeds the supremum distance reachable on that side (or falls below the
    residual at the fixed point itself).
    """
    if side not in ("above", "below"):
        raise ValueError(f"side must be 'above' or 'below', got {side!r}")
    if target_l1 < 0:
        raise ValueError(f"target_l1 must be non-negative, got {target_l1}")
    star = epsilon_star(y, y_prime)
    if target_l1 == 0.0:
        return star.value
    if target_l1 > 2.0:
        raise Unachievable(f"L1 distance between probability vectors never exceeds 2, got {target_l1}")

    yv = validate_scores(y)
    vp = _as_score_array(y_prime)

    def dist_at(eps: float) -> float:
        return float(np.abs(normalize(vp, eps) - yv).sum())

    tol = 1e-4
    if dist_at(star.value) > target_l1 + tol:
        raise Unachievable(
            f"target {target_l1} lies below the residual {star.residual:.3g} at the fixed point"
        )

    if side == "above":
        limit = (vp == vp.max()).astype(np.float64)
        limit /= limit.sum()
    else:
        limit = np.full(vp.size, 1.0 / vp.size)
    supremum = float(np.abs(limit - yv).sum())
    if target_l1 > supremum + 1e-12:
        raise Unachievable(
            f"target {target_l1} exceeds the supremum distance {supremum:.6g} on the {side} side"
        )

    # Expand away from the fixed point until the target is bracketed.
    if side == "above":
        far = star.value * 2.0
        while dist_at(far) < target_l1 and far < 1e12:
            far *= 2.0
        lo_eps, hi_eps = star.value, far
    else:
        far = star.value * 0.5
        while dist_at(far) < target_l1 and far > 1e-12:
            far *= 0.5
        lo_eps, hi_eps = far, star.value

    for _ in range(200):
        mid = 0.5 * (lo_eps + hi_eps)
        d = dist_at(mid)
        if abs(d - target_l1) <= tol:
            return mid
        # Distance increases away from the fixed point on either side.
        moving_away = d < target_l1
        if side == "above":
            if moving_away:
                lo_eps = mid
            else:
                hi_eps = mid
        else:
            if moving_away:
                hi_eps = mid
            else:
                lo_eps = mid
    mid = 0.5 * (lo_eps + hi_eps)
    if abs(dist_at(mid) - target_l1) <= tol:
        return mid
    raise Unachievable(f"bisection exhausted without reaching target {target_l1} on the {side} side")


def defend_with_policy(scores, cfg: MechanismConfig, policy: DefensePolicy):
    """Defend one vector with the operating budget chosen by the policy.

    Phase 1 always runs with ``cfg.epsilon``; the realized modified vector
    determines the fixed point, and the policy picks the normalization budget
    relative to it.  Scores are floored at 1e-12 before the fixed-point seed
    (zero scores have no logarithm); a degenerate fixed point (uniform input)
    falls back to ``cfg.epsilon``.  Returns ``(z, epsilon_used)``.
    """
    yv = validate_scores(scores)
    y_prime = modify(yv, cfg)
    try:
        star = epsilon_star(np.maximum(yv, 1e-12), y_prime)
        eps_used = choose_epsilon(yv, policy, star)
    except Degenerate:
        eps_used = cfg.epsilon
    return normalize(y_prime, eps_used), float(eps_used)
