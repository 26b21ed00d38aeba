"""Two-phase confidence-vector defense.

Phase 1 splits [0, 1) into one sub-range per class score, discretizes each
sub-range into ``m`` candidates, and picks a replacement score per sub-range
with an exponential mechanism (probability proportional to
``exp(epsilon * utility / 2)``, utilities rescaled so their sensitivity is 1).
Phase 2 renormalizes the replacements into a probability vector via
``z_i = exp(epsilon * y'_i / 2) / sum_j exp(epsilon * y'_j / 2)``.

Both phases preserve the order of scores, so the predicted class never
changes.  All functions are pure; every call builds its own RNG from the
seed it is given, so repeated calls with identical inputs return identical
outputs and concurrent calls never share state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCandidates, InvalidVector, NotNeighboring

# Input vectors may miss an exact sum of 1 by this much; they get rescaled.
SUM_TOLERANCE = 1e-6

# Partitions of neighboring vectors must agree boundary-by-boundary to this.
PARTITION_TOLERANCE = 1e-9

_MAX_SEED = 2**64


@dataclass(frozen=True)
class MechanismConfig:
    """Tunable knobs of the defense.  The one real parameter is ``epsilon``.

    ``m`` is the number of candidates per sub-range, ``utility_floor_fraction``
    bounds the reciprocal-distance utility (the floor is that fraction of the
    candidate spacing), and ``rng_seed`` makes every draw reproducible.
    """

    epsilon: float
    m: int = 5
    utility_floor_fraction: float = 0.1
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be a positive finite real, got {self.epsilon}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if not 0 < self.utility_floor_fraction <= 1:
            raise ValueError(
                f"utility_floor_fraction must lie in (0, 1], got {self.utility_floor_fraction}"
            )
        if int(self.rng_seed) != self.rng_seed or not 0 <= self.rng_seed < _MAX_SEED:
            raise ValueError(f"rng_seed must be a 64-bit unsigned integer, got {self.rng_seed}")


@dataclass(frozen=True)
class RangePartition:
    """Sub-range boundaries over [0, 1) plus the sort that produced them.

    ``boundaries`` has k+1 entries: 0, the midpoints of consecutive sorted
    scores, and 1.  ``permutation[p]`` is the original index of the p-th
    smallest score (stable sort, so ties keep input order).
    """

    boundaries: np.ndarray
    permutation: np.ndarray

    @property
    def k(self) -> int:
        return self.boundaries.size - 1

    @property
    def inverse_permutation(self) -> np.ndarray:
        """Original index -> sorted position."""
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(self.permutation.size)
        return inv


@dataclass(frozen=True)
class ModifiedVector:
    """Phase-1 output: replacement scores in original class order.

    ``sub_range[i]`` is the sorted position (= sub-range index) that produced
    ``scores[i]``.  The scores need not sum to 1; phase 2 fixes that.
    """

    scores: np.ndarray
    sub_range: np.ndarray


@dataclass(frozen=True)
class SelectionTable:
    """Exact candidate/probability table of one exponential-mechanism draw."""

    candidates: np.ndarray
    probabilities: np.ndarray


def validate_scores(scores) -> np.ndarray:
    """Check confidence-vector invariants and return a rescaled float64 copy.

    Requires k >= 2 finite scores in [0, 1] summing to 1 within 1e-6; the
    returned copy is divided by its sum so downstream code sees an exact
    probability vector.
    """
    y = np.asarray(scores, dtype=np.float64)
    if y.ndim != 1:
        raise InvalidVector(f"expected a 1-d score vector, got shape {y.shape}")
    if y.size < 2:
        raise InvalidVector(f"need at least 2 class scores, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise InvalidVector("scores must be finite")
    if np.any(y < 0.0) or np.any(y > 1.0):
        raise InvalidVector("scores must lie in [0, 1]")
    total = float(y.sum())
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise InvalidVector(f"scores sum to {total!r}, more than {SUM_TOLERANCE} away from 1")
    return y / total


def partition(scores) -> RangePartition:
    """Split [0, 1) into k sub-ranges with boundaries at midpoints of sorted scores."""
    y = validate_scores(scores)
    perm = np.argsort(y, kind="stable")
    s = y[perm]
    bounds = np.empty(y.size + 1)
    bounds[0] = 0.0
    bounds[-1] = 1.0
    bounds[1:-1] = 0.5 * (s[:-1] + s[1:])
    return RangePartition(boundaries=bounds, permutation=perm)


def _discretize_range(start: float, end: float, m: int) -> np.ndarray:
    width = end - start
    if width <= 0.0:
        return np.full(m, start)
    rho = width / m
    return start + rho * np.arange(m)


def discretize(part: RangePartition, index: int, m: int) -> np.ndarray:
    """Candidates of sub-range ``index`` (0-based): start, start+rho, ..., start+(m-1)*rho.

    ``rho`` is the sub-range width divided by ``m``; a zero-width sub-range
    yields m copies of its start.
    """
    if not 0 <= index < part.k:
        raise IndexError(f"sub-range index {index} out of range for k={part.k}")
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    return _discretize_range(float(part.boundaries[index]), float(part.boundaries[index + 1]), int(m))


def _selection_probabilities(
    y_value: float, candidates: np.ndarray, epsilon: float, floor_fraction: float
) -> np.ndarray:
    """Closed-form exponential-mechanism table over the candidates.

    Utility of a candidate is the reciprocal of its distance to ``y_value``,
    floored at ``floor_fraction`` of the candidate spacing, then divided by
    the largest utility so the scale (and hence the sensitivity) is 1.
    """
    m = candidates.size
    if m == 1:
        return np.ones(1)
    spacing = float(candidates[1] - candidates[0])
    if spacing <= 0.0:
        # Degenerate (zero-width) sub-range: every candidate is identical.
        return np.full(m, 1.0 / m)
    floor = floor_fraction * spacing
    raw = 1.0 / np.maximum(np.abs(candidates - y_value), floor)
    utility = raw / raw.max()
    # Shift by the max exponent before exponentiating; identical result, no overflow.
    weights = np.exp(0.5 * epsilon * (utility - 1.0))
    return weights / weights.sum()


def selection_table(
    y_value: float, candidates, epsilon: float, utility_floor_fraction: float = 0.1
) -> SelectionTable:
    """Exact selection probabilities for one score over its candidate set."""
    cands = np.asarray(candidates, dtype=np.float64)
    if cands.size == 0:
        raise EmptyCandidates("candidate set is empty")
    if not (np.isfinite(epsilon) and epsilon > 0):
        raise ValueError(f"epsilon must be a positive finite real, got {epsilon}")
    probs = _selection_probabilities(float(y_value), cands, epsilon, utility_floor_fraction)
    return SelectionTable(candidates=cands, probabilities=probs)


def _draw_index(probabilities: np.ndarray, u: float) -> int:
    """Inverse-CDF draw: smallest index whose cumulative probability exceeds u."""
    cum = np.cumsum(probabilities)
    return min(int(np.searchsorted(cum, u, side="right")), probabilities.size - 1)


def modify(scores, cfg: MechanismConfig) -> ModifiedVector:
    """Phase 1: replace each score by an exponential-mechanism draw from its sub-range.

    Draws happen in ascending-score order, one uniform variate per position.
    Runs of exactly equal scores are all assigned their shared boundary value
    (deterministically), which keeps equal inputs equal in the output; strict
    inequalities stay strict because distinct sub-ranges never overlap.
    """
    y = validate_scores(scores)
    part = partition(y)
    k = y.size
    sorted_scores = y[part.permutation]
    bounds = part.boundaries
    rng = np.random.default_rng(cfg.rng_seed)
    u = rng.random(k)

    y_prime_sorted = np.empty(k)
    i = 0
    while i < k:
        j = i
        while j + 1 < k and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        if j > i:
            y_prime_sorted[i : j + 1] = sorted_scores[i]
        else:
            cands = _discretize_range(float(bounds[i]), float(bounds[i + 1]), cfg.m)
            probs = _selection_probabilities(
                float(sorted_scores[i]), cands, cfg.epsilon, cfg.utility_floor_fraction
            )
            y_prime_sorted[i] = cands[_draw_index(probs, u[i])]
        i = j + 1

    out = np.empty(k)
    out[part.permutation] = y_prime_sorted
    sub = np.empty(k, dtype=np.intp)
    sub[part.permutation] = np.arange(k)
    return ModifiedVector(scores=out, sub_range=sub)


def _as_score_array(y_prime) -> np.ndarray:
    v = np.asarray(getattr(y_prime, "scores", y_prime), dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidVector(f"expected a 1-d score vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidVector("scores must be finite")
    return v


def normalize(y_prime, epsilon: float) -> np.ndarray:
    """Phase 2: exponential normalization, z_i proportional to exp(epsilon * y'_i / 2).

    Accepts a ModifiedVector or any 1-d array.  The largest exponent is
    subtracted before exponentiating, which changes nothing mathematically
    but keeps the computation finite for any epsilon.
    """
    if not (np.isfinite(epsilon) and epsilon > 0):
        raise ValueError(f"epsilon must be a positive finite real, got {epsilon}")
    v = _as_score_array(y_prime)
    t = 0.5 * epsilon * v
    w = np.exp(t - t.max())
    return w / w.sum()


def defend(scores, cfg: MechanismConfig) -> np.ndarray:
    """Full defense: modify then normalize with the same budget.

    The output is a valid confidence vector whose argmax equals the input's
    argmax (tied maxima stay tied).
    """
    return normalize(modify(scores, cfg), cfg.epsilon)


def dp_ratio_check(scores, other_scores, cfg: MechanismConfig) -> np.ndarray:
    """Worst-case selection-probability ratio per sub-range for two neighboring vectors.

    Neighboring means: L1 distance at most 1 and identical sub-range
    partitions (each boundary within 1e-9), so both vectors share every
    candidate set.  The tables are compared pointwise in closed form; the
    privacy contract is ``max(result) <= exp(cfg.epsilon)``.
    """
    y = validate_scores(scores)
    y_hat = validate_scores(other_scores)
    if y.size != y_hat.size:
        raise NotNeighboring(f"lengths differ: {y.size} vs {y_hat.size}")
    if float(np.abs(y - y_hat).sum()) > 1.0 + PARTITION_TOLERANCE:
        raise NotNeighboring("L1 distance exceeds 1")
    part = partition(y)
    part_hat = partition(y_hat)
    if float(np.abs(part.boundaries - part_hat.boundaries).max()) > PARTITION_TOLERANCE:
        raise NotNeighboring("sub-range partitions differ")

    sorted_y = y[part.permutation]
    sorted_y_hat = y_hat[part_hat.permutation]
    ratios = np.empty(y.size)
    for i in range(y.size):
        cands = discretize(part, i, cfg.m)
        p = _selection_probabilities(
            float(sorted_y[i]), cands, cfg.epsilon, cfg.utility_floor_fraction
        )
        q = _selection_probabilities(
            float(sorted_y_hat[i]), cands, cfg.epsilon, cfg.utility_floor_fraction
        )
        ratios[i] = max(float((p / q).max()), float((q / p).max()))
    return ratios


def derive_seed(seed: int, index: int) -> int:
    """Stable 64-bit child seed for item ``index`` of a stream seeded by ``seed``."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])
