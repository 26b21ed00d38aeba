"""Desk-scale membership-inference evaluation harness.

Synthesizes member/non-member confidence cohorts (members are more peaked,
mimicking a model that is more confident on its own training data), measures
two simple attackers before and after the defense, and reports the usual
metrics: attack accuracy, distortion, and argmax preservation.

Both attackers are refit on defended vectors for the post-defense numbers,
i.e. the adversary is assumed to know the defense is in place.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .calibration import DefensePolicy, defend_with_policy
from .errors import Diverged, EmptyCohort, InvalidSpec
from .mechanism import MechanismConfig, defend, derive_seed


@dataclass(frozen=True)
class CohortSpec:
    """Synthetic cohort shape.

    Concentration c controls peakedness: each vector puts a Beta(c, 1) share
    (expected value c/(c+1)) on one random class and spreads the rest
    uniformly over the simplex, so higher concentration means a higher
    expected top score.
    """

    k: int
    n_members: int
    n_nonmembers: int
    member_concentration: float
    nonmember_concentration: float
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if int(self.k) != self.k or self.k < 2:
            raise InvalidSpec(f"k must be an integer >= 2, got {self.k}")
        if self.n_members < 1 or self.n_nonmembers < 1:
            raise InvalidSpec("both cohort sizes must be positive")
        if self.member_concentration <= 0 or self.nonmember_concentration <= 0:
            raise InvalidSpec("concentrations must be positive")
        if self.nonmember_concentration > self.member_concentration:
            raise InvalidSpec("non-member cohort must not be more peaked than the member cohort")


@dataclass(frozen=True)
class EvalReport:
    """Before/after metrics of one defense evaluation."""

    attack_accuracy_before: float
    attack_accuracy_after: float
    mean_l1_distortion: float
    mean_l2_distortion: float
    argmax_preservation_rate: float
    epsilon: float

    def as_dict(self) -> dict:
        return {
            "attack_accuracy_before": self.attack_accuracy_before,
            "attack_accuracy_after": self.attack_accuracy_after,
            "mean_l1_distortion": self.mean_l1_distortion,
            "mean_l2_distortion": self.mean_l2_distortion,
            "argmax_preservation_rate": self.argmax_preservation_rate,
            "epsilon": self.epsilon,
        }

    def to_text(self) -> str:
        """Flat key-value record, one metric per line."""
        return "\n".join(f"{key}={value!r}" for key, value in self.as_dict().items()) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def _peaked_simplex(rng: np.random.Generator, n: int, k: int, concentration: float) -> np.ndarray:
    hot = rng.integers(0, k, size=n)
    share = rng.beta(concentration, 1.0, size=n)
    vectors = rng.dirichlet(np.ones(k), size=n) * (1.0 - share)[:, None]
    vectors[np.arange(n), hot] += share
    return vectors


def gen_cohort(spec: CohortSpec) -> tuple[np.ndarray, np.ndarray]:
    """Draw the member and non-member cohorts, seeded and reproducible."""
    rng = np.random.default_rng(spec.rng_seed)
    members = _peaked_simplex(rng, spec.n_members, spec.k, spec.member_concentration)
    nonmembers = _peaked_simplex(rng, spec.n_nonmembers, spec.k, spec.nonmember_concentration)
    return members, nonmembers


def threshold_attack(members, nonmembers) -> tuple[float, float]:
    """Best single threshold on the top score, and its balanced accuracy.

    Sweeps every observed top score as a candidate threshold for the rule
    "member iff top score > threshold" and returns the maximizer.
    """
    m = np.asarray(members, dtype=np.float64)
    n = np.asarray(nonmembers, dtype=np.float64)
    if m.size == 0 or n.size == 0:
        raise EmptyCohort("both cohorts must be non-empty")
    member_max = np.sort(m.max(axis=1))
    nonmember_max = np.sort(n.max(axis=1))
    thresholds = np.unique(np.concatenate([member_max, nonmember_max]))
    tpr = 1.0 - np.searchsorted(member_max, thresholds, side="right") / member_max.size
    tnr = np.searchsorted(nonmember_max, thresholds, side="right") / nonmember_max.size
    balanced = 0.5 * (tpr + tnr)
    best = int(np.argmax(balanced))
    return float(thresholds[best]), float(balanced[best])


def _sigmoid(t: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def logistic_loss_and_grad(weights, bias, features, labels):
    """Mean cross-entropy of a logistic model and its analytic gradient."""
    t = features @ weights + bias
    signed = t * (2.0 * labels - 1.0)
    loss = float(np.mean(np.logaddexp(0.0, -signed)))
    residual = _sigmoid(t) - labels
    grad_w = features.T @ residual / labels.size
    grad_b = float(np.mean(residual))
    return loss, grad_w, grad_b


def logistic_attack(
    train_x,
    train_labels,
    test_x,
    test_labels,
    epochs: int = 1000,
    lr: float = 1.0,
) -> float:
    """Learned membership attacker: logistic regression by batch gradient descent.

    Features are standardized with the training statistics (an affine change
    the attacker is free to make).  Training stops once the loss decrease
    falls under 1e-6 or the epoch cap is hit; a non-finite or exploding loss
    raises Diverged.  Returns plain accuracy on the held-out set.
    """
    x = np.asarray(train_x, dtype=np.float64)
    y = np.asarray(train_labels, dtype=np.float64)
    if abs(float(y.mean()) - 0.5) > 0.05:
        raise ValueError("training labels must be balanced within 10%")
    mean = x.mean(axis=0)
    scale = np.maximum(x.std(axis=0), 1e-12)
    x = (x - mean) / scale

    weights = np.zeros(x.shape[1])
    bias = 0.0
    initial = None
    previous = np.inf
    for _ in range(int(epochs)):
        loss, grad_w, grad_b = logistic_loss_and_grad(weights, bias, x, y)
        if not np.isfinite(loss):
            raise Diverged("loss is not finite; lower the learning rate")
        if initial is None:
            initial = loss
        elif loss > 4.0 * initial + 2.0:
            raise Diverged("loss is exploding; lower the learning rate")
        if previous - loss < 1e-6:
            break
        weights -= lr * grad_w
        bias -= lr * grad_b
        previous = loss

    held_x = (np.asarray(test_x, dtype=np.float64) - mean) / scale
    held_y = np.asarray(test_labels, dtype=np.float64)
    predicted = _sigmoid(held_x @ weights + bias) >= 0.5
    return float(np.mean(predicted == (held_y > 0.5)))


def attack_features(vectors, sort: bool = True) -> np.ndarray:
    """Attacker's view of the vectors: scores sorted descending per row.

    Sorting removes class order, mirroring how confidence-based attackers
    preprocess their input; pass sort=False to keep raw class order.
    """
    v = np.asarray(vectors, dtype=np.float64)
    if not sort:
        return v.copy()
    return np.sort(v, axis=1)[:, ::-1]


def _strongest_attack(members: np.ndarray, nonmembers: np.ndarray, sort: bool = True) -> float:
    """Best of the threshold and the refit logistic attacker."""
    _, threshold_acc = threshold_attack(members, nonmembers)
    n = min(members.shape[0], nonmembers.shape[0])
    feats_m = attack_features(members[:n], sort=sort)
    feats_n = attack_features(nonmembers[:n], sort=sort)
    train_x = np.vstack([feats_m[0::2], feats_n[0::2]])
    train_y = np.concatenate([np.ones(feats_m[0::2].shape[0]), np.zeros(feats_n[0::2].shape[0])])
    test_x = np.vstack([feats_m[1::2], feats_n[1::2]])
    test_y = np.concatenate([np.ones(feats_m[1::2].shape[0]), np.zeros(feats_n[1::2].shape[0])])
    logistic_acc = logistic_attack(train_x, train_y, test_x, test_y)
    return max(threshold_acc, logistic_acc)


def _defend_cohort(
    vectors: np.ndarray,
    cfg: MechanismConfig,
    policy: DefensePolicy | None,
    first_index: int,
) -> np.ndarray:
    out = np.empty_like(vectors)
    for i, row in enumerate(vectors):
        cfg_i = replace(cfg, rng_seed=derive_seed(cfg.rng_seed, first_index + i))
        if policy is None:
            out[i] = defend(row, cfg_i)
        else:
            out[i], _ = defend_with_policy(row, cfg_i, policy)
    return out


def evaluate_defense(
    spec: CohortSpec, cfg: MechanismConfig, policy: DefensePolicy | None = None
) -> EvalReport:
    """Full before/after evaluation on one synthetic cohort pair.

    With no policy every vector is defended flat at ``cfg.epsilon`` (the
    protocol behind the epsilon-grid comparisons); with a policy the
    operating budget is chosen per vector.  Attackers are refit on the
    defended vectors.  Each vector gets its own child seed, so reports are
    reproducible and independent of evaluation order.
    """
    members, nonmembers = gen_cohort(spec)
    before = _strongest_attack(members, nonmembers)

    defended_members = _defend_cohort(members, cfg, policy, 0)
    defended_nonmembers = _defend_cohort(nonmembers, cfg, policy, members.shape[0])

    raw = np.vstack([members, nonmembers])
    defended = np.vstack([defended_members, defended_nonmembers])
    preserved = float(np.mean(np.argmax(defended, axis=1) == np.argmax(raw, axis=1)))
    diff = defended - raw
    mean_l1 = float(np.abs(diff).sum(axis=1).mean())
    mean_l2 = float(np.sqrt((diff * diff).sum(axis=1)).mean())

    after = _strongest_attack(defended_members, defended_nonmembers)
    return EvalReport(
        attack_accuracy_before=before,
        attack_accuracy_after=after,
        mean_l1_distortion=mean_l1,
        mean_l2_distortion=mean_l2,
        argmax_preservation_rate=preserved,
        epsilon=cfg.epsilon,
    )
