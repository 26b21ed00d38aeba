"""One-record defense pipeline shared by the batch CLI and the HTTP proxy.

Ties together validation, budget accounting, per-item seeding, and the
mechanism itself.  The budget keys on the caller-supplied record id when
present, otherwise on a canonical serialization of the submitted scores.
"""

from __future__ import annotations

from dataclasses import replace

from .accountant import BudgetLedger, BudgetParams, canonical_json_bytes, fingerprint, register_query
from .calibration import DefensePolicy, defend_with_policy
from .errors import BudgetExhausted
from .mechanism import MechanismConfig, defend, derive_seed, validate_scores
from .records import DefendRequest, DefendResponse


def request_fingerprint(request: DefendRequest) -> str:
    """Budget key: the record id when given, else the canonical score bytes."""
    if request.record_id is not None:
        return fingerprint(request.record_id.encode("utf-8"))
    return fingerprint(canonical_json_bytes(list(request.scores)))


class DefenseService:
    """Applies the defense (with optional policy and budget) to requests.

    The ledger may be handed in directly, or created lazily from
    ``budget_total_epsilon`` once the first record reveals the class count.
    Budget checks run only after the scores validate, so malformed requests
    never consume budget.
    """

    def __init__(
        self,
        cfg: MechanismConfig,
        policy: DefensePolicy | None = None,
        ledger: BudgetLedger | None = None,
        budget_total_epsilon: float | None = None,
        ledger_path=None,
    ):
        self.cfg = cfg
        self.policy = policy
        self._ledger = ledger
        self._budget_total = budget_total_epsilon
        self._ledger_path = ledger_path
        self.budget_enabled = ledger is not None or budget_total_epsilon is not None

    @property
    def ledger(self) -> BudgetLedger | None:
        return self._ledger

    def _ledger_for(self, num_classes: int) -> BudgetLedger:
        if self._ledger is None:
            params = BudgetParams(
                per_access_epsilon=self.cfg.epsilon,
                num_classes=num_classes,
                overall_epsilon=self._budget_total,
            )
            self._ledger = BudgetLedger(params, path=self._ledger_path)
        return self._ledger

    def defend_request(self, request: DefendRequest, seed_index: int) -> DefendResponse:
        """Defend one record; raises InvalidVector or BudgetExhausted."""
        scores = validate_scores(request.scores)
        if self.budget_enabled:
            ledger = self._ledger_for(scores.size)
            decision = register_query(ledger, request_fingerprint(request))
            if not decision.allowed:
                raise BudgetExhausted("query budget for this record is exhausted")
            remaining: int | str = decision.remaining
        else:
            remaining = "unlimited"
        cfg = replace(self.cfg, rng_seed=derive_seed(self.cfg.rng_seed, seed_index))
        if self.policy is None:
            defended = defend(scores, cfg)
            epsilon_used = float(cfg.epsilon)
        else:
            defended, epsilon_used = defend_with_policy(scores, cfg, self.policy)
        return DefendResponse(
            scores=tuple(float(v) for v in defended),
            epsilon_used=epsilon_used,
            budget_remaining=remaining,
        )
