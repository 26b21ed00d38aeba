"""Per-record query budget: how often may the same record be answered.

Each answer about one record costs ``num_classes * per_access_epsilon`` of
privacy.  Given an overall target, the number of affordable repeat queries is

    b = floor( eps' * (e^eps' - 1) / (k * eps * (e^(k*eps) - 1)) )

and the ledger refuses the (b+1)-th query for any record fingerprint.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import warnings
from dataclasses import dataclass
from pathlib import Path

import mpmath

from .errors import EmptyRecord

_LEDGER_HEADER = "dpguard-ledger v1"


@dataclass(frozen=True)
class BudgetParams:
    """Budget inputs: per-access budget, class count, and the overall target."""

    per_access_epsilon: float
    num_classes: int
    overall_epsilon: float

    def __post_init__(self) -> None:
        if self.per_access_epsilon <= 0:
            raise ValueError(f"per_access_epsilon must be positive, got {self.per_access_epsilon}")
        if int(self.num_classes) != self.num_classes or self.num_classes < 1:
            raise ValueError(f"num_classes must be a positive integer, got {self.num_classes}")
        if self.overall_epsilon <= 0:
            raise ValueError(f"overall_epsilon must be positive, got {self.overall_epsilon}")
        if self.overall_epsilon < self.num_classes * self.per_access_epsilon:
            warnings.warn(
                "overall_epsilon is below the per-access privacy level; "
                "the query bound is 0 and every query will be denied",
                stacklevel=2,
            )


def _log_expm1(x: float) -> float:
    """log(e^x - 1), safe for any positive x."""
    if x > 40.0:
        return x + math.log1p(-math.exp(-x))
    return math.log(math.expm1(x))


def query_bound(params: BudgetParams) -> int:
    """Affordable number of repeat answers, floored to an integer.

    Bit-exact 1 when the overall target equals the per-access level; large
    arguments switch to log-domain arithmetic (and arbitrary precision for
    the final exponential) so nothing overflows.
    """
    per_access = params.num_classes * params.per_access_epsilon
    overall = params.overall_epsilon
    if overall == per_access:
        return 1
    if overall < per_access:
        # x * (e^x - 1) is strictly increasing, so the ratio is below 1.
        return 0
    if overall <= 700.0 and per_access <= 700.0:
        numerator = overall * math.expm1(overall)
        denominator = per_access * math.expm1(per_access)
        return int(math.floor(numerator / denominator))
    log_ratio = (
        math.log(overall)
        + _log_expm1(overall)
        - math.log(per_access)
        - _log_expm1(per_access)
    )
    if log_ratio <= 700.0:
        return int(math.floor(math.exp(log_ratio)))
    return int(mpmath.floor(mpmath.exp(mpmath.mpf(log_ratio))))


def _canonical_numbers(obj):
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, (int, float)):
        return float(obj)
    if isinstance(obj, list):
        return [_canonical_numbers(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _canonical_numbers(v) for k, v in obj.items()}
    return obj


def canonical_json_bytes(obj) -> bytes:
    """Canonical serialization of a JSON-like object.

    Keys are sorted, separators minimal, and every number is rendered as a
    float64 via its shortest round-trip representation, so semantically equal
    records (e.g. ``1`` vs ``1.0``, or two spellings of the same double)
    produce identical bytes.
    """
    return json.dumps(
        _canonical_numbers(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def fingerprint(record_bytes: bytes) -> str:
    """Collision-resistant hex digest identifying one record."""
    if not record_bytes:
        raise EmptyRecord("cannot fingerprint an empty byte sequence")
    return hashlib.sha256(record_bytes).hexdigest()


@dataclass(frozen=True)
class QueryDecision:
    """Outcome of one budget check; denial is a value, not an error."""

    allowed: bool
    remaining: int


class BudgetLedger:
    """Shared mutable map from record fingerprint to access count.

    ``register`` is atomic: under any interleaving at most ``bound`` queries
    per fingerprint are ever allowed.  With a path, every grant is appended
    to the ledger file immediately (denials must survive restarts) and the
    file is compacted once the appended lines outnumber the digests 4:1.
    """

    def __init__(self, params: BudgetParams, path: str | Path | None = None):
        self.params = params
        self.bound = query_bound(params)
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()
        self._path = Path(path) if path is not None else None
        self._appended = 0
        if self._path is not None:
            if self._path.exists() and self._path.stat().st_size > 0:
                self._replay(self._path)
            else:
                self._rewrite()

    # -- persistence ------------------------------------------------------

    def _header(self) -> str:
        p = self.params
        return (
            f"{_LEDGER_HEADER} per_access_epsilon={p.per_access_epsilon!r} "
            f"num_classes={p.num_classes} overall_epsilon={p.overall_epsilon!r}"
        )

    def _replay(self, path: Path) -> None:
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith(_LEDGER_HEADER):
            raise ValueError(f"{path} is not a ledger file")
        for line in lines[1:]:
            if not line.strip():
                continue
            digest, count = line.split()
            self._counts[digest] = int(count)
        for digest, count in self._counts.items():
            if count > self.bound:
                raise ValueError(
                    f"ledger count {count} for {digest} exceeds the bound {self.bound}"
                )

    def _rewrite(self) -> None:
        lines = [self._header()]
        lines.extend(f"{digest} {count}" for digest, count in sorted(self._counts.items()))
        self._path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        self._appended = 0

    def _append(self, digest: str, count: int) -> None:
        with self._path.open("a", encoding="utf-8") as fh:
            fh.write(f"{digest} {count}\n")
        self._appended += 1
        if self._appended > max(64, 4 * len(self._counts)):
            self._rewrite()

    @classmethod
    def load(cls, path: str | Path) -> "BudgetLedger":
        """Rebuild a ledger (params included) from its snapshot/log file."""
        path = Path(path)
        first = path.read_text(encoding="utf-8").splitlines()[0]
        if not first.startswith(_LEDGER_HEADER):
            raise ValueError(f"{path} is not a ledger file")
        fields = dict(item.split("=") for item in first[len(_LEDGER_HEADER) :].split())
        params = BudgetParams(
            per_access_epsilon=float(fields["per_access_epsilon"]),
            num_classes=int(fields["num_classes"]),
            overall_epsilon=float(fields["overall_epsilon"]),
        )
        return cls(params, path=path)

    def save(self, path: str | Path) -> None:
        """Write a compact snapshot (header plus one line per digest)."""
        target = Path(path)
        lines = [self._header()]
        lines.extend(f"{digest} {count}" for digest, count in sorted(self._counts.items()))
        target.write_text("\n".join(lines) + "\n", encoding="utf-8")

    # -- queries ----------------------------------------------------------

    def count(self, digest: str) -> int:
        with self._lock:
            return self._counts.get(digest, 0)

    def remaining(self, digest: str) -> int:
        return self.bound - self.count(digest)

    def register(self, digest: str) -> QueryDecision:
        """Grant one access iff the digest is still under the bound."""
        with self._lock:
            used = self._counts.get(digest, 0)
            if used >= self.bound:
                return QueryDecision(allowed=False, remaining=0)
            used += 1
            self._counts[digest] = used
            if self._path is not None:
                self._append(digest, used)
            return QueryDecision(allowed=True, remaining=self.bound - used)


def register_query(ledger: BudgetLedger, digest: str) -> QueryDecision:
    """Atomically consume one access for ``digest`` from the ledger."""
    return ledger.register(digest)
