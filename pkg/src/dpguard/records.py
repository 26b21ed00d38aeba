"""Wire formats of the prediction interface: JSONL and CSV records.

Floats are rendered with 17 significant digits (CSV) or the shortest
round-trip representation (JSONL); both parse back to the exact same double,
and re-encoding a parsed record reproduces the original bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

FORMATS = ("jsonl", "csv")


@dataclass(frozen=True)
class DefendRequest:
    """One record to defend; the optional id keys the query budget."""

    scores: tuple[float, ...]
    record_id: str | None = None


@dataclass(frozen=True)
class DefendResponse:
    """Defended scores plus the budget actually spent and what is left."""

    scores: tuple[float, ...]
    epsilon_used: float
    budget_remaining: int | str


def format_float(x: float) -> str:
    return format(float(x), ".17g")


# -- JSONL ----------------------------------------------------------------


def parse_jsonl_request(line: str) -> DefendRequest:
    obj = json.loads(line)
    if not isinstance(obj, dict) or "scores" not in obj:
        raise ValueError("expected an object with a 'scores' array")
    scores = obj["scores"]
    if not isinstance(scores, list) or not all(isinstance(v, (int, float)) for v in scores):
        raise ValueError("'scores' must be an array of numbers")
    record_id = obj.get("record_id")
    if record_id is not None and not isinstance(record_id, str):
        raise ValueError("'record_id' must be a string when present")
    return DefendRequest(scores=tuple(float(v) for v in scores), record_id=record_id)


def render_jsonl(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def response_record(request: DefendRequest, response: DefendResponse) -> dict:
    record = {
        "scores": list(response.scores),
        "epsilon_used": response.epsilon_used,
        "budget_remaining": response.budget_remaining,
    }
    if request.record_id is not None:
        record["record_id"] = request.record_id
    return record


def error_record(code: str, record_id: str | None = None, line: int | None = None) -> dict:
    # Never include the submitted scores here.
    record: dict = {"error": code}
    if record_id is not None:
        record["record_id"] = record_id
    if line is not None:
        record["line"] = line
    return record


# -- CSV ------------------------------------------------------------------


def csv_header(k: int) -> str:
    return "record_id," + ",".join(f"s{i + 1}" for i in range(k))


def csv_output_header(k: int) -> str:
    return csv_header(k) + ",epsilon_used,budget_remaining,error"


def parse_csv_header(line: str) -> int:
    """Validate ``record_id,s1,...,sk`` and return k."""
    cells = line.rstrip("\n").split(",")
    if len(cells) < 2 or cells[0] != "record_id":
        raise ValueError("CSV header must start with 'record_id,s1,...'")
    for i, name in enumerate(cells[1:]):
        if name != f"s{i + 1}":
            raise ValueError(f"unexpected CSV column {name!r}, wanted 's{i + 1}'")
    return len(cells) - 1


def parse_csv_request(line: str, k: int) -> DefendRequest:
    cells = line.rstrip("\n").split(",")
    if len(cells) != k + 1:
        raise ValueError(f"expected {k + 1} cells, got {len(cells)}")
    record_id = cells[0] or None
    return DefendRequest(scores=tuple(float(v) for v in cells[1:]), record_id=record_id)


def render_csv(record: dict, k: int) -> str:
    scores = record.get("scores")
    cells = [record.get("record_id") or ""]
    if scores is not None:
        cells.extend(format_float(s) for s in scores)
    else:
        cells.extend([""] * k)
    cells.append(format_float(record["epsilon_used"]) if "epsilon_used" in record else "")
    cells.append(str(record["budget_remaining"]) if "budget_remaining" in record else "")
    cells.append(record.get("error", ""))
    return ",".join(cells)
