"""Command-line interface: batch defense, fixed-point calibration, and the proxy.

Every flag can also be set through a ``DPGUARD_<NAME>`` environment variable
or a JSON config file (``--config`` / ``DPGUARD_CONFIG``); explicit flags win
over the environment, which wins over the file.
"""

from __future__ import annotations

import argparse
import sys
from contextlib import ExitStack
from pathlib import Path

import numpy as np

from .accountant import BudgetLedger
from .calibration import epsilon_star
from .config import AppConfig, build_app_config, resolve_settings
from .errors import BudgetExhausted, Degenerate, DpGuardError, InvalidVector
from .mechanism import MechanismConfig, modify
from .records import (
    error_record,
    parse_csv_header,
    parse_csv_request,
    parse_jsonl_request,
    render_csv,
    render_jsonl,
    response_record,
    csv_output_header,
)
from .server import serve_forever
from .service import DefenseService


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epsilon", type=float, help="privacy budget per selection (default 1.0)")
    parser.add_argument("--m", type=int, help="candidates per sub-range (default 5)")
    parser.add_argument("--seed", type=int, help="base RNG seed (default 0)")
    parser.add_argument("--tau", type=float, help="confidence threshold of the budget policy")
    parser.add_argument("--eps-confident", type=float, dest="eps_confident",
                        help="budget for vectors whose top score exceeds tau")
    parser.add_argument("--eps-unconfident", type=float, dest="eps_unconfident",
                        help="budget for vectors whose top score is at most tau")
    parser.add_argument("--budget-total-epsilon", type=float, dest="budget_total_epsilon",
                        help="overall per-record privacy target; enables query budgeting")
    parser.add_argument("--ledger", help="path of the persistent budget ledger")
    parser.add_argument("--format", choices=("jsonl", "csv"), help="record format (default jsonl)")
    parser.add_argument("--config", help="JSON config file with any of the flag settings")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpguard", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_defend = sub.add_parser("defend", help="defend a stream of confidence vectors")
    _add_common_options(p_defend)
    p_defend.add_argument("--input", help="input file (default: stdin)")
    p_defend.add_argument("--output", help="output file (default: stdout)")
    p_defend.set_defaults(func=_cmd_defend)

    p_cal = sub.add_parser("calibrate", help="solve for the fixed-point budget of one vector")
    _add_common_options(p_cal)
    p_cal.add_argument("--scores", required=True, help="comma-separated confidence scores")
    p_cal.add_argument("--modified", help="comma-separated modified scores (phase-1 output)")
    p_cal.add_argument("--draws", action="store_true",
                       help="draw the modified scores with the configured mechanism instead")
    p_cal.set_defaults(func=_cmd_calibrate)

    p_serve = sub.add_parser("serve", help="run the HTTP prediction proxy")
    _add_common_options(p_serve)
    p_serve.add_argument("--listen", help="addr:port to bind (default 127.0.0.1:8080)")
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def _make_service(app: AppConfig) -> DefenseService:
    ledger = None
    if app.ledger_path and Path(app.ledger_path).exists() and Path(app.ledger_path).stat().st_size:
        ledger = BudgetLedger.load(app.ledger_path)
    return DefenseService(
        cfg=app.mechanism,
        policy=app.policy,
        ledger=ledger,
        budget_total_epsilon=app.budget_total_epsilon,
        ledger_path=app.ledger_path,
    )


def _defend_stream(app: AppConfig, service: DefenseService, in_stream, out_stream) -> int:
    emit_csv = app.io_format == "csv"
    k = None
    index = 0
    for raw_line in in_stream:
        line = raw_line.rstrip("\n")
        if emit_csv and k is None:
            if not line.strip():
                continue
            k = parse_csv_header(line)
            out_stream.write(csv_output_header(k) + "\n")
            continue
        if not line.strip():
            continue
        record = _defend_line(service, line, index, emit_csv, k)
        out_stream.write((render_csv(record, k or 0) if emit_csv else render_jsonl(record)) + "\n")
        index += 1
    out_stream.flush()
    return 0


def _defend_line(service: DefenseService, line: str, index: int, emit_csv: bool, k) -> dict:
    try:
        request = parse_csv_request(line, k) if emit_csv else parse_jsonl_request(line)
    except ValueError as exc:
        print(f"line {index}: parse_error: {exc}", file=sys.stderr)
        return error_record("parse_error", line=index)
    try:
        response = service.defend_request(request, index)
    except InvalidVector:
        print(f"line {index}: invalid_vector", file=sys.stderr)
        return error_record("invalid_vector", record_id=request.record_id, line=index)
    except BudgetExhausted:
        record = error_record("budget_exhausted", record_id=request.record_id, line=index)
        record["budget_remaining"] = 0
        return record
    return response_record(request, response)


def _cmd_defend(args) -> int:
    app = build_app_config(resolve_settings(args))
    service = _make_service(app)
    with ExitStack() as stack:
        if app.input_path:
            in_stream = stack.enter_context(open(app.input_path, "r", encoding="utf-8"))
        else:
            in_stream = sys.stdin
        if app.output_path:
            out_stream = stack.enter_context(open(app.output_path, "w", encoding="utf-8"))
        else:
            out_stream = sys.stdout
        return _defend_stream(app, service, in_stream, out_stream)


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError as exc:
        raise ValueError(f"could not parse score list {text!r}: {exc}") from None


def _cmd_calibrate(args) -> int:
    app = build_app_config(resolve_settings(args))
    scores = _parse_vector(args.scores)
    if args.modified and args.draws:
        raise ValueError("--modified and --draws are mutually exclusive")
    if args.modified:
        y_prime = _parse_vector(args.modified)
    elif args.draws:
        y_prime = modify(scores, app.mechanism).scores
    else:
        raise ValueError("provide --modified or --draws")
    star = epsilon_star(scores, y_prime)
    print(f"epsilon_star={star.value!r}")
    print(f"residual={star.residual!r}")
    print(f"pair_seed={star.pair_seed!r}")
    print(f"eps_confident={star.value / 4.0!r}")
    print(f"eps_unconfident={star.value * 4.0!r}")
    return 0


def _cmd_serve(args) -> int:
    app = build_app_config(resolve_settings(args))
    if app.ledger_path is None:
        raise ValueError("serve requires --ledger (budget enforcement is mandatory)")
    has_ledger_file = Path(app.ledger_path).exists() and Path(app.ledger_path).stat().st_size
    if app.budget_total_epsilon is None and not has_ledger_file:
        raise ValueError(
            "serve requires --budget-total-epsilon (or an existing ledger file); "
            "budget enforcement is mandatory"
        )
    service = _make_service(app)
    listen = app.listen or "127.0.0.1:8080"
    host, _, port_text = listen.rpartition(":")
    if not host or not port_text.isdigit():
        raise ValueError(f"--listen must look like addr:port, got {listen!r}")
    serve_forever(service, host, int(port_text))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Degenerate as exc:
        print(f"error: degenerate input: {exc}", file=sys.stderr)
        return 1
    except (DpGuardError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
