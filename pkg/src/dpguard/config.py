"""Runtime configuration: flags beat DPGUARD_* environment variables,
which beat the JSON config file, which beats built-in defaults."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .accountant import BudgetParams
from .calibration import DefensePolicy
from .mechanism import MechanismConfig
from .records import FORMATS

ENV_PREFIX = "DPGUARD_"

# name -> (cast, default); None defaults mean "feature off unless configured".
_SETTINGS: dict[str, tuple] = {
    "epsilon": (float, 1.0),
    "m": (int, 5),
    "seed": (int, 0),
    "tau": (float, None),
    "eps_confident": (float, None),
    "eps_unconfident": (float, None),
    "budget_total_epsilon": (float, None),
    "ledger": (str, None),
    "format": (str, "jsonl"),
    "input": (str, None),
    "output": (str, None),
    "listen": (str, None),
}


@dataclass(frozen=True)
class AppConfig:
    """Everything the interface needs to run, fully resolved and validated."""

    mechanism: MechanismConfig
    policy: DefensePolicy | None
    budget_total_epsilon: float | None
    io_format: str
    ledger_path: str | None
    listen: str | None
    input_path: str | None
    output_path: str | None

    def budget_params(self, num_classes: int) -> BudgetParams | None:
        if self.budget_total_epsilon is None:
            return None
        return BudgetParams(
            per_access_epsilon=self.mechanism.epsilon,
            num_classes=num_classes,
            overall_epsilon=self.budget_total_epsilon,
        )


def resolve_settings(args) -> dict:
    """Merge argparse values, DPGUARD_* environment variables, and the config file."""
    config_path = getattr(args, "config", None) or os.environ.get(ENV_PREFIX + "CONFIG")
    file_config: dict = {}
    if config_path:
        file_config = json.loads(Path(config_path).read_text(encoding="utf-8"))
        if not isinstance(file_config, dict):
            raise ValueError(f"config file {config_path} must contain a JSON object")
        unknown = set(file_config) - set(_SETTINGS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    resolved = {}
    for name, (cast, default) in _SETTINGS.items():
        value = getattr(args, name, None)
        if value is None:
            env = os.environ.get(ENV_PREFIX + name.upper())
            if env is not None:
                value = cast(env)
            elif name in file_config and file_config[name] is not None:
                value = cast(file_config[name])
            else:
                value = default
        resolved[name] = value
    if resolved["format"] not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {resolved['format']!r}")
    return resolved


def build_app_config(settings: dict) -> AppConfig:
    mechanism = MechanismConfig(
        epsilon=settings["epsilon"], m=settings["m"], rng_seed=settings["seed"]
    )
    policy_fields = (settings["tau"], settings["eps_confident"], settings["eps_unconfident"])
    policy = None
    if any(v is not None for v in policy_fields):
        if not all(v is not None for v in policy_fields):
            raise ValueError(
                "--tau, --eps-confident and --eps-unconfident must be configured together"
            )
        policy = DefensePolicy(
            tau=settings["tau"],
            eps_confident=settings["eps_confident"],
            eps_unconfident=settings["eps_unconfident"],
        )
    return AppConfig(
        mechanism=mechanism,
        policy=policy,
        budget_total_epsilon=settings["budget_total_epsilon"],
        io_format=settings["format"],
        ledger_path=settings["ledger"],
        listen=settings["listen"],
        input_path=settings["input"],
        output_path=settings["output"],
    )
