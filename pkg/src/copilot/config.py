"""Engine configuration: defaults plus optional TOML/JSON overlay.

The overlay file is pointed at by COPILOT_CONFIG or passed explicitly.
Only known keys are merged; value types are checked against the default.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidConfig

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib


@dataclass
class TierConfig:
    provider: str = "scripted"  # scripted | http | callable
    model: str = ""
    tape: str = ""
    endpoint: str = ""
    api_key_env: str = ""
    max_retries: int = 3
    request_cap: int = 8
    cache: bool = False
    temperature: float = 0.0
    max_tokens: int = 4096
    context_limit: int = 32768


@dataclass
class ForgeConfig:
    test_cases: int = 10
    top_n: int = 5
    repair_rounds: int = 3
    merge_repair_rounds: int = 3


@dataclass
class RegistryConfig:
    dedup_threshold: float = 0.92
    merge_consult_threshold: float = 0.80
    uncovered_trigger: int = 20


@dataclass
class ExecutorConfig:
    node_timeout: float = 10.0
    parallelism: int = 4
    hybrid_failure_trigger: int = 2
    hybrid_enabled: bool = True


@dataclass
class EvaluatorConfig:
    float_rtol: float = 1e-6
    chart_pass_total: int = 60


@dataclass
class EngineConfig:
    workspace: str = "."
    clock: str = "2019-03-13"  # fixed "today" so relative dates resolve reproducibly
    locale: str = "China"  # default region when a request names no place
    explorer: TierConfig = field(default_factory=lambda: TierConfig(cache=True))
    deployer: TierConfig = field(default_factory=lambda: TierConfig(cache=False))
    forge: ForgeConfig = field(default_factory=ForgeConfig)
    registry: RegistryConfig = field(default_factory=RegistryConfig)
    executor: ExecutorConfig = field(default_factory=ExecutorConfig)
    evaluator: EvaluatorConfig = field(default_factory=EvaluatorConfig)

    @property
    def workspace_path(self) -> Path:
        return Path(self.workspace).resolve()


_SECTION_KEYS = {
    "llm": ("explorer", "deployer"),
}


def _merge_into(obj, overlay: dict, where: str) -> None:
    for key, value in overlay.items():
        if not hasattr(obj, key):
            raise InvalidConfig(f"unknown key {where}.{key}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise InvalidConfig(f"{where}.{key} must be a table")
            _merge_into(current, value, f"{where}.{key}")
            continue
        if isinstance(current, bool) and not isinstance(value, bool):
            raise InvalidConfig(f"{where}.{key} must be a boolean")
        if isinstance(current, (int, float)) and not isinstance(value, bool) and not isinstance(value, (int, float)):
            raise InvalidConfig(f"{where}.{key} must be a number")
        if isinstance(current, str) and not isinstance(value, str):
            raise InvalidConfig(f"{where}.{key} must be a string")
        setattr(obj, key, type(current)(value) if not isinstance(current, bool) else value)


def load_config(path: str | Path | None = None) -> EngineConfig:
    config = EngineConfig()
    if path is None:
        path = os.environ.get("COPILOT_CONFIG") or None
    if path is None:
        return config
    p = Path(path)
    if not p.exists():
        raise InvalidConfig(f"config file not found: {p}")
    text = p.read_text(encoding="utf-8")
    if p.suffix == ".json":
        raw = json.loads(text)
    else:
        raw = tomllib.loads(text)
    for section, value in raw.items():
        if section == "engine":
            _merge_into(config, {k: v for k, v in value.items() if k not in ("explorer", "deployer")}, "engine")
        elif section == "llm":
            for tier, tier_overlay in value.items():
                if tier not in _SECTION_KEYS["llm"]:
                    raise InvalidConfig(f"unknown tier llm.{tier}")
                _merge_into(getattr(config, tier), tier_overlay, f"llm.{tier}")
        elif section in ("forge", "registry", "executor", "evaluator"):
            _merge_into(getattr(config, section), value, section)
        else:
            raise InvalidConfig(f"unknown section {section}")
    return config
