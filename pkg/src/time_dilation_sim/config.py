import json
import logging
from pathlib import Path
from typing import Optional

import yaml
from devtools import pformat
from pydantic import ValidationError

from .ln_channel import get_preset
from .schemas.config import AppConfig
from .schemas.eclipse import SybilPool
from .schemas.scenario import IbdPolicy, NodePolicies, ScenarioConfig, StaleTipPolicy
from .simulation_exception import ConfigException
from .utils import DEFAULT_SEED, KEY_CLTV_DELTA, KEY_CSV_DELTA, KEY_TIMEOUT_POLICY, AttackKind, BackendKind

YAML_SUFFIXES = (".yaml", ".yml")


def parse_key_values(text: str, path: str = "<config>") -> tuple[dict, dict]:
    """
    Parse `key = value` lines. Returns the raw values and the line each key came from.
    """
    data, line_numbers = {}, {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigException(
                f"Malformed config line {line_number}, expected `key = value`",
                {"path": path, "line": line_number, "text": raw},
            )

        key, value = (part.strip() for part in line.split("=", 1))
        data[key] = value
        line_numbers[key] = line_number

    return data, line_numbers


def load_config(path: str) -> AppConfig:
    """
    Load an AppConfig from a .json, .yaml/.yml, or plain `key = value` file.
    """
    try:
        with open(path, "r") as fin:
            text = fin.read()
    except OSError as e:
        raise ConfigException(f"Unable to read config {path}", {"path": path, "error": str(e)})

    suffix = Path(path).suffix.lower()
    line_numbers = {}
    try:
        if suffix == ".json":
            data = json.loads(text)
        elif suffix in YAML_SUFFIXES:
            data = yaml.safe_load(text) or {}
        else:
            data, line_numbers = parse_key_values(text, path)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigException(f"Unable to parse config {path}", {"path": path, "error": str(e)})

    if not isinstance(data, dict):
        raise ConfigException(f"Config {path} must be a mapping of keys to values", {"path": path})

    try:
        config = AppConfig.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else None
        raise ConfigException(
            f"Invalid config key `{key}`: {error['msg']}",
            {"path": path, "key": key, "line": line_numbers.get(key)},
        )

    logging.getLogger(__name__).debug(f"Loaded config {path}:\n" + pformat(config.model_dump()))
    return config


def resolve_seed(cli_seed: Optional[int], config: AppConfig) -> int:
    """Flag (or its environment variable) wins over the config file, then the default."""
    if cli_seed is not None:
        return cli_seed
    if config.seed is not None:
        return config.seed
    return DEFAULT_SEED


def build_pool(config: AppConfig) -> SybilPool:
    return SybilPool(
        attacker_nodes=config.attacker_nodes,
        honest_nodes=config.honest_nodes,
        outbound_count=config.outbound_count,
        addrman_poisoning=config.addrman_poisoning,
    )


def build_policies(config: AppConfig) -> NodePolicies:
    return NodePolicies(
        stale_tip=StaleTipPolicy(
            threshold=config.stale_threshold,
            retry_interval=config.stale_retry_interval,
            enabled=config.stale_tip_enabled,
        ),
        ibd=IbdPolicy(lag_threshold=config.ibd_lag_threshold, enabled=config.ibd_enabled),
        trigger_mode=config.trigger_mode,
        pool=build_pool(config),
    )


def build_scenario_config(
    config: AppConfig,
    kind: AttackKind,
    implementation: Optional[str] = None,
    backend: Optional[BackendKind] = None,
    forced_lead: Optional[int] = None,
) -> ScenarioConfig:
    preset = get_preset(
        implementation or config.implementation,
        {
            KEY_CSV_DELTA: config.csv_delta,
            KEY_CLTV_DELTA: config.cltv_delta,
            KEY_TIMEOUT_POLICY: config.timeout_policy,
        },
    )
    try:
        return ScenarioConfig(
            kind=kind,
            preset=preset,
            backend=backend if backend is not None else config.backend,
            per_block_delay=config.per_block_delay,
            mean_block_interval=config.mean_block_interval,
            policies=build_policies(config),
            channel_capacity=config.channel_capacity,
            reserve_ratio=config.reserve_ratio,
            htlc_amount=config.htlc_amount,
            final_delta=config.final_delta,
            max_blocks=config.max_blocks,
            a3_lead_mode=config.a3_lead_mode,
            forced_lead=forced_lead,
        )
    except ValidationError as e:
        raise ConfigException(
            f"Invalid {kind.value} scenario for {preset.name}: {e.errors()[0]['msg']}",
            {"implementation": preset.name, "kind": kind.value},
        )
