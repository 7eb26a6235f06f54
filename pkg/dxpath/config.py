"""
Configuration management - load, validate and resolve the JSON run config.

A run is driven by a single JSON file. Values missing from the file fall back
to DEFAULT_CONFIG; keys that DEFAULT_CONFIG does not know are rejected so a
typo never silently becomes a default. Secrets are read from the environment
only (see `llm.auth_env`).
"""

import copy
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    "version": "1.0",
    "seed": 13,
    "paths": {
        "concepts": "",
        "triples": "",
        "relations": "",
        "notes": "",
        "checkpoint": "",
        "embeddings": "",
        "weights": "",
        "retrieval": "",
        "prompts": "",
        "completions": "",
        "templates": "",
        "lm_corpus": "",
        "shots": "",
    },
    "provider": {
        "kind": "hashing",      # "hashing" or "cache"
        "dim": 32,
        "fallback": "hashing",  # "hashing" or "" (cache misses become errors)
    },
    "model": {
        "reduced_dim": 64,
        "gin_layers": 2,
        "heads": 4,
        "trilinear_rank": 32,
    },
    "ranker": {
        "top_n": 4,
        "max_hops": 2,
        "variant": "triattn",   # "triattn" or "multiattn"
    },
    "weighting": {
        "enabled": True,
        "scope": "note",        # "note" or "corpus"
        "apply": "before",      # "before" or "after" the GIN layers
    },
    "train": {
        "lr": 1e-3,
        "margin": 0.3,
        "epochs": 20,
        "batch_size": 8,
        "clip_norm": 5.0,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "gold_types": ["T047"],
    },
    "eval": {
        "top_n": [4, 6],
        "resamples": 1000,
        "level": 95.0,
    },
    "prompt": {
        "style": "structural",  # "structural" or "clause"
        "template": "",
        "shots": 0,
    },
    "llm": {
        "base_url": "",
        "model": "",
        "auth_header": "Authorization",
        "auth_env": "DXPATH_LLM_TOKEN",
        "timeout": 30.0,
        "attempts": 3,
        "backoff": 1.0,
        "max_concurrency": 4,
        "audit_log": "llm_audit.jsonl",
        "extra": {},
    },
    "synth": {
        "nodes": 50,
        "branching": 3,
        "notes": 200,
        "sources_per_note": 2,
        "noise_rate": 0.0,
        "extractive_rate": 0.0,
    },
    "numerics": {
        "checked": False,
    },
}

# Sections whose keys are user-defined and passed through untouched
FREEFORM_KEYS = {"llm.extra"}


def _type_name(value: Any) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "list"
    if isinstance(value, dict):
        return "object"
    return type(value).__name__


def _check_type(key: str, value: Any, default: Any) -> Any:
    """Check `value` against the type of `default`; ints are accepted for floats."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"Config key '{key}' must be a boolean, got {_type_name(value)}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"Config key '{key}' must be an integer, got {_type_name(value)}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"Config key '{key}' must be a number, got {_type_name(value)}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"Config key '{key}' must be a string, got {_type_name(value)}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"Config key '{key}' must be a list, got {_type_name(value)}")
        return list(value)
    return value


def merge_config(raw: Dict[str, Any], defaults: Dict[str, Any] = DEFAULT_CONFIG,
                 prefix: str = "") -> Dict[str, Any]:
    """
    Deep-merge a user config over the defaults.

    Args:
        raw: Parsed user config (possibly partial)
        defaults: Default tree at this level
        prefix: Dotted key prefix used in error messages

    Returns:
        New dict with every default key present

    Raises:
        ConfigError: On unknown keys or type mismatches
    """
    if not isinstance(raw, dict):
        raise ConfigError(f"Config section '{prefix or '<root>'}' must be an object")

    merged = copy.deepcopy(defaults)
    for key, value in raw.items():
        dotted = f"{prefix}.{key}" if prefix else key
        if key not in defaults:
            raise ConfigError(f"Unknown config key '{dotted}'", {"key": dotted})
        default = defaults[key]
        if dotted in FREEFORM_KEYS:
            if not isinstance(value, dict):
                raise ConfigError(f"Config key '{dotted}' must be an object")
            merged[key] = copy.deepcopy(value)
        elif isinstance(default, dict):
            merged[key] = merge_config(value, default, dotted)
        else:
            merged[key] = _check_type(dotted, value, default)
    return merged


def _validate_values(cfg: Dict[str, Any]) -> None:
    """Cross-field checks that the type pass cannot express."""
    choices = {
        "provider.kind": (cfg["provider"]["kind"], ("hashing", "cache")),
        "provider.fallback": (cfg["provider"]["fallback"], ("hashing", "")),
        "ranker.variant": (cfg["ranker"]["variant"], ("triattn", "multiattn")),
        "weighting.scope": (cfg["weighting"]["scope"], ("note", "corpus")),
        "weighting.apply": (cfg["weighting"]["apply"], ("before", "after")),
        "prompt.style": (cfg["prompt"]["style"], ("structural", "clause")),
    }
    for key, (value, allowed) in choices.items():
        if value not in allowed:
            raise ConfigError(f"Config key '{key}' must be one of {list(allowed)}, got '{value}'")

    positive = {
        "provider.dim": cfg["provider"]["dim"],
        "model.reduced_dim": cfg["model"]["reduced_dim"],
        "model.gin_layers": cfg["model"]["gin_layers"],
        "model.heads": cfg["model"]["heads"],
        "model.trilinear_rank": cfg["model"]["trilinear_rank"],
        "ranker.top_n": cfg["ranker"]["top_n"],
        "ranker.max_hops": cfg["ranker"]["max_hops"],
        "train.epochs": cfg["train"]["epochs"],
        "train.batch_size": cfg["train"]["batch_size"],
        "eval.resamples": cfg["eval"]["resamples"],
        "llm.attempts": cfg["llm"]["attempts"],
        "llm.max_concurrency": cfg["llm"]["max_concurrency"],
    }
    for key, value in positive.items():
        if value < 1:
            raise ConfigError(f"Config key '{key}' must be >= 1, got {value}")

    if cfg["model"]["reduced_dim"] % cfg["model"]["heads"] != 0:
        raise ConfigError(
            f"model.reduced_dim ({cfg['model']['reduced_dim']}) is not divisible "
            f"by model.heads ({cfg['model']['heads']})"
        )
    if cfg["train"]["lr"] < 0:
        raise ConfigError("train.lr must be >= 0")
    if cfg["train"]["margin"] < 0:
        raise ConfigError("train.margin must be >= 0")
    if not cfg["eval"]["top_n"] or any(
        isinstance(n, bool) or not isinstance(n, int) or n < 1 for n in cfg["eval"]["top_n"]
    ):
        raise ConfigError("eval.top_n must be a non-empty list of positive integers")
    if not 0.0 < cfg["eval"]["level"] < 100.0:
        raise ConfigError("eval.level must lie in (0, 100)")
    for key in ("noise_rate", "extractive_rate"):
        if not 0.0 <= cfg["synth"][key] <= 1.0:
            raise ConfigError(f"synth.{key} must lie in [0, 1]")


class AppConfig:
    """Validated run configuration with typed accessors."""

    def __init__(self, data: Dict[str, Any], base_dir: Optional[Path] = None):
        self.data = data
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()

    @property
    def seed(self) -> int:
        return self.data["seed"]

    def section(self, name: str) -> Dict[str, Any]:
        return self.data[name]

    def path(self, name: str, required: bool = True) -> Optional[Path]:
        """
        Resolve a `paths.*` entry against the config file's directory.

        Raises:
            ConfigError: When required and unset
        """
        value = self.data["paths"][name]
        if not value:
            if required:
                raise ConfigError(f"Config key 'paths.{name}' is required for this command")
            return None
        path = Path(value)
        if not path.is_absolute():
            path = self.base_dir / path
        return path

    def ranker_config(self, top_n: Optional[int] = None):
        from .ranker import RankerConfig

        model = self.data["model"]
        ranker = self.data["ranker"]
        return RankerConfig(
            top_n=top_n if top_n is not None else ranker["top_n"],
            max_hops=ranker["max_hops"],
            variant=ranker["variant"],
            reduced_dim=model["reduced_dim"],
            heads=model["heads"],
            trilinear_rank=model["trilinear_rank"],
            seed=self.seed,
        )

    def train_config(self):
        from .trainer import TrainConfig

        train = self.data["train"]
        ranker = self.data["ranker"]
        return TrainConfig(
            lr=train["lr"],
            margin=train["margin"],
            epochs=train["epochs"],
            batch_size=train["batch_size"],
            top_n=ranker["top_n"],
            max_hops=ranker["max_hops"],
            variant=ranker["variant"],
            seed=self.seed,
            clip_norm=train["clip_norm"],
            beta1=train["beta1"],
            beta2=train["beta2"],
            eps=train["eps"],
        )

    def endpoint_config(self):
        from .llm_client import EndpointConfig

        llm = self.data["llm"]
        audit = Path(llm["audit_log"]) if llm["audit_log"] else None
        return EndpointConfig(
            base_url=llm["base_url"],
            model=llm["model"],
            auth_header=llm["auth_header"],
            auth_value=os.environ.get(llm["auth_env"], "") if llm["auth_env"] else "",
            timeout=llm["timeout"],
            attempts=llm["attempts"],
            backoff=llm["backoff"],
            max_concurrency=llm["max_concurrency"],
            audit_log=audit,
            extra=dict(llm["extra"]),
        )

    def synth_spec(self):
        from .synth import SyntheticSpec

        synth = self.data["synth"]
        return SyntheticSpec(
            node_count=synth["nodes"],
            branching=synth["branching"],
            notes=synth["notes"],
            sources_per_note=synth["sources_per_note"],
            noise_rate=synth["noise_rate"],
            extractive_rate=synth["extractive_rate"],
            seed=self.seed,
        )

    def with_seed(self, seed: Optional[int]) -> "AppConfig":
        """Copy of this config with the root seed overridden."""
        if seed is None:
            return self
        data = copy.deepcopy(self.data)
        data["seed"] = seed
        return AppConfig(data, self.base_dir)

    def redacted(self) -> Dict[str, Any]:
        """Resolved config suitable for logging (no secret values are ever stored)."""
        return copy.deepcopy(self.data)

    def to_json(self) -> str:
        return json.dumps(self.redacted(), sort_keys=True, separators=(",", ":"))


def load_config(path, seed: Optional[int] = None) -> AppConfig:
    """
    Load and validate a JSON config file.

    Args:
        path: Config file path
        seed: Optional root seed override (CLI --seed)

    Returns:
        AppConfig

    Raises:
        ConfigError: Missing file, invalid JSON, unknown keys or bad values
    """
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"Config file not found: {config_path}")
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {config_path}: line {e.lineno}: {e.msg}")
    except IOError as e:
        raise ConfigError(f"Cannot read config {config_path}: {e}")

    merged = merge_config(raw)
    if seed is not None:
        merged["seed"] = seed
    _validate_values(merged)
    logger.debug(f"Loaded config from {config_path}")
    return AppConfig(merged, config_path.resolve().parent)


def config_from_dict(raw: Dict[str, Any], base_dir: Optional[Path] = None) -> AppConfig:
    """Build an AppConfig from an in-memory dict (same validation as load_config)."""
    merged = merge_config(raw)
    _validate_values(merged)
    return AppConfig(merged, base_dir)


def save_config(config: Dict[str, Any], path) -> None:
    """Write a config dict as canonical JSON."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2, sort_keys=True)
        f.write("\n")
