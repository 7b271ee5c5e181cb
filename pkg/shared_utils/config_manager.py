"""
Run Configuration
Layered settings for every computation: defaults, environment, config file, flags
"""

import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from shared_utils.errors import InvalidParam

logger = logging.getLogger(__name__)

ENV_PREFIX = "AB_SHIFT_"
OUTPUT_FORMATS = ("json", "csv", "text")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of a run; immutable once validated"""
    alpha: str = "1/2"
    beta: str = "5/2"
    tol: float = 1e-12
    depth: int = 16
    vertex_budget: int = 1_000_000
    metric_depth: int = 4
    seed: int = 0
    format: str = "text"
    threads: int = 1
    eps: float = 0.2
    delta: float = 0.01
    levels: int = 2
    max_halvings: int = 10
    power_tol: float = 1e-12
    power_max_iter: int = 100_000
    s_step: float = 0.01
    block_length: int = 12
    enumeration_budget: int = 200_000
    min_block_length: int = 24
    bracket_tol: float = 0.12
    cache_dir: Optional[str] = None
    log_level: str = "WARNING"

    def validate(self) -> "RunConfig":
        """Range-check every numeric setting; returns self for chaining"""
        checks = [
            (self.tol > 0, "tol must be positive"),
            (self.depth >= 0, "depth must be >= 0"),
            (self.vertex_budget >= 1, "vertex_budget must be >= 1"),
            (self.metric_depth >= 1, "metric_depth must be >= 1"),
            (self.seed >= 0, "seed must be >= 0"),
            (self.format in OUTPUT_FORMATS, f"format must be one of {', '.join(OUTPUT_FORMATS)}"),
            (self.threads >= 1, "threads must be >= 1"),
            (0 < self.eps <= 1, "eps must lie in (0, 1]"),
            (0 < self.delta < 1, "delta must lie in (0, 1)"),
            (self.levels >= 1, "levels must be >= 1"),
            (self.max_halvings >= 0, "max_halvings must be >= 0"),
            (self.power_tol > 0, "power_tol must be positive"),
            (self.power_max_iter >= 1, "power_max_iter must be >= 1"),
            (0 < self.s_step <= 1, "s_step must lie in (0, 1]"),
            (self.block_length >= 1, "block_length must be >= 1"),
            (self.enumeration_budget >= 1, "enumeration_budget must be >= 1"),
            (self.min_block_length >= 1, "min_block_length must be >= 1"),
            (self.bracket_tol >= 0, "bracket_tol must be >= 0"),
            (self.log_level.upper() in LOG_LEVELS, f"log_level must be one of {', '.join(LOG_LEVELS)}"),
        ]
        for ok, message in checks:
            if not ok:
                raise InvalidParam(message)
        self.params()
        return self

    def params(self):
        """Parse alpha/beta into validated Params"""
        from shift_module.params import make_params
        return make_params(self.alpha, self.beta, tol=self.tol)

    def with_overrides(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Apply already-typed overrides, skipping None values"""
        known = {f.name for f in fields(self)}
        clean = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in known:
                raise InvalidParam(f"Unknown configuration key: {key}")
            clean[key] = value
        return replace(self, **clean)


def _coerce(key: str, raw: str) -> Any:
    """Convert a textual setting to the type of its RunConfig field"""
    types = {f.name: f.type for f in fields(RunConfig)}
    if key not in types:
        raise InvalidParam(f"Unknown configuration key: {key}")
    target = types[key]
    try:
        if target is int:
            return int(raw)
        if target is float:
            return float(raw)
    except ValueError:
        raise InvalidParam(f"Setting {key} expects {target.__name__}, got {raw!r}")
    if key == "cache_dir" and raw.lower() in ("", "none"):
        return None
    return raw


class ConfigManager:
    """Loads RunConfig layers: defaults < env (.env aware) < config file < flags"""

    def __init__(self, env_file: Optional[str] = ".env"):
        self.env_file = Path(env_file) if env_file else None

    def load_env(self) -> Dict[str, Any]:
        """Read AB_SHIFT_* environment variables, loading .env first if present"""
        if self.env_file is not None and self.env_file.exists():
            load_dotenv(self.env_file, override=False)
            logger.info(f"Loaded environment defaults from {self.env_file}")

        settings = {}
        for f in fields(RunConfig):
            value = os.getenv(ENV_PREFIX + f.name.upper())
            if value is not None and value.strip():
                settings[f.name] = _coerce(f.name, value.strip())
        return settings

    def load_file(self, path: str) -> Dict[str, Any]:
        """Parse `key = value` lines; '#' starts a comment line"""
        config_path = Path(path)
        if not config_path.exists():
            raise InvalidParam(f"Config file not found: {config_path}")

        settings = {}
        with open(config_path, "r") as f:
            for number, line in enumerate(f, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise InvalidParam(f"{config_path}:{number}: expected 'key = value'")
                key, value = line.split("=", 1)
                key = key.strip().replace("-", "_")
                settings[key] = _coerce(key, value.strip())

        logger.info(f"Loaded {len(settings)} settings from {config_path}")
        return settings

    def build(self, config_file: Optional[str] = None,
              flags: Optional[Dict[str, Any]] = None) -> RunConfig:
        """Merge all layers and validate"""
        config = RunConfig().with_overrides(self.load_env())
        if config_file:
            config = config.with_overrides(self.load_file(config_file))
        if flags:
            config = config.with_overrides(flags)
        return config.validate()


# Global instance
config_manager = ConfigManager()


def load_run_config(config_file: Optional[str] = None,
                    flags: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Convenience function to build a validated RunConfig"""
    return config_manager.build(config_file, flags)
