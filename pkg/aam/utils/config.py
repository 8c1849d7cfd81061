"""
Environment-driven settings for AAM.

Defaults can be overridden through AAM_* environment variables (a .env file
in the working directory is honoured) and then by an explicit override dict,
mirroring how the agent configuration is layered in the CLI.
"""

import os
from typing import Any, Dict, Optional

from dotenv import find_dotenv, load_dotenv
from pydantic import BaseModel, Field


class CostSettings(BaseModel):
    """Synthetic cost model constants, in nanoseconds."""

    atomic_ns: float = Field(20.0, ge=0)
    txn_begin_ns: float = Field(60.0, ge=0)
    txn_commit_ns: float = Field(60.0, ge=0)
    txn_access_ns: float = Field(4.0, ge=0)
    abort_ns: float = Field(100.0, ge=0)
    serial_ns: float = Field(300.0, ge=0)
    activity_ns: float = Field(10.0, ge=0)
    message_ns: float = Field(0.0, ge=0)
    element_ns: float = Field(0.0, ge=0)
    latency_ns: float = Field(0.0, ge=0)


class Settings(BaseModel):
    """Process-wide tunables."""

    short_capacity: int = Field(64, ge=1)
    long_capacity: int = Field(1024, ge=1)
    rtm_max_retries: int = Field(8, ge=0)
    bgq_max_rollbacks: int = Field(10, ge=0)
    txn_backoff_base_us: float = Field(1.0, ge=0)
    txn_backoff_cap_us: float = Field(1000.0, ge=0)
    ownership_backoff_base_us: float = Field(10.0, ge=0)
    ownership_backoff_cap_us: float = Field(10000.0, ge=0)
    watchdog_seconds: float = Field(60.0, gt=0)
    log_level: str = "WARNING"
    cost: CostSettings = Field(default_factory=CostSettings)


_ENV_FIELDS = {
    "short_capacity": ("AAM_SHORT_CAPACITY", int),
    "long_capacity": ("AAM_LONG_CAPACITY", int),
    "rtm_max_retries": ("AAM_RTM_MAX_RETRIES", int),
    "bgq_max_rollbacks": ("AAM_BGQ_MAX_ROLLBACKS", int),
    "txn_backoff_base_us": ("AAM_TXN_BACKOFF_BASE_US", float),
    "txn_backoff_cap_us": ("AAM_TXN_BACKOFF_CAP_US", float),
    "ownership_backoff_base_us": ("AAM_OWNERSHIP_BACKOFF_BASE_US", float),
    "ownership_backoff_cap_us": ("AAM_OWNERSHIP_BACKOFF_CAP_US", float),
    "watchdog_seconds": ("AAM_WATCHDOG_SECONDS", float),
    "log_level": ("AAM_LOG_LEVEL", str),
}


def load_settings(overrides: Optional[Dict[str, Any]] = None) -> Settings:
    """
    Build Settings from defaults, the environment and explicit overrides.

    Args:
        overrides: Field values that win over the environment (optional).
            A nested "cost" dict overrides individual cost constants.

    Returns:
        Validated Settings
    """
    load_dotenv(find_dotenv(usecwd=True))

    values: Dict[str, Any] = {}
    for field, (env_name, cast) in _ENV_FIELDS.items():
        raw = os.getenv(env_name)
        if raw is not None:
            values[field] = cast(raw)

    cost: Dict[str, Any] = {}
    for field in CostSettings.model_fields:
        raw = os.getenv(f"AAM_COST_{field.upper()}")
        if raw is not None:
            cost[field] = float(raw)

    if overrides:
        overrides = dict(overrides)
        cost.update(overrides.pop("cost", {}) or {})
        values.update(overrides)

    values["cost"] = cost
    return Settings(**values)
