"""Configuration documents (TOML or JSON) validated against one schema.

A config hash pins every parameter that affects results so identical runs
are byte-reproducible and reports can reference the exact setup.
"""

from __future__ import annotations

import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, ValidationError

from .errors import ConfigError


class ProviderSettings(BaseModel):
    kind: str = "mock"
    base_url: str = ""
    model: str = ""
    auth_env: str = ""
    timeout: float = 30.0
    max_attempts: int = 3
    backoff_base: float = 0.5
    rate_limit: Optional[float] = None
    rate_burst: int = 1
    seed: int = 0


class PipelineSettings(BaseModel):
    rho: float = Field(default=0.15, ge=0.0, le=1.0)
    epsilon_sem: float = Field(default=10.0, ge=1.0)
    epsilon_ldp: float = Field(default=10.0, ge=0.0)
    temperature: float = Field(default=1.0, ge=0.0)
    max_attempts: int = Field(default=10, ge=1)
    seed: int = 0
    instruction_preset: str = "instruction_default.txt"
    min_clause_tokens: int = Field(default=3, ge=1)


class AttackSettings(BaseModel):
    n_samples: int = Field(default=5, ge=1)
    embed_dim: int = Field(default=200, ge=1)
    tolerance: float = Field(default=0.05, ge=0.0)
    method_hint_preset: str = "attack_hint_generative.txt"


class OptimizerSettings(BaseModel):
    algorithm: str = "ape"
    iterations: int = Field(default=6, ge=1)
    candidates_per_iter: int = Field(default=7, ge=1)
    max_iterations: int = Field(default=40, ge=1)
    initial_prompts: int = Field(default=3, ge=1)
    checkpoint: int = Field(default=50, ge=1)
    validation_reserve: int = Field(default=1000, ge=1)


class AppConfig(BaseModel):
    store_dir: str = "stores"
    chat_provider: ProviderSettings = Field(default_factory=ProviderSettings)
    embed_provider: ProviderSettings = Field(default_factory=ProviderSettings)
    pipeline: PipelineSettings = Field(default_factory=PipelineSettings)
    attack: AttackSettings = Field(default_factory=AttackSettings)
    optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)

    def config_hash(self) -> str:
        blob = json.dumps(self.model_dump(), sort_keys=True, ensure_ascii=False)
        return hashlib.blake2b(blob.encode("utf-8"), digest_size=16).hexdigest()


def load_config(path) -> AppConfig:
    """Parse and validate a TOML or JSON config file; all validation
    errors are reported together."""
    path = Path(path)
    try:
        if path.suffix == ".toml":
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        else:
            raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        return AppConfig.model_validate(raw)
    except ValidationError as exc:
        issues = "; ".join(
            f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()
        )
        raise ConfigError(f"invalid config {path}: {issues}")
