"""
Run configuration.

A RunConfig is read from a JSON file (``--config``) and completed with
command-line overrides. Unknown keys are rejected so that typos in a
config file fail loudly instead of silently falling back to defaults.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .validation import LOO, ValidationScheme

logger = logging.getLogger(__name__)

# datasets up to this many bags are validated leave-one-out by default
LOO_MAX_BAGS = 200


class GaSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    population: int = Field(100, ge=4)
    generations: int = Field(100, ge=1)
    crossover_prob: float = Field(0.9, ge=0.0, le=1.0)
    mutation_prob: float = Field(0.1, ge=0.0, le=1.0)
    seed: Optional[int] = Field(None, ge=0)

    @field_validator("population")
    @classmethod
    def _even_population(cls, value):
        if value % 2:
            raise ValueError(f"population must be even, got {value}")
        return value


class CnnSearchSettings(GaSettings):
    """Search bounds for (eta_r, eta_c, d, theta, feature mask) genomes."""

    eta_max: int = Field(15, ge=1)
    d_max: int = Field(5, ge=1)
    theta_min: float = 0.05
    theta_max: float = 0.95

    @model_validator(mode="after")
    def _theta_bounds(self):
        if not 0.0 < self.theta_min < self.theta_max < 1.0:
            raise ValueError(f"need 0 < theta_min < theta_max < 1, got [{self.theta_min}, {self.theta_max}]")
        return self


class StackSearchSettings(GaSettings):
    """Search bounds for (log10 gamma, log10 c, member mask) genomes of the combiner."""

    population: int = Field(40, ge=4)
    generations: int = Field(50, ge=1)
    log_gamma_min: float = -3.0
    log_gamma_max: float = 3.0
    log_c_min: float = -2.0
    log_c_max: float = 3.0
    svm_tol: float = Field(1e-3, gt=0.0)
    svm_max_iter: int = Field(100_000, ge=1)

    @model_validator(mode="after")
    def _log_bounds(self):
        if self.log_gamma_min >= self.log_gamma_max or self.log_c_min >= self.log_c_max:
            raise ValueError("log-scale bounds must satisfy min < max")
        return self


class ValidationSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    scheme: Literal["auto", "loo", "kfold"] = "auto"
    k: int = Field(10, ge=2)
    seed: int = Field(0, ge=0)

    def resolve(self, n_bags):
        """Concrete scheme for a dataset of ``n_bags`` bags."""
        kind = self.scheme
        if kind == "auto":
            kind = "loo" if n_bags <= LOO_MAX_BAGS else "kfold"
        if kind == "loo":
            return LOO
        return ValidationScheme("kfold", min(self.k, n_bags), self.seed)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dataset: Optional[str] = None
    normalize: bool = True
    cnn_search: CnnSearchSettings = Field(default_factory=CnnSearchSettings)
    stack_search: StackSearchSettings = Field(default_factory=StackSearchSettings)
    validation: ValidationSettings = Field(default_factory=ValidationSettings)
    out_dir: str = "out"
    seed: int = Field(0, ge=0)
    use_scores: bool = False

    def stage_seed(self, settings):
        return self.seed if settings.seed is None else settings.seed


def load_config(path=None):
    """
    Read a RunConfig from a JSON file (defaults when ``path`` is None).

    Raises:
        ConfigError: unreadable JSON or a value failing validation.
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}")
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}")
    logger.info(f"✅ Loaded configuration from {path}")
    return config


def apply_overrides(config, **overrides):
    """Return a copy of ``config`` with the non-None ``overrides`` applied and revalidated."""
    data = config.model_dump()
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "kfold":
            data["validation"] = {**data["validation"], "scheme": "kfold", "k": value}
        else:
            data[key] = value
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e))


def config_digest(config):
    """SHA-256 of the canonical JSON of everything that affects results (out_dir excluded)."""
    payload = config.model_dump(mode="json", exclude={"out_dir"})
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
