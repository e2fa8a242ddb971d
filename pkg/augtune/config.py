"""
Run configuration for augtune.

One frozen ``RunConfig`` carries every knob of a run. Its secret-free form is
written as the header line of every output file, which is enough to repeat a
rule-based run byte for byte.
"""

import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Optional, Tuple

from .constants import (
    DEFAULT_API_KEY_ENV,
    DEFAULT_BACKOFF,
    DEFAULT_EPSILON,
    DEFAULT_LAMBDA,
    DEFAULT_MAX_RETRIES,
    DEFAULT_ORACLE_DRAWS,
    DEFAULT_ORACLE_K,
    DEFAULT_ORACLE_ORDER,
    DEFAULT_PARALLELISM,
    DEFAULT_POOL_SIZE,
    DEFAULT_REQUEST_TIMEOUT,
    DEFAULT_RETRY_DELAY_MS,
    DEFAULT_SEED,
    DEFAULT_TEMPERATURE,
)
from .errors import ConfigError
from .types import (
    ALL_POLICIES,
    AnswerRule,
    BackoffStrategy,
    CaptionFormat,
    CaptionStrategy,
    EmbedderKind,
    GeneratorKind,
    PolicyKind,
)
from .workflow import RetryConfig

# Secrets and the output location never go into headers
_NOT_ECHOED = frozenset({"api_key_env", "output_path"})


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration of one augtune run."""

    command: str = ""
    qa_path: Optional[str] = None
    captions_path: Optional[str] = None
    captions_format: CaptionFormat = "coco_annotations"
    machine_captions_path: Optional[str] = None
    output_path: Optional[str] = None
    manifest_path: Optional[str] = None
    eval_paths: Tuple[str, ...] = ()

    policies: Tuple[PolicyKind, ...] = field(default=tuple(ALL_POLICIES))
    epsilon: float = DEFAULT_EPSILON
    lambda_: float = DEFAULT_LAMBDA
    pool_size: int = DEFAULT_POOL_SIZE
    seed: int = DEFAULT_SEED
    caption_strategy: CaptionStrategy = "first_by_id"
    use_augmentation: bool = True
    use_evaluation: bool = True
    use_captions: bool = True

    generator: GeneratorKind = "rule_based"
    generator_base_url: Optional[str] = None
    generator_model: Optional[str] = None
    templates_path: Optional[str] = None
    temperature: float = DEFAULT_TEMPERATURE
    embedder: EmbedderKind = "fallback"
    embedder_base_url: Optional[str] = None
    embedder_model: Optional[str] = None
    score_cache_path: Optional[str] = None
    responder_base_url: Optional[str] = None
    responder_model: Optional[str] = None

    parallelism: int = DEFAULT_PARALLELISM
    max_retries: int = DEFAULT_MAX_RETRIES
    retry_delay_ms: int = DEFAULT_RETRY_DELAY_MS
    backoff: BackoffStrategy = DEFAULT_BACKOFF
    request_timeout: float = DEFAULT_REQUEST_TIMEOUT
    api_key_env: str = DEFAULT_API_KEY_ENV

    answer_rule: AnswerRule = "first"
    cug_mode: bool = False

    oracle_order: int = DEFAULT_ORACLE_ORDER
    oracle_k: float = DEFAULT_ORACLE_K
    oracle_draws: int = DEFAULT_ORACLE_DRAWS

    def validate(self) -> "RunConfig":
        """
        Check the configuration for conflicts.

        Returns:
            ``self``, so construction and validation chain

        Raises:
            ConfigError: On the first conflict found
        """
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lambda_}")
        if self.pool_size < 1:
            raise ConfigError(f"pool size must be at least 1, got {self.pool_size}")
        if not self.policies:
            raise ConfigError("at least one policy is required")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be at least 1, got {self.parallelism}")
        if self.max_retries < 0:
            raise ConfigError("max_retries must not be negative")
        if self.oracle_order < 1:
            raise ConfigError(
                f"oracle order must be at least 1, got {self.oracle_order}"
            )
        if not self.oracle_k > 0:
            raise ConfigError(
                f"smoothing constant must be positive, got {self.oracle_k}"
            )
        if self.oracle_draws < 1:
            raise ConfigError(f"draws must be positive, got {self.oracle_draws}")
        if self.generator == "remote" and not (
            self.generator_base_url and self.generator_model
        ):
            raise ConfigError(
                "remote generator needs --generator-base-url and --generator-model"
            )
        if self.embedder == "remote" and not (
            self.embedder_base_url and self.embedder_model
        ):
            raise ConfigError(
                "remote embedder needs --embedder-base-url and --embedder-model"
            )
        return self

    def retry_config(self) -> Optional[RetryConfig]:
        if self.max_retries == 0:
            return None
        return {
            "limit": self.max_retries,
            "delay": self.retry_delay_ms,
            "backoff": self.backoff,
        }

    def api_key(self) -> str:
        """The API key, read from the environment variable ``api_key_env``."""
        return os.environ.get(self.api_key_env, "")

    def to_header(self) -> Dict[str, Any]:
        """The secret-free config echoed into output headers."""
        header: Dict[str, Any] = {}
        for item in fields(self):
            if item.name in _NOT_ECHOED:
                continue
            value = getattr(self, item.name)
            if item.name == "policies":
                value = [policy.value for policy in value]
            elif isinstance(value, tuple):
                value = list(value)
            header["lambda" if item.name == "lambda_" else item.name] = value
        return header
