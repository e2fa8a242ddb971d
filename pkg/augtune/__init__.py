"""
augtune.

Prompt augmentation, embedding-based filtering and caption-utilized targets
for multimodal instruct-tuning data, with an evaluation harness and a toy
language-model check of the composite training loss.
"""

from .config import RunConfig
from .constants import VERSION
from .errors import (
    APIConnectionError,
    APIError,
    AugtuneError,
    AuthenticationError,
    BadRequestError,
    ConfigError,
    ConflictError,
    DuplicateIdError,
    EmbeddingError,
    EmptyGenerationError,
    GenerationError,
    InputError,
    InternalServerError,
    MalformedInputError,
    MissingCaptionError,
    NotFoundError,
    PermissionDeniedError,
    RateLimitError,
    UnprocessableEntityError,
)
from .pipeline import Pipeline, make_embedder, make_generator, make_responder
from .primitives.augmenter import (
    AugmentedPrompt,
    ChatCompletionGenerator,
    PromptPool,
    RuleBasedGenerator,
    augment_prompt,
)
from .primitives.cug import (
    Caption,
    CugTarget,
    compose_target,
    select_caption,
    split_response,
)
from .primitives.dataset import (
    EvalRecord,
    ManifestRecord,
    PromptRecord,
    build_augmented_testset,
    build_manifest,
    load_captions,
    load_qa_pairs,
)
from .primitives.evaluator import (
    EmbeddingVector,
    HashingEmbedder,
    RemoteEmbedder,
    ScoreVector,
    embed,
    score_pool,
    similarity,
    threshold_scores,
)
from .primitives.metrics import compute_metrics, extract_answer, per_policy_report
from .primitives.oracle import composite_loss, fit, verify_manifest
from .primitives.sampler import SampleOutcome, sample_prompt
from .types import ALL_POLICIES, PolicyKind
from .workflow import Workflow

__version__ = VERSION
__description__ = "Prompt augmentation and caption-utilized instruct-tuning data"

__all__ = [
    # Errors
    "APIConnectionError",
    "APIError",
    "AugtuneError",
    "AuthenticationError",
    "BadRequestError",
    "ConfigError",
    "ConflictError",
    "DuplicateIdError",
    "EmbeddingError",
    "EmptyGenerationError",
    "GenerationError",
    "InputError",
    "InternalServerError",
    "MalformedInputError",
    "MissingCaptionError",
    "NotFoundError",
    "PermissionDeniedError",
    "RateLimitError",
    "UnprocessableEntityError",
    # Main classes
    "ALL_POLICIES",
    "AugmentedPrompt",
    "Caption",
    "ChatCompletionGenerator",
    "CugTarget",
    "EmbeddingVector",
    "EvalRecord",
    "HashingEmbedder",
    "ManifestRecord",
    "Pipeline",
    "PolicyKind",
    "PromptPool",
    "PromptRecord",
    "RemoteEmbedder",
    "RuleBasedGenerator",
    "RunConfig",
    "SampleOutcome",
    "ScoreVector",
    "Workflow",
    # Operations
    "augment_prompt",
    "build_augmented_testset",
    "build_manifest",
    "compose_target",
    "composite_loss",
    "compute_metrics",
    "embed",
    "extract_answer",
    "fit",
    "load_captions",
    "load_qa_pairs",
    "make_embedder",
    "make_generator",
    "make_responder",
    "per_policy_report",
    "sample_prompt",
    "score_pool",
    "select_caption",
    "similarity",
    "split_response",
    "threshold_scores",
    "verify_manifest",
]
