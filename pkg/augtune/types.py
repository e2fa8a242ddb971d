"""
Type definitions for augtune.

This module defines the policy enumeration and the JSON shapes of every file
augtune reads or writes, so readers, writers and tests agree on field names.
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Union

from typing_extensions import Literal, TypedDict

from .errors import InputError

Label = Literal["yes", "no", "open"]
BinaryLabel = Literal["yes", "no"]
Provenance = Literal["remote", "rule_based"]
CaptionSource = Literal["human", "machine"]
CaptionStrategy = Literal["first_by_id", "longest", "seeded_random"]
CaptionFormat = Literal["coco_annotations", "plain_jsonl"]
GeneratorKind = Literal["remote", "rule_based"]
EmbedderKind = Literal["remote", "fallback"]
AnswerRule = Literal["first", "last"]
BackoffStrategy = Literal["exponential", "linear", "fixed"]


class PolicyKind(str, Enum):
    """The seven prompt augmentation policies."""

    HARD = "hard"
    EASY = "easy"
    SHORT = "short"
    LONG = "long"
    REWRITE = "rewrite"
    SPELL = "spell"
    APPEND = "append"

    @classmethod
    def parse(cls, name: str) -> "PolicyKind":
        """Parse a policy name, case-insensitively."""
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(p.value for p in cls)
            raise InputError(f"unknown policy {name!r} (expected one of {valid})")

    @property
    def heading(self) -> str:
        """Column title used in reports."""
        return self.value.capitalize()


ALL_POLICIES: List[PolicyKind] = list(PolicyKind)


# Wire shapes
class PromptRecordDict(TypedDict, total=False):
    """One line of a QA input file."""

    id: str
    image_id: str
    prompt: str
    response: str
    label: Label
    source: str


class AugmentedPromptDict(TypedDict):
    """One pool entry in a manifest or pool file."""

    policy: str
    text: str
    raw_score: Optional[float]
    score: Optional[float]
    provenance: Provenance
    unchanged: bool


class SampleOutcomeDict(TypedDict):
    """The sampled training prompt and its distribution."""

    chosen_text: str
    chosen_index: Union[int, str]
    probabilities: List[float]
    seed: int


class CaptionDict(TypedDict):
    """A caption annotation."""

    image_id: str
    text: str
    source: CaptionSource
    annotation_id: Optional[int]


class CugTargetDict(TypedDict):
    """A caption-prefixed ground truth."""

    response: str
    composed: str
    caption_len: int


# One training row of a manifest file; functional form because "lambda" is a keyword.
ManifestRecordDict = TypedDict(
    "ManifestRecordDict",
    {
        "record_id": str,
        "image_id": str,
        "original_prompt": str,
        "pool": List[AugmentedPromptDict],
        "failed": List[str],
        "sampled": SampleOutcomeDict,
        "caption": Optional[CaptionDict],
        "target": CugTargetDict,
        "epsilon": float,
        "lambda": float,
        "build_seed": int,
    },
)


class EvalRecordDict(TypedDict):
    """One line of an augmented evaluation file."""

    record_id: str
    policy: str
    prompt_shown: str
    gt_label: BinaryLabel
    model_response: str


class HeaderDict(TypedDict):
    """First line of every file augtune writes."""

    type: Literal["header"]
    tool: str
    version: str
    kind: str
    config: Dict[str, Any]


# Remote wire shapes
class ChatMessage(TypedDict):
    role: Literal["system", "user", "assistant"]
    content: str


class ChatCompletionRequest(TypedDict):
    model: str
    messages: List[ChatMessage]
    temperature: float


class EmbeddingRequest(TypedDict):
    model: str
    input: List[str]
