"""
Prompt augmentation for augtune.

Builds the pool of augmented prompts for one original prompt, through either a
remote chat-completion model or the offline rule engine.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from itertools import cycle, islice
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from typing_extensions import Protocol, runtime_checkable

from augtune.errors import APIError, EmptyGenerationError, GenerationError, InputError
from augtune.primitives.chat import ChatClient
from augtune.primitives.rules import Generation, rule_based_augment
from augtune.types import AugmentedPromptDict, PolicyKind, Provenance
from augtune.utils import derive_seed
from augtune.workflow import Workflow

logger = logging.getLogger(__name__)

PLACEHOLDER = "{prompt}"


@dataclass(frozen=True)
class PolicyTemplate:
    """Generator instruction for one policy, with a single ``{prompt}`` slot."""

    policy: PolicyKind
    instruction_text: str

    def __post_init__(self):
        count = self.instruction_text.count(PLACEHOLDER)
        if count != 1:
            raise InputError(
                f"template for {self.policy.value!r} must contain {PLACEHOLDER} "
                f"exactly once (found {count})"
            )

    def render(self, prompt: str) -> str:
        return self.instruction_text.replace(PLACEHOLDER, prompt)


TemplateSet = Dict[PolicyKind, PolicyTemplate]


def _parse_templates(raw: Dict[str, Any]) -> TemplateSet:
    return {
        PolicyKind.parse(name): PolicyTemplate(PolicyKind.parse(name), text)
        for name, text in raw.items()
    }


@lru_cache(maxsize=1)
def default_templates() -> TemplateSet:
    """Templates shipped in ``augtune/assets/policy_templates.json``."""
    raw = json.loads(resources.read_text("augtune.assets", "policy_templates.json"))
    return _parse_templates(raw)


def load_policy_templates(path: Optional[Union[str, Path]] = None) -> TemplateSet:
    """
    Load policy templates, overriding the shipped defaults per policy.

    Args:
        path: JSON file mapping policy names to template strings

    Returns:
        A template for every policy

    Raises:
        InputError: If the file can't be read or a template is invalid
    """
    templates = dict(default_templates())
    if path is None:
        return templates
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read templates from {path}: {e}") from e
    if not isinstance(raw, dict):
        raise InputError(f"{path}: expected an object of policy -> template")
    templates.update(_parse_templates(raw))
    return templates


def render_policy_template(
    policy: PolicyKind, prompt: str, templates: Optional[TemplateSet] = None
) -> str:
    """
    Render the generator instruction for ``policy`` around ``prompt``.

    Args:
        policy: The augmentation policy
        prompt: The original prompt, inserted verbatim
        templates: Template set to use; the shipped defaults when omitted

    Returns:
        The instruction text

    Raises:
        InputError: If the prompt is empty
    """
    if not prompt or not prompt.strip():
        raise InputError("prompt must not be empty")
    return (templates or default_templates())[PolicyKind(policy)].render(prompt)


@dataclass(frozen=True)
class AugmentedPrompt:
    """One augmented variant of a prompt, with its scores once evaluated."""

    parent_id: str
    policy: PolicyKind
    text: str
    provenance: Provenance
    raw_score: Optional[float] = None
    score: Optional[float] = None
    unchanged: bool = False

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise InputError(
                f"augmented prompt for {self.policy.value!r} must not be empty"
            )

    def to_dict(self) -> AugmentedPromptDict:
        return {
            "policy": self.policy.value,
            "text": self.text,
            "raw_score": self.raw_score,
            "score": self.score,
            "provenance": self.provenance,
            "unchanged": self.unchanged,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], parent_id: str) -> "AugmentedPrompt":
        return cls(
            parent_id=parent_id,
            policy=PolicyKind.parse(data["policy"]),
            text=data["text"],
            provenance=data.get("provenance", "rule_based"),
            raw_score=data.get("raw_score"),
            score=data.get("score"),
            unchanged=bool(data.get("unchanged", False)),
        )


@dataclass(frozen=True)
class PromptPool:
    """The augmented variants of one original prompt, in policy order."""

    original: str
    items: Tuple[AugmentedPrompt, ...]
    failed: Tuple[PolicyKind, ...] = field(default=())
    seed: int = 0

    def __len__(self) -> int:
        return len(self.items)

    @property
    def texts(self) -> List[str]:
        return [item.text for item in self.items]

    def with_scores(
        self, raw_scores: Sequence[float], scores: Sequence[float]
    ) -> "PromptPool":
        """Return a copy whose items carry the given raw and thresholded scores."""
        if not len(raw_scores) == len(scores) == len(self.items):
            raise InputError("score lists must align with the pool")
        items = tuple(
            replace(item, raw_score=float(raw), score=float(score))
            for item, raw, score in zip(self.items, raw_scores, scores)
        )
        return replace(self, items=items)


@runtime_checkable
class PromptGenerator(Protocol):
    """Anything that can produce the augmented text for one policy."""

    provenance: Provenance
    parallelism: int

    def generate(self, policy: PolicyKind, prompt: str, seed: int) -> Generation:
        ...


class RuleBasedGenerator:
    """Deterministic offline generator backed by :func:`rule_based_augment`."""

    provenance: Provenance = "rule_based"
    parallelism = 1

    def generate(self, policy: PolicyKind, prompt: str, seed: int) -> Generation:
        return rule_based_augment(prompt, policy, seed)


class ChatCompletionGenerator:
    """Generator that asks a chat-completion model to apply each policy."""

    provenance: Provenance = "remote"

    def __init__(self, client: ChatClient, templates: Optional[TemplateSet] = None):
        """
        Initialize the generator.

        Args:
            client: Chat client carrying the endpoint, model and retry policy
            templates: Policy templates; the shipped defaults when omitted
        """
        self.client = client
        self.templates = templates or default_templates()

    @property
    def parallelism(self) -> int:
        return self.client.parallelism

    def generate(self, policy: PolicyKind, prompt: str, seed: int) -> Generation:
        """
        Render the policy template and return the model's answer verbatim.

        Raises:
            GenerationError: If the endpoint keeps failing
            EmptyGenerationError: If the answer is empty or repeats the instruction
        """
        instruction = render_policy_template(policy, prompt, self.templates)
        try:
            step_id = f"augment:{policy.value}"
            text = self.client.complete(instruction, step_id=step_id)
        except APIError as e:
            raise GenerationError(policy.value, str(e)) from e

        if not text:
            raise EmptyGenerationError(policy.value, "empty answer")
        if text == instruction.strip():
            raise EmptyGenerationError(policy.value, "answer repeats the instruction")
        return Generation(text, unchanged=text == prompt.strip())


def policy_sequence(
    policies: Sequence[PolicyKind], pool_size: Optional[int] = None
) -> List[PolicyKind]:
    """
    The policy of every pool slot: ``policies`` cycled or truncated to
    ``pool_size`` (``len(policies)`` when omitted).
    """
    if not policies:
        raise InputError("at least one policy is required")
    size = len(policies) if pool_size is None else pool_size
    if size < 1:
        raise InputError(f"pool size must be at least 1, got {size}")
    return list(islice(cycle(policies), size))


def augment_prompt(
    prompt: str,
    policies: Sequence[PolicyKind],
    generator: PromptGenerator,
    seed: int,
    parent_id: str = "",
    pool_size: Optional[int] = None,
) -> PromptPool:
    """
    Generate the pool of augmented prompts for one original prompt.

    Slot ``i`` is generated with seed ``derive_seed(seed, policy, i)``, so the
    pool is a pure function of its arguments under the rule-based generator.
    Remote slots run concurrently up to the generator's parallelism bound and
    are reassembled in policy order.

    Args:
        prompt: The original prompt
        policies: Policies to apply, in pool order
        generator: Rule-based or remote generator
        seed: Seed for this prompt's pool
        parent_id: Id of the record the prompt belongs to
        pool_size: Pool length N; ``len(policies)`` when omitted

    Returns:
        The pool; slots whose answer was rejected are left out and listed in
        ``failed``

    Raises:
        InputError: If the prompt or the policy list is empty
        GenerationError: If a remote call fails after all retries
    """
    if not prompt or not prompt.strip():
        raise InputError("prompt must not be empty")
    slots = list(enumerate(policy_sequence(policies, pool_size)))

    def run(slot: Tuple[int, PolicyKind]) -> Optional[Generation]:
        index, policy = slot
        try:
            item_seed = derive_seed(seed, policy.value, index)
            return generator.generate(policy, prompt, item_seed)
        except EmptyGenerationError as e:
            logger.warning("dropping %s item for %r: %s", policy.value, parent_id, e)
            return None

    workflow = Workflow(parallelism=getattr(generator, "parallelism", 1))
    results = workflow.map_ordered(run, slots)

    items: List[AugmentedPrompt] = []
    failed: List[PolicyKind] = []
    for (_, policy), result in zip(slots, results):
        if result is None:
            failed.append(policy)
            continue
        items.append(
            AugmentedPrompt(
                parent_id=parent_id,
                policy=policy,
                text=result.text,
                provenance=generator.provenance,
                unchanged=result.unchanged,
            )
        )
    return PromptPool(
        original=prompt, items=tuple(items), failed=tuple(failed), seed=seed
    )
