"""
Caption-utilized targets for augtune.

A target is the image caption followed by the ground-truth response, so a model
trained on it reads the caption before it answers. ``split_response`` undoes
the composition on generated text.
"""

import re
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from typing_extensions import Literal

from augtune.constants import CAPTION_SEPARATOR, SENTENCE_TERMINATORS
from augtune.errors import InputError, MissingCaptionError
from augtune.types import CaptionDict, CaptionSource, CaptionStrategy, CugTargetDict

SplitMode = Literal["known_boundary", "sentence_heuristic"]

_SENTENCE_END = re.compile(rf"[{re.escape(SENTENCE_TERMINATORS)}](?=\s)")


def normalize_caption(text: str) -> str:
    """
    Trim a caption and make it end with exactly one period.

    A trailing run of terminators ("!", "?" included) becomes that period.

    Raises:
        InputError: If nothing but whitespace and terminators remains
    """
    body = text.strip().rstrip(SENTENCE_TERMINATORS + " ").rstrip()
    if not body:
        raise InputError(f"caption text is empty: {text!r}")
    return f"{body}."


@dataclass(frozen=True)
class Caption:
    """An image caption; ``text`` is normalized on construction."""

    image_id: str
    text: str
    source: CaptionSource = "human"
    annotation_id: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "text", normalize_caption(self.text))

    def to_dict(self) -> CaptionDict:
        return {
            "image_id": self.image_id,
            "text": self.text,
            "source": self.source,
            "annotation_id": self.annotation_id,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Caption":
        return cls(
            image_id=str(data["image_id"]),
            text=data["text"],
            source=data.get("source", "human"),
            annotation_id=data.get("annotation_id"),
        )


def _by_id(caption: Caption) -> Tuple[bool, int]:
    # captions without an annotation id sort after numbered ones
    return (caption.annotation_id is None, caption.annotation_id or 0)


def select_caption(
    captions: Sequence[Caption],
    strategy: CaptionStrategy = "first_by_id",
    seed: int = 0,
    image_id: str = "",
) -> Caption:
    """
    Pick one caption for an image.

    Args:
        captions: Candidate captions of one image
        strategy: ``first_by_id`` (lowest annotation id), ``longest`` (ties go
            to the lowest id) or ``seeded_random``
        seed: Seed for ``seeded_random``
        image_id: Image the captions belong to, for the error message

    Returns:
        The chosen caption

    Raises:
        MissingCaptionError: If ``captions`` is empty
        InputError: If the strategy is unknown
    """
    if not captions:
        raise MissingCaptionError(image_id)
    ordered = sorted(captions, key=_by_id)
    if strategy == "first_by_id":
        return ordered[0]
    if strategy == "longest":
        return min(ordered, key=lambda caption: -len(caption.text))
    if strategy == "seeded_random":
        rng = np.random.default_rng(seed)
        return ordered[int(rng.integers(len(ordered)))]
    raise InputError(f"unknown caption strategy {strategy!r}")


@dataclass(frozen=True)
class CugTarget:
    """
    A training target: ``composed`` is the caption, one space, then the response.

    A plain target has no caption, ``caption_len == 0`` and
    ``composed == response``.
    """

    response: str
    composed: str
    caption_len: int
    caption: Optional[Caption] = None

    def __post_init__(self):
        if self.composed[self.caption_len :] != self.response:
            raise InputError("composed target does not end with the response")
        if self.caption is None:
            if self.caption_len != 0:
                raise InputError("a target without caption has caption_len 0")
        elif self.caption_len != len(self.caption.text) + len(CAPTION_SEPARATOR):
            raise InputError("caption_len does not match the caption")
        elif not self.composed.startswith(self.caption.text):
            raise InputError("composed target does not start with the caption")

    def to_dict(self) -> CugTargetDict:
        return {
            "response": self.response,
            "composed": self.composed,
            "caption_len": self.caption_len,
        }

    @classmethod
    def from_dict(
        cls, data: Dict[str, Any], caption: Optional[Caption] = None
    ) -> "CugTarget":
        return cls(
            response=data["response"],
            composed=data["composed"],
            caption_len=int(data["caption_len"]),
            caption=caption,
        )


def compose_target(caption: Caption, response: str) -> CugTarget:
    """
    Prefix ``response`` with the caption.

    Raises:
        InputError: If the response is empty
    """
    if not response:
        raise InputError("response must not be empty")
    return CugTarget(
        response=response,
        composed=f"{caption.text}{CAPTION_SEPARATOR}{response}",
        caption_len=len(caption.text) + len(CAPTION_SEPARATOR),
        caption=caption,
    )


def plain_target(response: str) -> CugTarget:
    """A target without caption, for builds with captions turned off."""
    if not response:
        raise InputError("response must not be empty")
    return CugTarget(response=response, composed=response, caption_len=0)


def split_response(
    generated: str,
    mode: SplitMode = "sentence_heuristic",
    caption_len: Optional[int] = None,
) -> Tuple[str, str]:
    """
    Split generated text into its caption part and its answer part.

    ``known_boundary`` cuts at ``caption_len`` and drops the separator from the
    caption part. ``sentence_heuristic`` cuts after the first ``.``, ``!`` or
    ``?`` that is followed by whitespace; with no such terminator the caption
    part is empty.

    Args:
        generated: Generated or composed text
        mode: Split rule
        caption_len: Caption boundary, required by ``known_boundary``

    Returns:
        ``(caption_part, answer_part)``
    """
    if mode == "known_boundary":
        if caption_len is None or caption_len < 0:
            raise InputError("known_boundary needs a non-negative caption_len")
        caption = generated[:caption_len]
        if caption.endswith(CAPTION_SEPARATOR):
            caption = caption[: -len(CAPTION_SEPARATOR)]
        return caption, generated[caption_len:]
    if mode != "sentence_heuristic":
        raise InputError(f"unknown split mode {mode!r}")

    match = _SENTENCE_END.search(generated)
    if match is None:
        return "", generated
    return generated[: match.end()], generated[match.end() :].lstrip()
