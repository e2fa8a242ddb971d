"""
Score-weighted prompt sampling for augtune.

A training prompt is drawn from the pool with probability proportional to its
thresholded score; a pool whose scores are all zero falls back to the original.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from augtune.constants import ORIGINAL
from augtune.errors import InputError
from augtune.primitives.augmenter import PromptPool
from augtune.primitives.evaluator import ScoreVector
from augtune.types import SampleOutcomeDict


@dataclass(frozen=True)
class SampleOutcome:
    """
    The sampled training prompt.

    ``probabilities`` is aligned with the pool (zero-score items get 0) and is
    empty when the original prompt was chosen.
    """

    chosen_text: str
    chosen_index: Union[int, str]
    probabilities: Tuple[float, ...]
    seed: int

    @property
    def is_original(self) -> bool:
        return self.chosen_index == ORIGINAL

    def to_dict(self) -> SampleOutcomeDict:
        return {
            "chosen_text": self.chosen_text,
            "chosen_index": self.chosen_index,
            "probabilities": list(self.probabilities),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SampleOutcome":
        index = data["chosen_index"]
        if index != ORIGINAL:
            index = int(index)
        return cls(
            chosen_text=data["chosen_text"],
            chosen_index=index,
            probabilities=tuple(float(p) for p in data.get("probabilities", [])),
            seed=int(data["seed"]),
        )


def exact_distribution(scores: Union[ScoreVector, Sequence[float]]) -> List[float]:
    """
    Normalize scores to sum to 1.

    Returns:
        The weights, aligned with ``scores``; ``[]`` when every score is 0
    """
    values = np.asarray(list(scores), dtype=np.float64)
    if values.size == 0:
        return []
    if np.any(values < 0):
        raise InputError("scores must be non-negative")
    total = values.sum()
    if total == 0.0:
        return []
    return (values / total).tolist()


def draw_indices(
    probabilities: Sequence[float], seed: int, draws: int = 1
) -> np.ndarray:
    """
    Draw pool indices by inverse-CDF sampling on a seeded generator.

    Zero-probability indices are never returned: their CDF interval is empty.

    Args:
        probabilities: Normalized weights with at least one nonzero entry
        seed: Seed for ``numpy.random.default_rng``
        draws: Number of draws

    Returns:
        Array of ``draws`` indices
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    support = np.flatnonzero(probs)
    if support.size == 0:
        raise InputError("cannot sample from an all-zero distribution")
    cumulative = np.cumsum(probs)
    rng = np.random.default_rng(seed)
    u = rng.random(draws) * cumulative[-1]
    indices = np.searchsorted(cumulative, u, side="right")
    # u can round up to the last boundary
    return np.minimum(indices, support[-1])


def sample_prompt(
    pool: PromptPool, scores: ScoreVector, rng_seed: int
) -> SampleOutcome:
    """
    Sample the training prompt from a scored pool.

    Args:
        pool: The prompt pool
        scores: Thresholded scores aligned with ``pool.items``
        rng_seed: Seed of the draw

    Returns:
        The chosen item, or the original prompt with the ``ORIGINAL`` index
        when every score is 0

    Raises:
        InputError: If ``scores`` and the pool differ in length
    """
    if len(scores) != len(pool):
        raise InputError(
            f"score vector has {len(scores)} entries for a pool of {len(pool)}"
        )
    probabilities = exact_distribution(scores)
    if not probabilities:
        return SampleOutcome(pool.original, ORIGINAL, (), rng_seed)

    index = int(draw_indices(probabilities, rng_seed)[0])
    return SampleOutcome(
        pool.items[index].text, index, tuple(probabilities), rng_seed
    )
