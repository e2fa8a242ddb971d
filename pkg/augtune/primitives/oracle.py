"""
Toy language-model oracle for augtune.

A character-level add-k n-gram model conditioned on an image-id token and the
prompt. Its likelihoods are exact, so the caption-conditioned target structure
and the composite loss over the prompt pool can be checked to machine
precision.
"""

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import (
    Any,
    Dict,
    Iterable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from typing_extensions import Literal

from augtune.constants import (
    END_OF_TEXT,
    IMAGE_TOKEN_PREFIX,
    RESPONSE_START,
    UNKNOWN_SYMBOL,
)
from augtune.errors import InputError
from augtune.primitives.cug import CugTarget, split_response
from augtune.primitives.dataset import ManifestRecord
from augtune.primitives.sampler import draw_indices, exact_distribution
from augtune.utils import derive_seed

logger = logging.getLogger(__name__)

Context = Tuple[str, ...]
TargetLike = Union[str, CugTarget]


class TrainingExample(NamedTuple):
    """One (image, prompt) context and the target that follows it."""

    image_id: str
    prompt: str
    target: str


def _target_text(target: TargetLike) -> str:
    return target.composed if isinstance(target, CugTarget) else target


def context_symbols(image_id: str, prompt: str) -> List[str]:
    """The conditioning sequence: image token, prompt characters, response start."""
    return [f"{IMAGE_TOKEN_PREFIX}{image_id}"] + list(prompt) + [RESPONSE_START]


@dataclass(frozen=True)
class NgramModel:
    """
    Character n-gram model with add-k smoothing.

    ``counts`` maps a context (the previous ``order - 1`` symbols) to the counts
    of the symbol that followed it. ``vocabulary`` is the sorted set of symbols
    the model can emit, end-of-text and the unknown symbol included. Characters
    outside it are scored as the unknown symbol.
    """

    order: int
    k: float
    counts: Mapping[Context, Mapping[str, int]]
    vocabulary: Tuple[str, ...]
    _totals: Dict[Context, int] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )

    def __post_init__(self):
        if self.order < 1:
            raise InputError(f"order must be at least 1, got {self.order}")
        if not self.k > 0:
            raise InputError(f"smoothing constant must be positive, got {self.k}")
        for context, row in self.counts.items():
            self._totals[context] = sum(row.values())

    def context_of(self, symbols: Sequence[str], position: int) -> Context:
        return tuple(symbols[max(0, position - self.order + 1) : position])

    def probability(self, context: Context, symbol: str) -> float:
        row = self.counts.get(context, {})
        total = self._totals.get(context, 0)
        return (row.get(symbol, 0) + self.k) / (total + self.k * len(self.vocabulary))

    def distribution(self, context: Context) -> Dict[str, float]:
        """Next-symbol distribution; sums to 1 over the vocabulary."""
        return {symbol: self.probability(context, symbol) for symbol in self.vocabulary}


def fit(
    corpus: Iterable[Tuple[str, str, TargetLike]],
    order: int,
    k: float = 1.0,
    vocabulary: Iterable[str] = (),
) -> NgramModel:
    """
    Count n-grams over the target side of every example.

    Args:
        corpus: ``(image_id, prompt, target)`` examples
        order: n-gram order, at least 1
        k: Add-k smoothing constant
        vocabulary: Extra symbols the model may emit

    Returns:
        The fitted model

    Raises:
        InputError: On an empty corpus, ``order < 1`` or ``k <= 0``
    """
    if order < 1:
        raise InputError(f"order must be at least 1, got {order}")
    counts: Dict[Context, Counter] = {}
    symbols_seen = set(vocabulary) | {END_OF_TEXT, UNKNOWN_SYMBOL}
    examples = 0
    for image_id, prompt, target in corpus:
        examples += 1
        text = _target_text(target)
        context = context_symbols(image_id, prompt)
        sequence = context + list(text) + [END_OF_TEXT]
        symbols_seen.update(text)
        for position in range(len(context), len(sequence)):
            key = tuple(sequence[max(0, position - order + 1) : position])
            counts.setdefault(key, Counter())[sequence[position]] += 1
    if not examples:
        raise InputError("cannot fit on an empty corpus")
    frozen = {key: dict(sorted(row.items())) for key, row in sorted(counts.items())}
    return NgramModel(order, float(k), frozen, tuple(sorted(symbols_seen)))


def sequence_nll(
    model: NgramModel, image_id: str, prompt: str, target: TargetLike
) -> float:
    """
    Mean per-character negative log-likelihood of ``target``.

    Each character is scored given the gold characters before it.

    Caption characters of a composed target come first, so they are scored
    before the answer. End-of-text is not scored.

    Characters outside the vocabulary count as the unknown symbol.

    Raises:
        InputError: If the target is empty
    """
    text = _target_text(target)
    if not text:
        raise InputError("target must not be empty")
    context = context_symbols(image_id, prompt)
    vocabulary = set(model.vocabulary)
    sequence = context + [c if c in vocabulary else UNKNOWN_SYMBOL for c in text]
    total = 0.0
    for position in range(len(context), len(sequence)):
        window = model.context_of(sequence, position)
        total -= math.log(model.probability(window, sequence[position]))
    return total / len(text)


def generate(
    model: NgramModel,
    image_id: str,
    prompt: str,
    prefix: str = "",
    max_length: int = 256,
) -> str:
    """
    Greedy decoding, optionally forced to start with ``prefix``.

    Ties go to the symbol that sorts first. Stops at end-of-text or after
    ``max_length`` generated characters.

    Returns:
        The prefix followed by the generated characters
    """
    sequence = context_symbols(image_id, prompt) + list(prefix)
    generated: List[str] = list(prefix)
    for _ in range(max_length):
        context = model.context_of(sequence, len(sequence))
        best, best_p = model.vocabulary[0], -1.0
        for symbol in model.vocabulary:
            p = model.probability(context, symbol)
            if p > best_p:
                best, best_p = symbol, p
        if best == END_OF_TEXT:
            break
        sequence.append(best)
        generated.append(best)
    return "".join(generated)


@dataclass(frozen=True)
class MonteCarlo:
    """Estimate the augmented term from seeded draws of the sampler."""

    seed: int
    draws: int

    def __post_init__(self):
        if self.draws < 1:
            raise InputError(f"draws must be positive, got {self.draws}")


LossMode = Union[Literal["exact"], MonteCarlo]


@dataclass(frozen=True)
class LossBreakdown:
    """The base loss, the augmented term and their lambda-weighted total."""

    base: float
    augmented: float
    total: float
    lambda_: float
    mode: str
    std_error: float = 0.0
    seed: Optional[int] = None
    draws: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "base": self.base,
            "augmented": self.augmented,
            "total": self.total,
            "lambda": self.lambda_,
            "mode": self.mode,
            "std_error": self.std_error,
            "seed": self.seed,
            "draws": self.draws,
        }


def _pool_losses(
    model: NgramModel, record: ManifestRecord, indices: Iterable[int]
) -> Dict[int, float]:
    return {
        i: sequence_nll(
            model, record.image_id, record.pool.items[i].text, record.target
        )
        for i in sorted(set(indices))
    }


def composite_loss(
    model: NgramModel,
    record: ManifestRecord,
    mode: LossMode = "exact",
    lambda_: Optional[float] = None,
) -> LossBreakdown:
    """
    Loss on the original prompt plus lambda times the expected loss over the pool.

    ``exact`` weights every pool item's loss by its sampling probability;
    ``MonteCarlo`` averages the loss over seeded draws of the sampler. A pool
    whose scores are all zero falls back to the original prompt, so the total
    becomes ``(1 + lambda) * base``.

    Args:
        model: The toy language model
        record: Manifest row with pool scores and target
        mode: ``"exact"`` or a ``MonteCarlo`` estimator
        lambda_: Overrides the record's lambda

    Returns:
        The loss breakdown
    """
    weight = record.lambda_ if lambda_ is None else lambda_
    base = sequence_nll(model, record.image_id, record.original_prompt, record.target)
    probabilities = exact_distribution(record.scores)

    if isinstance(mode, MonteCarlo):
        name, seed, draws = "monte_carlo", mode.seed, mode.draws
    elif mode == "exact":
        name, seed, draws = "exact", None, None
    else:
        raise InputError(f"unknown loss mode {mode!r}")

    std_error = 0.0
    if not probabilities:
        augmented = base
    elif isinstance(mode, MonteCarlo):
        indices = draw_indices(probabilities, mode.seed, mode.draws)
        losses = _pool_losses(model, record, indices.tolist())
        values = np.array([losses[i] for i in indices.tolist()], dtype=np.float64)
        augmented = float(values.mean())
        if mode.draws > 1:
            std_error = float(values.std(ddof=1) / math.sqrt(mode.draws))
    else:
        support = [i for i, p in enumerate(probabilities) if p > 0.0]
        losses = _pool_losses(model, record, support)
        augmented = math.fsum(probabilities[i] * losses[i] for i in support)

    return LossBreakdown(
        base=base,
        augmented=augmented,
        total=base + weight * augmented,
        lambda_=weight,
        mode=name,
        std_error=std_error,
        seed=seed,
        draws=draws,
    )


def manifest_corpus(records: Iterable[ManifestRecord]) -> List[TrainingExample]:
    """Training examples of a manifest: the original and every scored pool item."""
    corpus = []
    for record in records:
        target = record.target.composed
        corpus.append(TrainingExample(record.image_id, record.original_prompt, target))
        for item in record.pool.items:
            if item.score:
                corpus.append(TrainingExample(record.image_id, item.text, target))
    return corpus


def dump_model(model: NgramModel, path: Union[str, Path]) -> None:
    """Write a model as JSON (order, k, vocabulary and counts)."""
    document = {
        "order": model.order,
        "k": model.k,
        "vocabulary": list(model.vocabulary),
        "counts": [
            {"context": list(context), "next": dict(row)}
            for context, row in model.counts.items()
        ],
    }
    Path(path).write_text(
        json.dumps(document, ensure_ascii=False, sort_keys=True), encoding="utf-8"
    )


def load_model(path: Union[str, Path]) -> NgramModel:
    """Read a model written by :func:`dump_model`."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
        counts = {
            tuple(entry["context"]): {s: int(c) for s, c in entry["next"].items()}
            for entry in document["counts"]
        }
        return NgramModel(
            int(document["order"]),
            float(document["k"]),
            counts,
            tuple(document["vocabulary"]),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise InputError(f"cannot load model from {path}: {e}") from e


@dataclass
class CheckResult:
    """Outcome of one verification check across all records."""

    name: str
    checked: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, ok: bool, record_id: str, detail: str) -> None:
        self.checked += 1
        if not ok:
            self.failures.append(f"{record_id}: {detail}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "checked": self.checked,
            "failures": self.failures,
        }


@dataclass
class OracleVerdict:
    """Verification results for a manifest."""

    records: int
    order: int
    k: float
    checks: Dict[str, CheckResult]
    breakdowns: Dict[str, Dict[str, Any]]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "records": self.records,
            "order": self.order,
            "k": self.k,
            "checks": {name: check.to_dict() for name, check in self.checks.items()},
            "breakdowns": self.breakdowns,
        }


def verify_manifest(
    records: Sequence[ManifestRecord],
    order: int = 4,
    k: float = 0.01,
    draws: int = 20000,
    seed: int = 0,
    tolerance: float = 1e-12,
) -> OracleVerdict:
    """
    Fit the toy model on a manifest and check the composite loss on every record.

    Checks: the total equals base plus lambda times the augmented term; lambda
    0 gives the base loss; the exact augmented term lies between the smallest
    and largest pool loss; exact and Monte-Carlo estimates agree within three
    standard errors; composed targets split back into caption and response.

    Raises:
        InputError: If the manifest is empty
    """
    if not records:
        raise InputError("manifest has no records")
    model = fit(manifest_corpus(records), order, k)
    checks = {
        name: CheckResult(name)
        for name in ("algebra", "lambda_zero", "convexity", "agreement", "roundtrip")
    }
    breakdowns: Dict[str, Dict[str, Any]] = {}
    gap = variance = 0.0

    for record in records:
        rid = record.record_id
        exact = composite_loss(model, record)
        sampled = composite_loss(
            model, record, MonteCarlo(derive_seed(seed, rid, "oracle"), draws)
        )
        breakdowns[rid] = {"exact": exact.to_dict(), "monte_carlo": sampled.to_dict()}

        for breakdown in (exact, sampled):
            expected = breakdown.base + breakdown.lambda_ * breakdown.augmented
            checks["algebra"].record(
                abs(breakdown.total - expected) <= tolerance,
                rid,
                f"{breakdown.mode} total {breakdown.total} != {expected}",
            )

        zero = composite_loss(model, record, lambda_=0.0)
        checks["lambda_zero"].record(
            zero.total == zero.base, rid, f"total {zero.total} != base {zero.base}"
        )

        probabilities = exact_distribution(record.scores)
        if probabilities:
            support = [i for i, p in enumerate(probabilities) if p > 0.0]
            losses = list(_pool_losses(model, record, support).values())
            low, high = min(losses), max(losses)
            checks["convexity"].record(
                low - tolerance <= exact.augmented <= high + tolerance,
                rid,
                f"augmented {exact.augmented} outside [{low}, {high}]",
            )

        gap += sampled.augmented - exact.augmented
        variance += sampled.std_error**2

        target = record.target
        caption = target.caption.text if target.caption else ""
        parts = split_response(target.composed, "known_boundary", target.caption_len)
        checks["roundtrip"].record(
            parts == (caption, target.response),
            rid,
            "composed target does not split back into caption and response",
        )

    # one z-test over the summed estimates keeps the false-alarm rate at 3 sigma
    bound = 3 * math.sqrt(variance) + tolerance * len(records)
    checks["agreement"].record(
        abs(gap) <= bound,
        "manifest",
        f"summed Monte-Carlo gap {gap} exceeds 3 standard errors ({bound})",
    )

    verdict = OracleVerdict(len(records), order, k, checks, breakdowns)
    for check in checks.values():
        log = logger.info if check.passed else logger.warning
        log(
            "oracle check %s: %d checked, %d failed",
            check.name,
            check.checked,
            len(check.failures),
        )
    return verdict
