"""
Dataset building and file IO for augtune.

Loads QA records and caption annotations, runs the augment, score, sample and
compose stages, and reads and writes every JSON-lines artifact. Each file
starts with a header line carrying the run configuration; readers skip it.
"""

import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
    Union,
)

from augtune.config import RunConfig
from augtune.constants import MALFORMED_ABORT_RATIO, ORIGINAL, TOOL_NAME, VERSION
from augtune.errors import DuplicateIdError, InputError, LineError, MalformedInputError
from augtune.primitives.augmenter import (
    AugmentedPrompt,
    PromptGenerator,
    PromptPool,
    augment_prompt,
)
from augtune.primitives.cug import (
    Caption,
    CugTarget,
    compose_target,
    plain_target,
    select_caption,
)
from augtune.primitives.evaluator import Embedder, ScoreCache, ScoreVector, score_pool
from augtune.primitives.sampler import SampleOutcome, sample_prompt
from augtune.types import (
    BinaryLabel,
    CaptionFormat,
    CaptionSource,
    EvalRecordDict,
    HeaderDict,
    Label,
    ManifestRecordDict,
    PolicyKind,
    PromptRecordDict,
)
from augtune.utils import derive_seed, dumps_line
from augtune.workflow import Workflow

logger = logging.getLogger(__name__)

T = TypeVar("T")
PathLike = Union[str, Path]
CaptionIndex = Mapping[str, List[Caption]]

LABELS = ("yes", "no", "open")
REQUIRED_FIELDS = ("id", "image_id", "prompt", "response", "label")


def _require_text(data: Mapping[str, Any], name: str) -> str:
    value = data.get(name)
    if not isinstance(value, str) or not value.strip():
        raise InputError(f"field {name!r} must be a non-empty string")
    return value


@dataclass(frozen=True)
class PromptRecord:
    """One QA item of an instruct-tuning or evaluation set."""

    id: str
    image_id: str
    prompt: str
    response: str
    label: Label
    source: str = ""

    @property
    def is_binary(self) -> bool:
        return self.label != "open"

    def to_dict(self) -> PromptRecordDict:
        return {
            "id": self.id,
            "image_id": self.image_id,
            "prompt": self.prompt,
            "response": self.response,
            "label": self.label,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PromptRecord":
        """
        Validate and build a record from one parsed line.

        Raises:
            InputError: Naming the first missing or invalid field
        """
        for name in REQUIRED_FIELDS:
            if data.get(name) is None:
                raise InputError(f"missing field {name!r}")
        label = str(data["label"]).strip().lower()
        if label not in LABELS:
            raise InputError(f"label must be one of {LABELS}, got {data['label']!r}")
        return cls(
            id=str(data["id"]),
            image_id=str(data["image_id"]),
            prompt=_require_text(data, "prompt"),
            response=_require_text(data, "response"),
            label=label,  # type: ignore[arg-type]
            source=str(data.get("source") or ""),
        )


class LoadedRecords(NamedTuple):
    """Parsed records plus the lines that were skipped."""

    records: List[PromptRecord]
    errors: List[LineError]


def _read_lines(path: PathLike) -> List[Tuple[int, str]]:
    """Non-blank lines of a UTF-8 file with their 1-based numbers."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise InputError(f"cannot read {path}: {e}") from e
    # split on "\n" only: U+2028 may legally appear inside a JSON string
    return [
        (number, line)
        for number, line in enumerate(text.split("\n"), start=1)
        if line.strip()
    ]


def _is_header(data: Any) -> bool:
    return isinstance(data, dict) and data.get("type") == "header"


def load_qa_pairs(path: PathLike) -> LoadedRecords:
    """
    Load QA records from a JSON-lines file.

    Malformed lines are collected with their line numbers and skipped with a
    warning, unless they make up more than 1% of the file.

    Args:
        path: The QA file

    Returns:
        The records and the error report

    Raises:
        InputError: If the file can't be read
        DuplicateIdError: If a record id repeats
        MalformedInputError: If more than 1% of the lines are malformed
    """
    records: List[PromptRecord] = []
    errors: List[LineError] = []
    seen = set()
    total = 0

    for number, line in _read_lines(path):
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            total += 1
            errors.append(LineError(number, f"invalid JSON: {e.msg}"))
            continue
        if _is_header(data):
            continue
        total += 1
        if not isinstance(data, dict):
            errors.append(LineError(number, "not a JSON object"))
            continue
        try:
            record = PromptRecord.from_dict(data)
        except InputError as e:
            errors.append(LineError(number, str(e)))
            continue
        if record.id in seen:
            raise DuplicateIdError(record.id, number)
        seen.add(record.id)
        records.append(record)

    if errors and len(errors) > MALFORMED_ABORT_RATIO * total:
        raise MalformedInputError(str(path), errors, total)
    for error in errors:
        logger.warning("%s:%d: skipped: %s", path, error.line, error.reason)
    logger.info("loaded %d records from %s", len(records), path)
    return LoadedRecords(records, errors)


def _load_coco(path: PathLike, source: CaptionSource) -> Dict[str, List[Caption]]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read captions from {path}: {e}") from e
    if not isinstance(data, dict) or not isinstance(data.get("annotations"), list):
        raise InputError(f"{path}: expected a COCO object with an annotations array")

    index: Dict[str, List[Caption]] = {
        str(image["id"]): [] for image in data.get("images") or [] if "id" in image
    }
    for position, annotation in enumerate(data["annotations"]):
        try:
            caption = Caption(
                image_id=str(annotation["image_id"]),
                text=annotation["caption"],
                source=source,
                annotation_id=annotation.get("id"),
            )
        except (KeyError, TypeError, AttributeError) as e:
            raise InputError(f"{path}: annotation {position} is malformed") from e
        except InputError as e:
            raise InputError(f"{path}: annotation {position}: {e}") from e
        index.setdefault(caption.image_id, []).append(caption)
    return index


def _load_plain(path: PathLike, source: CaptionSource) -> Dict[str, List[Caption]]:
    index: Dict[str, List[Caption]] = {}
    for number, line in _read_lines(path):
        try:
            data = json.loads(line)
            if _is_header(data):
                continue
            caption = Caption(
                image_id=str(data["image_id"]),
                text=data["caption"],
                source=data.get("source") or source,
                annotation_id=data.get("id"),
            )
        except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as e:
            raise InputError(f"{path}:{number}: malformed caption line") from e
        except InputError as e:
            raise InputError(f"{path}:{number}: {e}") from e
        index.setdefault(caption.image_id, []).append(caption)
    return index


def load_captions(
    path: PathLike,
    format: CaptionFormat = "coco_annotations",
    source: CaptionSource = "human",
) -> Dict[str, List[Caption]]:
    """
    Load captions keyed by image id.

    Args:
        path: Caption file
        format: ``coco_annotations`` (``images``/``annotations`` arrays) or
            ``plain_jsonl`` (``{image_id, caption, source}`` lines)
        source: Source tag for captions that don't carry one

    Returns:
        Map of image id to its captions; COCO images without annotations map
        to an empty list

    Raises:
        InputError: On an unknown format, an unreadable file or an empty caption
    """
    if format == "coco_annotations":
        index = _load_coco(path, source)
    elif format == "plain_jsonl":
        index = _load_plain(path, source)
    else:
        raise InputError(f"unknown caption format {format!r}")
    logger.info(
        "loaded %d captions for %d images from %s",
        sum(len(captions) for captions in index.values()),
        len(index),
        path,
    )
    return index


def resolve_captions(
    image_id: str,
    captions: Optional[CaptionIndex],
    machine_captions: Optional[CaptionIndex] = None,
) -> List[Caption]:
    """Human captions of an image if it has any, else its machine captions."""
    human = (captions or {}).get(image_id) or []
    if human:
        return list(human)
    return list((machine_captions or {}).get(image_id) or [])


def record_seed(run_seed: int, record_id: str) -> int:
    """Per-record seed; independent of record order and worker count."""
    return derive_seed(run_seed, record_id)


@dataclass
class BuildSummary:
    """Counts reported at the end of a build."""

    records: int = 0
    items: int = 0
    failed_items: int = 0
    unchanged_items: int = 0
    zero_score_items: int = 0
    unscorable_items: int = 0
    original_fallbacks: int = 0
    skipped_open: int = 0
    eval_records: int = 0

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)

    def log(self, kind: str) -> None:
        logger.info(
            "%s summary: %s",
            kind,
            ", ".join(f"{name}={value}" for name, value in self.to_dict().items()),
        )


@dataclass(frozen=True)
class PoolRecord:
    """
    A record's pool as it moves through the stages.

    ``epsilon`` is set once the pool is scored and ``sampled`` once a prompt
    has been drawn.
    """

    record_id: str
    image_id: str
    pool: PromptPool
    epsilon: Optional[float] = None
    sampled: Optional[SampleOutcome] = None

    @property
    def scored(self) -> bool:
        return self.epsilon is not None

    @property
    def scores(self) -> ScoreVector:
        if self.epsilon is None:
            raise InputError(f"pool of {self.record_id!r} has not been scored")
        return _score_vector(self.pool, self.epsilon)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "record_id": self.record_id,
            "image_id": self.image_id,
            "original_prompt": self.pool.original,
            "seed": self.pool.seed,
            "pool": [item.to_dict() for item in self.pool.items],
            "failed": [policy.value for policy in self.pool.failed],
            "epsilon": self.epsilon,
            "sampled": self.sampled.to_dict() if self.sampled else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PoolRecord":
        record_id = str(data["record_id"])
        pool = _pool_from_dict(
            record_id, data["original_prompt"], data["pool"], data.get("failed", [])
        )
        sampled = data.get("sampled")
        epsilon = data.get("epsilon")
        return cls(
            record_id=record_id,
            image_id=str(data["image_id"]),
            pool=replace(pool, seed=int(data["seed"])),
            epsilon=None if epsilon is None else float(epsilon),
            sampled=SampleOutcome.from_dict(sampled) if sampled else None,
        )


def _score_vector(pool: PromptPool, epsilon: float) -> ScoreVector:
    scores = []
    for item in pool.items:
        if item.score is None:
            raise InputError(f"pool item {item.policy.value!r} has no score")
        scores.append(float(item.score))
    return ScoreVector(tuple(scores), float(epsilon))


def _pool_from_dict(
    record_id: str, original: str, items: Sequence[Any], failed: Sequence[str]
) -> PromptPool:
    return PromptPool(
        original=original,
        items=tuple(AugmentedPrompt.from_dict(item, record_id) for item in items),
        failed=tuple(PolicyKind.parse(name) for name in failed),
    )


def augment_records(
    records: Sequence[PromptRecord],
    config: RunConfig,
    generator: PromptGenerator,
    summary: Optional[BuildSummary] = None,
) -> List[PoolRecord]:
    """Build the prompt pool of every record, in input order."""

    def run(record: PromptRecord) -> PoolRecord:
        pool = augment_prompt(
            record.prompt,
            config.policies,
            generator,
            record_seed(config.seed, record.id),
            parent_id=record.id,
            pool_size=config.pool_size,
        )
        return PoolRecord(record.id, record.image_id, pool)

    results = Workflow(parallelism=config.parallelism).map_ordered(run, records)
    if summary is not None:
        summary.records += len(results)
        for result in results:
            summary.items += len(result.pool)
            summary.failed_items += len(result.pool.failed)
            summary.unchanged_items += sum(
                1 for item in result.pool.items if item.unchanged
            )
    return results


def score_records(
    pool_records: Sequence[PoolRecord],
    config: RunConfig,
    embedder: Embedder,
    cache: Optional[ScoreCache] = None,
    summary: Optional[BuildSummary] = None,
) -> List[PoolRecord]:
    """Score and threshold every pool, in input order."""

    def run(pool_record: PoolRecord) -> Tuple[PoolRecord, int]:
        scored = score_pool(
            pool_record.pool,
            embedder,
            config.epsilon,
            cache=cache,
            use_evaluation=config.use_evaluation,
        )
        updated = replace(pool_record, pool=scored.pool, epsilon=config.epsilon)
        return updated, scored.unscorable

    results = Workflow(parallelism=config.parallelism).map_ordered(run, pool_records)
    if cache is not None:
        cache.save()
    if summary is not None:
        for pool_record, unscorable in results:
            summary.unscorable_items += unscorable
            summary.zero_score_items += pool_record.scores.zero_count
    return [pool_record for pool_record, _ in results]


def sample_records(
    pool_records: Sequence[PoolRecord], summary: Optional[BuildSummary] = None
) -> List[PoolRecord]:
    """Draw the training prompt of every scored pool."""
    sampled = []
    for pool_record in pool_records:
        outcome = sample_prompt(
            pool_record.pool,
            pool_record.scores,
            derive_seed(pool_record.pool.seed, "sample"),
        )
        if outcome.is_original:
            if summary is not None:
                summary.original_fallbacks += 1
            logger.debug(
                "%s: every score is zero, using the original", pool_record.record_id
            )
        sampled.append(replace(pool_record, sampled=outcome))
    return sampled


@dataclass(frozen=True)
class ManifestRecord:
    """One training row: everything the composite loss needs for a record."""

    record_id: str
    image_id: str
    original_prompt: str
    pool: PromptPool
    sampled: SampleOutcome
    target: CugTarget
    epsilon: float
    lambda_: float
    build_seed: int
    caption: Optional[Caption] = None

    def __post_init__(self):
        if not 0.0 <= self.lambda_ <= 1.0:
            raise InputError(f"lambda must lie in [0, 1], got {self.lambda_}")
        if self.sampled.is_original != (self.scores.total == 0.0):
            raise InputError(
                f"{self.record_id}: sampled prompt disagrees with the pool scores"
            )

    @property
    def scores(self) -> ScoreVector:
        return _score_vector(self.pool, self.epsilon)

    def to_dict(self) -> ManifestRecordDict:
        return {
            "record_id": self.record_id,
            "image_id": self.image_id,
            "original_prompt": self.original_prompt,
            "pool": [item.to_dict() for item in self.pool.items],
            "failed": [policy.value for policy in self.pool.failed],
            "sampled": self.sampled.to_dict(),
            "caption": self.caption.to_dict() if self.caption else None,
            "target": self.target.to_dict(),
            "epsilon": self.epsilon,
            "lambda": self.lambda_,
            "build_seed": self.build_seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ManifestRecord":
        record_id = str(data["record_id"])
        build_seed = int(data["build_seed"])
        pool = _pool_from_dict(
            record_id, data["original_prompt"], data["pool"], data.get("failed", [])
        )
        caption = Caption.from_dict(data["caption"]) if data.get("caption") else None
        return cls(
            record_id=record_id,
            image_id=str(data["image_id"]),
            original_prompt=data["original_prompt"],
            pool=replace(pool, seed=record_seed(build_seed, record_id)),
            sampled=SampleOutcome.from_dict(data["sampled"]),
            target=CugTarget.from_dict(data["target"], caption),
            epsilon=float(data["epsilon"]),
            lambda_=float(data["lambda"]),
            build_seed=build_seed,
            caption=caption,
        )


def _empty_pool(record: PromptRecord, config: RunConfig) -> PoolRecord:
    pool = PromptPool(record.prompt, (), seed=record_seed(config.seed, record.id))
    return PoolRecord(record.id, record.image_id, pool, epsilon=config.epsilon)


def build_manifest(
    records: Sequence[PromptRecord],
    captions: Optional[CaptionIndex],
    config: RunConfig,
    generator: PromptGenerator,
    embedder: Embedder,
    machine_captions: Optional[CaptionIndex] = None,
    cache: Optional[ScoreCache] = None,
) -> Tuple[List[ManifestRecord], BuildSummary]:
    """
    Run the full build: augment, score, sample and compose every record.

    Captions are resolved for every record before any generation starts, so a
    missing caption fails the build without spending remote calls. With
    augmentation off every pool is empty and the original prompt is sampled.

    Args:
        records: Input QA records
        captions: Human captions keyed by image id
        config: Run configuration
        generator: Rule-based or remote prompt generator
        embedder: Fallback or remote embedder
        machine_captions: Fallback captions keyed by image id
        cache: Optional raw score cache

    Returns:
        One ManifestRecord per input record, in input order, and the summary

    Raises:
        MissingCaptionError: If a record's image has no caption
        GenerationError: If remote augmentation fails after retries
        EmbeddingError: If remote embedding fails after retries
    """
    chosen: Dict[str, Caption] = {}
    if config.use_captions:
        for record in records:
            chosen[record.id] = select_caption(
                resolve_captions(record.image_id, captions, machine_captions),
                config.caption_strategy,
                derive_seed(record_seed(config.seed, record.id), "caption"),
                record.image_id,
            )

    summary = BuildSummary()
    if config.use_augmentation:
        pools = augment_records(records, config, generator, summary)
        pools = score_records(pools, config, embedder, cache, summary)
    else:
        pools = [_empty_pool(record, config) for record in records]
        summary.records += len(pools)
    pools = sample_records(pools, summary)

    manifest = []
    for record, pool_record in zip(records, pools):
        caption = chosen.get(record.id)
        target = (
            compose_target(caption, record.response)
            if caption is not None
            else plain_target(record.response)
        )
        manifest.append(
            ManifestRecord(
                record_id=record.id,
                image_id=record.image_id,
                original_prompt=record.prompt,
                pool=pool_record.pool,
                sampled=pool_record.sampled,
                target=target,
                epsilon=config.epsilon,
                lambda_=config.lambda_,
                build_seed=config.seed,
                caption=caption,
            )
        )
    summary.log("build")
    return manifest, summary


@dataclass(frozen=True)
class EvalRecord:
    """One prompt of an evaluation set, tagged with its policy or ``original``."""

    record_id: str
    policy: str
    prompt_shown: str
    gt_label: BinaryLabel
    model_response: str = ""

    def __post_init__(self):
        if self.policy != ORIGINAL:
            object.__setattr__(self, "policy", PolicyKind.parse(self.policy).value)
        if self.gt_label not in ("yes", "no"):
            raise InputError(f"gt_label must be yes or no, got {self.gt_label!r}")

    @property
    def is_original(self) -> bool:
        return self.policy == ORIGINAL

    def with_response(self, response: str) -> "EvalRecord":
        return replace(self, model_response=response)

    def to_dict(self) -> EvalRecordDict:
        return {
            "record_id": self.record_id,
            "policy": self.policy,
            "prompt_shown": self.prompt_shown,
            "gt_label": self.gt_label,
            "model_response": self.model_response,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EvalRecord":
        return cls(
            record_id=str(data["record_id"]),
            policy=data["policy"],
            prompt_shown=data["prompt_shown"],
            gt_label=str(data["gt_label"]).lower(),  # type: ignore[arg-type]
            model_response=data.get("model_response") or "",
        )


def passes_threshold(score: Optional[float], epsilon: float) -> bool:
    """Whether an augmented item makes it into the evaluation set."""
    if epsilon == 0.0:
        return True
    return score is not None and score > 0.0 and score >= epsilon


def build_augmented_testset(
    records: Sequence[PromptRecord],
    config: RunConfig,
    generator: PromptGenerator,
    embedder: Embedder,
    cache: Optional[ScoreCache] = None,
) -> Tuple[List[EvalRecord], BuildSummary]:
    """
    Build the augmented evaluation set.

    Every binary record contributes its original prompt plus each augmented
    prompt that passes the threshold; ``open`` records are skipped.

    Returns:
        The evaluation records, grouped by input record in input order, and
        the summary

    Raises:
        GenerationError: If remote augmentation fails after retries
        EmbeddingError: If remote embedding fails after retries
    """
    summary = BuildSummary()
    binary = [record for record in records if record.is_binary]
    summary.skipped_open = len(records) - len(binary)

    pools = augment_records(binary, config, generator, summary)
    pools = score_records(pools, config, embedder, cache, summary)

    testset: List[EvalRecord] = []
    for record, pool_record in zip(binary, pools):
        label: BinaryLabel = record.label  # type: ignore[assignment]
        testset.append(EvalRecord(record.id, ORIGINAL, record.prompt, label))
        for item in pool_record.pool.items:
            if passes_threshold(item.score, config.epsilon):
                testset.append(
                    EvalRecord(record.id, item.policy.value, item.text, label)
                )
    summary.eval_records = len(testset)
    summary.log("testset")
    return testset, summary


def make_header(kind: str, config: Optional[RunConfig] = None) -> HeaderDict:
    return {
        "type": "header",
        "tool": TOOL_NAME,
        "version": VERSION,
        "kind": kind,
        "config": config.to_header() if config else {},
    }


def write_jsonl(
    path: PathLike,
    kind: str,
    rows: Iterable[Mapping[str, Any]],
    config: Optional[RunConfig] = None,
) -> int:
    """
    Write a header line followed by one JSON object per line.

    Returns:
        Number of rows written, header excluded
    """
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(dumps_line(dict(make_header(kind, config))) + "\n")
        for row in rows:
            handle.write(dumps_line(dict(row)) + "\n")
            count += 1
    logger.info("wrote %d %s rows to %s", count, kind, path)
    return count


def read_jsonl(
    path: PathLike,
) -> Tuple[Optional[HeaderDict], List[Tuple[int, Dict[str, Any]]]]:
    """
    Read a JSON-lines file written by augtune.

    Returns:
        The header (if any) and every other row with its line number

    Raises:
        InputError: If the file can't be read or a line isn't a JSON object
    """
    header: Optional[HeaderDict] = None
    rows: List[Tuple[int, Dict[str, Any]]] = []
    for number, line in _read_lines(path):
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            raise InputError(f"{path}:{number}: invalid JSON: {e.msg}") from e
        if not isinstance(data, dict):
            raise InputError(f"{path}:{number}: not a JSON object")
        if _is_header(data):
            header = data  # type: ignore[assignment]
            continue
        rows.append((number, data))
    return header, rows


def _parse_rows(
    path: PathLike, parse: Callable[[Dict[str, Any]], T]
) -> List[T]:
    _, rows = read_jsonl(path)
    parsed = []
    for number, data in rows:
        try:
            parsed.append(parse(data))
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{path}:{number}: malformed row: {e}") from e
    return parsed


def write_manifest(
    path: PathLike, records: Iterable[ManifestRecord], config: Optional[RunConfig]
) -> int:
    return write_jsonl(path, "manifest", (r.to_dict() for r in records), config)


def read_manifest(path: PathLike) -> List[ManifestRecord]:
    return _parse_rows(path, ManifestRecord.from_dict)


def write_pool_records(
    path: PathLike, records: Iterable[PoolRecord], config: Optional[RunConfig]
) -> int:
    return write_jsonl(path, "pools", (r.to_dict() for r in records), config)


def read_pool_records(path: PathLike) -> List[PoolRecord]:
    return _parse_rows(path, PoolRecord.from_dict)


def write_eval_records(
    path: PathLike, records: Iterable[EvalRecord], config: Optional[RunConfig]
) -> int:
    return write_jsonl(path, "eval", (r.to_dict() for r in records), config)


def read_eval_records(path: PathLike) -> List[EvalRecord]:
    return _parse_rows(path, EvalRecord.from_dict)
