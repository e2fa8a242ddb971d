"""
Prompt evaluation for augtune.

Scores every augmented prompt by the dot product of its unit-norm embedding
with the original prompt's, then zeroes scores below the threshold.
"""

import json
import logging
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from typing_extensions import Protocol, runtime_checkable

from augtune.constants import (
    EMBEDDINGS_ENDPOINT,
    FALLBACK_DIMENSION,
    FALLBACK_EMBEDDER_ID,
)
from augtune.errors import APIError, EmbeddingError, InputError
from augtune.primitives.augmenter import PromptPool
from augtune.request import Request
from augtune.types import EmbeddingRequest
from augtune.utils import fnv1a_64, text_digest
from augtune.workflow import Workflow

logger = logging.getLogger(__name__)

TOKEN_PATTERN = re.compile(r"[^\W_]+")


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A unit-length embedding. Values are normalized and frozen at construction."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        if values.size == 0 or not np.all(np.isfinite(values)):
            raise InputError("embedding must be a non-empty finite vector")
        norm = np.linalg.norm(values)
        if norm == 0.0:
            raise InputError("cannot normalize a zero embedding")
        values = values / norm
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.values.tobytes())


@runtime_checkable
class Embedder(Protocol):
    """Anything that turns texts into unit-norm vectors, one per text."""

    embedder_id: str

    def embed_many(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        ...


def tokenize(text: str) -> List[str]:
    """Lowercased alphanumeric tokens of ``text``."""
    return TOKEN_PATTERN.findall(text.lower())


class HashingEmbedder:
    """
    Offline embedder: hashed bag-of-words term frequencies.

    Each token is hashed with 64-bit FNV-1a over its UTF-8 bytes and counted in
    bucket ``hash % dimension``; the count vector is then L2-normalized.
    """

    embedder_id = FALLBACK_EMBEDDER_ID

    def __init__(self, dimension: int = FALLBACK_DIMENSION):
        if dimension < 1:
            raise InputError(f"dimension must be positive, got {dimension}")
        self.dimension = dimension
        if dimension != FALLBACK_DIMENSION:
            self.embedder_id = f"hashed-tf-fnv1a64-{dimension}"

    def bucket(self, token: str) -> int:
        return fnv1a_64(token.encode("utf-8")) % self.dimension

    def embed_one(self, text: str) -> EmbeddingVector:
        tokens = tokenize(text)
        if not tokens:
            raise InputError(f"text has no alphanumeric tokens: {text!r}")
        counts = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            counts[self.bucket(token)] += 1.0
        return EmbeddingVector(counts)

    def embed_many(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        return [self.embed_one(text) for text in texts]


class RemoteEmbedder:
    """Client for an OpenAI-compatible ``/embeddings`` endpoint."""

    def __init__(
        self, request: Request, model: str, workflow: Optional[Workflow] = None
    ):
        """
        Initialize the remote embedder.

        Args:
            request: Transport bound to the endpoint's base URL
            model: Embedding model name
            workflow: Retry policy holder; a no-retry workflow when omitted
        """
        self.request = request
        self.model = model
        self.workflow = workflow or Workflow()
        self.embedder_id = f"remote:{request.base_url}:{model}"

    @property
    def parallelism(self) -> int:
        return self.workflow.parallelism

    def embed_many(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        """
        Embed a batch of texts in one request.

        Raises:
            EmbeddingError: If the endpoint keeps failing or the answer holds
                the wrong number of vectors or a zero vector
        """
        if not texts:
            return []
        body: EmbeddingRequest = {"model": self.model, "input": list(texts)}
        try:
            response = self.workflow.step(
                {
                    "id": "embed",
                    "retries": None,
                    "run": lambda: self.request.post(EMBEDDINGS_ENDPOINT, body),
                }
            )
        except APIError as e:
            raise EmbeddingError(f"embedding request failed: {e}") from e

        raw = parse_embedding_response(response, len(texts))
        try:
            return [EmbeddingVector(values) for values in raw]
        except InputError as e:
            raise EmbeddingError(f"unusable embedding: {e}") from e


def parse_embedding_response(response: Any, expected: int) -> List[List[float]]:
    """
    Extract the vectors from an embeddings response, in input order.

    Accepts the ``{"data": [{"embedding": [...], "index": i}, ...]}`` shape and
    a bare list of vectors.

    Raises:
        EmbeddingError: If the response is malformed or has the wrong length
    """
    try:
        if isinstance(response, dict):
            data = sorted(response["data"], key=lambda item: item.get("index", 0))
            vectors = [item["embedding"] for item in data]
        else:
            vectors = list(response)
    except (KeyError, TypeError, AttributeError) as e:
        raise EmbeddingError("malformed embeddings response") from e
    if len(vectors) != expected:
        raise EmbeddingError(f"expected {expected} embeddings, got {len(vectors)}")
    return vectors


def embed(text: str, embedder: Embedder) -> EmbeddingVector:
    """
    Embed one text.

    Args:
        text: Text to embed
        embedder: Fallback or remote embedder

    Returns:
        The unit-norm embedding

    Raises:
        InputError: If the text is empty after trimming
        EmbeddingError: If the remote embedder fails
    """
    if not text or not text.strip():
        raise InputError("cannot embed empty text")
    return embedder.embed_many([text])[0]


def similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Dot product of two embeddings of the same dimension."""
    if a.dimension != b.dimension:
        raise InputError(f"dimension mismatch: {a.dimension} vs {b.dimension}")
    return float(np.dot(a.values, b.values))


@dataclass(frozen=True)
class ScoreVector:
    """Thresholded scores aligned with a pool: every entry is 0 or in [epsilon, 1]."""

    scores: Tuple[float, ...]
    epsilon: float

    def __post_init__(self):
        for value in self.scores:
            if value != 0.0 and not self.epsilon <= value <= 1.0:
                raise InputError(
                    f"score {value} is neither 0 nor within [{self.epsilon}, 1]"
                )

    def __len__(self) -> int:
        return len(self.scores)

    def __iter__(self) -> Iterator[float]:
        return iter(self.scores)

    def __getitem__(self, index: int) -> float:
        return self.scores[index]

    @property
    def total(self) -> float:
        return float(sum(self.scores))

    @property
    def zero_count(self) -> int:
        return sum(1 for value in self.scores if value == 0.0)


def threshold_scores(raw: Sequence[float], epsilon: float) -> ScoreVector:
    """
    Zero every raw score below ``epsilon``; keep the others unchanged.

    Values above 1 (floating-point overshoot of a unit dot product) are clamped
    to 1.

    Args:
        raw: Raw similarity scores
        epsilon: Threshold in [0, 1]

    Returns:
        The thresholded ScoreVector

    Raises:
        InputError: If epsilon is outside [0, 1]
    """
    if not 0.0 <= epsilon <= 1.0:
        raise InputError(f"epsilon must lie in [0, 1], got {epsilon}")
    scores = []
    for value in raw:
        value = float(value)
        if np.isnan(value) or value < epsilon:
            scores.append(0.0)
        else:
            scores.append(min(value, 1.0))
    return ScoreVector(tuple(scores), float(epsilon))


class ScoreCache:
    """
    On-disk cache of raw scores keyed by embedder id and the two texts' digests.

    Safe to share between worker threads; call :meth:`save` to persist.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: Dict[str, float] = {}
        self._dirty = False
        if self.path.exists():
            try:
                self._entries = json.loads(self.path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as e:
                raise InputError(f"cannot read score cache {self.path}: {e}") from e
            logger.debug("loaded %d cached scores from %s", len(self), self.path)

    def __len__(self) -> int:
        return len(self._entries)

    @staticmethod
    def key(embedder_id: str, original: str, augmented: str) -> str:
        return f"{embedder_id}:{text_digest(original)}:{text_digest(augmented)}"

    def get(self, embedder_id: str, original: str, augmented: str) -> Optional[float]:
        with self._lock:
            return self._entries.get(self.key(embedder_id, original, augmented))

    def put(self, embedder_id: str, original: str, augmented: str, score: float):
        with self._lock:
            self._entries[self.key(embedder_id, original, augmented)] = score
            self._dirty = True

    def save(self) -> None:
        with self._lock:
            if not self._dirty:
                return
            self.path.write_text(
                json.dumps(self._entries, sort_keys=True, indent=0), encoding="utf-8"
            )
            self._dirty = False


@dataclass(frozen=True)
class PoolScores:
    """A pool carrying its raw and thresholded scores."""

    pool: PromptPool
    scores: ScoreVector
    unscorable: int = 0


def _embed_each(
    texts: Sequence[str], embedder: Embedder
) -> List[Optional[EmbeddingVector]]:
    """Embed texts one by one, leaving ``None`` for texts that can't be embedded."""
    vectors: List[Optional[EmbeddingVector]] = []
    for text in texts:
        try:
            vectors.append(embed(text, embedder))
        except InputError as e:
            logger.debug("unscorable text %r: %s", text, e)
            vectors.append(None)
    return vectors


def _raw_scores(
    pool: PromptPool, embedder: Embedder, cache: Optional[ScoreCache]
) -> List[Optional[float]]:
    raw: List[Optional[float]] = [None] * len(pool)
    if cache is not None:
        raw = [cache.get(embedder.embedder_id, pool.original, t) for t in pool.texts]
    missing = [i for i, value in enumerate(raw) if value is None]
    if not missing:
        return raw

    texts = [pool.original] + [pool.items[i].text for i in missing]
    try:
        vectors: List[Optional[EmbeddingVector]] = list(embedder.embed_many(texts))
    except InputError:
        vectors = _embed_each(texts, embedder)

    original, rest = vectors[0], vectors[1:]
    for i, vector in zip(missing, rest):
        if original is None or vector is None:
            continue
        raw[i] = similarity(original, vector)
        if cache is not None:
            cache.put(embedder.embedder_id, pool.original, pool.items[i].text, raw[i])
    return raw


def score_pool(
    pool: PromptPool,
    embedder: Embedder,
    epsilon: float,
    cache: Optional[ScoreCache] = None,
    use_evaluation: bool = True,
) -> PoolScores:
    """
    Score every pool item against the original prompt and threshold the scores.

    Items that can't be embedded (no alphanumeric tokens) get raw score 0 and
    are counted as unscorable. With ``use_evaluation`` off, every item gets raw
    score 1, so sampling is uniform over the pool.

    Args:
        pool: The pool to score
        embedder: Fallback or remote embedder
        epsilon: Threshold in [0, 1]
        cache: Optional raw score cache
        use_evaluation: Whether to run the embedding filter at all

    Returns:
        The pool with scores attached, its ScoreVector and the unscorable count

    Raises:
        EmbeddingError: If the remote embedder fails
    """
    if not use_evaluation:
        raw: List[Optional[float]] = [1.0] * len(pool)
    elif len(pool) == 0:
        raw = []
    else:
        raw = _raw_scores(pool, embedder, cache)

    unscorable = sum(1 for value in raw if value is None)
    values = [0.0 if value is None else value for value in raw]
    scores = threshold_scores(values, epsilon)
    return PoolScores(pool.with_scores(values, scores.scores), scores, unscorable)
