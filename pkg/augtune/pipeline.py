"""
Main entry point of augtune.

The Pipeline class wires a RunConfig to its generator, embedder and responder
and exposes every stage of a run.
"""

import logging
from typing import Dict, List, Optional, Tuple

from .config import RunConfig
from .errors import ConfigError
from .primitives.augmenter import (
    ChatCompletionGenerator,
    PromptGenerator,
    RuleBasedGenerator,
    load_policy_templates,
)
from .primitives.chat import ChatClient
from .primitives.cug import Caption
from .primitives.dataset import (
    BuildSummary,
    EvalRecord,
    ManifestRecord,
    PoolRecord,
    PromptRecord,
    augment_records,
    build_augmented_testset,
    build_manifest,
    load_captions,
    load_qa_pairs,
    sample_records,
    score_records,
)
from .primitives.evaluator import Embedder, HashingEmbedder, RemoteEmbedder, ScoreCache
from .primitives.metrics import ChatResponder, fill_responses
from .request import Request
from .workflow import Workflow

logger = logging.getLogger(__name__)

CaptionIndex = Dict[str, List[Caption]]


def _request(config: RunConfig, base_url: Optional[str]) -> Request:
    return Request(
        {
            "api_key": config.api_key(),
            "base_url": base_url,
            "timeout": config.request_timeout,
        }
    )


def _chat_client(
    config: RunConfig, base_url: Optional[str], model: Optional[str]
) -> ChatClient:
    # Records are the unit of concurrency, so clients issue calls one at a time
    return ChatClient(
        _request(config, base_url),
        model or "",
        temperature=config.temperature,
        workflow=Workflow(retries=config.retry_config()),
    )


def make_generator(config: RunConfig) -> PromptGenerator:
    """The prompt generator selected by ``config.generator``."""
    if config.generator == "rule_based":
        return RuleBasedGenerator()
    if config.generator == "remote":
        client = _chat_client(
            config, config.generator_base_url, config.generator_model
        )
        templates = load_policy_templates(config.templates_path)
        return ChatCompletionGenerator(client, templates)
    raise ConfigError(f"unknown generator {config.generator!r}")


def make_embedder(config: RunConfig) -> Embedder:
    """The embedder selected by ``config.embedder``."""
    if config.embedder == "fallback":
        return HashingEmbedder()
    if config.embedder == "remote":
        return RemoteEmbedder(
            _request(config, config.embedder_base_url),
            config.embedder_model or "",
            Workflow(retries=config.retry_config()),
        )
    raise ConfigError(f"unknown embedder {config.embedder!r}")


def make_responder(config: RunConfig) -> ChatResponder:
    """Chat responder used to fill evaluation sets."""
    if not (config.responder_base_url and config.responder_model):
        raise ConfigError("filling responses needs --base-url and --model")
    client = _chat_client(config, config.responder_base_url, config.responder_model)
    return ChatResponder(client)


class Pipeline:
    """
    A configured augtune run.

    Generator and embedder are created on first use, so stages that don't need
    them never touch remote configuration.
    """

    def __init__(self, config: RunConfig):
        """
        Initialize the pipeline.

        Args:
            config: Run configuration; validated here

        Raises:
            ConfigError: If the configuration is inconsistent
        """
        self.config = config.validate()
        self._generator: Optional[PromptGenerator] = None
        self._embedder: Optional[Embedder] = None
        self.cache = (
            ScoreCache(config.score_cache_path) if config.score_cache_path else None
        )

    @property
    def generator(self) -> PromptGenerator:
        if self._generator is None:
            self._generator = make_generator(self.config)
        return self._generator

    @property
    def embedder(self) -> Embedder:
        if self._embedder is None:
            self._embedder = make_embedder(self.config)
        return self._embedder

    def load_records(self) -> List[PromptRecord]:
        if not self.config.qa_path:
            raise ConfigError("no QA file given (--qa)")
        return load_qa_pairs(self.config.qa_path).records

    def load_caption_sources(
        self,
    ) -> Tuple[Optional[CaptionIndex], Optional[CaptionIndex]]:
        """Human and machine caption indexes named by the configuration."""
        config = self.config
        captions = machine = None
        if config.captions_path:
            captions = load_captions(config.captions_path, config.captions_format)
        if config.machine_captions_path:
            machine = load_captions(
                config.machine_captions_path, "plain_jsonl", source="machine"
            )
        if config.use_captions and captions is None and machine is None:
            raise ConfigError(
                "captions are on but neither --captions nor --machine-captions is given"
            )
        return captions, machine

    def augment(
        self, records: List[PromptRecord], summary: Optional[BuildSummary] = None
    ) -> List[PoolRecord]:
        return augment_records(records, self.config, self.generator, summary)

    def score(
        self, pool_records: List[PoolRecord], summary: Optional[BuildSummary] = None
    ) -> List[PoolRecord]:
        return score_records(
            pool_records, self.config, self.embedder, self.cache, summary
        )

    def sample(
        self, pool_records: List[PoolRecord], summary: Optional[BuildSummary] = None
    ) -> List[PoolRecord]:
        return sample_records(pool_records, summary)

    def build(
        self, records: List[PromptRecord]
    ) -> Tuple[List[ManifestRecord], BuildSummary]:
        captions, machine = (
            self.load_caption_sources() if self.config.use_captions else (None, None)
        )
        return build_manifest(
            records,
            captions,
            self.config,
            self.generator,
            self.embedder,
            machine_captions=machine,
            cache=self.cache,
        )

    def testset(
        self, records: List[PromptRecord]
    ) -> Tuple[List[EvalRecord], BuildSummary]:
        return build_augmented_testset(
            records, self.config, self.generator, self.embedder, cache=self.cache
        )

    def fill(self, records: List[EvalRecord]) -> List[EvalRecord]:
        responder = make_responder(self.config)
        return fill_responses(records, responder, self.config.parallelism)
