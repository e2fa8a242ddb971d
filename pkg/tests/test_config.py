"""
Tests for run configuration and pipeline wiring.
"""

import pytest

from augtune.config import RunConfig
from augtune.errors import ConfigError
from augtune.pipeline import Pipeline, make_embedder, make_generator, make_responder
from augtune.primitives.augmenter import ChatCompletionGenerator, RuleBasedGenerator
from augtune.primitives.evaluator import HashingEmbedder, RemoteEmbedder
from augtune.types import PolicyKind


class TestRunConfig:
    """Test validation and header echo of RunConfig."""

    def test_defaults(self):
        config = RunConfig().validate()
        assert config.epsilon == 0.5
        assert config.lambda_ == 0.5
        assert config.pool_size == 7
        assert config.seed == 0
        assert len(config.policies) == 7

    @pytest.mark.parametrize(
        "overrides",
        [
            {"epsilon": 1.5},
            {"lambda_": -0.1},
            {"pool_size": 0},
            {"policies": ()},
            {"parallelism": 0},
            {"max_retries": -1},
            {"oracle_order": 0},
            {"oracle_k": 0.0},
            {"oracle_draws": 0},
            {"generator": "remote", "generator_model": "m"},
            {"embedder": "remote", "embedder_base_url": "https://e.test"},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ConfigError):
            RunConfig(**overrides).validate()

    def test_header_leaves_out_secrets_and_output(self):
        config = RunConfig(
            command="build",
            output_path="/tmp/out.jsonl",
            api_key_env="SECRET_KEY",
            policies=(PolicyKind.HARD, PolicyKind.SPELL),
        )
        header = config.to_header()

        assert "output_path" not in header
        assert "api_key_env" not in header
        assert "lambda_" not in header
        assert header["lambda"] == 0.5
        assert header["policies"] == ["hard", "spell"]
        assert header["command"] == "build"

    def test_header_lists_input_files(self):
        config = RunConfig(command="report", eval_paths=("a.jsonl", "b.jsonl"))
        header = config.to_header()
        assert header["eval_paths"] == ["a.jsonl", "b.jsonl"]
        assert header["use_augmentation"] is True

    def test_retry_config(self):
        assert RunConfig(max_retries=0).retry_config() is None
        assert RunConfig(max_retries=2, retry_delay_ms=10).retry_config() == {
            "limit": 2,
            "delay": 10,
            "backoff": "exponential",
        }

    def test_api_key_from_environment(self, monkeypatch):
        monkeypatch.setenv("MY_KEY", "secret")
        assert RunConfig(api_key_env="MY_KEY").api_key() == "secret"
        monkeypatch.delenv("MY_KEY")
        assert RunConfig(api_key_env="MY_KEY").api_key() == ""


class TestPipelineWiring:
    """Test the factories behind Pipeline."""

    def test_offline_defaults(self):
        config = RunConfig()
        assert isinstance(make_generator(config), RuleBasedGenerator)
        assert isinstance(make_embedder(config), HashingEmbedder)

    def test_remote_clients(self, monkeypatch, base_url):
        monkeypatch.setenv("AUGTUNE_API_KEY", "test-api-key")
        config = RunConfig(
            generator="remote",
            generator_base_url=base_url,
            generator_model="gen-model",
            embedder="remote",
            embedder_base_url=base_url,
            embedder_model="embed-model",
            max_retries=2,
        ).validate()

        generator = make_generator(config)
        assert isinstance(generator, ChatCompletionGenerator)
        assert generator.client.model == "gen-model"
        assert generator.client.request.api_key == "test-api-key"
        assert generator.client.workflow.retries["limit"] == 2
        assert generator.parallelism == 1

        embedder = make_embedder(config)
        assert isinstance(embedder, RemoteEmbedder)
        assert embedder.embedder_id == f"remote:{base_url}:embed-model"

    def test_responder_needs_endpoint(self):
        with pytest.raises(ConfigError):
            make_responder(RunConfig())

    def test_pipeline_validates_config(self):
        config = RunConfig(generator="remote")
        with pytest.raises(ConfigError):
            Pipeline(config)

    def test_pipeline_runs_offline(self, qa_file, coco_file):
        config = RunConfig(
            qa_path=str(qa_file), captions_path=str(coco_file), parallelism=1
        )
        pipeline = Pipeline(config)
        records = pipeline.load_records()
        manifest, summary = pipeline.build(records)

        assert len(manifest) == 4
        assert summary.records == 4
        assert pipeline.cache is None

    def test_missing_qa_path(self):
        with pytest.raises(ConfigError):
            Pipeline(RunConfig()).load_records()

    def test_score_cache(self, tmp_path, qa_file):
        cache_path = tmp_path / "scores.json"
        config = RunConfig(
            qa_path=str(qa_file), score_cache_path=str(cache_path), parallelism=1
        )
        pipeline = Pipeline(config)
        pipeline.testset(pipeline.load_records())

        assert cache_path.exists()
        assert 0 < len(Pipeline(config).cache) <= 21
