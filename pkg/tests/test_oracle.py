"""
Tests for the character n-gram oracle and the composite loss.
"""

import math

import numpy as np
import pytest

from augtune.config import RunConfig
from augtune.constants import UNKNOWN_SYMBOL
from augtune.errors import InputError
from augtune.primitives.cug import Caption, compose_target
from augtune.primitives.dataset import PromptRecord, build_manifest
from augtune.primitives.oracle import (
    MonteCarlo,
    composite_loss,
    dump_model,
    fit,
    generate,
    load_model,
    manifest_corpus,
    sequence_nll,
    verify_manifest,
)
from tests.test_dataset import OrthogonalEmbedder

CAT_PROMPT = "Is there a cat?"
NOUNS = ["dog", "cat", "man", "kite", "umbrella", "car", "balloon", "bench"]
PLACES = ["in the image", "on the grass", "near the car", ""]


def random_manifest(rng, generator, embedder):
    """A small manifest with random prompts, captions, seed, epsilon and lambda."""
    records, captions = [], {}
    for i in range(int(rng.integers(1, 4))):
        image_id = str(rng.integers(100, 104))
        noun, place = rng.choice(NOUNS), rng.choice(PLACES)
        answer = "yes" if rng.random() < 0.5 else "no"
        records.append(
            PromptRecord(
                id=f"r{i}",
                image_id=image_id,
                prompt=f"Is there a {noun} {place}".strip() + "?",
                response=f"{answer.capitalize()}, it is a {rng.choice(NOUNS)}.",
                label=answer,
            )
        )
        captions[image_id] = [Caption(image_id, f"A {rng.choice(NOUNS)} {place}")]
    config = RunConfig(
        seed=int(rng.integers(1000)),
        epsilon=float(rng.uniform(0.0, 0.6)),
        lambda_=float(rng.uniform(0.0, 1.0)),
        parallelism=1,
    ).validate()
    manifest, _ = build_manifest(records, captions, config, generator, embedder)
    return manifest


@pytest.fixture
def manifest(qa_records, caption_index, run_config, generator, embedder):
    records, _ = build_manifest(
        qa_records, caption_index, run_config, generator, embedder
    )
    return records


@pytest.fixture
def model(manifest):
    return fit(manifest_corpus(manifest), order=4, k=0.01)


class TestFit:
    """Test fitting the n-gram model."""

    def test_single_pair_is_reproduced(self):
        model = fit([("7", "Is it?", "Yes")], order=2)
        assert generate(model, "7", "Is it?") == "Yes"

    def test_deterministic(self):
        corpus = [("1", CAT_PROMPT, "A cat. Yes"), ("2", CAT_PROMPT, "A dog. No")]
        assert fit(corpus, order=3) == fit(list(reversed(corpus)), order=3)

    def test_unseen_context_is_uniform(self):
        model = fit([("1", "xyz", "abc")], order=4, k=1.0)
        distribution = model.distribution(("q", "q", "q"))
        assert set(distribution.values()) == {1 / len(model.vocabulary)}

    def test_distributions_sum_to_one(self, model):
        for context in model.counts:
            assert math.fsum(model.distribution(context).values()) == pytest.approx(
                1.0, abs=1e-9
            )

    def test_composed_targets(self):
        target = compose_target(Caption("1", "A dog."), "Yes.")
        model = fit([("1", "Is it?", target)], order=3)
        assert "A" in model.vocabulary
        assert generate(model, "1", "Is it?") == "A dog. Yes."

    def test_invalid(self):
        with pytest.raises(InputError):
            fit([("1", "Is it?", "Yes")], order=0)
        with pytest.raises(InputError):
            fit([], order=2)
        with pytest.raises(InputError):
            fit([("1", "Is it?", "Yes")], order=2, k=0.0)


class TestSequenceNll:
    """Test per-character negative log-likelihoods."""

    def test_memorized_sequence(self):
        model = fit([("1", "Is it?", "Yes, it is.")], order=4, k=1e-12)
        assert sequence_nll(model, "1", "Is it?", "Yes, it is.") == pytest.approx(
            0.0, abs=1e-6
        )

    def test_uniform_model(self):
        model = fit([("1", "xyz", "abc")], order=4, k=1.0)
        nll = sequence_nll(model, "9", "qqq", "cba")
        assert nll == pytest.approx(math.log(len(model.vocabulary)), rel=1e-12)

    def test_hand_counted_chain(self):
        # contexts: start -> a (2), a -> b (1), a -> c (1), b -> end (1)
        # vocabulary a, b, c, end, unknown
        model = fit([("1", "P", "ab"), ("1", "P", "ac")], order=2, k=1.0)
        p1, p2, p3 = 3 / 7, 2 / 7, 1 / 6
        expected = -(math.log(p1) + math.log(p2) + math.log(p3)) / 3
        assert sequence_nll(model, "1", "P", "abc") == pytest.approx(expected)

    def test_composed_target_scores_caption_first(self):
        target = compose_target(Caption("1", "A dog."), "Yes.")
        model = fit([("1", "Is it?", target)], order=3, k=0.5)
        assert sequence_nll(model, "1", "Is it?", target) == sequence_nll(
            model, "1", "Is it?", "A dog. Yes."
        )

    def test_empty_target(self):
        model = fit([("1", "Is it?", "Yes")], order=2)
        with pytest.raises(InputError):
            sequence_nll(model, "1", "Is it?", "")

    def test_unseen_characters_get_smoothing_mass(self):
        model = fit([("1", "Is there a dog?", "A dog. Yes")], order=3, k=1.0)
        assert UNKNOWN_SYMBOL in model.vocabulary

        nll = sequence_nll(model, "1", "Is there a dog?", "A cat. No")
        assert math.isfinite(nll)
        assert nll > sequence_nll(model, "1", "Is there a dog?", "A dog. Yes")
        # every unseen character is scored as the unknown symbol
        unseen = [sequence_nll(model, "1", "P", text) for text in ("zq", "xw")]
        assert unseen[0] == unseen[1]

    def test_loaded_model_scores_new_targets(self, tmp_path):
        path = tmp_path / "model.json"
        dump_model(fit([("1", "Is it?", "Yes")], order=2), path)
        assert math.isfinite(sequence_nll(load_model(path), "1", "Is it?", "Zzz"))


class TestCaptionConditioning:
    """Caption prefixes steer the answer of a model trained on composed targets."""

    def test_caption_prefix_decides_the_answer(self):
        corpus = [
            ("img1", CAT_PROMPT, "A cat. Yes"),
            ("img2", CAT_PROMPT, "A dog. No"),
            ("img3", CAT_PROMPT, "A dog. No"),
        ]
        model = fit(corpus, order=4, k=0.01)

        assert generate(model, "img1", CAT_PROMPT, prefix="A cat. ") == "A cat. Yes"
        assert generate(model, "img1", CAT_PROMPT) == "A dog. No"

    def test_plain_targets_answer_the_majority(self):
        corpus = [
            ("img1", CAT_PROMPT, "Yes"),
            ("img2", CAT_PROMPT, "No"),
            ("img3", CAT_PROMPT, "No"),
        ]
        model = fit(corpus, order=4, k=0.01)
        assert generate(model, "img1", CAT_PROMPT) == "No"


class TestCompositeLoss:
    """Test the base plus weighted augmented loss."""

    def test_total(self, model, manifest):
        for record in manifest:
            loss = composite_loss(model, record)
            assert loss.mode == "exact"
            assert loss.lambda_ == 0.5
            assert loss.total == pytest.approx(
                loss.base + 0.5 * loss.augmented, abs=1e-12
            )

    def test_lambda_zero(self, model, manifest):
        for record in manifest:
            loss = composite_loss(model, record, lambda_=0.0)
            assert loss.total == loss.base

    def test_all_zero_scores_use_the_original(
        self, qa_records, caption_index, run_config, generator
    ):
        manifest, _ = build_manifest(
            qa_records, caption_index, run_config, generator, OrthogonalEmbedder()
        )
        model = fit(manifest_corpus(manifest), order=4, k=0.01)
        for record in manifest:
            loss = composite_loss(model, record)
            assert loss.augmented == loss.base
            assert loss.total == pytest.approx(1.5 * loss.base)

    def test_augmentation_off_trains_on_the_original(
        self, qa_records, caption_index, generator, embedder
    ):
        config = RunConfig(use_augmentation=False, parallelism=1).validate()
        manifest, _ = build_manifest(
            qa_records, caption_index, config, generator, embedder
        )
        model = fit(manifest_corpus(manifest), order=4, k=0.01)
        for record in manifest:
            assert record.pool.items == ()
            assert record.sampled.is_original
            loss = composite_loss(model, record)
            assert loss.augmented == loss.base
            assert loss.total == pytest.approx((1 + 0.5) * loss.base, abs=1e-12)

    def test_total_is_nondecreasing_in_lambda(self, model, manifest):
        for record in manifest:
            totals = [
                composite_loss(model, record, lambda_=float(weight)).total
                for weight in np.linspace(0.0, 1.0, 21)
            ]
            assert all(a <= b for a, b in zip(totals, totals[1:]))

    def test_exact_is_within_pool_losses(self, model, manifest):
        for record in manifest:
            losses = [
                sequence_nll(model, record.image_id, item.text, record.target)
                for item, score in zip(record.pool.items, record.scores)
                if score > 0
            ]
            if not losses:
                continue
            augmented = composite_loss(model, record).augmented
            assert min(losses) - 1e-12 <= augmented <= max(losses) + 1e-12

    def test_monte_carlo_agrees_with_exact(self, model, manifest):
        record = manifest[0]
        exact = composite_loss(model, record)
        sampled = composite_loss(model, record, MonteCarlo(seed=11, draws=200_000))

        assert sampled.mode == "monte_carlo"
        assert (sampled.seed, sampled.draws) == (11, 200_000)
        assert sampled.base == exact.base
        bound = 3 * sampled.std_error + 1e-9
        assert abs(sampled.augmented - exact.augmented) <= bound

    def test_monte_carlo_is_seeded(self, model, manifest):
        first = composite_loss(model, manifest[1], MonteCarlo(seed=5, draws=500))
        second = composite_loss(model, manifest[1], MonteCarlo(seed=5, draws=500))
        assert first == second

    def test_invalid_modes(self, model, manifest):
        with pytest.raises(InputError):
            MonteCarlo(seed=0, draws=0)
        with pytest.raises(InputError):
            composite_loss(model, manifest[0], mode="sampled")

    def test_breakdown_dict(self, model, manifest):
        data = composite_loss(model, manifest[0]).to_dict()
        assert data["mode"] == "exact"
        assert data["lambda"] == 0.5
        assert data["seed"] is None


class TestModelFile:
    def test_dump_and_load(self, tmp_path, model):
        path = tmp_path / "model.json"
        dump_model(model, path)
        assert load_model(path) == model

    def test_load_invalid(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"order": 2}', encoding="utf-8")
        with pytest.raises(InputError):
            load_model(path)


class TestVerifyManifest:
    """Test the end-to-end oracle checks."""

    def test_built_manifest_passes(self, manifest):
        verdict = verify_manifest(manifest, draws=5000)

        assert verdict.passed
        assert verdict.records == 4
        assert set(verdict.checks) == {
            "algebra",
            "lambda_zero",
            "convexity",
            "agreement",
            "roundtrip",
        }
        assert verdict.checks["algebra"].checked == 8
        assert verdict.checks["roundtrip"].checked == 4
        assert set(verdict.breakdowns) == {"q1", "q2", "q3", "q4"}

    def test_verdict_dict(self, manifest):
        data = verify_manifest(manifest, draws=1000).to_dict()
        assert data["passed"] is True
        assert data["order"] == 4
        assert data["checks"]["agreement"]["failures"] == []

    def test_empty_manifest(self):
        with pytest.raises(InputError):
            verify_manifest([])


class TestRandomManifests:
    """Loss algebra and estimator agreement over seeded random manifests."""

    def test_algebra_and_agreement(self, generator, embedder):
        rng = np.random.default_rng(2024)
        gap = variance = 0.0
        checked = 0
        for trial in range(100):
            manifest = random_manifest(rng, generator, embedder)
            model = fit(
                manifest_corpus(manifest),
                order=int(rng.integers(1, 6)),
                k=float(rng.uniform(0.01, 1.0)),
            )
            for record in manifest:
                exact = composite_loss(model, record)
                sampled = composite_loss(model, record, MonteCarlo(trial, 2000))
                for loss in (exact, sampled):
                    expected = loss.base + record.lambda_ * loss.augmented
                    assert abs(loss.total - expected) <= 1e-12
                gap += sampled.augmented - exact.augmented
                variance += sampled.std_error**2
                checked += 1

        assert checked >= 100
        # one test over the summed estimates
        assert abs(gap) <= 3 * math.sqrt(variance) + 1e-9 * checked
