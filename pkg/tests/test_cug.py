"""
Tests for caption selection and caption-utilized targets.
"""

import string

import numpy as np
import pytest

from augtune.errors import InputError, MissingCaptionError
from augtune.primitives.cug import (
    Caption,
    CugTarget,
    compose_target,
    normalize_caption,
    plain_target,
    select_caption,
    split_response,
)

WORDS = ["a", "dog", "cat", "man", "red", "umbrella", "on", "grass", "two", "kite"]


def random_sentence(rng, terminator=""):
    words = rng.choice(WORDS, size=int(rng.integers(1, 8)))
    return " ".join(words).capitalize() + terminator


class TestNormalizeCaption:
    def test_adds_period(self):
        assert normalize_caption("A dog on grass") == "A dog on grass."

    def test_trims_and_collapses_periods(self):
        assert normalize_caption("  A dog on grass...  ") == "A dog on grass."
        assert normalize_caption("A dog on grass .") == "A dog on grass."

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("A dog barking!", "A dog barking."),
            ("A dog?", "A dog."),
            ("A dog?!.", "A dog."),
            ("A dog !", "A dog."),
        ],
    )
    def test_other_terminators_become_one_period(self, text, expected):
        assert normalize_caption(text) == expected

    def test_idempotent(self):
        once = normalize_caption("A man with an umbrella")
        assert normalize_caption(once) == once

    @pytest.mark.parametrize("text", ["", "   ", "..."])
    def test_empty(self, text):
        with pytest.raises(InputError):
            normalize_caption(text)

    def test_caption_normalizes_on_construction(self):
        caption = Caption("100", " A dog on grass ", annotation_id=3)
        assert caption.text == "A dog on grass."
        assert Caption.from_dict(caption.to_dict()) == caption


class TestSelectCaption:
    """Test the caption selection strategies."""

    @pytest.fixture
    def captions(self):
        return [
            Caption("100", "A brown dog lying on the grass", annotation_id=7),
            Caption("100", "A dog on grass.", annotation_id=3),
        ]

    def test_first_by_id(self, captions):
        assert select_caption(captions).annotation_id == 3

    def test_longest(self, captions):
        chosen = select_caption(captions, "longest")
        assert chosen.annotation_id == 7
        assert chosen.text == "A brown dog lying on the grass."

    def test_longest_tie_goes_to_lower_id(self):
        captions = [
            Caption("1", "A cat.", annotation_id=9),
            Caption("1", "A dog.", annotation_id=4),
        ]
        assert select_caption(captions, "longest").annotation_id == 4

    def test_numbered_captions_come_first(self):
        captions = [Caption("1", "A cat."), Caption("1", "A dog.", annotation_id=12)]
        assert select_caption(captions).annotation_id == 12

    def test_seeded_random_is_deterministic(self, captions):
        for seed in range(20):
            first = select_caption(captions, "seeded_random", seed=seed)
            assert select_caption(captions, "seeded_random", seed=seed) == first

    def test_seeded_random_ignores_input_order(self, captions):
        reordered = list(reversed(captions))
        for seed in range(20):
            assert select_caption(
                captions, "seeded_random", seed=seed
            ) == select_caption(reordered, "seeded_random", seed=seed)

    def test_empty(self):
        with pytest.raises(MissingCaptionError) as exc_info:
            select_caption([], image_id="300")
        assert "300" in str(exc_info.value)

    def test_unknown_strategy(self, captions):
        with pytest.raises(InputError):
            select_caption(captions, "shortest")


class TestComposeTarget:
    """Test building caption-prefixed targets."""

    def test_example(self):
        caption = Caption("100", "A dog on grass.")
        target = compose_target(caption, "Yes, there is a dog.")

        assert target.composed == "A dog on grass. Yes, there is a dog."
        assert target.caption_len == 16
        assert target.composed[target.caption_len :] == target.response

    def test_missing_period_is_added(self):
        target = compose_target(Caption("100", "A dog on grass"), "Yes.")
        assert target.composed == "A dog on grass. Yes."

    def test_empty_response(self):
        with pytest.raises(InputError):
            compose_target(Caption("100", "A dog."), "")

    def test_plain_target(self):
        target = plain_target("No.")
        assert target.composed == "No."
        assert target.caption_len == 0
        assert target.caption is None

    def test_inconsistent_target(self):
        caption = Caption("100", "A dog.")
        with pytest.raises(InputError):
            CugTarget(response="Yes.", composed="A cat. Yes.", caption_len=7)
        with pytest.raises(InputError):
            CugTarget("Yes.", "A dog. Yes.", caption_len=5, caption=caption)

    def test_dict(self):
        caption = Caption("100", "A dog.")
        target = compose_target(caption, "Yes.")
        assert target.to_dict() == {
            "response": "Yes.",
            "composed": "A dog. Yes.",
            "caption_len": 7,
        }
        assert CugTarget.from_dict(target.to_dict(), caption) == target


class TestSplitResponse:
    """Test splitting generated text into caption and answer."""

    def test_sentence_heuristic(self):
        assert split_response("A dog on grass. Yes.") == ("A dog on grass.", "Yes.")

    def test_no_terminator(self):
        assert split_response("Yes") == ("", "Yes")

    def test_terminator_must_be_followed_by_whitespace(self):
        assert split_response("Yes.") == ("", "Yes.")
        assert split_response("3.5 kites? No.") == ("3.5 kites?", "No.")

    def test_known_boundary(self):
        text = "A dog on grass. Yes, there is a dog."
        assert split_response(text, "known_boundary", caption_len=16) == (
            "A dog on grass.",
            "Yes, there is a dog.",
        )

    def test_known_boundary_needs_length(self):
        with pytest.raises(InputError):
            split_response("A dog. Yes.", "known_boundary")

    def test_unknown_mode(self):
        with pytest.raises(InputError):
            split_response("A dog. Yes.", "tokens")

    def test_roundtrip_on_random_pairs(self):
        rng = np.random.default_rng(7)
        alphabet = list(string.ascii_letters + string.digits + " ,.!?'")
        for _ in range(1000):
            caption = Caption("1", random_sentence(rng, str(rng.choice(["", "."]))))
            size = int(rng.integers(1, 30))
            response = "".join(rng.choice(alphabet, size=size)).strip() or "Yes"
            target = compose_target(caption, response)

            assert split_response(
                target.composed, "known_boundary", target.caption_len
            ) == (caption.text, response)
            assert split_response(target.composed) == (caption.text, response)
