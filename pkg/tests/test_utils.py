"""
Tests for seed derivation and hashing helpers.
"""

from augtune.utils import derive_seed, dumps_line, fnv1a_64, text_digest


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(0, "q1") == derive_seed(0, "q1")

    def test_parts_matter(self):
        seeds = {derive_seed(0, "q1"), derive_seed(1, "q1"), derive_seed(0, "q2")}
        assert len(seeds) == 3
        assert derive_seed(0, "q1", "hard", 0) != derive_seed(0, "q1", "hard", 1)

    def test_range(self):
        for i in range(100):
            assert 0 <= derive_seed(i, "record") < 2**63


class TestHashing:
    def test_fnv1a_64_reference_values(self):
        assert fnv1a_64(b"") == 0xCBF29CE484222325
        assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C

    def test_text_digest(self):
        assert len(text_digest("Is there a dog?")) == 32
        assert text_digest("a") != text_digest("b")

    def test_dumps_line(self):
        assert dumps_line({"b": 1, "a": "é"}) == '{"b":1,"a":"é"}'
