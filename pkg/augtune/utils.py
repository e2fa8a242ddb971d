"""
Utility functions for augtune.

Seed derivation, hashing and canonical JSON helpers shared by the stages.
"""

import hashlib
import json
from typing import Any, Dict

from .constants import FNV64_MASK, FNV64_OFFSET_BASIS, FNV64_PRIME


def derive_seed(*parts: Any) -> int:
    """
    Derive a 63-bit seed from arbitrary parts.

    The value depends only on the parts' string forms, so per-record seeds are
    independent of processing order and of the interpreter's hash seed.

    Args:
        *parts: Run seed, record id, policy name, ...

    Returns:
        A non-negative integer usable by ``numpy.random.default_rng``
    """
    combined = "\x1f".join(str(part) for part in parts)
    digest = hashlib.sha256(combined.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash of ``data``."""
    value = FNV64_OFFSET_BASIS
    for byte in data:
        value ^= byte
        value = (value * FNV64_PRIME) & FNV64_MASK
    return value


def text_digest(text: str) -> str:
    """Short stable digest of a text, used for cache keys."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:32]


def dumps_line(data: Dict[str, Any]) -> str:
    """
    Serialize one JSON-lines row.

    Keys keep insertion order and separators are fixed so the same objects
    always produce the same bytes.
    """
    return json.dumps(data, ensure_ascii=False, separators=(",", ":"))
