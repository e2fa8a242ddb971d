"""
Offline, rule-based prompt augmentation.

Every policy is a pure function of ``(prompt, policy, seed)``: all randomness
comes from a ``numpy`` generator seeded with ``seed``, and all word lists are
fixed tables in this module.
"""

import re
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from augtune.errors import InputError
from augtune.types import PolicyKind


class Generation(NamedTuple):
    """Text produced for one policy; ``unchanged`` is set when no rule applied."""

    text: str
    unchanged: bool = False


# QWERTY neighbours for substitution typos
KEYBOARD_NEIGHBOURS: Dict[str, str] = {
    "q": "wa", "w": "qes", "e": "wrd", "r": "etf", "t": "ryg", "y": "tuh",
    "u": "yij", "i": "uok", "o": "ipl", "p": "ol", "a": "qsz", "s": "adw",
    "d": "sfe", "f": "dgr", "g": "fht", "h": "gjy", "j": "hku", "k": "jli",
    "l": "ko", "z": "xa", "x": "zcs", "c": "xvd", "v": "cbf", "b": "vng",
    "n": "bmh", "m": "nj",
}  # fmt: skip

# Words whose meaning a typo must never change
PROTECTED_WORDS = frozenset({"yes", "no"})
SPELL_ATTEMPTS = 8

APPEND_PREFIXES: Tuple[str, ...] = (
    "Quick question:",
    "Look at the image.",
    "Hello!",
    "One more thing:",
)
APPEND_SUFFIXES: Tuple[str, ...] = (
    "Please answer yes or no.",
    "Answer briefly.",
    "Thanks in advance.",
    "Be honest.",
)

LONG_LEAD_INS: Tuple[str, ...] = (
    "Looking carefully at the details of this image, {body}",
    "Taking into account everything that is visible in the picture, {body}",
    "Could you please take a close look and tell me: {body}",
)
LONG_TRAILERS: Tuple[str, ...] = (
    "{body}, based on what you can actually see in the image",
    "{body}, considering all of the visible details",
)

REMOVABLE_WORDS = frozenset(
    {
        "please", "kindly", "really", "actually", "exactly", "currently",
        "clearly", "visible", "just", "very", "any", "the", "a", "an",
    }
)  # fmt: skip
SHORT_FLOOR = 3

_LOCATIVE = (
    r"(?:in|on|within|inside)\s+(?:the|this)\s+"
    r"(?:image|picture|photo|photograph|scene)"
)

REWRITE_LEXICON: Dict[str, Tuple[str, ...]] = {
    "is there": ("can you see", "do you see"),
    "are there": ("can you see", "do you see"),
    "image": ("picture", "photo"),
    "picture": ("image", "photo"),
    "photo": ("image", "picture"),
    "see": ("spot", "notice"),
    "person": ("individual",),
    "man": ("guy",),
    "woman": ("lady",),
    "big": ("large",),
    "large": ("big",),
    "small": ("little", "tiny"),
    "little": ("small",),
    "next to": ("beside",),
    "beside": ("next to",),
    "near": ("close to",),
    "holding": ("carrying", "gripping"),
    "wearing": ("dressed in",),
    "color": ("colour", "shade"),
    "kind": ("type",),
    "shown": ("displayed", "depicted"),
    "contain": ("include",),
    "contains": ("includes",),
}

# (simple, formal) pairs; Hard reads them left to right, Easy right to left
REGISTER_PAIRS: Tuple[Tuple[str, str], ...] = (
    ("picture", "image"),
    ("photo", "photograph"),
    ("see", "discern"),
    ("look at", "examine"),
    ("find", "locate"),
    ("show", "depict"),
    ("shows", "depicts"),
    ("near", "in proximity to"),
    ("next to", "adjacent to"),
    ("has", "possesses"),
    ("have", "possess"),
    ("use", "utilize"),
    ("using", "utilizing"),
    ("help", "assist"),
    ("big", "sizable"),
    ("about", "regarding"),
    ("enough", "sufficient"),
    ("get", "obtain"),
    ("need", "require"),
    ("person", "individual"),
    ("people", "individuals"),
    ("car", "automobile"),
    ("dog", "canine"),
    ("start", "commence"),
)


def _lexicon_from_pairs(
    pairs: Sequence[Tuple[str, str]], invert: bool
) -> Dict[str, Tuple[str, ...]]:
    lexicon: Dict[str, List[str]] = {}
    for simple, formal in pairs:
        key, value = (formal, simple) if invert else (simple, formal)
        lexicon.setdefault(key, []).append(value)
    return {key: tuple(sorted(values)) for key, values in lexicon.items()}


FORMAL_LEXICON = _lexicon_from_pairs(REGISTER_PAIRS, invert=False)
SIMPLE_LEXICON = _lexicon_from_pairs(REGISTER_PAIRS, invert=True)

_LOCATIVE_TAIL = re.compile(
    rf"^(?P<head>.+?),?\s+(?P<loc>{_LOCATIVE})$", re.IGNORECASE
)

# Nominalization rules, applied to the clause at the end of the body
NOMINALIZATIONS: Tuple[Tuple["re.Pattern[str]", str], ...] = (
    (
        re.compile(r"\bis there (?P<np>[^,]+)$", re.IGNORECASE),
        "is the presence of {np} discernible",
    ),
    (
        re.compile(r"\bare there (?P<np>[^,]+)$", re.IGNORECASE),
        "is the presence of {np} discernible",
    ),
    (
        re.compile(r"\bhow many (?P<np>\w+(?: \w+)?) are(?: there)?$", re.IGNORECASE),
        "what is the count of {np} present",
    ),
    (
        re.compile(r"\bwhat colou?r is (?P<np>[^,]+)$", re.IGNORECASE),
        "what is the coloration of {np}",
    ),
    (
        re.compile(r"\bcan you see (?P<np>[^,]+)$", re.IGNORECASE),
        "is {np} perceptible to you",
    ),
)


def _split_terminal(text: str) -> Tuple[str, str]:
    """Split trailing sentence punctuation off ``text``."""
    body = text.rstrip(".?! ")
    return body, text[len(body):]


def _lower_first(text: str) -> str:
    if len(text) > 1 and text[0].isupper() and not text[1].isupper():
        if not (text[0] == "I" and not text[1].isalpha()):
            return text[0].lower() + text[1:]
    return text


def _upper_first(text: str) -> str:
    return text[:1].upper() + text[1:]


def _restore_case(text: str, like: str) -> str:
    return _upper_first(text) if like[:1].isupper() else text


def _pick(options: Sequence[str], rng: np.random.Generator) -> str:
    return options[int(rng.integers(len(options)))]


def _apply_lexicon(
    body: str, lexicon: Dict[str, Tuple[str, ...]], rng: np.random.Generator
) -> Optional[str]:
    """
    Replace a seeded, non-empty subset of lexicon matches in ``body``.

    Longer keys win over the shorter keys they overlap.

    Returns:
        The rewritten body, or None when no key matches
    """
    spans: List[Tuple[int, int, str]] = []
    for key in sorted(lexicon, key=lambda k: (-len(k), k)):
        for match in re.finditer(rf"\b{re.escape(key)}\b", body, re.IGNORECASE):
            start, end = match.span()
            if any(start < e and s < end for s, e, _ in spans):
                continue
            spans.append((start, end, key))
    if not spans:
        return None

    spans.sort()
    keep = rng.random(len(spans)) < 0.5
    if not keep.any():
        keep[int(rng.integers(len(spans)))] = True

    out = body
    for (start, end, key), kept in reversed(list(zip(spans, keep))):
        if not kept:
            continue
        replacement = _pick(lexicon[key], rng)
        out = out[:start] + _restore_case(replacement, body[start:end]) + out[end:]
    return out


def _answer_tokens(text: str) -> List[str]:
    return re.findall(r"\b(?:yes|no)\b", text.lower())


def _misspell(
    prompt: str, eligible: Sequence[int], rng: np.random.Generator
) -> str:
    n_edits = min(int(rng.integers(1, 3)), len(eligible))
    positions = sorted(
        (int(p) for p in rng.choice(eligible, size=n_edits, replace=False)),
        reverse=True,
    )
    kinds = [_pick(("substitute", "delete", "insert"), rng) for _ in positions]
    if set(kinds) == {"delete", "insert"}:
        # an insertion and a deletion could cancel out
        kinds[-1] = "substitute"

    text = prompt
    for position, kind in zip(positions, kinds):
        char = text[position]
        if kind == "substitute":
            typo = _pick(KEYBOARD_NEIGHBOURS[char.lower()], rng)
            typo = typo.upper() if char.isupper() else typo
            text = text[:position] + typo + text[position + 1:]
        elif kind == "delete":
            text = text[:position] + text[position + 1:]
        else:
            text = text[:position] + char + text[position:]
    return text


def _spell(prompt: str, rng: np.random.Generator) -> Generation:
    eligible: List[int] = []
    for word in re.finditer(r"[A-Za-z]+", prompt):
        if len(word.group()) >= 3 and word.group().lower() not in PROTECTED_WORDS:
            eligible.extend(range(word.start(), word.end()))
    if not eligible:
        return Generation(prompt, unchanged=True)

    # "not" -> "no" or "eyes" -> "yes" would plant an answer in the prompt
    answers = _answer_tokens(prompt)
    for _ in range(SPELL_ATTEMPTS):
        text = _misspell(prompt, eligible, rng)
        if _answer_tokens(text) == answers:
            return Generation(text)
    return Generation(prompt, unchanged=True)


def _append(prompt: str, rng: np.random.Generator) -> Generation:
    if rng.random() < 0.5:
        return Generation(f"{_pick(APPEND_PREFIXES, rng)} {prompt}")
    return Generation(f"{prompt} {_pick(APPEND_SUFFIXES, rng)}")


def _short(prompt: str, rng: np.random.Generator) -> Generation:
    body, tail = _split_terminal(prompt)
    words = body.split()

    units: List[Tuple[int, int]] = []
    for i in range(len(words) - 2):
        phrase = " ".join(w.lower() for w in words[i:i + 3])
        if re.fullmatch(_LOCATIVE, phrase):
            units.append((i, 3))
    for i, word in enumerate(words):
        if word.lower().strip(",;:") in REMOVABLE_WORDS:
            units.append((i, 1))
    if not units:
        return Generation(prompt, unchanged=True)

    target = int(rng.integers(1, len(units) + 1))
    removed: set = set()
    chosen = 0
    for index in rng.permutation(len(units)):
        if chosen == target:
            break
        start, length = units[int(index)]
        span = set(range(start, start + length))
        if span & removed or len(words) - len(removed) - length < SHORT_FLOOR:
            continue
        removed |= span
        chosen += 1
    if not removed:
        return Generation(prompt, unchanged=True)

    kept: List[str] = []
    for i, word in enumerate(words):
        if i not in removed:
            kept.append(word)
            continue
        # a dropped clause-final word hands its comma to the word before it
        mark = word[len(word.rstrip(",;:")) :]
        if mark and kept and not kept[-1].endswith((",", ";", ":")):
            kept[-1] += mark
    return Generation(_restore_case(" ".join(kept), body) + tail)


def _long(prompt: str, rng: np.random.Generator) -> Generation:
    body, tail = _split_terminal(prompt)
    if rng.random() < 0.6:
        text = _pick(LONG_LEAD_INS, rng).format(body=_lower_first(body))
    else:
        text = _pick(LONG_TRAILERS, rng).format(body=body)
    return Generation(text + (tail or "."))


def _rewrite(prompt: str, rng: np.random.Generator) -> Generation:
    body, tail = _split_terminal(prompt)
    rewritten = _apply_lexicon(body, REWRITE_LEXICON, rng)
    if rewritten is None:
        return Generation(prompt, unchanged=True)
    return Generation(rewritten + tail)


def _hard(prompt: str, rng: np.random.Generator) -> Generation:
    body, tail = _split_terminal(prompt)
    text = _lower_first(body)
    changed = False

    match = _LOCATIVE_TAIL.match(text)
    if match:
        loc, head = match.group("loc"), match.group("head")
        text = f"{_upper_first(loc)}, {_lower_first(head)}"
        changed = True

    for pattern, replacement in NOMINALIZATIONS:
        nominal = pattern.search(text)
        if nominal:
            text = text[: nominal.start()] + replacement.format(**nominal.groupdict())
            changed = True
            break

    formal = _apply_lexicon(text, FORMAL_LEXICON, rng)
    if formal is not None:
        text = formal
        changed = True

    if not changed:
        return Generation(prompt, unchanged=True)
    return Generation(_restore_case(text, body) + tail)


def _easy(prompt: str, rng: np.random.Generator) -> Generation:
    body, tail = _split_terminal(prompt)
    simplified = _apply_lexicon(body, SIMPLE_LEXICON, rng)
    if simplified is None:
        return Generation(prompt, unchanged=True)
    return Generation(simplified + tail)


_POLICY_RULES = {
    PolicyKind.HARD: _hard,
    PolicyKind.EASY: _easy,
    PolicyKind.SHORT: _short,
    PolicyKind.LONG: _long,
    PolicyKind.REWRITE: _rewrite,
    PolicyKind.SPELL: _spell,
    PolicyKind.APPEND: _append,
}


def rule_based_augment(prompt: str, policy: PolicyKind, seed: int) -> Generation:
    """
    Augment ``prompt`` under ``policy`` with fixed rewrite rules.

    Args:
        prompt: The original prompt (at least one word)
        policy: The augmentation policy
        seed: Seed for every random choice the policy makes

    Returns:
        The augmented text; ``unchanged`` is True when no rule applied and the
        prompt came back as is

    Raises:
        InputError: If the prompt has no words
    """
    if not prompt or not prompt.split():
        raise InputError("prompt must contain at least one word")
    rng = np.random.default_rng(seed)
    return _POLICY_RULES[PolicyKind(policy)](prompt, rng)
