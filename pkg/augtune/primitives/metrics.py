"""
Metrics harness for augtune.

Binarizes free-form answers, computes accuracy/precision/recall/F1 with "yes"
as the positive class, and breaks accuracy down per augmentation policy.
"""

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from augtune.constants import ORIGINAL
from augtune.errors import APIError, InputError
from augtune.primitives.chat import ChatClient
from augtune.primitives.cug import split_response
from augtune.primitives.dataset import EvalRecord
from augtune.types import ALL_POLICIES, AnswerRule, BinaryLabel
from augtune.workflow import Workflow

logger = logging.getLogger(__name__)

OVERALL = "overall"
EMPTY_CELL = "—"

_YES_NO = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


class Answer(str, Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ExtractedAnswer:
    """A binarized answer; ``span`` is the matched character range."""

    value: Answer
    span: Optional[Tuple[int, int]] = None


def _scan(text: str, rule: AnswerRule, offset: int) -> ExtractedAnswer:
    matches = list(_YES_NO.finditer(text))
    if not matches:
        return ExtractedAnswer(Answer.UNKNOWN)
    match = matches[0] if rule == "first" else matches[-1]
    start, end = match.span()
    value = Answer(match.group(1).lower())
    return ExtractedAnswer(value, (start + offset, end + offset))


def extract_answer(
    response: str, cug_mode: bool = False, rule: AnswerRule = "first"
) -> ExtractedAnswer:
    """
    Find the standalone "yes" or "no" in a model response.

    With ``cug_mode`` the leading caption sentence is skipped and only the
    answer part is scanned, falling back to the whole response when the answer
    part has no yes/no token.

    Args:
        response: Model response
        cug_mode: Whether the response starts with a caption
        rule: ``first`` or ``last`` yes/no token of the scanned region

    Returns:
        The extracted answer; ``Unknown`` when no token is found
    """
    if rule not in ("first", "last"):
        raise InputError(f"unknown answer rule {rule!r}")
    if cug_mode:
        _, answer = split_response(response, "sentence_heuristic")
        found = _scan(answer, rule, len(response) - len(answer))
        if found.value is not Answer.UNKNOWN:
            return found
    return _scan(response, rule, 0)


@dataclass
class PolicyAccuracy:
    """Record count and correct count of one report column."""

    n: int = 0
    correct: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.n if self.n else 0.0

    def add(self, correct: bool) -> None:
        self.n += 1
        self.correct += int(correct)

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "correct": self.correct, "accuracy": self.accuracy}


@dataclass
class MetricsReport:
    """Confusion-matrix metrics, optionally broken down per policy."""

    n: int = 0
    accuracy: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    unknown_count: int = 0
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    per_policy: Dict[str, PolicyAccuracy] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "unknown_count": self.unknown_count,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "per_policy": {
                name: cell.to_dict() for name, cell in self.per_policy.items()
            },
        }


AnswerLike = Union[ExtractedAnswer, Answer]


def _value(answer: AnswerLike) -> Answer:
    return answer.value if isinstance(answer, ExtractedAnswer) else Answer(answer)


def is_correct(answer: AnswerLike, gt_label: BinaryLabel) -> bool:
    return _value(answer).value == gt_label


def compute_metrics(pairs: Iterable[Tuple[AnswerLike, BinaryLabel]]) -> MetricsReport:
    """
    Compute accuracy, precision, recall and F1 with "yes" as positive class.

    Unknown answers count as incorrect and as negative predictions, and are
    tallied in ``unknown_count``.

    Args:
        pairs: ``(answer, gt_label)`` pairs

    Returns:
        The report; all metrics are 0 for empty input

    Raises:
        InputError: If a ground-truth label is not yes or no
    """
    report = MetricsReport()
    for answer, gt_label in pairs:
        if gt_label not in ("yes", "no"):
            raise InputError(f"gt_label must be yes or no, got {gt_label!r}")
        value = _value(answer)
        report.n += 1
        if value is Answer.UNKNOWN:
            report.unknown_count += 1
        if value is Answer.YES:
            if gt_label == "yes":
                report.tp += 1
            else:
                report.fp += 1
        elif gt_label == "yes":
            report.fn += 1
        elif value is Answer.NO:
            report.tn += 1

    if report.n:
        report.accuracy = (report.tp + report.tn) / report.n
    predicted = report.tp + report.fp
    actual = report.tp + report.fn
    report.precision = report.tp / predicted if predicted else 0.0
    report.recall = report.tp / actual if actual else 0.0
    denominator = report.precision + report.recall
    if denominator:
        report.f1 = 2 * report.precision * report.recall / denominator
    return report


def per_policy_report(
    records: Sequence[EvalRecord],
    cug_mode: bool = False,
    rule: AnswerRule = "first",
) -> Tuple[MetricsReport, str]:
    """
    Score filled evaluation records and break accuracy down per policy.

    The top-level metrics cover every record. ``per_policy`` holds one entry per
    policy, one for ``original`` and an ``overall`` entry over all augmented
    records (record-weighted).

    Args:
        records: Evaluation records with responses
        cug_mode: Whether responses start with a caption
        rule: Yes/no extraction rule

    Returns:
        The report and its rendered single-row table
    """
    answers = [extract_answer(r.model_response, cug_mode, rule) for r in records]
    report = compute_metrics(zip(answers, (r.gt_label for r in records)))

    cells: Dict[str, PolicyAccuracy] = {ORIGINAL: PolicyAccuracy()}
    cells.update((policy.value, PolicyAccuracy()) for policy in ALL_POLICIES)
    cells[OVERALL] = PolicyAccuracy()
    for record, answer in zip(records, answers):
        correct = is_correct(answer, record.gt_label)
        cells[record.policy].add(correct)
        if not record.is_original:
            cells[OVERALL].add(correct)
    report.per_policy = cells
    return report, render_policy_table([("Model", report)])


def _cell(accuracy: PolicyAccuracy) -> str:
    if accuracy.n == 0:
        return EMPTY_CELL
    return f"{accuracy.accuracy * 100:.1f}%"


def render_policy_table(rows: Sequence[Tuple[str, MetricsReport]]) -> str:
    """
    Render per-policy accuracies as an aligned text table.

    One row per labelled report, with Hard/Easy/Short/Long/Rewrite/Spell/Append
    and Overall columns, followed by an ``Org / Aug`` line per row.
    """
    header = ["Method"] + [policy.heading for policy in ALL_POLICIES] + ["Overall"]
    body = []
    for label, report in rows:
        cells = report.per_policy
        body.append(
            [label]
            + [_cell(cells.get(p.value, PolicyAccuracy())) for p in ALL_POLICIES]
            + [_cell(cells.get(OVERALL, PolicyAccuracy()))]
        )

    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]

    def line(row: List[str]) -> str:
        first = row[0].ljust(widths[0])
        rest = [cell.rjust(width) for cell, width in zip(row[1:], widths[1:])]
        return "  ".join([first] + rest).rstrip()

    lines = [line(header), "  ".join("-" * width for width in widths)]
    lines.extend(line(row) for row in body)
    lines.append("")
    for label, report in rows:
        original = _cell(report.per_policy.get(ORIGINAL, PolicyAccuracy()))
        augmented = _cell(report.per_policy.get(OVERALL, PolicyAccuracy()))
        lines.append(f"{label}: Org / Aug = {original} / {augmented}")
    return "\n".join(lines) + "\n"


class ChatResponder:
    """Fills ``model_response`` by sending each ``prompt_shown`` to a chat model."""

    def __init__(self, client: ChatClient):
        self.client = client

    def respond(self, prompt: str) -> str:
        return self.client.complete(prompt, step_id="respond")


def fill_responses(
    records: Sequence[EvalRecord], responder: ChatResponder, parallelism: int = 1
) -> List[EvalRecord]:
    """
    Fill every empty ``model_response``; records that have one are kept as is.

    Raises:
        APIError: If the endpoint keeps failing for a record
    """

    def run(record: EvalRecord) -> EvalRecord:
        if record.model_response:
            return record
        try:
            return record.with_response(responder.respond(record.prompt_shown))
        except APIError:
            logger.error("no response for %s (%s)", record.record_id, record.policy)
            raise

    return Workflow(parallelism=parallelism).map_ordered(run, records)


def unfilled(records: Iterable[EvalRecord]) -> List[EvalRecord]:
    """Records whose ``model_response`` is still empty."""
    return [record for record in records if not record.model_response.strip()]
