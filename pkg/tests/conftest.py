"""
Shared test config and fixtures for augtune tests.
"""

import json

import pytest

from augtune.config import RunConfig
from augtune.primitives.augmenter import RuleBasedGenerator
from augtune.primitives.cug import Caption
from augtune.primitives.dataset import PromptRecord
from augtune.primitives.evaluator import HashingEmbedder
from augtune.request import Request


@pytest.fixture
def base_url():
    """Base URL of the mocked OpenAI-compatible endpoint."""
    return "https://llm.example.test/v1"


@pytest.fixture
def api_key():
    """Test API key."""
    return "test-api-key"


@pytest.fixture
def request_handler(api_key, base_url):
    """Request instance bound to the mocked endpoint."""
    return Request({"api_key": api_key, "base_url": base_url, "timeout": 5})


@pytest.fixture
def chat_completion():
    """Factory for chat-completion response bodies."""

    def make(content):
        return {
            "id": "chatcmpl-123",
            "object": "chat.completion",
            "model": "test-model",
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": content},
                    "finish_reason": "stop",
                }
            ],
        }

    return make


@pytest.fixture
def qa_rows():
    """Raw QA lines: three binary questions and one open question."""
    return [
        {
            "id": "q1",
            "image_id": "100",
            "prompt": "Is there a dog in the image?",
            "response": "Yes, there is a dog.",
            "label": "yes",
        },
        {
            "id": "q2",
            "image_id": "100",
            "prompt": "Is there a cat?",
            "response": "No, there is no cat.",
            "label": "no",
        },
        {
            "id": "q3",
            "image_id": "200",
            "prompt": "How many balloons are in the image?",
            "response": "There are three balloons.",
            "label": "open",
        },
        {
            "id": "q4",
            "image_id": "200",
            "prompt": "Is the man holding a red umbrella?",
            "response": "Yes.",
            "label": "yes",
        },
    ]


@pytest.fixture
def qa_records(qa_rows):
    return [PromptRecord.from_dict(row) for row in qa_rows]


@pytest.fixture
def coco_document():
    """COCO-style caption annotations for the QA images."""
    return {
        "images": [{"id": 100}, {"id": 200}, {"id": 300}],
        "annotations": [
            {"id": 7, "image_id": 100, "caption": "A brown dog lying on the grass"},
            {"id": 3, "image_id": 100, "caption": "A dog on grass."},
            {"id": 11, "image_id": 200, "caption": "A man with an umbrella."},
        ],
    }


@pytest.fixture
def caption_index():
    return {
        "100": [Caption("100", "A dog on grass.", annotation_id=3)],
        "200": [Caption("200", "A man with an umbrella.", annotation_id=11)],
    }


@pytest.fixture
def write_jsonl_file(tmp_path):
    """Write a list of objects (or raw strings) as a JSON-lines file."""

    def write(name, rows):
        path = tmp_path / name
        lines = [row if isinstance(row, str) else json.dumps(row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write


@pytest.fixture
def qa_file(write_jsonl_file, qa_rows):
    return write_jsonl_file("qa.jsonl", qa_rows)


@pytest.fixture
def coco_file(tmp_path, coco_document):
    path = tmp_path / "captions.json"
    path.write_text(json.dumps(coco_document), encoding="utf-8")
    return path


@pytest.fixture
def run_config():
    """Offline configuration: rule-based generator, fallback embedder."""
    return RunConfig(command="build", parallelism=1).validate()


@pytest.fixture
def generator():
    return RuleBasedGenerator()


@pytest.fixture
def embedder():
    return HashingEmbedder()
