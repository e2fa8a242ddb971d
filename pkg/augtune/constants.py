"""Constants used across augtune."""

from typing import Tuple

RETRYABLE_STATUS_CODES: Tuple[int, ...] = (429, 500, 502, 503, 504)

TOOL_NAME = "augtune"
VERSION = "0.1.0"

# Run defaults
DEFAULT_EPSILON = 0.5
DEFAULT_LAMBDA = 0.5
DEFAULT_POOL_SIZE = 7
DEFAULT_SEED = 0

# Oracle defaults
DEFAULT_ORACLE_ORDER = 4
DEFAULT_ORACLE_K = 0.01
DEFAULT_ORACLE_DRAWS = 20000

# Remote services
DEFAULT_TEMPERATURE = 1.0
DEFAULT_MAX_RETRIES = 3
DEFAULT_RETRY_DELAY_MS = 500
DEFAULT_BACKOFF = "exponential"
DEFAULT_REQUEST_TIMEOUT = 60.0
DEFAULT_PARALLELISM = 4
DEFAULT_API_KEY_ENV = "AUGTUNE_API_KEY"

CHAT_COMPLETIONS_ENDPOINT = "/chat/completions"
EMBEDDINGS_ENDPOINT = "/embeddings"

# Fallback embedder
FALLBACK_DIMENSION = 4096
FALLBACK_EMBEDDER_ID = "hashed-tf-fnv1a64-4096"
FNV64_OFFSET_BASIS = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
FNV64_MASK = 0xFFFFFFFFFFFFFFFF

# Sentinel used both as a sampler index and as an evaluation policy tag
ORIGINAL = "original"

# Caption-utilized targets
CAPTION_SEPARATOR = " "
SENTENCE_TERMINATORS = ".!?"

# Input validation
MALFORMED_ABORT_RATIO = 0.01

# Toy language model reserved symbols
IMAGE_TOKEN_PREFIX = "\x00img:"
RESPONSE_START = "\x01"
END_OF_TEXT = "\x02"
UNKNOWN_SYMBOL = "\x03"
