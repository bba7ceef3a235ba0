"""Shared text normalization and tokenization.

The same tokenizer backs the hashed featurizer and the BM25 index so lexical
and dense retrieval score identical token streams.
"""

import hashlib
import re

TOKENIZER_VERSION = "split-camel-underscore-v1"

# Matching (decontamination) normalizes case and whitespace only; token
# boundaries stay untouched so substring checks remain literal.
_WS_RUN = re.compile(r"\s+")

_WORD_RUN = re.compile(r"[A-Za-z0-9_]+")
_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


def normalize_ws(text: str) -> str:
    """Casefold and collapse whitespace runs to single spaces."""
    return _WS_RUN.sub(" ", text.casefold()).strip()


def tokenize(text: str, max_tokens: int | None = None) -> list[str]:
    """Lowercased tokens split on non-alphanumeric boundaries.

    Code identifiers are further split on underscores and camelCase humps,
    so ``parseHTMLBody`` -> ``parse html body`` and ``my_var`` -> ``my var``.
    """
    tokens: list[str] = []
    for run in _WORD_RUN.findall(text):
        for part in run.split("_"):
            if not part:
                continue
            for piece in _CAMEL_BOUNDARY.split(part):
                if piece:
                    tokens.append(piece.lower())
        if max_tokens is not None and len(tokens) >= max_tokens:
            break
    if max_tokens is not None:
        return tokens[:max_tokens]
    return tokens


def stable_hash(text: str) -> int:
    """Deterministic 64-bit hash, independent of PYTHONHASHSEED."""
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stable_hash32(text: str) -> int:
    """Deterministic 32-bit hash (MinHash base hash)."""
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")
