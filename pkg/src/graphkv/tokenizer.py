"""Byte-level tokenizer: ids 0-255 are raw bytes, plus three specials.

Zero external assets; round-trips any UTF-8 text. "Words" in the benchmark
suite are whitespace-delimited; a word's token count is its byte count plus
separators.
"""

from __future__ import annotations

BOS = 256
EOT = 257
PAD = 258
VOCAB_SIZE = 259


def encode_text(text: str) -> list[int]:
    return list(text.encode("utf-8"))


def decode_tokens(ids: list[int]) -> str:
    return bytes(i for i in ids if i < 256).decode("utf-8", errors="replace")


def word_count(text: str) -> int:
    return len(text.split())
