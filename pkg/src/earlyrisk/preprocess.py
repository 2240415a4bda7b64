"""Text normalization applied to every post before classification.

The pipeline, in order: decode HTML entities and literal unicode escapes,
lowercase, replace URLs with ``weblink``, replace digit runs with ``number``,
collapse consecutive duplicate tokens, and collapse whitespace. The result is
a stable fixed point: normalizing twice returns the same string.
"""

from __future__ import annotations

import html
import re

# A normalized string: lowercase, single-spaced, no URLs, digits, encoded
# entities, or adjacent duplicate tokens.
NormalizedText = str

URL_TOKEN = "weblink"
NUMBER_TOKEN = "number"

_URL_RE = re.compile(r"(?:https?://|\bwww\.)\S+")
_NUMBER_RE = re.compile(r"\d+(?:[.,]\d+)*")
_ESCAPE_RE = re.compile(r"\\u([0-9a-fA-F]{4})|\\U([0-9a-fA-F]{8})")
# Decoding strictly shrinks the text, so the fixpoint loop terminates; the
# cap only guards against a regression in that argument.
_MAX_DECODE_PASSES = 1000


def _decode_escape(match: re.Match) -> str:
    code = int(match.group(1) or match.group(2), 16)
    # Lone surrogates and out-of-range codes are kept literal: decoding them
    # would produce strings that cannot be written back out as UTF-8.
    if 0xD800 <= code <= 0xDFFF or code > 0x10FFFF:
        return match.group(0)
    return chr(code)


def _decode_and_lowercase(text: str) -> str:
    # Iterate to a fixed point so nested encodings ("&amp;amp;", escaped
    # escapes, entities that only become decodable after lowercasing) cannot
    # break idempotence of normalize().
    for _ in range(_MAX_DECODE_PASSES):
        decoded = html.unescape(text)
        decoded = _ESCAPE_RE.sub(_decode_escape, decoded)
        decoded = decoded.lower()
        if decoded == text:
            return text
        text = decoded
    return text


def normalize(raw: str) -> NormalizedText:
    """Normalize one raw post.

    Examples:
        >>> normalize("Hola HOLA hola")
        'hola'
        >>> normalize("mira https://a.b/c tiene 250 kcal")
        'mira weblink tiene number kcal'
    """
    text = _decode_and_lowercase(raw)
    text = _URL_RE.sub(URL_TOKEN, text)
    text = _NUMBER_RE.sub(NUMBER_TOKEN, text)
    tokens = text.split()
    deduped = [t for i, t in enumerate(tokens) if i == 0 or t != tokens[i - 1]]
    return " ".join(deduped)
