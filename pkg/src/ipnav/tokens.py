"""Text tokenization used for names, attributes, and queries.

Lowercase, strip punctuation, drop possessive 's, drop a small stopword
set. "Alice's computer" becomes ["alice", "computer"] so generic and
personal similarity split cleanly downstream.
"""

from __future__ import annotations

import re

STOPWORDS = frozenset({"the", "a", "an", "of", "from", "my", "your", "is", "it"})

_POSSESSIVE = re.compile(r"['’]s$")
_PUNCT = re.compile(r"[^\w]+", flags=re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Content tokens of `text`, in order, duplicates kept (multiset)."""
    out = []
    for raw in text.lower().split():
        raw = _POSSESSIVE.sub("", raw)
        tok = _PUNCT.sub("", raw)
        if tok and tok not in STOPWORDS:
            out.append(tok)
    return out
