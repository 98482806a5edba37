"""Tokenization shared by every module that turns table text into terms."""

import re

from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

_TAG = re.compile(r"<[^>]*>")
_SPLIT = re.compile(r"[^0-9a-z]+")

# leftovers of HTML entities and wiki markup once tags are stripped
MARKUP_TOKENS = frozenset({"nbsp", "amp", "quot", "lt", "gt", "br", "ndash", "mdash", "ref"})
STOPWORDS = frozenset(ENGLISH_STOP_WORDS)


def tokenize(text):
    """Lowercase, strip tags, split on non-alphanumerics, drop stopwords and markup."""
    if not text:
        return []
    text = _TAG.sub(" ", text.lower())
    return [tok for tok in _SPLIT.split(text) if tok and tok not in STOPWORDS and tok not in MARKUP_TOKENS]


def normalize_heading(text):
    """Canonical form of a column heading used as a single heading term."""
    return " ".join(_SPLIT.split(_TAG.sub(" ", (text or "").lower()))).strip()
