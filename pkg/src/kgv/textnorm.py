"""Surface-string normalization shared by the graph, extractor, and matcher."""

import re

_ARTICLE = re.compile(r"^(?:the|a|an)\s+")
_WS = re.compile(r"\s+")
_EDGE_PUNCT = " \t\n.,;:!?'\"()[]{}"


def normalize_mention(text: str) -> str:
    """Canonicalize a surface string.

    Lowercases, trims surrounding whitespace/punctuation, collapses internal
    whitespace, and strips one leading article (the/a/an).
    """
    t = _WS.sub(" ", text.lower()).strip(_EDGE_PUNCT)
    t = _ARTICLE.sub("", t)
    return t.strip(_EDGE_PUNCT)


def canonical_id(name: str) -> str:
    """Canonical entity identifier for a display name."""
    return normalize_mention(name).replace(" ", "_")


def predicate_label(predicate: str) -> str:
    """Title-cased display form of a predicate, e.g. ``located_in`` -> ``Located In``."""
    return predicate.replace("_", " ").title()


def predicate_words(predicate: str) -> str:
    """Lowercase spaced form of a predicate, e.g. ``landmark_type`` -> ``landmark type``."""
    return predicate.replace("_", " ")
