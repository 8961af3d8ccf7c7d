"""Resolution of caption mentions against the graph.

Exact matching compares normalized surface forms; fuzzy matching scores the
mention against every entity name and alias, either through an embedding
service or the built-in character-trigram cosine fallback. Mentions whose
best score clears the confidence threshold land in the verified set V, the
rest in the potentially-hallucinated set H.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .errors import EmptyGraph
from .extract import EntityMention
from .kg import KnowledgeGraph
from .textnorm import normalize_mention

DEFAULT_THRESHOLD = 0.85


@dataclass(frozen=True)
class EntityMatch:
    mention: EntityMention
    entity_id: Optional[str]
    score: float
    method: str  # exact | fuzzy | none


@dataclass(frozen=True)
class MatcherConfig:
    threshold: float = DEFAULT_THRESHOLD
    embedder: str = "trigram_fallback"  # trigram_fallback | service
    service_endpoint: Optional[str] = None

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")
        if self.embedder not in ("trigram_fallback", "service"):
            raise ValueError(f"unknown embedder {self.embedder!r}")


def exact_match(mention: EntityMention, graph: KnowledgeGraph) -> Optional[EntityMatch]:
    eid = graph.resolve_surface(mention.normalized)
    if eid is None:
        return None
    return EntityMatch(mention, eid, 1.0, "exact")


def _trigrams(s: str) -> Counter:
    return Counter(s[i:i + 3] for i in range(len(s) - 2))


def trigram_cosine(a: str, b: str) -> float:
    """Cosine similarity of character-trigram count vectors (no padding).

    Both strings are normalized first. Strings shorter than three characters
    fall back to exact equality.
    """
    na, nb = normalize_mention(a), normalize_mention(b)
    if len(na) < 3 or len(nb) < 3:
        return 1.0 if na == nb else 0.0
    va, vb = _trigrams(na), _trigrams(nb)
    dot = sum(count * vb[gram] for gram, count in va.items())
    if dot == 0:
        return 0.0
    norm = math.sqrt(sum(c * c for c in va.values())) * math.sqrt(sum(c * c for c in vb.values()))
    return dot / norm


def _candidate_forms(graph: KnowledgeGraph) -> List[Tuple[str, str]]:
    forms = []
    for eid in sorted(graph.entities):
        for surface in graph.entities[eid].surface_forms():
            forms.append((eid, surface))
    return forms


def _service_scores(mention_text: str, forms: List[Tuple[str, str]], client) -> List[float]:
    texts = [mention_text] + [surface for _, surface in forms]
    vectors, signed = client.embed_text(texts)
    query = vectors[0]
    qnorm = math.sqrt(sum(x * x for x in query))
    scores = []
    for vec in vectors[1:]:
        vnorm = math.sqrt(sum(x * x for x in vec))
        cos = (sum(q * v for q, v in zip(query, vec)) / (qnorm * vnorm)
               if qnorm and vnorm else 0.0)
        if signed:
            cos = (1.0 + cos) / 2.0
        scores.append(min(1.0, max(0.0, cos)))
    return scores


def fuzzy_match(mention: EntityMention, graph: KnowledgeGraph,
                config: MatcherConfig, embed_client=None) -> EntityMatch:
    """Best-scoring entity for a mention that had no exact hit.

    Each entity is scored as the max over its name and aliases; the winning
    entity is the score argmax, ties broken by lexicographically smallest id.
    """
    if not graph.entities:
        raise EmptyGraph("cannot fuzzy-match against an empty graph")
    forms = _candidate_forms(graph)
    if config.embedder == "service":
        scores = _service_scores(mention.text, forms, embed_client)
    else:
        scores = [trigram_cosine(mention.normalized, surface) for _, surface in forms]
    best = {}
    for (eid, _), score in zip(forms, scores):
        if score > best.get(eid, -1.0):
            best[eid] = score
    winner = min(best, key=lambda eid: (-best[eid], eid))
    return EntityMatch(mention, winner, best[winner], "fuzzy")


def partition_entities(mentions: List[EntityMention], graph: KnowledgeGraph,
                       config: MatcherConfig, embed_client=None
                       ) -> Tuple[List[EntityMatch], List[EntityMatch]]:
    """Resolve every mention and split into (verified V, hallucinated H).

    A match is verified iff its score is >= config.threshold. Input order is
    preserved within each output list.
    """
    verified, hallucinated = [], []
    for mention in mentions:
        match = exact_match(mention, graph)
        if match is None:
            match = fuzzy_match(mention, graph, config, embed_client)
        (verified if match.score >= config.threshold else hallucinated).append(match)
    return verified, hallucinated
