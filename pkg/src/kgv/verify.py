"""Claim derivation from captions and verification against the graph.

Claims come in four kinds: entity (existence), location (spatial
containment), attribute (property values), and relationship (keyword-mapped
predicates). Verification dispatches over the three representation formats;
the cross-validated strategy consults triples first, then the containment
hierarchy, then bullet facts, keeping the first decisive verdict.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import UnknownEntity
from .kg import KnowledgeGraph, find_paths
from .match import DEFAULT_THRESHOLD, EntityMatch
from .textnorm import normalize_mention
from .views import BulletFact, HierChild, HierNode, to_bullets, to_hierarchy

CLAIM_KINDS = ("entity", "location", "attribute", "relationship")
STRATEGIES = ("triples_only", "hierarchical_only", "bullets_only", "cross_validated")

MAX_CONTAINMENT_HOPS = 3
HOP_DECAY = 0.95
# matches scoring below this are too unreliable to anchor a non-entity claim
RESOLUTION_FLOOR = 0.5

DEFAULT_KEYWORD_PREDICATES = {"capital": "capital_of"}

_LOCATION_CUE = re.compile(r"\blocated\s+in\b|\bin\b", re.IGNORECASE)
_SENTENCE_END = re.compile(r"[.!?]")
_IS_A = re.compile(r"^\W*is\s+(?:a|an)\s+", re.IGNORECASE)
_COMMA_A = re.compile(r"^\s*,\s*(?:a|an)\s+", re.IGNORECASE)

LOCATION_CATEGORIES = {"GPE", "LOC", "FAC"}


@dataclass(frozen=True)
class Claim:
    kind: str
    subject: EntityMatch
    object: Optional[Union[EntityMatch, str]] = None
    predicate: Optional[str] = None
    source_span: Tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Verdict:
    status: str  # confirmed | refuted | unverifiable
    confidence: float
    evidence: Tuple = ()
    format_used: str = "entity_match"  # triple | hierarchical | bullet | entity_match


@dataclass(frozen=True)
class ClaimCounts:
    nec: int = 0
    nlc: int = 0
    nac: int = 0
    nrc: int = 0
    ncv: int = 0

    @property
    def ntc(self) -> int:
        return self.nec + self.nlc + self.nac + self.nrc

    def as_dict(self) -> Dict[str, int]:
        return {"NEC": self.nec, "NLC": self.nlc, "NAC": self.nac,
                "NRC": self.nrc, "NCV": self.ncv, "NTC": self.ntc}


@dataclass(frozen=True)
class VerificationReport:
    claims: Tuple[Tuple[Claim, Verdict], ...]
    verified_entities: Tuple[EntityMatch, ...]
    hallucinated_entities: Tuple[EntityMatch, ...]
    counts: ClaimCounts


def _sentences(caption: str) -> List[Tuple[int, int]]:
    spans, start = [], 0
    for m in _SENTENCE_END.finditer(caption):
        spans.append((start, m.start()))
        start = m.end()
    if start < len(caption):
        spans.append((start, len(caption)))
    return spans


def _attribute_values(graph: KnowledgeGraph) -> Dict[str, str]:
    # normalized object surface -> entity id, for attribute/structural relations
    values = {}
    for rel in graph.relations:
        if rel.kind in ("attribute", "structural"):
            obj = graph.entity(rel.object)
            for form in obj.surface_forms():
                values[normalize_mention(form)] = rel.object
    return values


def extract_claims(caption: str, matches: Sequence[EntityMatch], graph: KnowledgeGraph,
                   keyword_predicates: Optional[Dict[str, str]] = None,
                   threshold: float = DEFAULT_THRESHOLD) -> List[Claim]:
    """Derive claims from a caption with deterministic surface rules.

    Rules, applied per sentence:
      (a) one entity claim per mention;
      (b) a location claim for each ``located in``/``in`` cue (nearest mention
          before the cue as subject, nearest location-category mention after it
          as object) and for comma-adjacent location-category mention pairs;
      (c) an attribute claim when a mention is followed by ``is a/an <value>``
          or ``, a <value>`` and <value> matches an attribute/structural
          object known to the graph;
      (d) a relationship claim per keyword cue (default ``capital`` ->
          ``capital_of``) between the nearest verified mentions around it.
    """
    keywords = (DEFAULT_KEYWORD_PREDICATES if keyword_predicates is None
                else keyword_predicates)
    matches = sorted(matches, key=lambda m: m.mention.start)
    claims: List[Claim] = [
        Claim("entity", m, source_span=m.mention.span) for m in matches]
    seen_rel = set()
    attr_values = _attribute_values(graph)

    def before(pos: int, pool) -> Optional[EntityMatch]:
        prior = [m for m in pool if m.mention.end <= pos]
        return prior[-1] if prior else None

    def after(pos: int, pool) -> Optional[EntityMatch]:
        later = [m for m in pool if m.mention.start >= pos]
        return later[0] if later else None

    for s_start, s_end in _sentences(caption):
        in_sentence = [m for m in matches
                       if m.mention.start >= s_start and m.mention.end <= s_end]
        locs = [m for m in in_sentence if m.mention.category in LOCATION_CATEGORIES]

        # (b) explicit location cues
        for cue in _LOCATION_CUE.finditer(caption, s_start, s_end):
            subject = before(cue.start(), in_sentence)
            obj = after(cue.end(), locs)
            if subject is None or obj is None or subject is obj:
                continue
            key = (subject.mention.span, "located_in", obj.mention.span)
            if key not in seen_rel:
                seen_rel.add(key)
                claims.append(Claim(
                    "location", subject, obj, "located_in",
                    (subject.mention.start, obj.mention.end)))

        # (b) comma adjacency between location-category mentions
        for left, right in zip(locs, locs[1:]):
            gap = caption[left.mention.end:right.mention.start]
            if gap.strip() != ",":
                continue
            key = (left.mention.span, "located_in", right.mention.span)
            if key not in seen_rel:
                seen_rel.add(key)
                claims.append(Claim(
                    "location", left, right, "located_in",
                    (left.mention.start, right.mention.end)))

        # (c) attribute cues after a mention
        for m in in_sentence:
            tail = caption[m.mention.end:s_end]
            cue = _IS_A.match(tail) or _COMMA_A.match(tail)
            if not cue:
                continue
            rest = tail[cue.end():]
            words = [w for w in re.findall(r"[\w'\-]+", rest[:120])]
            value = None
            for k in range(min(len(words), 6), 0, -1):
                candidate = " ".join(words[:k])
                if normalize_mention(candidate) in attr_values:
                    value = normalize_mention(candidate)
                    break
            if value is not None:
                claims.append(Claim(
                    "attribute", m, value, None, (m.mention.start, s_end)))

        # (d) keyword-mapped relationship cues
        verified = [m for m in in_sentence if m.score >= threshold]
        for keyword, predicate in sorted(keywords.items()):
            for cue in re.finditer(rf"\b{re.escape(keyword)}\b", caption[s_start:s_end],
                                   re.IGNORECASE):
                pos = s_start + cue.start()
                subject = before(pos, verified)
                obj = after(s_start + cue.end(), verified)
                if subject is None or obj is None or subject is obj:
                    continue
                key = (subject.mention.span, predicate, obj.mention.span)
                if key not in seen_rel:
                    seen_rel.add(key)
                    claims.append(Claim(
                        "relationship", subject, obj, predicate,
                        (subject.mention.start, obj.mention.end)))

    kind_rank = {k: i for i, k in enumerate(CLAIM_KINDS)}
    claims.sort(key=lambda c: (kind_rank[c.kind], c.source_span))
    return claims


def _resolved(part) -> Optional[str]:
    if isinstance(part, EntityMatch):
        if part.entity_id is None or part.score < RESOLUTION_FLOOR:
            return None
        return part.entity_id
    return None


def _object_id(graph: KnowledgeGraph, claim: Claim) -> Optional[str]:
    if isinstance(claim.object, EntityMatch):
        return _resolved(claim.object)
    if isinstance(claim.object, str):
        return graph.resolve_surface(normalize_mention(claim.object))
    return None


def verify_triple(graph: KnowledgeGraph, claim: Claim) -> Verdict:
    """Check a claim against the flat triple store.

    Confirmed on an exact triple, or (for containment predicates) on a
    directed containment path of at most three hops. Refuted only when the
    predicate is functional and a conflicting triple exists. Attribute claims
    (no predicate) are confirmed by any relation from subject to the value's
    entity.
    """
    subject = _resolved(claim.subject)
    obj = _object_id(graph, claim)
    if subject is None or obj is None:
        return Verdict("unverifiable", 0.0, (), "triple")
    graph.entity(subject)
    graph.entity(obj)

    if claim.predicate is None:
        hits = tuple(r for r in graph.outgoing(subject) if r.object == obj)
        if hits:
            return Verdict("confirmed", 1.0, hits, "triple")
        return Verdict("unverifiable", 0.0, (), "triple")

    if graph.has_triple(subject, claim.predicate, obj):
        evidence = tuple(r for r in graph.outgoing(subject)
                         if r.predicate == claim.predicate and r.object == obj)
        return Verdict("confirmed", 1.0, evidence, "triple")

    if claim.predicate in graph.containment_predicates and subject != obj:
        paths = find_paths(graph, subject, obj, MAX_CONTAINMENT_HOPS,
                           frozenset(graph.containment_predicates))
        paths = [p for p in paths if p]
        if paths:
            hops = len(paths[0])
            return Verdict("confirmed", HOP_DECAY ** (hops - 1), tuple(paths), "triple")

    if claim.predicate in graph.functional_predicates:
        conflicts = tuple(r for r in graph.outgoing(subject)
                          if r.predicate == claim.predicate and r.object != obj)
        if conflicts:
            return Verdict("refuted", 1.0, conflicts, "triple")
    return Verdict("unverifiable", 0.0, (), "triple")


def verify_hierarchical(graph: KnowledgeGraph, claim: Claim) -> Verdict:
    """Check a location claim on the nested containment view.

    Confirmed iff the claim's object is a containment ancestor of the
    subject, found by walking containment edges of the subject-rooted
    hierarchy. Confidence is 1.0 at depth one and decays 0.95 per extra hop.
    """
    subject = _resolved(claim.subject)
    obj = _object_id(graph, claim)
    if subject is None or obj is None:
        return Verdict("unverifiable", 0.0, (), "hierarchical")
    target = graph.display_name(obj)
    containment = set(graph.containment_predicates)
    root = to_hierarchy(graph, subject)

    # breadth-first over containment edges so the shallowest occurrence wins
    frontier: List[Tuple[HierNode, int, Tuple[str, ...]]] = [(root, 0, (root.label,))]
    found = None
    while frontier and found is None:
        next_frontier = []
        for node, depth, trail in frontier:
            for child in node.children:
                if child.predicate not in containment or child.node.is_reference:
                    continue
                step = trail + (f"{child.edge_label}: {child.node.label}",)
                if child.node.label == target and subject != obj:
                    found = (depth + 1, step)
                    break
                next_frontier.append((child.node, depth + 1, step))
            if found:
                break
        frontier = next_frontier
    if found and found[0] <= MAX_CONTAINMENT_HOPS:
        depth, trail = found
        return Verdict("confirmed", HOP_DECAY ** (depth - 1), trail, "hierarchical")
    return Verdict("unverifiable", 0.0, (), "hierarchical")


def verify_bullet(graph: KnowledgeGraph, claim: Claim) -> Verdict:
    """Check an attribute claim against the subject's bullet facts."""
    subject = _resolved(claim.subject)
    if subject is None or claim.object is None:
        return Verdict("unverifiable", 0.0, (), "bullet")
    if isinstance(claim.object, EntityMatch):
        value = claim.object.mention.normalized
    else:
        value = normalize_mention(claim.object)
    hits = tuple(f for f in to_bullets(graph, subject)
                 if normalize_mention(f.value) == value)
    if hits:
        return Verdict("confirmed", 1.0, hits, "bullet")
    return Verdict("unverifiable", 0.0, (), "bullet")


def _dispatch(graph: KnowledgeGraph, claim: Claim, strategy: str) -> Verdict:
    routes = {
        "location": {"triples_only": (verify_triple,),
                     "hierarchical_only": (verify_hierarchical,),
                     "bullets_only": (),
                     "cross_validated": (verify_triple, verify_hierarchical)},
        "attribute": {"triples_only": (verify_triple,),
                      "hierarchical_only": (),
                      "bullets_only": (verify_bullet,),
                      "cross_validated": (verify_triple, verify_bullet)},
        "relationship": {"triples_only": (verify_triple,),
                         "hierarchical_only": (),
                         "bullets_only": (),
                         "cross_validated": (verify_triple,)},
    }
    fallback_format = {"triples_only": "triple", "hierarchical_only": "hierarchical",
                       "bullets_only": "bullet", "cross_validated": "triple"}
    verdict = Verdict("unverifiable", 0.0, (), fallback_format[strategy])
    for checker in routes[claim.kind][strategy]:
        verdict = checker(graph, claim)
        if verdict.status != "unverifiable":
            return verdict
    return verdict


def verify_claims(graph: KnowledgeGraph, claims: Sequence[Claim],
                  strategy: str = "cross_validated",
                  threshold: float = DEFAULT_THRESHOLD,
                  matches: Optional[Sequence[EntityMatch]] = None) -> VerificationReport:
    """Verify every claim under a strategy and assemble the report.

    Entity claims are judged by their match: confirmed iff the match is in V
    (score >= threshold). Other claim kinds dispatch per strategy.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    judged: List[Tuple[Claim, Verdict]] = []
    counts = {"entity": 0, "location": 0, "attribute": 0, "relationship": 0}
    ncv = 0
    for claim in claims:
        counts[claim.kind] += 1
        if claim.kind == "entity":
            m = claim.subject
            if m.entity_id is not None and m.score >= threshold:
                verdict = Verdict("confirmed", m.score,
                                  (f"matched:{m.entity_id}",), "entity_match")
            else:
                verdict = Verdict("unverifiable", m.score, (), "entity_match")
        else:
            verdict = _dispatch(graph, claim, strategy)
        if verdict.status == "confirmed":
            ncv += 1
        judged.append((claim, verdict))

    if matches is None:
        pool, seen = [], set()
        for claim in claims:
            if claim.kind == "entity" and claim.subject.mention.span not in seen:
                seen.add(claim.subject.mention.span)
                pool.append(claim.subject)
        matches = pool
    verified = tuple(m for m in matches if m.entity_id is not None and m.score >= threshold)
    hallucinated = tuple(m for m in matches if m not in verified)

    return VerificationReport(
        claims=tuple(judged),
        verified_entities=verified,
        hallucinated_entities=hallucinated,
        counts=ClaimCounts(nec=counts["entity"], nlc=counts["location"],
                           nac=counts["attribute"], nrc=counts["relationship"], ncv=ncv),
    )
