"""Caption correction: prompt assembly for a generation service, plus the
deterministic template fallback.

Template rules, applied in order:
  1. a hallucinated mention whose best fuzzy score lies in
     [0.5, threshold) is replaced by the matched entity's display name;
  2. a hallucinated mention scoring below 0.5 is deleted, together with an
     immediately preceding article and dangling connective;
  3. the object span of a refuted location claim is replaced by the correct
     object from the graph (functional predicate lookup).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .errors import EmptyGeneration
from .kg import KnowledgeGraph
from .match import DEFAULT_THRESHOLD, EntityMatch
from .verify import VerificationReport
from .views import render, to_bullets, to_hierarchy, to_triples

REPLACE_FLOOR = 0.5

SYSTEM_TEXT = (
    "You rewrite image captions so every factual statement agrees with the "
    "provided knowledge. Keep the caption fluent and concise; never invent "
    "entities that are not in the facts or the original caption."
)


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    facts_format: str  # triple | hierarchical | bullet


@dataclass(frozen=True)
class CorrectionResult:
    corrected_caption: str
    method: str  # generated | templated
    replacements: Tuple[Tuple[str, str], ...] = ()


def _containment_roots(graph: KnowledgeGraph, ids: List[str]) -> List[str]:
    """Verified ids that are not containment descendants of another verified id."""
    containment = set(graph.containment_predicates)
    descendants = set()
    for eid in ids:
        stack = [eid]
        seen = {eid}
        while stack:
            for rel in graph.outgoing(stack.pop()):
                if rel.predicate in containment and rel.object not in seen:
                    seen.add(rel.object)
                    descendants.add(rel.object)
                    stack.append(rel.object)
    return [eid for eid in ids if eid not in descendants]


def _facts_text(graph: KnowledgeGraph, verified_ids: List[str], facts_format: str) -> str:
    if facts_format == "triple":
        triples = [t for t in to_triples(graph)
                   if any(graph.display_name(eid) == t.subject for eid in verified_ids)]
        return render(triples)
    if facts_format == "hierarchical":
        blocks = [render(to_hierarchy(graph, eid))
                  for eid in _containment_roots(graph, verified_ids)]
        return "\n".join(b for b in blocks if b)
    if facts_format == "bullet":
        blocks = [render(to_bullets(graph, eid)) for eid in verified_ids]
        return "\n".join(b for b in blocks if b)
    raise ValueError(f"unknown facts format {facts_format!r}")


def assemble_prompt(caption: str, report: VerificationReport, facts_format: str,
                    graph: KnowledgeGraph) -> PromptBundle:
    """Deterministic prompt embedding the caption, rendered facts, and the
    list of unmatched mentions to remove or replace."""
    verified_ids = sorted({m.entity_id for m in report.verified_entities
                           if m.entity_id is not None})
    facts = _facts_text(graph, verified_ids, facts_format)
    lines = ["Original caption:", caption, "", "Verified facts:", facts or "(none)"]
    if report.hallucinated_entities:
        lines += ["", "Mentions not supported by the knowledge base "
                      "(remove or replace them):"]
        lines += [f"- {m.mention.text}" for m in report.hallucinated_entities]
    lines += ["", "Rewrite the caption so it states only supported facts."]
    return PromptBundle(SYSTEM_TEXT, "\n".join(lines), facts_format)


def generate_correction(client, bundle: PromptBundle) -> CorrectionResult:
    """Ask a generation service for the corrected caption."""
    text = client.generate(bundle.system_text, bundle.user_text)
    if not text or not text.strip():
        raise EmptyGeneration("generation service returned a blank caption")
    return CorrectionResult(text.strip(), "generated", ())


_ARTICLE_BEFORE = re.compile(r"(?:\b(?:the|a|an)\s+)$", re.IGNORECASE)
_CONNECTIVE_BEFORE = re.compile(r"(?:\b(?:and|or)\s+|,\s*)$", re.IGNORECASE)


def _deletion_span(caption: str, start: int, end: int) -> Tuple[int, int]:
    left = caption[:start]
    m = _ARTICLE_BEFORE.search(left)
    if m:
        start = m.start()
        left = caption[:start]
    m = _CONNECTIVE_BEFORE.search(left)
    if m:
        start = m.start()
    return start, end


def _tidy(text: str) -> str:
    text = re.sub(r"\s+", " ", text)
    text = re.sub(r"\s+([,.;:!?])", r"\1", text)
    text = re.sub(r"([,;:])\s*(?=[,.;:!?])", "", text)
    text = re.sub(r"^\s*[,.;:]\s*", "", text)
    return text.strip()


def template_correct(caption: str, report: VerificationReport, graph: KnowledgeGraph,
                     threshold: float = DEFAULT_THRESHOLD) -> CorrectionResult:
    """Apply the ordered template rules; deterministic and trace-auditable."""
    edits: List[Tuple[int, int, int, int, str]] = []  # span + extended span + new text

    for m in report.hallucinated_entities:
        start, end = m.mention.span
        if m.method == "fuzzy" and m.entity_id and REPLACE_FLOOR <= m.score < threshold:
            edits.append((start, end, start, end, graph.display_name(m.entity_id)))
        else:
            ds, de = _deletion_span(caption, start, end)
            edits.append((start, end, ds, de, ""))

    edited_spans = {(e[0], e[1]) for e in edits}
    for claim, verdict in report.claims:
        if claim.kind != "location" or verdict.status != "refuted":
            continue
        if not isinstance(claim.object, EntityMatch) or claim.subject.entity_id is None:
            continue
        start, end = claim.object.mention.span
        if (start, end) in edited_spans:
            continue
        correct = graph.objects_of(claim.subject.entity_id, claim.predicate)
        if not correct:
            continue
        edits.append((start, end, start, end, graph.display_name(correct[0])))
        edited_spans.add((start, end))

    replacements: List[Tuple[str, str]] = []
    corrected = caption
    for start, end, ext_start, ext_end, new in sorted(edits, key=lambda e: -e[2]):
        replacements.append((caption[start:end], new))
        corrected = corrected[:ext_start] + new + corrected[ext_end:]
    replacements.reverse()  # report in caption order

    return CorrectionResult(_tidy(corrected), "templated", tuple(replacements))
