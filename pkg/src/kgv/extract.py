"""Entity mention extraction from captions.

Two interchangeable extractors: a deterministic gazetteer scan over the
graph's entity names/aliases, and an external NER service speaking a small
JSON protocol (HTTP POST or a line-oriented subprocess). ``merged`` mode
unions both, preferring the longer span on overlap.
"""

from __future__ import annotations

import json
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

import requests

from .errors import ProtocolError, ServiceUnavailable
from .kg import CATEGORIES, KnowledgeGraph
from .textnorm import normalize_mention

DEFAULT_CATEGORIES = frozenset({"FAC", "GPE", "ORG", "LOC"})

_WORD = re.compile(r"\w[\w'\-]*")


@dataclass(frozen=True)
class EntityMention:
    text: str
    normalized: str
    category: str
    start: int
    end: int

    @property
    def span(self) -> Tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class ExtractorConfig:
    mode: str = "gazetteer"  # gazetteer | external_service | merged
    service_endpoint: Optional[str] = None
    categories: FrozenSet[str] = DEFAULT_CATEGORIES
    timeout: float = 10.0

    def __post_init__(self):
        if self.mode not in ("gazetteer", "external_service", "merged"):
            raise ValueError(f"unknown extractor mode {self.mode!r}")


def gazetteer_extract(caption: str, graph: KnowledgeGraph) -> List[EntityMention]:
    """Longest-match, left-to-right scan against entity names and aliases.

    Comparison is on normalized text and spans are word-token aligned, so
    leading articles and trailing punctuation inside a candidate window are
    tolerated. Emitted spans never overlap.
    """
    index = graph.surface_index()
    max_words = 1 + max((len(key.split()) for key in index), default=1)
    tokens = [(m.start(), m.end()) for m in _WORD.finditer(caption)]
    mentions: List[EntityMention] = []
    i = 0
    while i < len(tokens):
        hit = None
        for j in range(min(len(tokens), i + max_words) - 1, i - 1, -1):
            raw = caption[tokens[i][0]:tokens[j][1]]
            eid = index.get(normalize_mention(raw))
            if eid is not None:
                hit = (j, raw, eid)
                break
        if hit is None:
            i += 1
            continue
        j, raw, eid = hit
        mentions.append(EntityMention(
            text=raw,
            normalized=normalize_mention(raw),
            category=graph.entity(eid).category,
            start=tokens[i][0],
            end=tokens[j][1],
        ))
        i = j + 1
    return mentions


def _mention_from_service(caption: str, item: dict) -> EntityMention:
    for key in ("text", "label", "start", "end"):
        if key not in item:
            raise ProtocolError(f"NER reply entity missing {key!r}")
    start, end = item["start"], item["end"]
    if not (isinstance(start, int) and isinstance(end, int)
            and 0 <= start < end <= len(caption)):
        raise ProtocolError(f"NER reply span {start!r}:{end!r} out of range")
    label = item["label"] if item["label"] in CATEGORIES else "OTHER"
    return EntityMention(
        text=item["text"],
        normalized=normalize_mention(item["text"]),
        category=label,
        start=start,
        end=end,
    )


def _call_ner_http(caption: str, endpoint: str, timeout: float) -> dict:
    try:
        resp = requests.post(endpoint, json={"text": caption}, timeout=timeout)
    except requests.RequestException as exc:
        raise ServiceUnavailable(f"NER service at {endpoint}: {exc}") from exc
    if resp.status_code != 200:
        raise ServiceUnavailable(f"NER service at {endpoint}: HTTP {resp.status_code}")
    try:
        return resp.json()
    except ValueError as exc:
        raise ProtocolError(f"NER service returned non-JSON reply: {exc}") from exc


def _call_ner_stdio(caption: str, command: str, timeout: float) -> dict:
    try:
        proc = subprocess.run(
            shlex.split(command), input=json.dumps({"text": caption}) + "\n",
            capture_output=True, text=True, timeout=timeout)
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise ServiceUnavailable(f"NER subprocess {command!r}: {exc}") from exc
    if proc.returncode != 0:
        raise ServiceUnavailable(
            f"NER subprocess {command!r} exited {proc.returncode}: {proc.stderr.strip()}")
    line = proc.stdout.splitlines()[0] if proc.stdout.splitlines() else ""
    try:
        return json.loads(line)
    except ValueError as exc:
        raise ProtocolError(f"NER subprocess reply is not JSON: {line!r}") from exc


def service_extract(caption: str, config: ExtractorConfig,
                    ner_client=None) -> List[EntityMention]:
    """Query the configured NER service and map its reply into mentions."""
    if ner_client is not None:
        reply = ner_client.ner(caption)
    elif config.service_endpoint is None:
        raise ServiceUnavailable("no NER endpoint configured")
    elif config.service_endpoint.startswith("stdio:"):
        reply = _call_ner_stdio(caption, config.service_endpoint[len("stdio:"):],
                                config.timeout)
    else:
        reply = _call_ner_http(caption, config.service_endpoint, config.timeout)
    if not isinstance(reply, dict) or not isinstance(reply.get("entities"), list):
        raise ProtocolError(f"malformed NER reply: {reply!r}")
    return [_mention_from_service(caption, item) for item in reply["entities"]]


def _drop_overlaps(mentions: List[EntityMention]) -> List[EntityMention]:
    # longer span wins; ties broken by earliest start
    chosen: List[EntityMention] = []
    for m in sorted(mentions, key=lambda m: (-(m.end - m.start), m.start)):
        if all(m.end <= c.start or m.start >= c.end for c in chosen):
            chosen.append(m)
    return sorted(chosen, key=lambda m: m.start)


def extract_entities(caption: str, config: ExtractorConfig, graph: KnowledgeGraph,
                     ner_client=None) -> List[EntityMention]:
    """Extract mentions per the configured mode, filtered and span-sorted."""
    if config.mode == "gazetteer":
        mentions = gazetteer_extract(caption, graph)
    elif config.mode == "external_service":
        mentions = service_extract(caption, config, ner_client)
    else:
        by_span: Dict[Tuple[int, int], EntityMention] = {}
        for m in service_extract(caption, config, ner_client):
            by_span[m.span] = m
        for m in gazetteer_extract(caption, graph):
            by_span[m.span] = m  # graph category is authoritative on span ties
        mentions = _drop_overlaps(list(by_span.values()))
    mentions = [m for m in mentions if m.category in config.categories]
    return sorted(mentions, key=lambda m: m.start)
