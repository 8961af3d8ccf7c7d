"""End-to-end orchestration: corpus I/O, dataset splits, the per-record
five-hop pipeline, run directories with traces, and format comparison.

Each record yields exactly one trace even when a hop fails; the failed hop
records its error and later hops are skipped. Trace files and metrics are
deterministic for fixed inputs with replay clients (wall-clock timings stay
in memory and are not serialized).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import correct as correct_mod
from .errors import (
    BadRatios,
    EmptyGeneration,
    KgvError,
    SchemaError,
    ServiceUnavailable,
)
from .extract import DEFAULT_CATEGORIES, EntityMention, ExtractorConfig, extract_entities
from .kg import KnowledgeGraph, Relation
from .match import EntityMatch, MatcherConfig, partition_entities
from .metrics import (
    EntityGold,
    FlaggedMention,
    HallucinationFlags,
    MetricsSummary,
    RecordMetricsInput,
    aggregate_metrics,
    flag_hallucinations,
)
from .verify import Claim, ClaimCounts, VerificationReport, extract_claims, verify_claims
from .views import BulletFact

SPLITS = ("seen", "unseen", "distractor")
HOPS = ("caption", "extract", "match", "verify", "correct")

DEFAULT_CAPTION_PROMPT = "Describe this image in one factual sentence."


@dataclass(frozen=True)
class CaptionRecord:
    id: str
    image: Optional[str] = None
    baseline_caption: Optional[str] = None
    split: Optional[str] = None
    gold: Optional[Tuple[EntityGold, ...]] = None
    coherence: Optional[float] = None

    def __post_init__(self):
        if self.image is None and self.baseline_caption is None:
            raise SchemaError(f"record {self.id!r}: needs image or baseline_caption")
        if self.split is not None and self.split not in SPLITS:
            raise SchemaError(f"record {self.id!r}: unknown split {self.split!r}")


_RECORD_FIELDS = {"id", "image", "baseline_caption", "split", "gold", "coherence"}


def record_from_dict(raw: dict, where: str = "record") -> CaptionRecord:
    if not isinstance(raw, dict):
        raise SchemaError("record must be a JSON object", location=where)
    unknown = set(raw) - _RECORD_FIELDS
    if unknown:
        raise SchemaError(f"unknown fields {sorted(unknown)}", location=where)
    if not isinstance(raw.get("id"), str) or not raw["id"]:
        raise SchemaError("missing or invalid 'id'", location=where)
    gold = None
    if raw.get("gold") is not None:
        if not isinstance(raw["gold"], list):
            raise SchemaError("'gold' must be a list", location=where)
        items = []
        for i, g in enumerate(raw["gold"]):
            if not isinstance(g, dict) or set(g) != {"text", "label"}:
                raise SchemaError("gold entries need exactly 'text' and 'label'",
                                  location=f"{where}.gold[{i}]")
            try:
                items.append(EntityGold(g["text"], g["label"]))
            except ValueError as exc:
                raise SchemaError(str(exc), location=f"{where}.gold[{i}]") from exc
        gold = tuple(items)
    try:
        return CaptionRecord(
            id=raw["id"], image=raw.get("image"),
            baseline_caption=raw.get("baseline_caption"),
            split=raw.get("split"), gold=gold, coherence=raw.get("coherence"))
    except SchemaError as exc:
        raise SchemaError(str(exc), location=where) from exc


def record_to_dict(record: CaptionRecord) -> dict:
    out = {"id": record.id}
    if record.image is not None:
        out["image"] = record.image
    if record.baseline_caption is not None:
        out["baseline_caption"] = record.baseline_caption
    if record.split is not None:
        out["split"] = record.split
    if record.gold is not None:
        out["gold"] = [{"text": g.text, "label": g.label} for g in record.gold]
    if record.coherence is not None:
        out["coherence"] = record.coherence
    return out


def load_corpus(path) -> List[CaptionRecord]:
    """Parse a JSONL corpus with line-anchored diagnostics."""
    records, ids = [], set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except ValueError as exc:
            raise SchemaError(f"invalid JSON: {exc}", location=f"line {lineno}") from exc
        record = record_from_dict(raw, where=f"line {lineno}")
        if record.id in ids:
            raise SchemaError(f"duplicate record id {record.id!r}",
                              location=f"line {lineno}")
        ids.add(record.id)
        records.append(record)
    return records


def save_corpus(records: Sequence[CaptionRecord], path) -> None:
    lines = [json.dumps(record_to_dict(r), sort_keys=True, ensure_ascii=False)
             for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def split_dataset(records: Sequence[CaptionRecord],
                  ratios: Tuple[float, float, float] = (0.6, 0.2, 0.2),
                  seed: int = 0, force: bool = False) -> List[CaptionRecord]:
    """Assign seen/unseen/distractor splits.

    Seeded shuffle, then proportional assignment with largest-remainder
    rounding. Records that already carry a split keep it unless ``force``.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios {ratios} must sum to 1")
    pending = [r for r in records if force or r.split is None]
    kept = {r.id: r.split for r in records if not force and r.split is not None}

    n = len(records)
    exact = [n * ratio for ratio in ratios]
    quota = [int(x) for x in exact]
    remainders = sorted(range(3), key=lambda i: (-(exact[i] - quota[i]), i))
    for i in remainders[: n - sum(quota)]:
        quota[i] += 1
    for split, existing in kept.items():
        idx = SPLITS.index(existing)
        quota[idx] = max(0, quota[idx] - 1)

    order = list(range(len(pending)))
    random.Random(seed).shuffle(order)
    assignment: Dict[str, str] = {}
    cursor = 0
    for idx, split in enumerate(SPLITS):
        for _ in range(quota[idx]):
            if cursor >= len(order):
                break
            assignment[pending[order[cursor]].id] = split
            cursor += 1
    # ratio rounding may leave stragglers when kept labels exceeded quotas
    for pos in order[cursor:]:
        assignment[pending[pos].id] = SPLITS[0]

    out = []
    for record in records:
        if record.id in assignment:
            out.append(dataclasses.replace(record, split=assignment[record.id]))
        else:
            out.append(record)
    return out


@dataclass(frozen=True)
class RunConfig:
    strategy: str = "cross_validated"
    facts_format: str = "bullet"
    threshold: float = 0.85
    extractor_mode: str = "gazetteer"
    ner_endpoint: Optional[str] = None
    correction: str = "template_only"  # template_only | service_with_template_fallback
    reverify_generated: bool = False
    parallelism: int = 1
    seed: int = 0
    categories: frozenset = DEFAULT_CATEGORIES
    caption_prompt: str = DEFAULT_CAPTION_PROMPT

    def matcher_config(self) -> MatcherConfig:
        return MatcherConfig(threshold=self.threshold)

    def extractor_config(self) -> ExtractorConfig:
        return ExtractorConfig(mode=self.extractor_mode,
                               service_endpoint=self.ner_endpoint,
                               categories=self.categories)

    def semantic_dict(self) -> dict:
        """Config fields that affect outputs (parallelism excluded)."""
        return {
            "strategy": self.strategy, "facts_format": self.facts_format,
            "threshold": self.threshold, "extractor_mode": self.extractor_mode,
            "ner_endpoint": self.ner_endpoint, "correction": self.correction,
            "reverify_generated": self.reverify_generated, "seed": self.seed,
            "categories": sorted(self.categories),
            "caption_prompt": self.caption_prompt,
        }


@dataclass
class HopResult:
    name: str
    status: str  # ok | failed | skipped | degenerate
    error: Optional[str] = None
    elapsed_s: float = 0.0


@dataclass
class PipelineTrace:
    record_id: str
    split: Optional[str]
    hops: List[HopResult] = field(default_factory=list)
    baseline_caption: Optional[str] = None
    mentions: List[EntityMention] = field(default_factory=list)
    verified: List[EntityMatch] = field(default_factory=list)
    hallucinated: List[EntityMatch] = field(default_factory=list)
    report: Optional[VerificationReport] = None
    prompt_user_text: Optional[str] = None
    corrected_caption: Optional[str] = None
    correction_method: Optional[str] = None
    replacements: List[Tuple[str, str]] = field(default_factory=list)
    correction_fallback: bool = False
    baseline_flags: Optional[HallucinationFlags] = None
    corrected_flags: Optional[HallucinationFlags] = None
    gold: Optional[Tuple[EntityGold, ...]] = None
    coherence: Optional[float] = None


def _evidence_json(item):
    if isinstance(item, Relation):
        return {"triple": [item.subject, item.predicate, item.object]}
    if isinstance(item, tuple):
        return [_evidence_json(x) for x in item]
    if isinstance(item, BulletFact):
        return {"bullet": [item.entity, item.attribute, item.value]}
    return str(item)


def _match_json(m: EntityMatch) -> dict:
    return {"text": m.mention.text, "normalized": m.mention.normalized,
            "category": m.mention.category, "span": list(m.mention.span),
            "entity_id": m.entity_id, "score": round(m.score, 9), "method": m.method}


def _flags_json(flags: Optional[HallucinationFlags]):
    if flags is None:
        return None
    return [{"text": f.text, "span": list(f.span), "criteria": list(f.criteria)}
            for f in flags.flagged]


def trace_to_dict(trace: PipelineTrace) -> dict:
    report = None
    if trace.report is not None:
        report = {
            "claims": [{
                "kind": claim.kind,
                "subject": _match_json(claim.subject),
                "object": (_match_json(claim.object)
                           if isinstance(claim.object, EntityMatch) else claim.object),
                "predicate": claim.predicate,
                "source_span": list(claim.source_span),
                "verdict": {"status": verdict.status,
                            "confidence": round(verdict.confidence, 9),
                            "format_used": verdict.format_used,
                            "evidence": [_evidence_json(e) for e in verdict.evidence]},
            } for claim, verdict in trace.report.claims],
            "counts": trace.report.counts.as_dict(),
        }
    return {
        "record_id": trace.record_id,
        "split": trace.split,
        "hops": [{"name": h.name, "status": h.status, "error": h.error}
                 for h in trace.hops],
        "baseline_caption": trace.baseline_caption,
        "mentions": [{"text": m.text, "normalized": m.normalized,
                      "category": m.category, "span": [m.start, m.end]}
                     for m in trace.mentions],
        "verified": [_match_json(m) for m in trace.verified],
        "hallucinated": [_match_json(m) for m in trace.hallucinated],
        "report": report,
        "prompt_user_text": trace.prompt_user_text,
        "corrected_caption": trace.corrected_caption,
        "correction_method": trace.correction_method,
        "correction_fallback": trace.correction_fallback,
        "replacements": [list(pair) for pair in trace.replacements],
        "baseline_flags": _flags_json(trace.baseline_flags),
        "corrected_flags": _flags_json(trace.corrected_flags),
        "gold": ([{"text": g.text, "label": g.label} for g in trace.gold]
                 if trace.gold is not None else None),
        "coherence": trace.coherence,
    }


def _analyze_caption(caption: str, graph: KnowledgeGraph, config: RunConfig,
                     ner_client=None, embed_client=None):
    """Extract, match, and verify one caption; shared by both pipeline sides."""
    mentions = extract_entities(caption, config.extractor_config(), graph, ner_client)
    verified, hallucinated = partition_entities(
        mentions, graph, config.matcher_config(), embed_client)
    matches = sorted(verified + hallucinated, key=lambda m: m.mention.start)
    claims = extract_claims(caption, matches, graph, threshold=config.threshold)
    report = verify_claims(graph, claims, config.strategy,
                           threshold=config.threshold, matches=matches)
    return mentions, verified, hallucinated, report


def run_pipeline(record: CaptionRecord, graph: KnowledgeGraph, config: RunConfig,
                 clients=None) -> PipelineTrace:
    """Execute the five hops for one record; failures stay inside the trace."""
    trace = PipelineTrace(record_id=record.id, split=record.split,
                          gold=record.gold, coherence=record.coherence)
    failed = False

    def run_hop(name: str, fn):
        nonlocal failed
        if failed:
            trace.hops.append(HopResult(name, "skipped"))
            return None
        started = time.perf_counter()
        try:
            result = fn()
        except KgvError as exc:
            failed = True
            trace.hops.append(HopResult(name, "failed", f"{type(exc).__name__}: {exc}",
                                        time.perf_counter() - started))
            return None
        trace.hops.append(HopResult(name, "ok", None, time.perf_counter() - started))
        return result

    def hop_caption():
        if record.baseline_caption is not None:
            return record.baseline_caption
        return clients.caption_image(record.image, config.caption_prompt)

    caption = run_hop("caption", hop_caption)
    trace.baseline_caption = caption
    if caption is not None and not caption.strip():
        trace.hops[-1].status = "degenerate"
        trace.mentions = []
        trace.report = verify_claims(graph, [], config.strategy,
                                     threshold=config.threshold, matches=[])
        trace.corrected_caption = caption
        trace.correction_method = "templated"
        trace.baseline_flags = HallucinationFlags(())
        trace.corrected_flags = HallucinationFlags(())
        for name in HOPS[1:]:
            trace.hops.append(HopResult(name, "skipped"))
        return trace

    ner_client = clients if clients is not None and hasattr(clients, "ner") else None
    analysis = run_hop("extract", lambda: _analyze_caption(
        caption, graph, config, ner_client=ner_client))
    if analysis is not None:
        mentions, verified, hallucinated, report = analysis
        trace.mentions = mentions
        trace.verified = list(verified)
        trace.hallucinated = list(hallucinated)
        trace.report = report
        trace.hops.append(HopResult("match", "ok"))
        trace.hops.append(HopResult("verify", "ok"))
        trace.baseline_flags = flag_hallucinations(
            caption, graph, config.matcher_config(), report)
    else:
        for name in ("match", "verify"):
            trace.hops.append(HopResult(name, "skipped"))
        report = None

    def hop_correct():
        bundle = correct_mod.assemble_prompt(caption, report, config.facts_format, graph)
        trace.prompt_user_text = bundle.user_text
        if config.correction == "service_with_template_fallback":
            try:
                return correct_mod.generate_correction(clients, bundle)
            except (ServiceUnavailable, EmptyGeneration):
                trace.correction_fallback = True
        return correct_mod.template_correct(caption, report, graph, config.threshold)

    if report is not None:
        result = run_hop("correct", hop_correct)
        if result is not None:
            trace.corrected_caption = result.corrected_caption
            trace.correction_method = result.method
            trace.replacements = list(result.replacements)
            try:
                _, _, _, corrected_report = _analyze_caption(
                    trace.corrected_caption, graph, config, ner_client=ner_client)
                trace.corrected_flags = flag_hallucinations(
                    trace.corrected_caption, graph, config.matcher_config(),
                    corrected_report)
            except KgvError as exc:
                trace.hops[-1].error = f"corrected-caption flagging: {exc}"
    else:
        trace.hops.append(HopResult("correct", "skipped"))
    return trace


def trace_metrics_input(trace: PipelineTrace) -> RecordMetricsInput:
    empty = HallucinationFlags(())
    counts = trace.report.counts if trace.report is not None else ClaimCounts()
    return RecordMetricsInput(
        record_id=trace.record_id,
        split=trace.split or "seen",
        counts=counts,
        baseline_matches=tuple(trace.verified) + tuple(trace.hallucinated),
        baseline_flags=trace.baseline_flags or empty,
        corrected_flags=trace.corrected_flags or empty,
        gold=trace.gold,
        coherence=trace.coherence,
    )


def canonical_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def run_corpus(records: Sequence[CaptionRecord], graph: KnowledgeGraph,
               config: RunConfig, clients=None,
               out_dir=None) -> List[PipelineTrace]:
    """Run the pipeline over a corpus, optionally writing a run directory.

    The run directory holds traces/<record-id>.json, manifest.json with a
    hash of the semantic config, and metrics.json (no-gold aggregation).
    Output is identical for any parallelism level.
    """
    if config.parallelism > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            traces = list(pool.map(
                lambda r: run_pipeline(r, graph, config, clients), records))
    else:
        traces = [run_pipeline(r, graph, config, clients) for r in records]
    traces.sort(key=lambda t: t.record_id)

    if out_dir is not None:
        out = Path(out_dir)
        (out / "traces").mkdir(parents=True, exist_ok=True)
        for trace in traces:
            (out / "traces" / f"{trace.record_id}.json").write_text(
                canonical_json(trace_to_dict(trace)), encoding="utf-8")
        config_text = canonical_json(config.semantic_dict())
        manifest = {
            "config": config.semantic_dict(),
            "config_hash": hashlib.sha256(config_text.encode("utf-8")).hexdigest(),
            "record_count": len(traces),
            "record_ids": [t.record_id for t in traces],
        }
        (out / "manifest.json").write_text(canonical_json(manifest), encoding="utf-8")
        summary = aggregate_metrics([trace_metrics_input(t) for t in traces],
                                    config.threshold, with_gold=False)
        (out / "metrics.json").write_text(canonical_json(summary.as_dict()),
                                          encoding="utf-8")
    return traces


def metrics_from_traces(traces: Sequence[PipelineTrace], threshold: float,
                        with_gold: bool) -> MetricsSummary:
    return aggregate_metrics([trace_metrics_input(t) for t in traces],
                             threshold, with_gold)


FORMAT_STRATEGY = {"triple": "triples_only", "hierarchical": "hierarchical_only",
                   "bullet": "bullets_only"}


def compare_formats(records: Sequence[CaptionRecord], graph: KnowledgeGraph,
                    config: RunConfig, clients=None,
                    formats: Sequence[str] = ("triple", "hierarchical", "bullet"),
                    with_gold: bool = False) -> List[dict]:
    """One pipeline run per representation format; rows ordered as given."""
    if not records:
        raise SchemaError("corpus is empty")
    rows = []
    for fmt in formats:
        run_cfg = dataclasses.replace(
            config, facts_format=fmt, strategy=FORMAT_STRATEGY[fmt])
        traces = run_corpus(records, graph, run_cfg, clients)
        summary = metrics_from_traces(traces, run_cfg.threshold, with_gold)
        coherence = summary.overall.coherence_annotations
        rows.append({
            "format": fmt,
            "EA": summary.overall.entity_accuracy if with_gold else None,
            "FVR": summary.overall.fact_verification_rate,
            "Cc": (sum(coherence) / len(coherence)) if coherence else None,
        })
    return rows
