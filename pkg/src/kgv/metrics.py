"""Evaluation metrics: entity accuracy, fact verification rate, claim
counting, factual improvement, and automatic hallucination flagging.

Percentage formulas use exact rational arithmetic before conversion to
float. Entity accuracy requires gold annotations; factual improvement runs
from automatic flags alone, applied symmetrically to baseline and corrected
captions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import CountOverflow, MissingGold, ZeroDenominator
from .kg import KnowledgeGraph
from .match import EntityMatch, MatcherConfig
from .textnorm import normalize_mention
from .verify import Claim, VerificationReport

FLAG_ABSENT = "absent_from_kg"
FLAG_BELOW_THRESHOLD = "below_threshold"
FLAG_CLAIMS_UNVERIFIED = "claims_unverified"


@dataclass(frozen=True)
class EntityGold:
    text: str
    label: str  # real | hallucinated

    def __post_init__(self):
        if not self.text:
            raise ValueError("gold entity text must be non-empty")
        if self.label not in ("real", "hallucinated"):
            raise ValueError(f"unknown gold label {self.label!r}")


@dataclass(frozen=True)
class FlaggedMention:
    text: str
    span: Tuple[int, int]
    criteria: Tuple[str, ...]


@dataclass(frozen=True)
class HallucinationFlags:
    flagged: Tuple[FlaggedMention, ...]

    @property
    def count(self) -> int:
        return len(self.flagged)

    def spans(self) -> set:
        return {f.span for f in self.flagged}


def entity_accuracy(nme: int, nhc: int, nte: int) -> float:
    """Percentage of correctly identified entities: (NME + NHC) / NTE."""
    if nte <= 0:
        raise ZeroDenominator("entity accuracy needs NTE > 0")
    if nme + nhc > nte:
        raise CountOverflow(f"NME + NHC = {nme + nhc} exceeds NTE = {nte}")
    return float(Fraction(nme + nhc, nte) * 100)


def fact_verification_rate(ncv: int, ntc: int) -> float:
    """Percentage of claims successfully verified: NCV / NTC."""
    if ntc <= 0:
        raise ZeroDenominator("fact verification rate needs NTC > 0")
    if ncv > ntc:
        raise CountOverflow(f"NCV = {ncv} exceeds NTC = {ntc}")
    return float(Fraction(ncv, ntc) * 100)


def count_claims(claims: Sequence[Claim]) -> Tuple[int, int, int, int, int]:
    """(NEC, NLC, NAC, NRC, NTC) tallied from claim kinds."""
    nec = sum(1 for c in claims if c.kind == "entity")
    nlc = sum(1 for c in claims if c.kind == "location")
    nac = sum(1 for c in claims if c.kind == "attribute")
    nrc = sum(1 for c in claims if c.kind == "relationship")
    return nec, nlc, nac, nrc, nec + nlc + nac + nrc


def factual_improvement(baseline_h: int, corrected_h: int) -> float:
    """Relative reduction in hallucinated entities, baseline to corrected.

    Negative when correction made things worse.
    """
    if baseline_h <= 0:
        raise ZeroDenominator("factual improvement needs baseline hallucinations > 0")
    return float(Fraction(baseline_h - corrected_h, baseline_h) * 100)


def flag_hallucinations(caption: str, graph: KnowledgeGraph,
                        matcher_config: MatcherConfig,
                        report: VerificationReport) -> HallucinationFlags:
    """Flag caption mentions by the three hallucination criteria.

    A mention is flagged when it has no exact match and its best fuzzy score
    falls below the threshold (criteria 1 and 2 together), or when it matched
    but every non-entity claim it subjects went unconfirmed (criterion 3;
    mentions subjecting no non-entity claims are exempt).
    """
    matches = list(report.verified_entities) + list(report.hallucinated_entities)
    by_span: Dict[Tuple[int, int], EntityMatch] = {m.mention.span: m for m in matches}
    subject_claims: Dict[Tuple[int, int], List[str]] = {}
    for claim, verdict in report.claims:
        if claim.kind == "entity":
            continue
        span = claim.subject.mention.span
        subject_claims.setdefault(span, []).append(verdict.status)

    flagged = []
    for span in sorted(by_span):
        match = by_span[span]
        criteria = []
        if match.method != "exact" and match.score < matcher_config.threshold:
            criteria = [FLAG_ABSENT, FLAG_BELOW_THRESHOLD]
        else:
            statuses = subject_claims.get(span, [])
            if statuses and all(s != "confirmed" for s in statuses):
                criteria = [FLAG_CLAIMS_UNVERIFIED]
        if criteria:
            flagged.append(FlaggedMention(match.mention.text, span, tuple(criteria)))
    return HallucinationFlags(tuple(flagged))


@dataclass
class SplitMetrics:
    nme: int = 0
    nhc: int = 0
    nte: int = 0
    ncv: int = 0
    ntc: int = 0
    nec: int = 0
    nlc: int = 0
    nac: int = 0
    nrc: int = 0
    baseline_hallucinations: int = 0
    corrected_hallucinations: int = 0
    records: int = 0
    coherence_annotations: List[float] = field(default_factory=list)

    def add_counts(self, counts) -> None:
        self.nec += counts.nec
        self.nlc += counts.nlc
        self.nac += counts.nac
        self.nrc += counts.nrc
        self.ncv += counts.ncv
        self.ntc += counts.ntc

    @property
    def entity_accuracy(self) -> Optional[float]:
        return entity_accuracy(self.nme, self.nhc, self.nte) if self.nte > 0 else None

    @property
    def fact_verification_rate(self) -> Optional[float]:
        return fact_verification_rate(self.ncv, self.ntc) if self.ntc > 0 else None

    @property
    def factual_improvement(self) -> Optional[float]:
        if self.baseline_hallucinations <= 0:
            return None
        return factual_improvement(self.baseline_hallucinations,
                                   self.corrected_hallucinations)

    def as_dict(self, with_gold: bool) -> dict:
        out = {
            "records": self.records,
            "NEC": self.nec, "NLC": self.nlc, "NAC": self.nac, "NRC": self.nrc,
            "NCV": self.ncv, "NTC": self.ntc,
            "FVR": self.fact_verification_rate,
            "baseline_hallucinations": self.baseline_hallucinations,
            "corrected_hallucinations": self.corrected_hallucinations,
            "FI": self.factual_improvement,
            "coherence_annotations": list(self.coherence_annotations),
        }
        if with_gold:
            out.update({"NME": self.nme, "NHC": self.nhc, "NTE": self.nte,
                        "EA": self.entity_accuracy})
        return out


@dataclass
class MetricsSummary:
    overall: SplitMetrics
    per_split: Dict[str, SplitMetrics]
    with_gold: bool
    warnings: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "overall": self.overall.as_dict(self.with_gold),
            "per_split": {split: m.as_dict(self.with_gold)
                          for split, m in sorted(self.per_split.items())},
            "gold_mode": self.with_gold,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class RecordMetricsInput:
    """Per-record evidence needed for aggregation, typically read from a trace."""
    record_id: str
    split: str
    counts: object  # ClaimCounts
    baseline_matches: Tuple[EntityMatch, ...]
    baseline_flags: HallucinationFlags
    corrected_flags: HallucinationFlags
    gold: Optional[Tuple[EntityGold, ...]] = None
    coherence: Optional[float] = None


def _gold_tallies(inp: RecordMetricsInput, threshold: float) -> Tuple[int, int, int]:
    verified_texts = {m.mention.normalized for m in inp.baseline_matches
                      if m.entity_id is not None and m.score >= threshold}
    flagged_texts = {normalize_mention(f.text) for f in inp.baseline_flags.flagged}
    nme = nhc = 0
    for gold in inp.gold:
        norm = normalize_mention(gold.text)
        if gold.label == "real" and norm in verified_texts:
            nme += 1
        elif gold.label == "hallucinated" and norm in flagged_texts:
            nhc += 1
    return nme, nhc, len(inp.gold)


def aggregate_metrics(records: Sequence[RecordMetricsInput], threshold: float,
                      with_gold: bool) -> MetricsSummary:
    """Deterministic fold of per-record tallies, overall and per split."""
    overall = SplitMetrics()
    per_split: Dict[str, SplitMetrics] = {}
    warnings: List[str] = []
    for inp in sorted(records, key=lambda r: r.record_id):
        buckets = [overall, per_split.setdefault(inp.split, SplitMetrics())]
        gold_counts = None
        if with_gold:
            if inp.gold is None:
                raise MissingGold(
                    f"record {inp.record_id}: entity accuracy requested but no "
                    "gold annotations present")
            gold_counts = _gold_tallies(inp, threshold)
        for bucket in buckets:
            bucket.records += 1
            bucket.add_counts(inp.counts)
            bucket.baseline_hallucinations += inp.baseline_flags.count
            bucket.corrected_hallucinations += inp.corrected_flags.count
            if gold_counts:
                bucket.nme += gold_counts[0]
                bucket.nhc += gold_counts[1]
                bucket.nte += gold_counts[2]
            if inp.coherence is not None:
                bucket.coherence_annotations.append(inp.coherence)
    if overall.baseline_hallucinations == 0:
        warnings.append("baseline hallucination count is zero; FI undefined")
    return MetricsSummary(overall, per_split, with_gold, warnings)
