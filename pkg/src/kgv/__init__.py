"""Knowledge-graph-grounded verification and correction of image captions.

The engine runs a caption through five hops: base captioning (pluggable),
entity extraction, knowledge-graph matching, multi-format fact verification,
and correction, then scores the result with entity accuracy, fact
verification rate, claim decomposition, and factual improvement.
"""

from .kg import (
    Entity,
    GraphBuilder,
    GraphStats,
    KnowledgeGraph,
    Relation,
    canonicalize,
    find_paths,
    graph_stats,
    load_graph,
    save_graph,
)
from .extract import EntityMention, ExtractorConfig, extract_entities, gazetteer_extract
from .match import (
    EntityMatch,
    MatcherConfig,
    exact_match,
    fuzzy_match,
    partition_entities,
    trigram_cosine,
)
from .verify import (
    Claim,
    ClaimCounts,
    VerificationReport,
    Verdict,
    extract_claims,
    verify_bullet,
    verify_claims,
    verify_hierarchical,
    verify_triple,
)
from .correct import (
    CorrectionResult,
    PromptBundle,
    assemble_prompt,
    generate_correction,
    template_correct,
)
from .metrics import (
    EntityGold,
    HallucinationFlags,
    MetricsSummary,
    count_claims,
    entity_accuracy,
    fact_verification_rate,
    factual_improvement,
    flag_hallucinations,
)
from .pipeline import (
    CaptionRecord,
    PipelineTrace,
    RunConfig,
    compare_formats,
    load_corpus,
    run_corpus,
    run_pipeline,
    split_dataset,
)
from .views import BulletFact, HierNode, Triple, render, to_bullets, to_hierarchy, to_triples
from .clients import HttpClient, ReplayClient, ServiceEndpoint

__version__ = "0.1.0"
