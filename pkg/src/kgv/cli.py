"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 input schema error, 3 service
failure in live mode.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import (
    BadRatios,
    KgvError,
    ReferentialIntegrityError,
    SchemaError,
    ServiceUnavailable,
)
from .kg import graph_stats, load_graph
from .clients import HttpClient, ReplayClient, endpoints_from_env
from .metrics import MissingGold
from .pipeline import (
    RunConfig,
    canonical_json,
    compare_formats,
    load_corpus,
    metrics_from_traces,
    run_corpus,
    save_corpus,
    split_dataset,
    trace_metrics_input,
)
from .report import (
    comparison_table,
    comparison_tsv,
    metrics_table,
    metrics_tsv,
    save_comparison_figure,
    save_metrics_figures,
)

EXIT_USAGE = 1
EXIT_SCHEMA = 2
EXIT_SERVICE = 3

STRATEGY_NAMES = {"cross": "cross_validated", "triples": "triples_only",
                  "hier": "hierarchical_only", "bullets": "bullets_only"}


def _load_kg(path: str):
    return load_graph(Path(path).read_text(encoding="utf-8"))


def _make_clients(replay, strict_ner=False):
    if replay:
        return ReplayClient(replay, strict_ner=strict_ner)
    endpoints = endpoints_from_env()
    if endpoints["gen"] or endpoints["embed"]:
        return HttpClient(gen=endpoints["gen"], embed=endpoints["embed"])
    return None


@click.group()
def cli():
    """Knowledge-graph-grounded caption verification and correction."""


@cli.group()
def kg():
    """Knowledge graph utilities."""


@kg.command("validate")
@click.argument("kg_path", type=click.Path(exists=True, dir_okay=False))
def kg_validate(kg_path):
    """Validate a KG document against the schema."""
    graph = _load_kg(kg_path)
    click.echo(f"ok: {len(graph.entities)} entities, {len(graph.relations)} relations")


@kg.command("stats")
@click.argument("kg_path", type=click.Path(exists=True, dir_okay=False))
def kg_stats(kg_path):
    """Print graph statistics."""
    stats = graph_stats(_load_kg(kg_path))
    click.echo(f"node_count: {stats.node_count}")
    click.echo(f"edge_count: {stats.edge_count}")
    click.echo(f"avg_degree: {stats.avg_degree:g}")
    click.echo(f"max_pairwise_path_length: {stats.max_pairwise_path_length}")
    click.echo(f"avg_clustering: {stats.avg_clustering:g}")


@cli.command("split")
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
@click.option("--ratios", default="0.6,0.2,0.2", show_default=True,
              help="seen,unseen,distractor proportions")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--force", is_flag=True, help="reassign records that already have a split")
@click.option("--out", type=click.Path(dir_okay=False),
              help="output path (default: overwrite input)")
def split_cmd(corpus, ratios, seed, force, out):
    """Assign dataset splits to a JSONL corpus."""
    try:
        parts = tuple(float(x) for x in ratios.split(","))
    except ValueError:
        raise click.UsageError(f"cannot parse ratios {ratios!r}")
    if len(parts) != 3:
        raise click.UsageError("ratios must have exactly three components")
    records = split_dataset(load_corpus(corpus), parts, seed=seed, force=force)
    save_corpus(records, out or corpus)
    tally = {}
    for record in records:
        tally[record.split] = tally.get(record.split, 0) + 1
    click.echo(" ".join(f"{name}={tally.get(name, 0)}"
                        for name in ("seen", "unseen", "distractor")))


def _run_options(fn):
    fn = click.option("--kg", "kg_path", required=True,
                      type=click.Path(exists=True, dir_okay=False))(fn)
    fn = click.option("--threshold", default=0.85, show_default=True, type=float)(fn)
    fn = click.option("--extractor", default="merged", show_default=True,
                      type=click.Choice(["gazetteer", "external_service", "merged"]))(fn)
    fn = click.option("--replay", type=click.Path(exists=True, dir_okay=False),
                      help="replay fixture answering service calls")(fn)
    fn = click.option("--parallelism", default=1, show_default=True, type=int)(fn)
    fn = click.option("--seed", default=0, show_default=True, type=int)(fn)
    return fn


@cli.command("run")
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
@_run_options
@click.option("--format", "facts_format", default="bullet", show_default=True,
              type=click.Choice(["bullet", "triple", "hierarchical"]))
@click.option("--strategy", default="cross", show_default=True,
              type=click.Choice(sorted(STRATEGY_NAMES)))
@click.option("--correction", default="template", show_default=True,
              type=click.Choice(["template", "service"]))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def run_cmd(corpus, kg_path, facts_format, strategy, threshold, extractor,
            correction, replay, parallelism, seed, out_dir):
    """Run the five-hop pipeline over a corpus, writing a run directory."""
    graph = _load_kg(kg_path)
    records = load_corpus(corpus)
    config = RunConfig(
        strategy=STRATEGY_NAMES[strategy], facts_format=facts_format,
        threshold=threshold, extractor_mode=extractor,
        correction=("template_only" if correction == "template"
                    else "service_with_template_fallback"),
        parallelism=parallelism, seed=seed)
    run_corpus(records, graph, config, _make_clients(replay), out_dir)
    click.echo(f"wrote {len(records)} traces to {out_dir}")


@cli.command("evaluate")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--gold", "with_gold", is_flag=True,
              help="compute entity accuracy from gold annotations")
@click.option("--threshold", default=0.85, show_default=True, type=float)
def evaluate_cmd(run_dir, with_gold, threshold):
    """Aggregate a run directory into metrics JSON, tables, and figures."""
    import json

    from .extract import EntityMention
    from .match import EntityMatch
    from .metrics import (EntityGold, FlaggedMention, HallucinationFlags,
                          RecordMetricsInput, aggregate_metrics)
    from .verify import ClaimCounts

    traces_dir = Path(run_dir) / "traces"
    if not traces_dir.is_dir():
        raise SchemaError(f"{run_dir} has no traces/ directory")
    inputs = []
    facts_format = "bullet"
    manifest = Path(run_dir) / "manifest.json"
    if manifest.exists():
        facts_format = json.loads(manifest.read_text())["config"]["facts_format"]
    for path in sorted(traces_dir.glob("*.json")):
        doc = json.loads(path.read_text(encoding="utf-8"))
        counts = doc.get("report", {}) or {}
        counts = counts.get("counts", {})
        matches = tuple(
            EntityMatch(EntityMention(m["text"], m["normalized"], m["category"],
                                      m["span"][0], m["span"][1]),
                        m["entity_id"], m["score"], m["method"])
            for m in doc.get("verified", []) + doc.get("hallucinated", []))

        def flags(key):
            items = doc.get(key) or []
            return HallucinationFlags(tuple(
                FlaggedMention(f["text"], tuple(f["span"]), tuple(f["criteria"]))
                for f in items))

        gold = doc.get("gold")
        inputs.append(RecordMetricsInput(
            record_id=doc["record_id"], split=doc.get("split") or "seen",
            counts=ClaimCounts(counts.get("NEC", 0), counts.get("NLC", 0),
                               counts.get("NAC", 0), counts.get("NRC", 0),
                               counts.get("NCV", 0)),
            baseline_matches=matches,
            baseline_flags=flags("baseline_flags"),
            corrected_flags=flags("corrected_flags"),
            gold=(tuple(EntityGold(g["text"], g["label"]) for g in gold)
                  if gold is not None else None),
            coherence=doc.get("coherence")))
    summary = aggregate_metrics(inputs, threshold, with_gold)

    report_dir = Path(run_dir) / "report"
    report_dir.mkdir(exist_ok=True)
    (report_dir / "metrics.json").write_text(canonical_json(summary.as_dict()),
                                             encoding="utf-8")
    (report_dir / "metrics.tsv").write_text(metrics_tsv(summary, facts_format),
                                            encoding="utf-8")
    table = metrics_table(summary, facts_format)
    (report_dir / "table.txt").write_text(table, encoding="utf-8")
    save_metrics_figures(summary, report_dir / "figures")
    click.echo(table, nl=False)
    for warning in summary.warnings:
        click.echo(f"warning: {warning}", err=True)


@cli.command("compare-formats")
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
@_run_options
@click.option("--gold", "with_gold", is_flag=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def compare_cmd(corpus, kg_path, threshold, extractor, replay, parallelism, seed,
                with_gold, out_dir):
    """Run every representation format and tabulate EA/FVR/Cc."""
    graph = _load_kg(kg_path)
    records = load_corpus(corpus)
    config = RunConfig(threshold=threshold, extractor_mode=extractor,
                       parallelism=parallelism, seed=seed)
    rows = compare_formats(records, graph, config, _make_clients(replay),
                           with_gold=with_gold)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.tsv").write_text(comparison_tsv(rows), encoding="utf-8")
    table = comparison_table(rows)
    (out / "comparison.txt").write_text(table, encoding="utf-8")
    save_comparison_figure(rows, out / "comparison.png")
    click.echo(table, nl=False)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return 130
    except (SchemaError, ReferentialIntegrityError, MissingGold, BadRatios) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_SCHEMA
    except ServiceUnavailable as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_SERVICE
    except KgvError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_SCHEMA
    return 0


if __name__ == "__main__":
    sys.exit(main())
