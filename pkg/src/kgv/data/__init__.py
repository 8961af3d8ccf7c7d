"""Bundled fixtures: the seed knowledge graph, a 12-record evaluation
corpus, and the replay fixture answering its service calls."""

from importlib import resources
from pathlib import Path


def _path(name: str) -> Path:
    return Path(resources.files(__package__) / name)


def seed_kg_path() -> Path:
    return _path("seed_kg.json")


def corpus_path() -> Path:
    return _path("corpus.jsonl")


def replay_fixture_path() -> Path:
    return _path("replay_fixture.json")


def load_seed_graph():
    from ..kg import load_graph

    return load_graph(seed_kg_path().read_text(encoding="utf-8"))
