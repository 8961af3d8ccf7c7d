import json
from pathlib import Path

import pytest

from kgv.clients import ReplayClient
from kgv.data import corpus_path, load_seed_graph, replay_fixture_path, seed_kg_path
from kgv.pipeline import load_corpus

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def seed_graph():
    return load_seed_graph()


@pytest.fixture(scope="session")
def seed_document():
    return seed_kg_path().read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def corpus_records():
    return load_corpus(corpus_path())


@pytest.fixture(scope="session")
def replay_client():
    return ReplayClient(replay_fixture_path())


@pytest.fixture(scope="session")
def golden_metrics():
    return json.loads((DATA / "golden_metrics.json").read_text())


def golden_text(name):
    return (DATA / name).read_text(encoding="utf-8")
