import json

import pytest

from kgv.clients import (
    HttpClient,
    ReplayClient,
    ServiceEndpoint,
    caption_key,
    embed_key,
    endpoints_from_env,
    fnv1a64,
    generate_key,
    ner_key,
)
from kgv.errors import (
    DimensionMismatch,
    EmptyGeneration,
    FixtureMiss,
    SchemaError,
    ServiceUnavailable,
)


class TestHashing:
    def test_known_vectors(self):
        # published FNV-1a 64-bit reference values
        assert fnv1a64("") == "cbf29ce484222325"
        assert fnv1a64("a") == "af63dc4c8601ec8c"
        assert fnv1a64("foobar") == "85944171f73967e8"

    def test_keys_are_domain_separated(self):
        assert caption_key("img", "p") != generate_key("img", "p")
        assert embed_key("x") != ner_key("x")


class TestReplay:
    def test_caption_generate_embed(self):
        fixture = {
            caption_key("img-1", "describe"): {"text": "A fort."},
            generate_key("sys", "user"): {"text": "Fixed."},
            embed_key("hello"): {"vector": [1.0, 0.0], "signed": True},
            embed_key("world"): {"vector": [0.0, 1.0], "signed": True},
        }
        client = ReplayClient(fixture)
        assert client.caption_image("img-1", "describe") == "A fort."
        assert client.generate("sys", "user") == "Fixed."
        vectors, signed = client.embed_text(["hello", "world"])
        assert vectors == [[1.0, 0.0], [0.0, 1.0]]
        assert signed is True

    def test_strict_capabilities_miss(self):
        client = ReplayClient({})
        with pytest.raises(FixtureMiss):
            client.caption_image("img", "p")
        with pytest.raises(FixtureMiss):
            client.generate("s", "p")
        with pytest.raises(FixtureMiss):
            client.embed_text(["x"])

    def test_ner_nonstrict_default(self):
        assert ReplayClient({}).ner("anything") == {"entities": []}

    def test_ner_strict_option(self):
        with pytest.raises(FixtureMiss):
            ReplayClient({}, strict_ner=True).ner("anything")

    def test_blank_caption_rejected(self):
        client = ReplayClient({caption_key("img", "p"): {"text": "  "}})
        with pytest.raises(EmptyGeneration):
            client.caption_image("img", "p")

    def test_dimension_mismatch(self):
        fixture = {embed_key("a"): {"vector": [1.0]},
                   embed_key("b"): {"vector": [1.0, 2.0]}}
        with pytest.raises(DimensionMismatch):
            ReplayClient(fixture).embed_text(["a", "b"])

    def test_fixture_from_path(self, tmp_path):
        path = tmp_path / "fixture.json"
        path.write_text(json.dumps({ner_key("t"): {"entities": []}}))
        assert ReplayClient(path).ner("t") == {"entities": []}

    def test_bad_fixture_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("not json")
        with pytest.raises(SchemaError):
            ReplayClient(path)
        with pytest.raises(SchemaError):
            ReplayClient({"k": "not an object"})

    def test_bundled_fixture_answers_corpus(self, replay_client, corpus_records):
        for record in corpus_records:
            reply = replay_client.ner(record.baseline_caption)
            assert isinstance(reply["entities"], list)


class TestEndpoints:
    def test_validation(self):
        with pytest.raises(ValueError):
            ServiceEndpoint("http://x", timeout_ms=0)
        with pytest.raises(ValueError):
            ServiceEndpoint("http://x", max_in_flight=0)

    def test_from_env(self, monkeypatch):
        monkeypatch.delenv("KGV_GEN_URL", raising=False)
        monkeypatch.setenv("KGV_EMBED_URL", "http://embed.local")
        monkeypatch.setenv("KGV_AUTH_TOKEN", "tok")
        monkeypatch.delenv("KGV_NER_URL", raising=False)
        endpoints = endpoints_from_env()
        assert endpoints["gen"] is None
        assert endpoints["embed"].base_url == "http://embed.local"
        assert endpoints["embed"].auth_token == "tok"


class TestHttp:
    def test_unconfigured_capability(self):
        client = HttpClient()
        with pytest.raises(ServiceUnavailable):
            client.generate("s", "p")

    def test_unreachable_endpoint_exhausts_retries(self):
        endpoint = ServiceEndpoint("http://127.0.0.1:1", timeout_ms=200, max_retries=1)
        client = HttpClient(gen=endpoint)
        with pytest.raises(ServiceUnavailable):
            client.caption_image("img", "p")

    def test_empty_embed_batch_rejected(self):
        client = HttpClient(embed=ServiceEndpoint("http://127.0.0.1:1"))
        with pytest.raises(ValueError):
            client.embed_text([])
