from __future__ import annotations

import json
import logging

import pytest
from fastapi.testclient import TestClient

from promptveil.config import AppConfig
from promptveil.errors import ProviderError
from promptveil.service import JobRegistry, create_app

ENTITIES = [
    {"id": "m1", "text": "A detective hunts a forger through rainy city streets"},
    {"id": "m2", "text": "Two robots fall in love on an abandoned space station"},
    {"id": "m3", "text": "A chef discovers her rival has stolen recipes for years"},
]


def make_client(tmp_path, name="stores"):
    config = AppConfig(store_dir=str(tmp_path / name))
    return TestClient(create_app(config))


@pytest.fixture()
def client(tmp_path):
    return make_client(tmp_path)


def post_entities(client, seed=0, task="default"):
    return client.post(
        "/v1/obfuscate/entities",
        json={"task": task, "entities": ENTITIES, "seed": seed},
    )


class TestObfuscateEntities:
    def test_success_shape(self, client, tmp_path):
        resp = post_entities(client)
        assert resp.status_code == 200
        body = resp.json()
        assert body["task"] == "default"
        assert body["version"] == 1
        assert body["entries"] == 3
        assert body["job_id"]
        assert body["content_hash"]
        assert (tmp_path / "stores").exists()

    def test_store_file_written(self, client):
        path = post_entities(client).json()["store_path"]
        lines = [
            json.loads(line)
            for line in open(path, encoding="utf-8")
            if line.strip()
        ]
        assert [r["id"] for r in lines] == ["m1", "m2", "m3"]

    def test_versions_accumulate(self, client):
        assert post_entities(client).json()["version"] == 1
        assert post_entities(client).json()["version"] == 2

    def test_reproducible_across_instances(self, tmp_path):
        a = post_entities(make_client(tmp_path, "a"), seed=3).json()
        b = post_entities(make_client(tmp_path, "b"), seed=3).json()
        assert a["content_hash"] == b["content_hash"]

    def test_duplicate_ids_rejected(self, client):
        resp = client.post(
            "/v1/obfuscate/entities",
            json={"entities": [{"id": "x", "text": "one"}, {"id": "x", "text": "two"}]},
        )
        assert resp.status_code == 422

    def test_empty_entities_rejected(self, client):
        resp = client.post("/v1/obfuscate/entities", json={"entities": []})
        assert resp.status_code == 422

    def test_job_lifecycle(self, client):
        body = post_entities(client).json()
        job = client.get(f"/v1/jobs/{body['job_id']}")
        assert job.status_code == 200
        record = job.json()
        assert record["kind"] == "obfuscate-entities"
        assert record["status"] == "succeeded"
        assert record["result_locator"] == body["store_path"]
        assert record["config_hash"]

    def test_failed_job_recorded(self, client):
        resp = client.post(
            "/v1/obfuscate/entities",
            json={"entities": [{"id": "x", "text": "one"}, {"id": "x", "text": "two"}]},
        )
        assert resp.status_code == 422
        # the job registry is internal; failure is visible via the 422 alone


class TestObfuscateText:
    TEXT = "The quick brown fox jumps over the lazy dog. It never stops running."

    def test_success(self, client):
        resp = client.post("/v1/obfuscate/text", json={"text": self.TEXT, "seed": 1})
        assert resp.status_code == 200
        body = resp.json()
        assert body["obfuscated"]
        assert body["job_id"]

    def test_no_source_words_with_mock(self, client):
        out = client.post(
            "/v1/obfuscate/text", json={"text": self.TEXT, "seed": 1}
        ).json()["obfuscated"]
        source = {w.strip(".").lower() for w in self.TEXT.split()}
        assert source.isdisjoint({w.lower() for w in out.split()})

    def test_deterministic(self, client):
        req = {"text": self.TEXT, "seed": 4}
        first = client.post("/v1/obfuscate/text", json=req).json()["obfuscated"]
        second = client.post("/v1/obfuscate/text", json=req).json()["obfuscated"]
        assert first == second

    def test_provider_failure_maps_to_502(self, client, monkeypatch):
        def boom(*args, **kwargs):
            raise ProviderError("backend down")

        monkeypatch.setattr("promptveil.service.obfuscate_text", boom)
        resp = client.post("/v1/obfuscate/text", json={"text": "x y z."})
        assert resp.status_code == 502


class TestInfer:
    def infer(self, client, **overrides):
        req = {
            "task": "default",
            "history": ["m1", "m2"],
            "instruction": "classify the conversation sentiment",
            "output_set": ["positive", "negative"],
        }
        req.update(overrides)
        return client.post("/v1/infer", json=req)

    def test_happy_path(self, client):
        post_entities(client)
        resp = self.infer(client)
        assert resp.status_code == 200
        body = resp.json()
        assert body["raw"]
        # the mock completion is symbol soup, never a member of the set
        assert body["parsed"] is None

    def test_ranking_drops_hallucinations(self, client):
        post_entities(client)
        body = self.infer(client, ranking=True).json()
        assert body["parsed"] == []

    def test_missing_store_404(self, client):
        assert self.infer(client, task="ghost").status_code == 404

    def test_unknown_ids_listed(self, client):
        post_entities(client)
        resp = self.infer(client, history=["m1", "zz", "qq"])
        assert resp.status_code == 422
        assert resp.json()["detail"] == {"missing_ids": ["zz", "qq"]}


class TestEntityEndpoint:
    def test_returns_obfuscation_not_original(self, client):
        post_entities(client)
        resp = client.get("/v1/entities/default/m1")
        assert resp.status_code == 200
        body = resp.json()
        assert body["id"] == "m1"
        assert body["obfuscation"]
        assert body["obfuscation"] != ENTITIES[0]["text"]
        assert "original" not in body
        assert "text" not in body
        # variants only exist for the tabular multi-obfuscation flow
        assert body["variants"] == []

    def test_unknown_entity_404(self, client):
        post_entities(client)
        assert client.get("/v1/entities/default/zz").status_code == 404

    def test_unknown_task_404(self, client):
        assert client.get("/v1/entities/ghost/m1").status_code == 404

    def test_version_selector(self, client):
        post_entities(client)
        post_entities(client)
        resp = client.get("/v1/entities/default/m1", params={"version": 1})
        assert resp.status_code == 200
        assert resp.json()["version"] == 1


class TestJobsEndpoint:
    def test_unknown_job_404(self, client):
        assert client.get("/v1/jobs/nope").status_code == 404

    def test_registry_lifecycle(self):
        registry = JobRegistry()
        record = registry.create("attack", "cafe")
        assert record.status == "running"
        registry.finish(record.job_id, "succeeded", "somewhere")
        fetched = registry.get(record.job_id)
        assert fetched.status == "succeeded"
        assert fetched.result_locator == "somewhere"

    def test_registry_get_unknown(self):
        assert JobRegistry().get("nope") is None


class TestAttackEndpoint:
    DATASET = [
        "A pilot lands a failing plane on a frozen river at night",
        "The bakery on Fifth Street wins a national bread award",
        "An archivist finds a forged will inside a donated book",
        "Two siblings inherit a lighthouse and a mountain of debt",
        "A rookie referee calls the final foul of the championship",
        "The town chess club stages a midnight tournament",
        "A botanist smuggles rare orchids across three borders",
        "An actor forgets his lines during the royal premiere",
    ]

    def test_recovery_identical_texts(self, client):
        resp = client.post(
            "/v1/attack",
            json={"originals": self.DATASET[:3], "recovered": self.DATASET[:3]},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["n"] == 3
        assert body["means"]["cosine"] == pytest.approx(1.0)
        assert body["means"]["rouge-1"] == pytest.approx(1.0)

    def test_recovery_length_mismatch_422(self, client):
        resp = client.post(
            "/v1/attack",
            json={"originals": self.DATASET[:3], "recovered": self.DATASET[:2]},
        )
        assert resp.status_code == 422

    def test_random_baseline(self, client):
        resp = client.post(
            "/v1/attack",
            json={"baseline": "random", "dataset": self.DATASET, "seed": 7},
        )
        assert resp.status_code == 200
        body = resp.json()
        # every dataset entity is scored against its sampled peers
        assert body["n"] == len(self.DATASET)
        assert set(body["means"]) >= {"cosine", "rouge-1", "rouge-2", "rouge-l", "meteor"}

    def test_random_baseline_deterministic(self, client):
        req = {"baseline": "random", "dataset": self.DATASET, "seed": 7}
        first = client.post("/v1/attack", json=req).json()["means"]
        second = client.post("/v1/attack", json=req).json()["means"]
        assert first == second

    def test_random_baseline_small_dataset_422(self, client):
        resp = client.post(
            "/v1/attack",
            json={"baseline": "random", "dataset": self.DATASET[:2], "n_samples": 5},
        )
        assert resp.status_code == 422


class TestOptimizeEndpoint:
    VALIDATION = [
        {"payload": "the service was friendly and fast", "expected": "positive"},
        {"payload": "cold food and a rude waiter", "expected": "negative"},
    ]

    def optimize(self, client, **overrides):
        req = {
            "algorithm": "ape",
            "task_instruction": "label the sentiment",
            "output_set": ["positive", "negative"],
            "validation": self.VALIDATION,
            "iterations": 1,
        }
        req.update(overrides)
        return client.post("/v1/optimize", json=req)

    def test_ape_contract(self, client):
        resp = self.optimize(client)
        assert resp.status_code == 200
        body = resp.json()
        assert body["algorithm"] == "ape"
        assert isinstance(body["best_prompt"], str) and body["best_prompt"]
        assert 0.0 <= body["best_score"] <= 1.0
        assert body["iterations"] == 1
        job = client.get(f"/v1/jobs/{body['job_id']}").json()
        assert job["status"] == "succeeded"

    def test_opro_counts_seed_iteration(self, client):
        body = self.optimize(client, algorithm="opro").json()
        assert body["algorithm"] == "opro"
        assert body["iterations"] == 2
        assert 0.0 <= body["best_score"] <= 1.0


class TestLogHygiene:
    MARKER = "zanzibar-confidential-ledger-99"

    def test_entity_text_never_logged(self, client, caplog):
        entities = [{"id": "e1", "text": f"patient notes mention {self.MARKER} twice"}]
        with caplog.at_level(logging.INFO):
            resp = client.post("/v1/obfuscate/entities", json={"entities": entities})
        assert resp.status_code == 200
        joined = "\n".join(r.getMessage() for r in caplog.records)
        assert self.MARKER not in joined
        assert "payload_hash=" in joined

    def test_free_text_never_logged(self, client, caplog):
        with caplog.at_level(logging.INFO):
            client.post(
                "/v1/obfuscate/text",
                json={"text": f"the {self.MARKER} meeting moved to friday."},
            )
        assert self.MARKER not in "\n".join(r.getMessage() for r in caplog.records)
