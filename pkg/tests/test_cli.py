from __future__ import annotations

import io
import json
import os
import sys

import pytest

from promptveil.cli import run
from promptveil.stores import load_store

ENTITIES = [
    {"id": "m1", "text": "A detective hunts a forger through rainy city streets"},
    {"id": "m2", "text": "Two robots fall in love on an abandoned space station"},
    {"id": "m3", "text": "A chef discovers her rival has stolen recipes for years"},
]

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


def write_jsonl(path, records):
    path.write_text(
        "".join(json.dumps(r) + "\n" for r in records), encoding="utf-8"
    )
    return str(path)


def last_json(capsys):
    return json.loads(capsys.readouterr().out)


@pytest.fixture()
def entities_file(tmp_path):
    return write_jsonl(tmp_path / "entities.jsonl", ENTITIES)


class TestObfuscateEntitiesCommand:
    def test_exit_zero_and_store_written(self, tmp_path, entities_file, capsys):
        store_dir = tmp_path / "out"
        code = run(
            ["obfuscate-entities", "--in", entities_file, "--out", str(store_dir)]
        )
        assert code == 0
        body = last_json(capsys)
        assert body["entries"] == 3
        assert body["version"] == 1
        assert (store_dir / "default-v1.jsonl").exists()

    def test_second_run_bumps_version(self, tmp_path, entities_file, capsys):
        store_dir = str(tmp_path / "out")
        run(["obfuscate-entities", "--in", entities_file, "--out", store_dir])
        capsys.readouterr()
        assert run(["obfuscate-entities", "--in", entities_file, "--out", store_dir]) == 0
        assert last_json(capsys)["version"] == 2

    def test_overrides_recorded_in_params(self, tmp_path, entities_file, capsys):
        store_dir = str(tmp_path / "out")
        code = run(
            [
                "obfuscate-entities",
                "--in", entities_file,
                "--out", store_dir,
                "--rho", "0.3",
                "--epsilon-ldp", "2.5",
                "--seed", "9",
            ]
        )
        assert code == 0
        store = load_store(store_dir, "default")
        params = store.params()
        assert params["rho"] == 0.3
        assert params["epsilon_ldp"] == 2.5
        assert params["seed"] == 9

    def test_missing_input_file_exits_2(self, tmp_path, capsys):
        code = run(
            ["obfuscate-entities", "--in", str(tmp_path / "nope.jsonl"),
             "--out", str(tmp_path / "out")]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_json_exits_2(self, tmp_path, capsys):
        path = tmp_path / "garbage.jsonl"
        path.write_text("this is not json\n", encoding="utf-8")
        assert run(["obfuscate-entities", "--in", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_missing_id_key_exits_2(self, tmp_path, capsys):
        path = write_jsonl(tmp_path / "partial.jsonl", [{"text": "no id here"}])
        assert run(["obfuscate-entities", "--in", path, "--out", str(tmp_path / "o")]) == 2


class TestObfuscateTextCommand:
    def test_flag_input(self, capsys):
        assert run(["obfuscate-text", "--text", "hello brave new world", "--seed", "1"]) == 0
        body = last_json(capsys)
        assert body["obfuscated"]
        assert "hello" not in body["obfuscated"].lower()

    def test_stdin_input(self, monkeypatch, capsys):
        monkeypatch.setattr(sys, "stdin", io.StringIO("a quiet message from a pipe"))
        assert run(["obfuscate-text"]) == 0
        assert last_json(capsys)["obfuscated"]

    def test_out_file(self, tmp_path, capsys):
        out = tmp_path / "result.json"
        assert run(["obfuscate-text", "--text", "write me to disk", "--out", str(out)]) == 0
        assert json.loads(out.read_text(encoding="utf-8"))["obfuscated"]
        assert capsys.readouterr().out.strip() == ""


class TestInferCommand:
    def test_full_flow(self, tmp_path, entities_file, capsys):
        store_dir = str(tmp_path / "out")
        run(["obfuscate-entities", "--in", entities_file, "--out", store_dir])
        capsys.readouterr()
        code = run(
            [
                "infer",
                "--history", "m1,m2",
                "--instruction", "classify the taste profile",
                "--output-set", "sweet,savory",
                "--store-dir", store_dir,
            ]
        )
        assert code == 0
        body = last_json(capsys)
        assert body["raw"]
        # mock completions are symbol soup, never a closed-set member
        assert body["parsed"] is None

    def test_missing_store_exits_2(self, tmp_path, capsys):
        code = run(
            [
                "infer",
                "--history", "m1",
                "--instruction", "classify",
                "--store-dir", str(tmp_path / "empty"),
            ]
        )
        assert code == 2


class TestAttackCommand:
    def test_recovery_pairs(self, tmp_path, capsys):
        pairs = [{"original": t, "recovered": t} for t in DATASET[:4]]
        path = write_jsonl(tmp_path / "pairs.jsonl", pairs)
        assert run(["attack", "--store", path]) == 0
        body = last_json(capsys)
        assert body["n"] == 4
        assert body["means"]["cosine"] == pytest.approx(1.0)
        assert body["means"]["rouge-1"] == pytest.approx(1.0)

    def test_random_baseline(self, tmp_path, capsys):
        path = write_jsonl(tmp_path / "dataset.jsonl", [{"text": t} for t in DATASET])
        assert run(["attack", "--baseline", "random", "--dataset", path, "--seed", "3"]) == 0
        body = last_json(capsys)
        assert body["n"] == len(DATASET)
        assert 0.0 <= body["means"]["rouge-1"] <= 1.0

    def test_baseline_accepts_store_fallback(self, tmp_path, capsys):
        pairs = [{"original": t, "recovered": t} for t in DATASET]
        path = write_jsonl(tmp_path / "pairs.jsonl", pairs)
        assert run(["attack", "--baseline", "random", "--store", path]) == 0

    def test_baseline_without_source_exits_1(self, capsys):
        assert run(["attack", "--baseline", "random"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_recovery_without_store_exits_1(self, capsys):
        assert run(["attack"]) == 1

    def test_small_dataset_exits_2(self, tmp_path, capsys):
        path = write_jsonl(tmp_path / "tiny.jsonl", [{"text": t} for t in DATASET[:2]])
        assert run(["attack", "--baseline", "random", "--dataset", path, "--n", "5"]) == 2


class TestOptimizeCommand:
    def test_ape_round_trip(self, tmp_path, capsys):
        validation = write_jsonl(
            tmp_path / "validation.jsonl",
            [
                {"payload": "the service was friendly and fast", "expected": "positive"},
                {"payload": "cold food and a rude waiter", "expected": "negative"},
            ],
        )
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"optimizer": {"iterations": 1}}), encoding="utf-8")
        out = tmp_path / "result.json"
        code = run(
            [
                "optimize",
                "--algorithm", "ape",
                "--validation", validation,
                "--task-instruction", "label the sentiment",
                "--output-set", "positive,negative",
                "--config", str(config),
                "--out", str(out),
            ]
        )
        assert code == 0
        body = json.loads(out.read_text(encoding="utf-8"))
        assert isinstance(body["best_prompt"], str) and body["best_prompt"]
        assert 0.0 <= body["best_score"] <= 1.0


class TestConfigHandling:
    def test_json_config_sets_store_dir(self, tmp_path, entities_file, capsys):
        store_dir = tmp_path / "configured"
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"store_dir": str(store_dir)}), encoding="utf-8")
        code = run(
            ["obfuscate-entities", "--in", entities_file, "--config", str(config)]
        )
        assert code == 0
        assert (store_dir / "default-v1.jsonl").exists()

    def test_toml_config_pipeline_defaults(self, tmp_path, entities_file, capsys):
        store_dir = tmp_path / "configured"
        config = tmp_path / "config.toml"
        config.write_text(
            f'store_dir = "{store_dir}"\n[pipeline]\nrho = 0.3\n', encoding="utf-8"
        )
        assert run(["obfuscate-entities", "--in", entities_file, "--config", str(config)]) == 0
        assert load_store(store_dir, "default").params()["rho"] == 0.3

    def test_invalid_config_exits_2(self, tmp_path, entities_file, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"pipeline": {"rho": 5.0}}), encoding="utf-8")
        code = run(
            ["obfuscate-entities", "--in", entities_file, "--config", str(config)]
        )
        assert code == 2
        assert "rho" in capsys.readouterr().err


class TestDispatch:
    def test_missing_required_option_exits_1(self, capsys):
        assert run(["obfuscate-entities"]) == 1
        err = capsys.readouterr().err
        assert "error:" in err
        assert "--in" in err

    def test_unknown_command_exits_1(self, capsys):
        assert run(["frobnicate"]) == 1

    def test_no_args_shows_help(self, capsys):
        assert run([]) == 1
        assert "Usage" in capsys.readouterr().err

    def test_top_level_help_exits_0(self, capsys):
        assert run(["--help"]) == 0
        assert "Usage" in capsys.readouterr().out

    def test_serve_help_exits_0(self, capsys):
        assert run(["serve", "--help"]) == 0


class TestSecretHygiene:
    SENTINEL = "sk-super-secret-sentinel-77"

    def test_secret_value_never_persisted(self, tmp_path, entities_file, monkeypatch, capsys):
        monkeypatch.setenv("PV_CLI_KEY", self.SENTINEL)
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps(
                {
                    "store_dir": str(tmp_path / "out"),
                    "chat_provider": {"kind": "mock", "auth_env": "PV_CLI_KEY"},
                }
            ),
            encoding="utf-8",
        )
        assert run(["obfuscate-entities", "--in", entities_file, "--config", str(config)]) == 0
        captured = capsys.readouterr()
        assert self.SENTINEL not in captured.out
        assert self.SENTINEL not in captured.err
        for root, _, files in os.walk(tmp_path / "out"):
            for name in files:
                blob = open(os.path.join(root, name), encoding="utf-8").read()
                assert self.SENTINEL not in blob
