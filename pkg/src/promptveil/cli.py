"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import assets
from .attack import evaluate_recovery, random_entities_baseline
from .config import AppConfig, load_config
from .engine import ObfuscationConfig
from .errors import PromptVeilError
from .nonreusable import obfuscate_text
from .optimize import ProviderPromptGenerator, ape_search, opro_search
from .providers import ProviderConfig, build_chat_provider, build_embedding_provider
from .reusable import PipelineConfig, obfuscate_entity_set
from .scoring import TokenOverlapScorer
from .stores import save_store


def _app_config(config_path: Optional[str]) -> AppConfig:
    if config_path:
        return load_config(config_path)
    return AppConfig()


def _chat(cfg: AppConfig):
    return build_chat_provider(ProviderConfig(**cfg.chat_provider.model_dump()))


def _embed(cfg: AppConfig):
    return build_embedding_provider(ProviderConfig(**cfg.embed_provider.model_dump()))


def _write_out(out: Optional[str], payload: dict) -> None:
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text)


@click.group()
def cli():
    """Privacy-obfuscation middleware."""


@cli.command("obfuscate-entities")
@click.option("--in", "in_path", required=True, help="JSONL of {id, text} records.")
@click.option("--task", default="default", show_default=True)
@click.option("--rho", type=float, default=None)
@click.option("--epsilon-sem", type=float, default=None)
@click.option("--epsilon-ldp", type=float, default=None)
@click.option("--config", "config_path", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, default=None)
def obfuscate_entities_cmd(in_path, task, rho, epsilon_sem, epsilon_ldp, config_path, seed, out):
    """Obfuscate an entity set and write a new store version."""
    cfg = _app_config(config_path)
    entities = []
    with open(in_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                entities.append((str(record["id"]), record["text"]))
    p = cfg.pipeline
    pipeline = PipelineConfig(
        instruction=assets.load(p.instruction_preset),
        rho=rho if rho is not None else p.rho,
        epsilon_sem=epsilon_sem if epsilon_sem is not None else p.epsilon_sem,
        epsilon_ldp=epsilon_ldp if epsilon_ldp is not None else p.epsilon_ldp,
        temperature=p.temperature,
        max_attempts=p.max_attempts,
        seed=seed if seed is not None else p.seed,
    )
    store = obfuscate_entity_set(entities, pipeline, _chat(cfg), TokenOverlapScorer(), task=task)
    path = save_store(store, out or cfg.store_dir)
    click.echo(
        json.dumps(
            {
                "task": store.task,
                "version": store.version,
                "entries": len(store.entries),
                "content_hash": store.content_hash(),
                "store_path": str(path),
            }
        )
    )


@cli.command("obfuscate-text")
@click.option("--text", default=None, help="Text to obfuscate; reads stdin if omitted.")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, default=None)
def obfuscate_text_cmd(text, config_path, seed, out):
    """Clause-level obfuscation of free text."""
    cfg = _app_config(config_path)
    if text is None:
        text = sys.stdin.read()
    ocfg = ObfuscationConfig(
        instruction=assets.load("instruction_clause.txt"),
        temperature=cfg.pipeline.temperature,
        epsilon_sem=cfg.pipeline.epsilon_sem,
        max_attempts=cfg.pipeline.max_attempts,
        seed=seed if seed is not None else cfg.pipeline.seed,
    )
    result = obfuscate_text(text, ocfg, _chat(cfg), cfg.pipeline.min_clause_tokens)
    _write_out(out, {"obfuscated": result})


@cli.command("infer")
@click.option("--task", default="default", show_default=True)
@click.option("--history", required=True, help="Comma-separated entity ids.")
@click.option("--instruction", required=True)
@click.option("--output-set", default="", help="Comma-separated allowed outputs.")
@click.option("--store-dir", default=None)
@click.option("--config", "config_path", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, default=None)
def infer_cmd(task, history, instruction, output_set, store_dir, config_path, seed, out):
    """Assemble a payload from the store and run one inference."""
    from .inference import assemble_prompt, infer, parse_output
    from .reusable import assemble_user_payload
    from .stores import load_store

    cfg = _app_config(config_path)
    store = load_store(store_dir or cfg.store_dir, task)
    payload = assemble_user_payload(
        [h.strip() for h in history.split(",") if h.strip()], store
    )
    labels = [s.strip() for s in output_set.split(",") if s.strip()]
    prompt = assemble_prompt(instruction, labels, payload.render())
    raw = infer(_chat(cfg), prompt)
    try:
        parsed = parse_output(raw, labels)
    except PromptVeilError:
        parsed = None
    _write_out(out, {"raw": raw, "parsed": parsed})


@cli.command("attack")
@click.option("--store", "store_path", default=None, help="JSONL store to attack.")
@click.option("--baseline", type=click.Choice(["random"]), default=None)
@click.option("--dataset", default=None, help="JSONL of {text} records for the baseline.")
@click.option("--n", "n_samples", type=int, default=5, show_default=True)
@click.option("--config", "config_path", type=str, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=str, default=None)
def attack_cmd(store_path, baseline, dataset, n_samples, config_path, seed, out):
    """Run a recovery evaluation or the random-entities floor."""
    cfg = _app_config(config_path)
    embedder = _embed(cfg)
    if baseline == "random":
        texts = []
        source = dataset or store_path
        if source is None:
            raise click.UsageError("provide --dataset or --store for the baseline")
        with open(source, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    record = json.loads(line)
                    texts.append(record.get("text") or record.get("original"))
        report = random_entities_baseline(
            texts, embedder, n_samples=n_samples, seed=seed, dim=cfg.attack.embed_dim
        )
    else:
        if store_path is None:
            raise click.UsageError("provide --store with original/recovered pairs")
        originals, recovered = [], []
        with open(store_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    record = json.loads(line)
                    originals.append(record["original"])
                    recovered.append(record["recovered"])
        report = evaluate_recovery(
            originals, recovered, embedder, dim=cfg.attack.embed_dim
        )
    _write_out(
        out,
        {
            "dataset_id": report.dataset_id,
            "means": report.means,
            "n": report.n,
            "config_hash": report.config_hash,
        },
    )


@cli.command("optimize")
@click.option("--algorithm", type=click.Choice(["ape", "opro"]), default="ape", show_default=True)
@click.option("--validation", "validation_path", required=True, help="JSONL of {payload, expected}.")
@click.option("--task-instruction", required=True)
@click.option("--output-set", required=True, help="Comma-separated allowed outputs.")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, default=None)
def optimize_cmd(algorithm, validation_path, task_instruction, output_set, config_path, seed, out):
    """Search for a better obfuscation instruction."""
    from .inference import assemble_prompt, infer, parse_output

    cfg = _app_config(config_path)
    chat = _chat(cfg)
    labels = [s.strip() for s in output_set.split(",") if s.strip()]
    samples = []
    with open(validation_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                samples.append((record["payload"], record["expected"]))

    def evaluator(candidate_instruction, sample):
        payload, expected = sample
        obfuscated = chat.chat(
            system=candidate_instruction, user=payload,
            temperature=cfg.pipeline.temperature,
        )
        prompt = assemble_prompt(task_instruction, labels, obfuscated)
        raw = infer(chat, prompt)
        try:
            return 1.0 if parse_output(raw, labels) == expected else 0.0
        except PromptVeilError:
            return 0.0

    generator = ProviderPromptGenerator(provider=chat)
    if algorithm == "opro":
        best, trace = opro_search(
            assets.load("opro_meta.txt"), samples, evaluator, generator,
            max_iterations=cfg.optimizer.max_iterations,
            checkpoint=cfg.optimizer.checkpoint,
        )
    else:
        best, trace = ape_search(
            assets.load("ape_meta.txt"), samples, evaluator, generator,
            iterations=cfg.optimizer.iterations,
            checkpoint=cfg.optimizer.checkpoint,
        )
    _write_out(out, {"best_prompt": best, "best_score": trace.best_score})


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--config", "config_path", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, default=None, hidden=True)
def serve_cmd(host, port, config_path, seed, out):
    """Run the HTTP gateway."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(_app_config(config_path)), host=host, port=port)


def run(argv=None) -> int:
    """Dispatch argv and map outcomes to exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_help(), err=True)
        return 1
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        return 1
    except (PromptVeilError, OSError, json.JSONDecodeError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


def main() -> None:
    sys.exit(run())
