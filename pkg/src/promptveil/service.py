"""HTTP gateway tying the pipelines together.

Every job records a config hash pinning all parameters, so identical
requests against mock providers reproduce byte-identical results.  Raw
private text is never logged above debug level; log lines carry payload
hashes only.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import assets
from .attack import evaluate_recovery, random_entities_baseline
from .config import AppConfig
from .engine import ObfuscationConfig
from .errors import PromptVeilError, UnknownEntityError, UnparseableOutputError
from .inference import assemble_prompt, infer, parse_output
from .nonreusable import obfuscate_text
from .optimize import ProviderPromptGenerator, ape_search, opro_search
from .providers import (
    ProviderConfig,
    build_chat_provider,
    build_embedding_provider,
    payload_hash,
)
from .reusable import PipelineConfig, assemble_user_payload, obfuscate_entity_set
from .scoring import TokenOverlapScorer
from .stores import load_store, save_store

logger = logging.getLogger("promptveil.service")


class JobRecord(BaseModel):
    job_id: str
    kind: str
    config_hash: str
    status: str
    result_locator: str = ""
    created_at: float = Field(default_factory=time.time)


class JobRegistry:
    def __init__(self):
        self._jobs: Dict[str, JobRecord] = {}
        self._lock = threading.Lock()

    def create(self, kind: str, config_hash: str) -> JobRecord:
        record = JobRecord(
            job_id=uuid.uuid4().hex,
            kind=kind,
            config_hash=config_hash,
            status="running",
        )
        with self._lock:
            self._jobs[record.job_id] = record
        return record

    def finish(self, job_id: str, status: str, locator: str = "") -> None:
        with self._lock:
            record = self._jobs[job_id]
            record.status = status
            record.result_locator = locator

    def get(self, job_id: str) -> Optional[JobRecord]:
        with self._lock:
            return self._jobs.get(job_id)


class EntityIn(BaseModel):
    id: str
    text: str


class ObfuscateEntitiesRequest(BaseModel):
    task: str = "default"
    entities: List[EntityIn]
    rho: Optional[float] = None
    epsilon_sem: Optional[float] = None
    epsilon_ldp: Optional[float] = None
    seed: Optional[int] = None


class ObfuscateTextRequest(BaseModel):
    text: str
    seed: Optional[int] = None


class InferRequest(BaseModel):
    task: str = "default"
    version: Optional[int] = None
    history: List[str]
    instruction: str
    output_set: List[str] = Field(default_factory=list)
    ranking: bool = False


class AttackRequest(BaseModel):
    baseline: Optional[str] = None  # "random" for the random-entities floor
    dataset: List[str] = Field(default_factory=list)
    originals: List[str] = Field(default_factory=list)
    recovered: List[str] = Field(default_factory=list)
    n_samples: Optional[int] = None
    seed: int = 0


class OptimizeSample(BaseModel):
    payload: str
    expected: str


class OptimizeRequest(BaseModel):
    algorithm: str = "ape"
    task_instruction: str
    output_set: List[str]
    validation: List[OptimizeSample]
    meta_prompt: Optional[str] = None
    iterations: Optional[int] = None
    checkpoint: Optional[int] = None


def create_app(config: Optional[AppConfig] = None) -> FastAPI:
    config = config or AppConfig()
    app = FastAPI(title="obfuscation gateway")
    jobs = JobRegistry()

    chat_provider = build_chat_provider(
        ProviderConfig(**config.chat_provider.model_dump())
    )
    embed_provider = build_embedding_provider(
        ProviderConfig(**config.embed_provider.model_dump())
    )
    scorer = TokenOverlapScorer()
    instruction = assets.load(config.pipeline.instruction_preset)

    def pipeline_config(req) -> PipelineConfig:
        p = config.pipeline
        return PipelineConfig(
            instruction=instruction,
            rho=req.rho if getattr(req, "rho", None) is not None else p.rho,
            epsilon_sem=req.epsilon_sem
            if getattr(req, "epsilon_sem", None) is not None
            else p.epsilon_sem,
            epsilon_ldp=req.epsilon_ldp
            if getattr(req, "epsilon_ldp", None) is not None
            else p.epsilon_ldp,
            temperature=p.temperature,
            max_attempts=p.max_attempts,
            seed=req.seed if getattr(req, "seed", None) is not None else p.seed,
        )

    @app.post("/v1/obfuscate/entities")
    def obfuscate_entities_endpoint(req: ObfuscateEntitiesRequest):
        job = jobs.create("obfuscate-entities", config.config_hash())
        logger.info(
            "obfuscate-entities job=%s payload_hash=%s",
            job.job_id,
            payload_hash([e.model_dump() for e in req.entities]),
        )
        try:
            store = obfuscate_entity_set(
                [(e.id, e.text) for e in req.entities],
                pipeline_config(req),
                chat_provider,
                scorer,
                task=req.task,
            )
            path = save_store(store, config.store_dir)
        except PromptVeilError as exc:
            jobs.finish(job.job_id, "failed")
            raise HTTPException(status_code=422, detail=str(exc))
        except ValueError as exc:
            jobs.finish(job.job_id, "failed")
            raise HTTPException(status_code=422, detail=str(exc))
        jobs.finish(job.job_id, "succeeded", str(path))
        return {
            "job_id": job.job_id,
            "task": store.task,
            "version": store.version,
            "content_hash": store.content_hash(),
            "entries": len(store.entries),
            "store_path": str(path),
        }

    @app.post("/v1/obfuscate/text")
    def obfuscate_text_endpoint(req: ObfuscateTextRequest):
        job = jobs.create("obfuscate-text", config.config_hash())
        logger.info(
            "obfuscate-text job=%s payload_hash=%s", job.job_id, payload_hash(req.text)
        )
        cfg = ObfuscationConfig(
            instruction=assets.load("instruction_clause.txt"),
            temperature=config.pipeline.temperature,
            epsilon_sem=config.pipeline.epsilon_sem,
            max_attempts=config.pipeline.max_attempts,
            seed=req.seed if req.seed is not None else config.pipeline.seed,
        )
        try:
            out = obfuscate_text(
                req.text, cfg, chat_provider, config.pipeline.min_clause_tokens
            )
        except PromptVeilError as exc:
            jobs.finish(job.job_id, "failed")
            raise HTTPException(status_code=502, detail=str(exc))
        jobs.finish(job.job_id, "succeeded")
        return {"job_id": job.job_id, "obfuscated": out}

    @app.post("/v1/infer")
    def infer_endpoint(req: InferRequest):
        job = jobs.create("infer", config.config_hash())
        try:
            store = load_store(config.store_dir, req.task, req.version)
        except FileNotFoundError as exc:
            jobs.finish(job.job_id, "failed")
            raise HTTPException(status_code=404, detail=str(exc))
        try:
            payload = assemble_user_payload(req.history, store)
        except UnknownEntityError as exc:
            jobs.finish(job.job_id, "failed")
            raise HTTPException(
                status_code=422, detail={"missing_ids": exc.missing_ids}
            )
        prompt = assemble_prompt(req.instruction, req.output_set, payload.render())
        raw = infer(chat_provider, prompt)
        try:
            parsed = parse_output(raw, req.output_set, ranking=req.ranking)
        except UnparseableOutputError:
            parsed = None
        jobs.finish(job.job_id, "succeeded")
        return {"job_id": job.job_id, "raw": raw, "parsed": parsed}

    @app.post("/v1/attack")
    def attack_endpoint(req: AttackRequest):
        job = jobs.create("attack", config.config_hash())
        try:
            if req.baseline == "random":
                report = random_entities_baseline(
                    req.dataset,
                    embed_provider,
                    n_samples=req.n_samples or config.attack.n_samples,
                    seed=req.seed,
                    dim=config.attack.embed_dim,
                )
            else:
                report = evaluate_recovery(
                    req.originals,
                    req.recovered,
                    embed_provider,
                    dim=config.attack.embed_dim,
                )
        except PromptVeilError as exc:
            jobs.finish(job.job_id, "failed")
            raise HTTPException(status_code=422, detail=str(exc))
        jobs.finish(job.job_id, "succeeded")
        return {
            "job_id": job.job_id,
            "dataset_id": report.dataset_id,
            "means": report.means,
            "n": report.n,
            "config_hash": report.config_hash,
        }

    @app.post("/v1/optimize")
    def optimize_endpoint(req: OptimizeRequest):
        job = jobs.create("optimize", config.config_hash())
        generator = ProviderPromptGenerator(provider=chat_provider)
        samples = [(s.payload, s.expected) for s in req.validation]

        def evaluator(candidate_instruction: str, sample) -> float:
            payload, expected = sample
            cfg = ObfuscationConfig(
                instruction=candidate_instruction,
                temperature=config.pipeline.temperature,
                epsilon_sem=config.pipeline.epsilon_sem,
                seed=config.pipeline.seed,
            )
            obfuscated = chat_provider.chat(
                system=cfg.instruction, user=payload, temperature=cfg.temperature
            )
            prompt = assemble_prompt(req.task_instruction, req.output_set, obfuscated)
            raw = infer(chat_provider, prompt)
            try:
                parsed = parse_output(raw, req.output_set)
            except UnparseableOutputError:
                return 0.0
            return 1.0 if parsed == expected else 0.0

        checkpoint = req.checkpoint or config.optimizer.checkpoint
        if req.algorithm == "opro":
            meta = req.meta_prompt or assets.load("opro_meta.txt")
            best, trace = opro_search(
                meta,
                samples,
                evaluator,
                generator,
                max_iterations=req.iterations or config.optimizer.max_iterations,
                checkpoint=checkpoint,
            )
        else:
            meta = req.meta_prompt or assets.load("ape_meta.txt")
            best, trace = ape_search(
                meta,
                samples,
                evaluator,
                generator,
                iterations=req.iterations or config.optimizer.iterations,
                checkpoint=checkpoint,
            )
        jobs.finish(job.job_id, "succeeded")
        return {
            "job_id": job.job_id,
            "algorithm": req.algorithm,
            "best_prompt": best,
            "best_score": trace.best_score,
            "iterations": len(trace.iterations),
        }

    @app.get("/v1/jobs/{job_id}")
    def get_job(job_id: str):
        record = jobs.get(job_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"no job {job_id}")
        return record

    @app.get("/v1/entities/{task}/{entity_id}")
    def get_entity(task: str, entity_id: str, version: Optional[int] = None):
        try:
            store = load_store(config.store_dir, task, version)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        if entity_id not in store.entries:
            raise HTTPException(
                status_code=404, detail=f"no entity {entity_id} in task {task}"
            )
        entry = store.entries[entity_id]
        return {
            "task": task,
            "version": store.version,
            "id": entry.uid,
            "obfuscation": entry.obfuscation,
            "variants": entry.variants,
            "attempts": entry.attempts,
            "fallback": entry.fallback,
        }

    return app
