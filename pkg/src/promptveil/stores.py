"""Append-only versioned JSON-lines stores for obfuscated entity sets.

Each store version is an immutable pair of files: {task}-v{N}.jsonl with
one record per entity, and {task}-v{N}.meta.json carrying parameters and
a content hash.  The hash covers task, parameters, and entries but not
the creation timestamp, so identical runs hash identically.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .errors import UnknownEntityError

_VERSION_RE = re.compile(r"-v(\d+)\.jsonl$")


@dataclass
class EntityEntry:
    uid: str
    original: str
    obfuscation: str
    variants: List[str] = field(default_factory=list)
    attempts: int = 1
    fallback: bool = False

    def to_record(self) -> dict:
        return {
            "id": self.uid,
            "original": self.original,
            "obfuscation": self.obfuscation,
            "variants": self.variants,
            "attempts": self.attempts,
            "fallback": self.fallback,
        }

    @classmethod
    def from_record(cls, record: dict) -> "EntityEntry":
        return cls(
            uid=record["id"],
            original=record["original"],
            obfuscation=record["obfuscation"],
            variants=list(record.get("variants", [])),
            attempts=int(record.get("attempts", 1)),
            fallback=bool(record.get("fallback", False)),
        )


@dataclass
class EntityStore:
    task: str
    entries: Dict[str, EntityEntry]
    rho: float
    epsilon_sem: float
    epsilon_ldp: float
    seed: int = 0
    version: int = 1
    created_at: float = field(default_factory=time.time)

    def params(self) -> dict:
        return {
            "rho": self.rho,
            "epsilon_sem": self.epsilon_sem,
            "epsilon_ldp": self.epsilon_ldp,
            "seed": self.seed,
        }

    def content_hash(self) -> str:
        body = {
            "task": self.task,
            "params": self.params(),
            "entries": [self.entries[k].to_record() for k in sorted(self.entries)],
        }
        blob = json.dumps(body, sort_keys=True, ensure_ascii=False)
        return hashlib.blake2b(blob.encode("utf-8"), digest_size=16).hexdigest()

    def get(self, uid: str) -> EntityEntry:
        if uid not in self.entries:
            raise UnknownEntityError([uid])
        return self.entries[uid]


def next_version(directory: Path, task: str) -> int:
    best = 0
    for path in Path(directory).glob(f"{task}-v*.jsonl"):
        m = _VERSION_RE.search(path.name)
        if m:
            best = max(best, int(m.group(1)))
    return best + 1


def save_store(store: EntityStore, directory) -> Path:
    """Write a new immutable version; never overwrites an existing one."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    store.version = next_version(directory, store.task)
    data_path = directory / f"{store.task}-v{store.version}.jsonl"
    meta_path = directory / f"{store.task}-v{store.version}.meta.json"
    with open(data_path, "x", encoding="utf-8") as fh:
        for key in sorted(store.entries):
            fh.write(json.dumps(store.entries[key].to_record(), ensure_ascii=False))
            fh.write("\n")
    meta = {
        "task": store.task,
        "version": store.version,
        "params": store.params(),
        "created_at": store.created_at,
        "content_hash": store.content_hash(),
        "entry_count": len(store.entries),
    }
    with open(meta_path, "x", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, ensure_ascii=False)
    return data_path


def load_store(directory, task: str, version: Optional[int] = None) -> EntityStore:
    directory = Path(directory)
    if version is None:
        version = next_version(directory, task) - 1
    if version < 1:
        raise FileNotFoundError(f"no store versions found for task {task!r}")
    data_path = directory / f"{task}-v{version}.jsonl"
    meta_path = directory / f"{task}-v{version}.meta.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    entries: Dict[str, EntityEntry] = {}
    with open(data_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entry = EntityEntry.from_record(json.loads(line))
                entries[entry.uid] = entry
    params = meta["params"]
    store = EntityStore(
        task=task,
        entries=entries,
        rho=params["rho"],
        epsilon_sem=params["epsilon_sem"],
        epsilon_ldp=params["epsilon_ldp"],
        seed=params.get("seed", 0),
        version=version,
        created_at=meta.get("created_at", 0.0),
    )
    return store
