"""Content-addressed artifact store with an append-only lineage log.

Layout under the store root:
    objects/<2-hex>/<digest>   artifact payload (file, or directory tree)
    lineage.jsonl              one record per produced artifact
    cache.jsonl                step cache: cache key -> output artifacts
    runs/<run_id>.log          append-only run event log
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import threading
from dataclasses import dataclass
from pathlib import Path

from .docfmt import canonical_json
from .errors import NotFoundError, TrustPipeError


@dataclass(frozen=True)
class ArtifactRef:
    id: str
    media_type: str
    byte_size: int
    created_by: tuple | None = None  # (run_id, node_id, port)

    def to_dict(self):
        return {
            "id": self.id,
            "media_type": self.media_type,
            "byte_size": self.byte_size,
            "created_by": list(self.created_by) if self.created_by else None,
        }


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def dir_digest(path: Path) -> str:
    """Digest of the sorted (relative path, file digest) listing."""
    entries = []
    for p in sorted(path.rglob("*")):
        if p.is_file():
            entries.append((p.relative_to(path).as_posix(), file_digest(p)))
    h = hashlib.sha256()
    for rel, dig in entries:
        h.update(rel.encode("utf-8") + b"\0" + dig.encode("ascii") + b"\n")
    return h.hexdigest()


def path_digest(path: Path) -> str:
    path = Path(path)
    return dir_digest(path) if path.is_dir() else file_digest(path)


def _tree_size(path: Path) -> int:
    if path.is_file():
        return path.stat().st_size
    return sum(p.stat().st_size for p in path.rglob("*") if p.is_file())


class ArtifactStore:
    def __init__(self, root):
        self.root = Path(root)
        (self.root / "objects").mkdir(parents=True, exist_ok=True)
        (self.root / "runs").mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()
        self._meta: dict[str, dict] = {}
        self._load_lineage()

    # -- lineage log -------------------------------------------------------

    @property
    def _lineage_path(self) -> Path:
        return self.root / "lineage.jsonl"

    def _load_lineage(self):
        if self._lineage_path.exists():
            with open(self._lineage_path, encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        rec = json.loads(line)
                        self._meta[rec["artifact"]] = rec

    def _append_lineage(self, rec: dict):
        with self._write_lock:
            with open(self._lineage_path, "a", encoding="utf-8") as f:
                f.write(canonical_json(rec) + "\n")
            self._meta[rec["artifact"]] = rec

    # -- objects -----------------------------------------------------------

    def _object_path(self, digest: str) -> Path:
        return self.root / "objects" / digest[:2] / digest

    def has(self, digest: str) -> bool:
        return self._object_path(digest).exists()

    def put_bytes(self, data: bytes, media_type: str, created_by=None, inputs=()) -> ArtifactRef:
        digest = hashlib.sha256(data).hexdigest()
        dest = self._object_path(digest)
        if not dest.exists():
            dest.parent.mkdir(parents=True, exist_ok=True)
            tmp = dest.with_name(dest.name + f".tmp{os.getpid()}.{threading.get_ident()}")
            tmp.write_bytes(data)
            os.replace(tmp, dest)  # atomic; idempotent concurrent writers race safely
        return self._record(digest, media_type, len(data), created_by, inputs)

    def put_path(self, path, media_type: str, created_by=None, inputs=()) -> ArtifactRef:
        """Ingest a file or directory tree (copied, write-temp-then-rename)."""
        src = Path(path)
        if not src.exists():
            raise NotFoundError(f"no such path {src}")
        if src.is_file():
            return self.put_bytes(src.read_bytes(), media_type, created_by, inputs)
        digest = dir_digest(src)
        dest = self._object_path(digest)
        if not dest.exists():
            dest.parent.mkdir(parents=True, exist_ok=True)
            tmp = dest.with_name(dest.name + f".tmp{os.getpid()}.{threading.get_ident()}")
            if tmp.exists():
                shutil.rmtree(tmp)
            shutil.copytree(src, tmp)
            try:
                os.replace(tmp, dest)
            except OSError:
                shutil.rmtree(tmp, ignore_errors=True)
                if not dest.exists():
                    raise
        return self._record(digest, media_type, _tree_size(src), created_by, inputs)

    def _record(self, digest, media_type, size, created_by, inputs) -> ArtifactRef:
        ref = ArtifactRef(digest, media_type, size, tuple(created_by) if created_by else None)
        known = self._meta.get(digest)
        if known is None:
            self._append_lineage(
                {
                    "artifact": digest,
                    "media_type": media_type,
                    "byte_size": size,
                    "created_by": list(created_by) if created_by else None,
                    "inputs": sorted(inputs),
                }
            )
        return ref

    def get_ref(self, digest: str) -> ArtifactRef:
        rec = self._meta.get(digest)
        if rec is None or not self.has(digest):
            raise NotFoundError(f"unknown artifact {digest}")
        cb = rec.get("created_by")
        return ArtifactRef(digest, rec["media_type"], rec["byte_size"], tuple(cb) if cb else None)

    def get_path(self, digest: str, verify: bool = False) -> Path:
        p = self._object_path(digest)
        if not p.exists():
            raise NotFoundError(f"unknown artifact {digest}")
        if verify and path_digest(p) != digest:
            raise TrustPipeError(f"artifact {digest} corrupted on disk")
        return p

    def get_bytes(self, digest: str) -> bytes:
        """Exact bytes of a file artifact, digest-verified on read."""
        p = self.get_path(digest)
        if p.is_dir():
            raise TrustPipeError(f"artifact {digest} is a directory; fetch individual files")
        data = p.read_bytes()
        if hashlib.sha256(data).hexdigest() != digest:
            raise TrustPipeError(f"artifact {digest} corrupted on disk")
        return data

    def object_count(self) -> int:
        return sum(1 for shard in (self.root / "objects").iterdir() for _ in shard.iterdir())

    # -- lineage queries ---------------------------------------------------

    def lineage(self, digest: str) -> dict:
        """Minimal closed provenance subgraph back to pipeline inputs."""
        if digest not in self._meta or not self.has(digest):
            raise NotFoundError(f"unknown artifact {digest}")
        artifacts: dict[str, dict] = {}
        steps: dict[str, dict] = {}
        edges: list[dict] = []
        frontier = [digest]
        while frontier:
            cur = frontier.pop()
            if cur in artifacts:
                continue
            rec = self._meta.get(cur)
            if rec is None:
                continue
            artifacts[cur] = {"media_type": rec["media_type"], "byte_size": rec["byte_size"]}
            cb = rec.get("created_by")
            if cb:
                run_id, node_id, port = cb
                step_key = f"{run_id}/{node_id}"
                steps.setdefault(step_key, {"run_id": run_id, "node_id": node_id})
                edges.append({"from_step": step_key, "to_artifact": cur, "port": port})
                for inp in rec.get("inputs", []):
                    edges.append({"from_artifact": inp, "to_step": step_key})
                    frontier.append(inp)
        return {
            "artifact": digest,
            "artifacts": artifacts,
            "steps": steps,
            "edges": edges,
        }

    # -- cache -------------------------------------------------------------

    @property
    def _cache_path(self) -> Path:
        return self.root / "cache.jsonl"

    def cache_lookup(self, key: str) -> dict | None:
        """Latest outputs recorded for a cache key, if all still present."""
        best = None
        if self._cache_path.exists():
            with open(self._cache_path, encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        rec = json.loads(line)
                        if rec["key"] == key:
                            best = rec["outputs"]
        if best is not None and all(self.has(d) for d in best.values()):
            return best
        return None

    def cache_store(self, key: str, outputs: dict):
        with self._write_lock:
            with open(self._cache_path, "a", encoding="utf-8") as f:
                f.write(canonical_json({"key": key, "outputs": outputs}) + "\n")

    # -- run logs ----------------------------------------------------------

    def run_log_path(self, run_id: str) -> Path:
        return self.root / "runs" / f"{run_id}.log"

    def list_runs(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "runs").glob("*.log"))

    def read_events(self, run_id: str) -> list[dict]:
        p = self.run_log_path(run_id)
        if not p.exists():
            raise NotFoundError(f"unknown run {run_id}")
        out = []
        with open(p, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    out.append(json.loads(line))
        return out
