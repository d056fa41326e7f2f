"""Workspace: one on-disk root binding the artifact store, the component
registry (reference set plus user registrations) and saved pipelines.

Both the CLI and the HTTP API operate through this class so that
validation errors, run records and lineage documents are rendered
identically everywhere.
"""

from __future__ import annotations

import dataclasses
import os
from pathlib import Path

from .components import reference_manifests
from .engine import DEFAULT_TIMEOUT_S, Engine, RunRecord, load_run_record
from .errors import InvariantError, NotFoundError
from .manifest import Registry, manifest_to_doc, parse_manifest, serialize_manifest
from .pipeline import (
    ValidatedGraph,
    ValidationFailure,
    compile_workflow,
    parse_pipeline,
    serialize_pipeline,
    validate,
)
from .store import ArtifactStore

ENV_STORE = "CLAIMED_STORE"


def default_root() -> Path:
    env = os.environ.get(ENV_STORE)
    if env:
        return Path(env)
    return Path.home() / ".trustpipe" / "store"


class Workspace:
    def __init__(self, root=None):
        self.root = Path(root) if root is not None else default_root()
        self.store = ArtifactStore(self.root)
        self.engine = Engine(self.store)
        (self.root / "components").mkdir(exist_ok=True)
        (self.root / "pipelines").mkdir(exist_ok=True)

    # -- components --------------------------------------------------------

    def registry(self) -> Registry:
        reg = Registry()
        for m in reference_manifests():
            reg.register(m)
        for p in sorted((self.root / "components").glob("*.component")):
            reg.register(parse_manifest(p.read_text(encoding="utf-8")))
        return reg

    def register_component(self, text: str):
        m = parse_manifest(text)
        reg = self.registry()
        reg.register(m)  # raises ConflictError on a differing duplicate
        path = self.root / "components" / f"{m.id}@{m.version}.component"
        path.write_text(serialize_manifest(m), encoding="utf-8")
        return m

    def component_docs(self) -> list:
        return [manifest_to_doc(m) for m in self.registry().list()]

    # -- pipelines ---------------------------------------------------------

    def save_pipeline(self, name: str, text: str) -> None:
        doc = parse_pipeline(text)
        if doc.name != name:
            raise InvariantError(f"document is named {doc.name!r}, not {name!r}")
        (self.root / "pipelines" / f"{name}.pipeline").write_text(
            serialize_pipeline(doc), encoding="utf-8"
        )

    def load_pipeline(self, name: str) -> str:
        p = self.root / "pipelines" / f"{name}.pipeline"
        if not p.exists():
            raise NotFoundError(f"unknown pipeline {name!r}")
        return p.read_text(encoding="utf-8")

    def list_pipelines(self) -> list:
        return sorted(p.stem for p in (self.root / "pipelines").glob("*.pipeline"))

    def validate_text(self, text: str, params: dict | None = None) -> ValidatedGraph:
        doc = parse_pipeline(text)
        if params:
            merged = dict(doc.params)
            for k, v in params.items():
                merged[k] = v
            doc = dataclasses.replace(doc, params=merged)
        return validate(doc, self.registry())

    def compile_text(self, text: str, params: dict | None = None) -> str:
        return compile_workflow(self.validate_text(text, params))

    # -- runs --------------------------------------------------------------

    def run_text(
        self,
        text: str,
        params: dict | None = None,
        parallelism: int = 2,
        force: bool = False,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        on_event=None,
    ) -> RunRecord:
        g = self.validate_text(text, params)
        return self.engine.execute(
            g, parallelism=parallelism, force=force, timeout_s=timeout_s, on_event=on_event
        )

    def run_record(self, run_id: str) -> dict:
        return load_run_record(self.store, run_id)


def violations_payload(err: ValidationFailure) -> dict:
    """The one shared rendering of validation failures."""
    return {
        "valid": False,
        "violations": [v.to_dict() for v in err.violations],
    }


def coerce_param(text: str):
    """CLI/query parameter values arrive as strings; recover scalars."""
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text
