"""Reference components: manifests plus runnable step-protocol entrypoints."""

from __future__ import annotations

from importlib import resources

from ..manifest import ComponentManifest, Registry, parse_manifest

REFERENCE_IDS = (
    "fetch-input",
    "transform-column",
    "filter-rows",
    "arrange-images",
    "train-toy",
    "confusion-eval",
    "fairness-eval",
    "explain-eval",
    "robustness-eval",
    "bless-gate",
    "publish-report",
)


def _spec_text(name: str) -> str:
    return (resources.files(__package__) / "specs" / name).read_text(encoding="utf-8")


def reference_manifests() -> list[ComponentManifest]:
    return [parse_manifest(_spec_text(f"{cid}.component")) for cid in REFERENCE_IDS]


def reference_registry() -> Registry:
    reg = Registry()
    for m in reference_manifests():
        reg.register(m)
    return reg


def demo_pipeline_text(source: str | None = None) -> str:
    """The 8-node demo pipeline; `source` replaces the fixture placeholder."""
    text = _spec_text("demo.pipeline")
    if source is not None:
        text = text.replace("file://FIXTURE", source)
    return text
