"""Component manifests: the typed descriptor of a runnable component, plus
the in-memory registry that backs the palette and pipeline validation.
"""

from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass, field

from .docfmt import DocSyntaxError, parse_document, serialize_document
from .errors import ConflictError, InvariantError, NotFoundError

CATEGORIES = (
    "input",
    "transform",
    "filter",
    "image_transform",
    "train",
    "evaluate",
    "bless",
    "publish",
    "custom",
)

MEDIA_TYPES = ("table/csv", "image/dir", "model/bundle", "report/json", "text/plain")

PARAM_KINDS = ("string", "int", "float", "bool", "enum", "path")

_SLUG_RE = re.compile(r"^[a-z0-9-]+$")
_SEMVER_RE = re.compile(r"^(0|[1-9]\d*)\.(0|[1-9]\d*)\.(0|[1-9]\d*)$")
_PLACEHOLDER_RE = re.compile(r"\$\{param:([a-z0-9_-]+)\}")


@dataclass(frozen=True)
class PortSpec:
    name: str
    media_type: str


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str
    required: bool = False
    default: object = None
    has_default: bool = False
    allowed: tuple = ()


@dataclass(frozen=True)
class RuntimeSpec:
    kind: str
    entrypoint: str
    args: tuple = ()


@dataclass(frozen=True)
class ComponentManifest:
    id: str
    version: str
    name: str
    category: str
    runtime: RuntimeSpec
    params: tuple = ()
    inputs: tuple = ()
    outputs: tuple = ()
    description: str = ""
    deterministic: bool = True

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def input_port(self, name: str) -> PortSpec | None:
        for p in self.inputs:
            if p.name == name:
                return p
        return None

    def output_port(self, name: str) -> PortSpec | None:
        for p in self.outputs:
            if p.name == name:
                return p
        return None


_TOP_KEYS = {
    "id",
    "version",
    "name",
    "category",
    "description",
    "runtime",
    "params",
    "inputs",
    "outputs",
    "deterministic",
}


def _require(cond: bool, msg: str):
    if not cond:
        raise InvariantError(msg)


def _as_str(doc: dict, key: str, where: str) -> str:
    v = doc.get(key)
    _require(v is not None, f"{where}{key} required")
    _require(isinstance(v, str), f"{where}{key} must be a string")
    return v


def _check_unknown(doc: dict, allowed: set, where: str):
    for k in doc:
        if k not in allowed:
            raise InvariantError(f"unknown key {where}{k}")


def _parse_port(doc, where: str) -> PortSpec:
    _require(isinstance(doc, dict), f"{where} must be a mapping")
    _check_unknown(doc, {"name", "media_type"}, where + ".")
    name = _as_str(doc, "name", where + ".")
    _require(bool(_SLUG_RE.match(name)), f"{where}.name must be a slug")
    mt = _as_str(doc, "media_type", where + ".")
    _require(mt in MEDIA_TYPES, f"{where}.media_type must be one of {', '.join(MEDIA_TYPES)}")
    return PortSpec(name, mt)


def _parse_param(doc, where: str) -> ParamSpec:
    _require(isinstance(doc, dict), f"{where} must be a mapping")
    _check_unknown(doc, {"name", "kind", "required", "default", "allowed"}, where + ".")
    name = _as_str(doc, "name", where + ".")
    _require(bool(_SLUG_RE.match(name.replace("_", "-"))), f"{where}.name must be a slug")
    kind = _as_str(doc, "kind", where + ".")
    _require(kind in PARAM_KINDS, f"{where}.kind must be one of {', '.join(PARAM_KINDS)}")
    required = doc.get("required", False)
    _require(isinstance(required, bool), f"{where}.required must be a bool")
    has_default = "default" in doc
    default = doc.get("default")
    _require(not (required and has_default), f"{where}: required param must not carry a default")
    allowed = doc.get("allowed", [])
    _require(isinstance(allowed, list), f"{where}.allowed must be a list")
    if kind == "enum":
        _require(len(allowed) > 0, f"{where}: enum param requires a non-empty allowed list")
    else:
        _require(not allowed, f"{where}.allowed only valid for enum params")
    return ParamSpec(name, kind, required, default, has_default, tuple(allowed))


def parse_manifest(text: str) -> ComponentManifest:
    """Parse and validate a .component document.

    Raises DocSyntaxError (position-bearing) for malformed text and
    InvariantError naming the violated rule for structural problems.
    """
    doc = parse_document(text)
    _check_unknown(doc, _TOP_KEYS, "")
    cid = _as_str(doc, "id", "")
    _require(bool(_SLUG_RE.match(cid)), "id must be a slug matching [a-z0-9-]+")
    version = doc.get("version")
    _require(
        isinstance(version, str) and bool(_SEMVER_RE.match(version)),
        "version must be a semver string",
    )
    name = _as_str(doc, "name", "")
    category = _as_str(doc, "category", "")
    _require(category in CATEGORIES, f"category must be one of {', '.join(CATEGORIES)}")
    description = doc.get("description", "")
    _require(isinstance(description, str), "description must be a string")
    deterministic = doc.get("deterministic", True)
    _require(isinstance(deterministic, bool), "deterministic must be a bool")

    rt = doc.get("runtime")
    _require(isinstance(rt, dict), "runtime required")
    _check_unknown(rt, {"kind", "entrypoint", "args"}, "runtime.")
    rkind = rt.get("kind")
    _require(rkind is not None, "runtime.kind required")
    _require(rkind == "process", "runtime.kind must be 'process' (container is reserved)")
    entry = rt.get("entrypoint")
    _require(isinstance(entry, str) and entry != "", "runtime.entrypoint required")
    args = rt.get("args", [])
    _require(isinstance(args, list) and all(isinstance(a, str) for a in args), "runtime.args must be a list of strings")

    params = tuple(_parse_param(p, f"params[{i}]") for i, p in enumerate(_as_list(doc, "params")))
    seen: set = set()
    for p in params:
        _require(p.name not in seen, f"duplicate param {p.name!r}")
        seen.add(p.name)

    inputs = tuple(_parse_port(p, f"inputs[{i}]") for i, p in enumerate(_as_list(doc, "inputs")))
    seen = set()
    for p in inputs:
        _require(p.name not in seen, f"duplicate input port {p.name!r}")
        seen.add(p.name)

    outputs = tuple(_parse_port(p, f"outputs[{i}]") for i, p in enumerate(_as_list(doc, "outputs")))
    seen = set()
    for p in outputs:
        _require(p.name not in seen, f"duplicate output port {p.name!r}")
        seen.add(p.name)

    _require(
        category == "publish" or len(outputs) > 0,
        f"category {category!r} requires at least one output",
    )

    declared = {p.name for p in params}
    for a in args:
        for ph in _PLACEHOLDER_RE.findall(a):
            _require(ph in declared, f"arg placeholder references undeclared param {ph!r}")

    return ComponentManifest(
        id=cid,
        version=version,
        name=name,
        category=category,
        runtime=RuntimeSpec(rkind, entry, tuple(args)),
        params=params,
        inputs=inputs,
        outputs=outputs,
        description=description,
        deterministic=deterministic,
    )


def _as_list(doc: dict, key: str) -> list:
    v = doc.get(key, [])
    _require(isinstance(v, list), f"{key} must be a list")
    return v


def manifest_to_doc(m: ComponentManifest) -> dict:
    doc: dict = {
        "id": m.id,
        "version": m.version,
        "name": m.name,
        "category": m.category,
    }
    if m.description:
        doc["description"] = m.description
    if not m.deterministic:
        doc["deterministic"] = False
    doc["runtime"] = {"kind": m.runtime.kind, "entrypoint": m.runtime.entrypoint}
    if m.runtime.args:
        doc["runtime"]["args"] = list(m.runtime.args)
    if m.params:
        doc["params"] = [
            {
                "name": p.name,
                "kind": p.kind,
                **({"required": True} if p.required else {}),
                **({"default": p.default} if p.has_default else {}),
                **({"allowed": list(p.allowed)} if p.allowed else {}),
            }
            for p in m.params
        ]
    if m.inputs:
        doc["inputs"] = [{"name": p.name, "media_type": p.media_type} for p in m.inputs]
    if m.outputs:
        doc["outputs"] = [{"name": p.name, "media_type": p.media_type} for p in m.outputs]
    return doc


def serialize_manifest(m: ComponentManifest) -> str:
    """Canonical text form; parse(serialize(m)) == m."""
    return serialize_document(manifest_to_doc(m))


def manifest_digest(m: ComponentManifest) -> str:
    return hashlib.sha256(serialize_manifest(m).encode("utf-8")).hexdigest()


class Registry:
    """(id, version) -> manifest with conflict detection on re-registration.

    Reads are lock-free on an immutable snapshot; writes serialize.
    """

    def __init__(self):
        self._by_key: dict[tuple[str, str], tuple[ComponentManifest, str]] = {}
        self._lock = threading.Lock()

    def register(self, m: ComponentManifest) -> None:
        digest = manifest_digest(m)
        with self._lock:
            key = (m.id, m.version)
            existing = self._by_key.get(key)
            if existing is not None:
                if existing[1] != digest:
                    raise ConflictError(
                        f"component {m.id}@{m.version} already registered with different content"
                    )
                return
            self._by_key = {**self._by_key, key: (m, digest)}

    def lookup(self, cid: str, version: str) -> ComponentManifest:
        entry = self._by_key.get((cid, version))
        if entry is None:
            raise NotFoundError(f"unknown component {cid}@{version}")
        return entry[0]

    def list(self, category: str | None = None) -> list[ComponentManifest]:
        items = [m for (m, _) in self._by_key.values()]
        if category is not None:
            items = [m for m in items if m.category == category]
        return sorted(items, key=lambda m: (m.id, _semver_sort_key(m.version)))

    def __len__(self):
        return len(self._by_key)


def _semver_sort_key(v: str):
    major, minor, patch = (int(x) for x in v.split("."))
    # descending version order within an id
    return (-major, -minor, -patch)
