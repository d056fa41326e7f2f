"""Pipeline documents, DAG validation against a registry, deterministic
topological layering, and compilation to the engine-neutral workflow format.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .docfmt import parse_document, serialize_document
from .errors import InvariantError
from .manifest import ComponentManifest, Registry

_SLUG_RE = re.compile(r"^[a-z0-9-]+$")
_PIPELINE_PARAM_RE = re.compile(r"^\$\{pipeline:([a-z0-9_-]+)\}$")
_WIRE_RE = re.compile(r"^([a-z0-9-]+)\.([a-z0-9-]+)$")


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    component_id: str
    component_version: str
    bindings: dict
    wires: dict  # input port -> (upstream node_id, output port)


@dataclass(frozen=True)
class PipelineDoc:
    name: str
    version: int
    params: dict
    nodes: tuple
    ui: dict | None = None  # layout sidecar, ignored by the engine

    def node(self, node_id: str) -> NodeSpec | None:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        return None


@dataclass(frozen=True)
class Edge:
    src: str  # node_id
    src_port: str
    dst: str
    dst_port: str
    media_type: str


@dataclass(frozen=True)
class ValidatedGraph:
    doc: PipelineDoc
    manifests: dict  # node_id -> ComponentManifest
    resolved_params: dict  # node_id -> {param: value}
    edges: tuple
    layers: tuple  # tuple of frozensets of node_ids

    @property
    def node_ids(self):
        return [n.node_id for n in self.doc.nodes]

    def upstream(self, node_id: str) -> list[str]:
        return sorted({e.src for e in self.edges if e.dst == node_id})

    def downstream_closure(self, node_id: str) -> set[str]:
        out: set[str] = set()
        frontier = [node_id]
        while frontier:
            cur = frontier.pop()
            for e in self.edges:
                if e.src == cur and e.dst not in out:
                    out.add(e.dst)
                    frontier.append(e.dst)
        return out


def _require(cond: bool, msg: str):
    if not cond:
        raise InvariantError(msg)


def parse_pipeline(text: str) -> PipelineDoc:
    """Parse a .pipeline document; enforces PipelineDoc invariants."""
    doc = parse_document(text)
    for k in doc:
        if k not in ("name", "version", "params", "nodes", "ui"):
            raise InvariantError(f"unknown key {k}")
    name = doc.get("name")
    _require(isinstance(name, str) and name != "", "name required")
    version = doc.get("version")
    _require(isinstance(version, int) and version >= 1, "version must be an int >= 1")
    params = doc.get("params", {})
    _require(isinstance(params, dict), "params must be a mapping")
    raw_nodes = doc.get("nodes", [])
    _require(isinstance(raw_nodes, list), "nodes must be a list")
    ui = doc.get("ui")
    _require(ui is None or isinstance(ui, dict), "ui must be a mapping")

    nodes = []
    seen: set = set()
    for i, nd in enumerate(raw_nodes):
        where = f"nodes[{i}]"
        _require(isinstance(nd, dict), f"{where} must be a mapping")
        for k in nd:
            _require(k in ("node_id", "component", "bindings", "wires"), f"unknown key {where}.{k}")
        nid = nd.get("node_id")
        _require(isinstance(nid, str) and bool(_SLUG_RE.match(nid)), f"{where}.node_id must be a slug")
        _require(nid not in seen, f"duplicate node id {nid!r}")
        seen.add(nid)
        comp = nd.get("component")
        _require(isinstance(comp, dict), f"{where}.component required")
        cid = comp.get("id")
        cver = comp.get("version")
        _require(isinstance(cid, str) and isinstance(cver, str), f"{where}.component needs id and version")
        bindings = nd.get("bindings", {})
        _require(isinstance(bindings, dict), f"{where}.bindings must be a mapping")
        raw_wires = nd.get("wires", {})
        _require(isinstance(raw_wires, dict), f"{where}.wires must be a mapping")
        wires = {}
        for port, target in raw_wires.items():
            _require(isinstance(target, str), f"{where}.wires.{port} must be 'node_id.output_port'")
            m = _WIRE_RE.match(target)
            _require(m is not None, f"{where}.wires.{port}: malformed wire {target!r}")
            _require(m.group(1) != nid, f"{where}.wires.{port}: self-wire on node {nid!r}")
            wires[port] = (m.group(1), m.group(2))
        nodes.append(NodeSpec(nid, cid, cver, dict(bindings), wires))
    return PipelineDoc(name, version, dict(params), tuple(nodes), ui)


def serialize_pipeline(doc: PipelineDoc) -> str:
    out: dict = {"name": doc.name, "version": doc.version}
    if doc.params:
        out["params"] = dict(doc.params)
    out["nodes"] = [
        {
            "node_id": n.node_id,
            "component": {"id": n.component_id, "version": n.component_version},
            **({"bindings": dict(n.bindings)} if n.bindings else {}),
            **(
                {"wires": {p: f"{src}.{port}" for p, (src, port) in sorted(n.wires.items())}}
                if n.wires
                else {}
            ),
        }
        for n in doc.nodes
    ]
    if doc.ui:
        out["ui"] = doc.ui
    return serialize_document(out)


@dataclass
class Violation:
    node_id: str | None
    message: str

    def to_dict(self):
        return {"node_id": self.node_id, "message": self.message}


class ValidationFailure(InvariantError):
    """Carries the complete list of violations, not just the first."""

    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(v.message for v in violations))
        self.violations = violations


def validate(doc: PipelineDoc, reg: Registry) -> ValidatedGraph:
    """Resolve components, check wiring, params and acyclicity.

    Accumulates every independent violation before raising; the editor
    renders the full list.
    """
    violations: list[Violation] = []
    manifests: dict[str, ComponentManifest] = {}
    by_id = {n.node_id: n for n in doc.nodes}

    for n in doc.nodes:
        try:
            manifests[n.node_id] = reg.lookup(n.component_id, n.component_version)
        except Exception:
            violations.append(
                Violation(n.node_id, f"unknown component {n.component_id}@{n.component_version}")
            )

    edges: list[Edge] = []
    resolved_params: dict[str, dict] = {}
    for n in doc.nodes:
        m = manifests.get(n.node_id)
        if m is None:
            continue
        declared_inputs = {p.name: p for p in m.inputs}
        for port, (src, src_port) in sorted(n.wires.items()):
            if port not in declared_inputs:
                violations.append(Violation(n.node_id, f"wire to undeclared input port {n.node_id}.{port}"))
                continue
            src_node = by_id.get(src)
            if src_node is None:
                violations.append(Violation(n.node_id, f"wire references unknown node {src!r}"))
                continue
            src_m = manifests.get(src)
            if src_m is None:
                continue  # already reported as unknown component
            out_port = src_m.output_port(src_port)
            if out_port is None:
                violations.append(
                    Violation(n.node_id, f"wire references undeclared output port {src}.{src_port}")
                )
                continue
            want = declared_inputs[port].media_type
            if out_port.media_type != want:
                violations.append(
                    Violation(
                        n.node_id,
                        f"media-type mismatch: {src}.{src_port} is {out_port.media_type} "
                        f"but {n.node_id}.{port} expects {want}",
                    )
                )
                continue
            edges.append(Edge(src, src_port, n.node_id, port, want))
        for port in declared_inputs:
            if port not in n.wires:
                violations.append(Violation(n.node_id, f"input port {n.node_id}.{port} is not wired"))

        # param resolution
        resolved = {}
        for name, value in sorted(n.bindings.items()):
            spec = m.param(name)
            if spec is None:
                violations.append(Violation(n.node_id, f"binding for undeclared param {name!r}"))
                continue
            if isinstance(value, str):
                ref = _PIPELINE_PARAM_RE.match(value)
                if ref:
                    pname = ref.group(1)
                    if pname not in doc.params:
                        violations.append(
                            Violation(n.node_id, f"binding {name!r} references unknown pipeline param {pname!r}")
                        )
                        continue
                    value = doc.params[pname]
            if spec.kind == "enum" and value not in spec.allowed:
                violations.append(
                    Violation(n.node_id, f"param {name!r} value {value!r} not in allowed set")
                )
                continue
            resolved[name] = value
        for spec in m.params:
            if spec.name not in resolved:
                if spec.has_default:
                    resolved[spec.name] = spec.default
                elif spec.required:
                    violations.append(Violation(n.node_id, f"required param {spec.name!r} unbound"))
        resolved_params[n.node_id] = resolved

    cycle = _find_cycle([n.node_id for n in doc.nodes], edges)
    if cycle:
        violations.append(Violation(None, "cycle: " + " -> ".join(cycle)))

    if violations:
        raise ValidationFailure(violations)

    layers = _layer([n.node_id for n in doc.nodes], edges)
    return ValidatedGraph(doc, manifests, resolved_params, tuple(edges), layers)


def _find_cycle(nodes: list[str], edges: list[Edge]) -> list[str] | None:
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for e in edges:
        adj[e.src].append(e.dst)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}
    stack: list[str] = []

    def visit(u: str) -> list[str] | None:
        color[u] = GRAY
        stack.append(u)
        for v in sorted(adj[u]):
            if color[v] == GRAY:
                return stack[stack.index(v) :]
            if color[v] == WHITE:
                found = visit(v)
                if found:
                    return found
        stack.pop()
        color[u] = BLACK
        return None

    for n in sorted(nodes):
        if color[n] == WHITE:
            found = visit(n)
            if found:
                return found
    return None


def _layer(nodes: list[str], edges: list[Edge]) -> tuple:
    """Greedy earliest-possible layering: layer = longest path from a source."""
    depth: dict[str, int] = {}
    preds: dict[str, list[str]] = {n: [] for n in nodes}
    for e in edges:
        preds[e.dst].append(e.src)

    def d(n: str) -> int:
        if n not in depth:
            depth[n] = 0 if not preds[n] else 1 + max(d(p) for p in preds[n])
        return depth[n]

    for n in nodes:
        d(n)
    layers: list[set] = []
    for n in nodes:
        while len(layers) <= depth[n]:
            layers.append(set())
        layers[depth[n]].add(n)
    return tuple(frozenset(l) for l in layers)


def topo_layers(g: ValidatedGraph) -> tuple:
    return g.layers


PLACEHOLDER = "{{steps.%s.outputs.%s}}"


def compile_workflow(g: ValidatedGraph) -> str:
    """Emit the engine-neutral .workflow document for a validated graph."""
    steps = []
    for n in sorted(g.doc.nodes, key=lambda n: n.node_id):
        inputs = {
            port: PLACEHOLDER % (src, src_port)
            for port, (src, src_port) in sorted(n.wires.items())
        }
        steps.append(
            {
                "step_id": n.node_id,
                "component": {"id": n.component_id, "version": n.component_version},
                **({"params": {k: v for k, v in sorted(g.resolved_params[n.node_id].items())}}
                   if g.resolved_params[n.node_id] else {}),
                **({"inputs": inputs} if inputs else {}),
            }
        )
    edges = [
        {"from": f"{e.src}.{e.src_port}", "to": f"{e.dst}.{e.dst_port}"}
        for e in sorted(g.edges, key=lambda e: (e.src, e.src_port, e.dst, e.dst_port))
    ]
    doc: dict = {"pipeline": g.doc.name, "version": g.doc.version, "steps": steps}
    if edges:
        doc["edges"] = edges
    return serialize_document(doc)


_PLACEHOLDER_RE = re.compile(r"^\{\{steps\.([a-z0-9-]+)\.outputs\.([a-z0-9-]+)\}\}$")


def import_workflow(text: str) -> PipelineDoc:
    """Read a .workflow document back into a PipelineDoc.

    compile -> import -> compile is a fixed point; the edge set and bindings
    survive exactly.
    """
    doc = parse_document(text)
    name = doc.get("pipeline")
    _require(isinstance(name, str) and name != "", "pipeline name required")
    version = doc.get("version", 1)
    _require(isinstance(version, int) and version >= 1, "version must be an int >= 1")
    steps = doc.get("steps", [])
    _require(isinstance(steps, list), "steps must be a list")
    declared_edges = set()
    for e in doc.get("edges", []):
        _require(isinstance(e, dict) and "from" in e and "to" in e, "edge needs from/to")
        declared_edges.add((e["from"], e["to"]))

    nodes = []
    seen_edges = set()
    for i, st in enumerate(steps):
        where = f"steps[{i}]"
        _require(isinstance(st, dict), f"{where} must be a mapping")
        sid = st.get("step_id")
        _require(isinstance(sid, str) and bool(_SLUG_RE.match(sid)), f"{where}.step_id must be a slug")
        comp = st.get("component")
        _require(isinstance(comp, dict) and "id" in comp and "version" in comp, f"{where}.component required")
        wires = {}
        for port, ph in st.get("inputs", {}).items():
            m = _PLACEHOLDER_RE.match(str(ph))
            _require(m is not None, f"{where}.inputs.{port}: malformed placeholder {ph!r}")
            wires[port] = (m.group(1), m.group(2))
            seen_edges.add((f"{m.group(1)}.{m.group(2)}", f"{sid}.{port}"))
        nodes.append(NodeSpec(sid, comp["id"], comp["version"], dict(st.get("params", {})), wires))
    _require(seen_edges == declared_edges, "edges[] does not match step input placeholders")
    return PipelineDoc(name, version, {}, tuple(nodes))
