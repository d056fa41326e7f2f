/**
 * Lossless round-trip between the canvas graph and `.pipeline` documents.
 *
 * Node positions travel in a `ui:` sidecar mapping at the end of the
 * document; the backend parses and ignores it (layout is not semantics), so
 * a pipeline saved from the editor validates and runs identically to a
 * hand-written one, and re-opening it restores the canvas exactly.
 */

import {
  DocMapping,
  DocValue,
  parseDocument,
  serializeDocument,
} from "./docfmt.js";
import { BindingValue, CanvasGraph, ComponentInfo } from "./graph.js";

export interface PipelineMeta {
  name: string;
  version: number;
  params?: { [name: string]: BindingValue };
}

export interface LoadedPipeline {
  meta: PipelineMeta;
  graph: CanvasGraph;
}

export class PipelineFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "PipelineFormatError";
  }
}

/** Key components by `id@version` for wiring docs back to palette entries. */
export function componentIndex(components: ComponentInfo[]): Map<string, ComponentInfo> {
  return new Map(components.map((c) => [`${c.id}@${c.version}`, c]));
}

export function serializePipeline(graph: CanvasGraph, meta: PipelineMeta): string {
  const doc: DocMapping = {
    name: meta.name,
    version: meta.version,
  };
  if (meta.params && Object.keys(meta.params).length) {
    doc.params = { ...meta.params };
  }
  const wiresByNode = new Map<string, DocMapping>();
  for (const w of graph.listWires()) {
    const m = wiresByNode.get(w.toNode) ?? {};
    m[w.toPort] = `${w.fromNode}.${w.fromPort}`;
    wiresByNode.set(w.toNode, m);
  }
  const nodes: DocValue[] = [];
  const positions: DocMapping = {};
  for (const n of graph.listNodes()) {
    const entry: DocMapping = {
      node_id: n.nodeId,
      component: { id: n.component.id, version: n.component.version },
    };
    if (n.bindings.size) {
      const b: DocMapping = {};
      for (const [k, v] of n.bindings) b[k] = v;
      entry.bindings = b;
    }
    // wire order follows connect() order, so a loaded document round-trips
    const wires = wiresByNode.get(n.nodeId);
    if (wires) entry.wires = wires;
    nodes.push(entry);
    // (0,0) is the default; omitting it keeps ui-less documents byte-stable
    if (n.position.x !== 0 || n.position.y !== 0) {
      positions[n.nodeId] = [n.position.x, n.position.y];
    }
  }
  doc.nodes = nodes;
  if (Object.keys(positions).length) {
    doc.ui = { positions };
  }
  return serializeDocument(doc);
}

function asMapping(v: DocValue | undefined, what: string): DocMapping {
  if (v === undefined || v === null || typeof v !== "object" || Array.isArray(v)) {
    throw new PipelineFormatError(`${what} must be a mapping`);
  }
  return v;
}

export function loadPipeline(text: string, components: ComponentInfo[]): LoadedPipeline {
  const doc = parseDocument(text);
  const index = componentIndex(components);
  if (typeof doc.name !== "string") {
    throw new PipelineFormatError("pipeline needs a string 'name'");
  }
  if (typeof doc.version !== "number" || !Number.isInteger(doc.version)) {
    throw new PipelineFormatError("pipeline needs an integer 'version'");
  }
  const meta: PipelineMeta = { name: doc.name, version: doc.version };
  if (doc.params !== undefined) {
    const params = asMapping(doc.params, "params");
    meta.params = {};
    for (const [k, v] of Object.entries(params)) {
      if (v !== null && typeof v === "object") {
        throw new PipelineFormatError(`pipeline param '${k}' must be a scalar`);
      }
      meta.params[k] = v as BindingValue;
    }
  }
  const rawNodes = doc.nodes;
  if (!Array.isArray(rawNodes)) {
    throw new PipelineFormatError("pipeline needs a 'nodes' list");
  }

  let positions: DocMapping = {};
  if (doc.ui !== undefined) {
    const ui = asMapping(doc.ui, "ui");
    if (ui.positions !== undefined) positions = asMapping(ui.positions, "ui.positions");
  }

  const graph = new CanvasGraph();
  interface PendingWire {
    toNode: string;
    toPort: string;
    ref: string;
  }
  const pending: PendingWire[] = [];
  for (const raw of rawNodes) {
    const entry = asMapping(raw, "node");
    const nodeId = entry.node_id;
    if (typeof nodeId !== "string") {
      throw new PipelineFormatError("node needs a string 'node_id'");
    }
    const comp = asMapping(entry.component, `node '${nodeId}' component`);
    const key = `${String(comp.id)}@${String(comp.version)}`;
    const info = index.get(key);
    if (!info) {
      throw new PipelineFormatError(`node '${nodeId}': unknown component ${key}`);
    }
    let position = { x: 0, y: 0 };
    const pos = positions[nodeId];
    if (Array.isArray(pos) && pos.length === 2
        && typeof pos[0] === "number" && typeof pos[1] === "number") {
      position = { x: pos[0], y: pos[1] };
    }
    graph.addNode(nodeId, info, position);
    if (entry.bindings !== undefined) {
      const bindings = asMapping(entry.bindings, `node '${nodeId}' bindings`);
      for (const [param, value] of Object.entries(bindings)) {
        if (value !== null && typeof value === "object") {
          throw new PipelineFormatError(`node '${nodeId}': binding '${param}' must be a scalar`);
        }
        graph.setBinding(nodeId, param, value as BindingValue);
      }
    }
    if (entry.wires !== undefined) {
      const wires = asMapping(entry.wires, `node '${nodeId}' wires`);
      for (const [port, ref] of Object.entries(wires)) {
        if (typeof ref !== "string" || !ref.includes(".")) {
          throw new PipelineFormatError(
            `node '${nodeId}': wire '${port}' must reference 'node.port'`,
          );
        }
        pending.push({ toNode: nodeId, toPort: port, ref });
      }
    }
  }
  // wires may reference nodes declared later, so connect after all adds
  for (const w of pending) {
    const dot = w.ref.indexOf(".");
    const fromNode = w.ref.slice(0, dot);
    const fromPort = w.ref.slice(dot + 1);
    if (!graph.hasNode(fromNode)) {
      throw new PipelineFormatError(
        `node '${w.toNode}': wire '${w.toPort}' references unknown node '${fromNode}'`,
      );
    }
    graph.connect(fromNode, fromPort, w.toNode, w.toPort);
  }
  graph.markClean(); // freshly loaded documents are not dirty
  return { meta, graph };
}
