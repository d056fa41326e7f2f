/**
 * Client-side pipeline graph model for a canvas editor: nodes with
 * positions, typed ports, wires, and a dirty flag. All checks here are
 * pre-checks for immediate editor feedback (connection tooltips, palette
 * filtering); the backend's validator remains the source of truth and the
 * editor surfaces its violation list verbatim after save.
 */

export interface PortSpec {
  name: string;
  media_type: string;
}

export interface ParamSpec {
  name: string;
  kind: string;
  required?: boolean;
  default?: unknown;
  choices?: string[];
}

export interface ComponentInfo {
  id: string;
  version: string;
  name: string;
  category: string;
  description?: string;
  params?: ParamSpec[];
  inputs?: PortSpec[];
  outputs?: PortSpec[];
}

export interface Position {
  x: number;
  y: number;
}

export type BindingValue = string | number | boolean | null;

export interface GraphNode {
  nodeId: string;
  component: ComponentInfo;
  position: Position;
  bindings: Map<string, BindingValue>;
}

export interface Wire {
  fromNode: string;
  fromPort: string;
  toNode: string;
  toPort: string;
}

export type ConnectionCheck =
  | { ok: true }
  | { ok: false; reason: string };

const SLUG_RE = /^[a-z0-9]+(-[a-z0-9]+)*$/;

export class GraphError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "GraphError";
  }
}

export class CanvasGraph {
  private nodes = new Map<string, GraphNode>();
  /** keyed by `${toNode}.${toPort}` — an input port holds at most one wire */
  private wires = new Map<string, Wire>();
  private _dirty = false;

  get dirty(): boolean {
    return this._dirty;
  }

  /** Called after a successful save; mutations set the flag again. */
  markClean(): void {
    this._dirty = false;
  }

  private touch(): void {
    this._dirty = true;
  }

  listNodes(): GraphNode[] {
    return [...this.nodes.values()];
  }

  getNode(nodeId: string): GraphNode {
    const n = this.nodes.get(nodeId);
    if (!n) throw new GraphError(`no node '${nodeId}'`);
    return n;
  }

  hasNode(nodeId: string): boolean {
    return this.nodes.has(nodeId);
  }

  listWires(): Wire[] {
    return [...this.wires.values()];
  }

  addNode(nodeId: string, component: ComponentInfo, position: Position = { x: 0, y: 0 }): GraphNode {
    if (!SLUG_RE.test(nodeId)) {
      throw new GraphError(`node id '${nodeId}' is not a slug`);
    }
    if (this.nodes.has(nodeId)) {
      throw new GraphError(`node '${nodeId}' already exists`);
    }
    const node: GraphNode = {
      nodeId,
      component,
      position: { ...position },
      bindings: new Map(),
    };
    this.nodes.set(nodeId, node);
    this.touch();
    return node;
  }

  removeNode(nodeId: string): void {
    if (!this.nodes.delete(nodeId)) throw new GraphError(`no node '${nodeId}'`);
    for (const [key, w] of [...this.wires]) {
      if (w.fromNode === nodeId || w.toNode === nodeId) this.wires.delete(key);
    }
    this.touch();
  }

  moveNode(nodeId: string, position: Position): void {
    const n = this.getNode(nodeId);
    if (n.position.x === position.x && n.position.y === position.y) return;
    n.position = { ...position };
    this.touch();
  }

  setBinding(nodeId: string, param: string, value: BindingValue): void {
    const n = this.getNode(nodeId);
    const spec = (n.component.params ?? []).find((p) => p.name === param);
    if (!spec) {
      throw new GraphError(`component ${n.component.id} has no parameter '${param}'`);
    }
    n.bindings.set(param, value);
    this.touch();
  }

  clearBinding(nodeId: string, param: string): void {
    const n = this.getNode(nodeId);
    if (n.bindings.delete(param)) this.touch();
  }

  /**
   * Pre-check a prospective connection without mutating the graph. The
   * `reason` is tooltip-ready, e.g. `table/csv ≠ image/dir`.
   */
  checkConnection(fromNode: string, fromPort: string, toNode: string, toPort: string): ConnectionCheck {
    const src = this.nodes.get(fromNode);
    if (!src) return { ok: false, reason: `no node '${fromNode}'` };
    const dst = this.nodes.get(toNode);
    if (!dst) return { ok: false, reason: `no node '${toNode}'` };
    if (fromNode === toNode) return { ok: false, reason: "a node cannot feed itself" };
    const out = (src.component.outputs ?? []).find((p) => p.name === fromPort);
    if (!out) {
      return { ok: false, reason: `${src.component.id} has no output '${fromPort}'` };
    }
    const inp = (dst.component.inputs ?? []).find((p) => p.name === toPort);
    if (!inp) {
      return { ok: false, reason: `${dst.component.id} has no input '${toPort}'` };
    }
    if (out.media_type !== inp.media_type) {
      return { ok: false, reason: `${out.media_type} ≠ ${inp.media_type}` };
    }
    if (this.wouldCycle(fromNode, toNode)) {
      return { ok: false, reason: "connection would create a cycle" };
    }
    return { ok: true };
  }

  /** Connect two ports; replaces any existing wire into the input port. */
  connect(fromNode: string, fromPort: string, toNode: string, toPort: string): void {
    const check = this.checkConnection(fromNode, fromPort, toNode, toPort);
    if (!check.ok) throw new GraphError(check.reason);
    this.wires.set(`${toNode}.${toPort}`, { fromNode, fromPort, toNode, toPort });
    this.touch();
  }

  disconnect(toNode: string, toPort: string): void {
    if (this.wires.delete(`${toNode}.${toPort}`)) this.touch();
  }

  private wouldCycle(fromNode: string, toNode: string): boolean {
    // adding toNode -> ... -> fromNode reachability closes a cycle
    const downstream = new Map<string, string[]>();
    for (const w of this.wires.values()) {
      const lst = downstream.get(w.fromNode) ?? [];
      lst.push(w.toNode);
      downstream.set(w.fromNode, lst);
    }
    const stack = [toNode];
    const seen = new Set<string>();
    while (stack.length) {
      const cur = stack.pop()!;
      if (cur === fromNode) return true;
      if (seen.has(cur)) continue;
      seen.add(cur);
      stack.push(...(downstream.get(cur) ?? []));
    }
    return false;
  }

  /** Inputs of `nodeId` that no wire feeds yet (editor highlights these). */
  unwiredInputs(nodeId: string): PortSpec[] {
    const n = this.getNode(nodeId);
    return (n.component.inputs ?? []).filter((p) => !this.wires.has(`${nodeId}.${p.name}`));
  }

  /** Required params of `nodeId` with no binding yet. */
  unboundParams(nodeId: string): ParamSpec[] {
    const n = this.getNode(nodeId);
    return (n.component.params ?? []).filter(
      (p) => (p.required ?? false) && !n.bindings.has(p.name),
    );
  }
}
