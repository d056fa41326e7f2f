/**
 * Reducer turning the run event stream into a view model for the canvas.
 *
 * The invariant is that the UI never invents state: every node color comes
 * from an event the backend emitted. `run_started` seeds all named nodes as
 * `pending`; everything after that is a literal replay. Events carry a dense
 * `seq`; the reducer tracks the last applied one so a dropped SSE connection
 * can resume with `Last-Event-ID` and duplicates on overlap are ignored.
 */

export type NodeState =
  | "pending"
  | "running"
  | "cached"
  | "succeeded"
  | "failed"
  | "never_scheduled";

export interface RunEvent {
  seq: number;
  ts_ms: number;
  event: "run_started" | "node_state" | "run_finished" | string;
  [key: string]: unknown;
}

export interface NodeView {
  state: NodeState;
  /** digest per output port, present once the node finished */
  artifacts?: { [port: string]: string };
  exitCode?: number;
  stderrTail?: string;
  error?: string;
  cacheKey?: string;
  /** for never_scheduled: the node id whose failure blocked this one */
  cause?: string;
}

export interface RunView {
  runId: string | null;
  pipeline: string | null;
  pipelineDigest: string | null;
  state: "unknown" | "running" | "succeeded" | "failed";
  nodes: { [nodeId: string]: NodeView };
  processesSpawned: number | null;
  lastSeq: number;
}

export class EventOrderError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "EventOrderError";
  }
}

export class RunEventReducer {
  readonly view: RunView = {
    runId: null,
    pipeline: null,
    pipelineDigest: null,
    state: "unknown",
    nodes: {},
    processesSpawned: null,
    lastSeq: 0,
  };

  /**
   * Apply one event. Returns true when the view changed; replayed events
   * (`seq` at or below the last applied) are skipped so a resumed stream can
   * safely overlap. A gap in `seq` raises — resubscribe instead of guessing.
   */
  apply(ev: RunEvent): boolean {
    if (typeof ev.seq !== "number" || !Number.isInteger(ev.seq) || ev.seq < 1) {
      throw new EventOrderError(`event has no usable seq: ${JSON.stringify(ev.seq)}`);
    }
    if (ev.seq <= this.view.lastSeq) return false; // replay overlap
    if (ev.seq !== this.view.lastSeq + 1) {
      throw new EventOrderError(
        `event gap: expected seq ${this.view.lastSeq + 1}, got ${ev.seq}`,
      );
    }
    this.view.lastSeq = ev.seq;
    switch (ev.event) {
      case "run_started": {
        this.view.runId = typeof ev.run_id === "string" ? ev.run_id : null;
        this.view.pipeline = typeof ev.pipeline === "string" ? ev.pipeline : null;
        this.view.pipelineDigest =
          typeof ev.pipeline_digest === "string" ? ev.pipeline_digest : null;
        this.view.state = "running";
        if (Array.isArray(ev.nodes)) {
          for (const nid of ev.nodes) {
            if (typeof nid === "string") this.view.nodes[nid] = { state: "pending" };
          }
        }
        return true;
      }
      case "node_state": {
        const nid = ev.node_id;
        const state = ev.state;
        if (typeof nid !== "string" || typeof state !== "string") return true;
        const node: NodeView = { state: state as NodeState };
        if (ev.artifacts && typeof ev.artifacts === "object") {
          node.artifacts = ev.artifacts as { [port: string]: string };
        }
        if (typeof ev.exit_code === "number") node.exitCode = ev.exit_code;
        if (typeof ev.stderr_tail === "string") node.stderrTail = ev.stderr_tail;
        if (typeof ev.error === "string") node.error = ev.error;
        if (typeof ev.cache_key === "string") node.cacheKey = ev.cache_key;
        if (typeof ev.cause === "string") node.cause = ev.cause;
        this.view.nodes[nid] = node;
        return true;
      }
      case "run_finished": {
        if (ev.state === "succeeded" || ev.state === "failed") {
          this.view.state = ev.state;
        }
        if (typeof ev.processes_spawned === "number") {
          this.view.processesSpawned = ev.processes_spawned;
        }
        return true;
      }
      default:
        // forward-compatible: unknown event types advance seq but change nothing
        return false;
    }
  }

  applyAll(events: RunEvent[]): void {
    for (const ev of events) this.apply(ev);
  }

  /** `Last-Event-ID` header value for resubscribing after a dropped stream. */
  lastEventId(): string {
    return String(this.view.lastSeq);
  }

  /** Node ids grouped by state, for the run summary strip. */
  counts(): { [state: string]: number } {
    const out: { [state: string]: number } = {};
    for (const n of Object.values(this.view.nodes)) {
      out[n.state] = (out[n.state] ?? 0) + 1;
    }
    return out;
  }
}

/**
 * Parse a server-sent-events payload (`id: <seq>` + `data: <json>` blocks)
 * into run events. The `id` field must agree with the embedded `seq`.
 */
export function parseSSE(text: string): RunEvent[] {
  const events: RunEvent[] = [];
  for (const block of text.split("\n\n")) {
    if (!block.trim()) continue;
    let id: string | null = null;
    const data: string[] = [];
    for (const line of block.split("\n")) {
      if (line.startsWith("id:")) id = line.slice(3).trim();
      else if (line.startsWith("data:")) data.push(line.slice(5).trim());
    }
    if (!data.length) continue;
    const ev = JSON.parse(data.join("\n")) as RunEvent;
    if (id !== null && String(ev.seq) !== id) {
      throw new EventOrderError(`SSE id ${id} disagrees with payload seq ${ev.seq}`);
    }
    events.push(ev);
  }
  return events;
}
