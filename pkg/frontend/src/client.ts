/**
 * Thin typed client for the backend's /v1 HTTP API. The fetch function is
 * injectable so the library runs in browsers, Node, and tests alike.
 */

import { RunEvent, parseSSE } from "./events.js";
import { ComponentInfo } from "./graph.js";

export interface Violation {
  node_id: string | null;
  message: string;
}

export interface ValidationOk {
  valid: true;
  nodes: number;
  edges: number;
  layers: string[][];
}

export interface ValidationFailed {
  valid: false;
  violations: Violation[];
}

export type ValidationResult = ValidationOk | ValidationFailed;

export interface RunRecord {
  run_id: string;
  state: string;
  pipeline_digest: string;
  node_states: { [nodeId: string]: { state: string; [k: string]: unknown } };
  produced: { [nodePort: string]: string };
  processes_spawned: number;
  [k: string]: unknown;
}

export interface BlessOutcome {
  record: {
    kind: string;
    asset: string;
    decision: string;
    rules: { rule: string; value: unknown; passed: boolean; reason?: string }[];
    [k: string]: unknown;
  };
  revision?: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, readonly body: unknown, message?: string) {
    super(message ?? `HTTP ${status}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: { [name: string]: string };
  body?: string;
}) => Promise<{
  status: number;
  text(): Promise<string>;
}>;

async function readBody(res: { status: number; text(): Promise<string> }): Promise<unknown> {
  const text = await res.text();
  try {
    return text ? JSON.parse(text) : null;
  } catch {
    return text;
  }
}

function errorMessage(body: unknown): string | undefined {
  if (body && typeof body === "object" && "error" in body) {
    const e = (body as { error: unknown }).error;
    if (typeof e === "string") return e;
  }
  return undefined;
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (globalThis as { fetch?: FetchLike }).fetch ??
      (() => {
        throw new Error("no fetch available; pass one to the ApiClient constructor");
      }),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request(
    method: string,
    path: string,
    body?: string,
    contentType = "application/json",
  ): Promise<unknown> {
    const res = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      ...(body !== undefined
        ? { headers: { "content-type": contentType }, body }
        : {}),
    });
    const parsed = await readBody(res);
    if (res.status >= 400) throw new ApiError(res.status, parsed, errorMessage(parsed));
    return parsed;
  }

  async components(): Promise<ComponentInfo[]> {
    const data = (await this.request("GET", "/v1/components")) as {
      components: ComponentInfo[];
    };
    return data.components;
  }

  async registerComponent(text: string): Promise<string> {
    const data = (await this.request(
      "POST", "/v1/components", text, "text/plain",
    )) as { registered: string };
    return data.registered;
  }

  async listPipelines(): Promise<string[]> {
    const data = (await this.request("GET", "/v1/pipelines")) as { pipelines: string[] };
    return data.pipelines;
  }

  async getPipeline(name: string): Promise<string> {
    const res = await this.fetchFn(`${this.baseUrl}/v1/pipelines/${encodeURIComponent(name)}`);
    const text = await res.text();
    if (res.status >= 400) {
      let parsed: unknown = text;
      try {
        parsed = JSON.parse(text);
      } catch {
        /* keep raw text */
      }
      throw new ApiError(res.status, parsed, errorMessage(parsed));
    }
    return text;
  }

  async savePipeline(name: string, text: string): Promise<void> {
    await this.request("PUT", `/v1/pipelines/${encodeURIComponent(name)}`, text, "text/plain");
  }

  /**
   * Validate a document (or the saved pipeline when `text` is omitted).
   * A violations response comes back as a value, not an exception — the
   * editor renders it inline rather than failing.
   */
  async validate(name: string, text?: string): Promise<ValidationResult> {
    try {
      return (await this.request(
        "POST",
        `/v1/pipelines/${encodeURIComponent(name)}/validate`,
        text,
        "text/plain",
      )) as ValidationOk;
    } catch (e) {
      if (e instanceof ApiError && e.status === 400 && e.body &&
          typeof e.body === "object" && "violations" in e.body) {
        return e.body as ValidationFailed;
      }
      throw e;
    }
  }

  async run(
    pipeline: string,
    opts: { params?: { [k: string]: unknown }; force?: boolean; parallelism?: number } = {},
  ): Promise<RunRecord> {
    return (await this.request(
      "POST",
      "/v1/runs",
      JSON.stringify({ pipeline, ...opts }),
    )) as RunRecord;
  }

  async runRecord(runId: string): Promise<RunRecord> {
    return (await this.request(
      "GET", `/v1/runs/${encodeURIComponent(runId)}`,
    )) as RunRecord;
  }

  /** Replay the run's event log (SSE-framed) as parsed events. */
  async runEvents(runId: string): Promise<RunEvent[]> {
    const res = await this.fetchFn(
      `${this.baseUrl}/v1/runs/${encodeURIComponent(runId)}/events`,
    );
    const text = await res.text();
    if (res.status >= 400) {
      let parsed: unknown = text;
      try {
        parsed = JSON.parse(text);
      } catch {
        /* keep raw text */
      }
      throw new ApiError(res.status, parsed, errorMessage(parsed));
    }
    return parseSSE(text);
  }

  async artifact(digest: string): Promise<unknown> {
    return this.request("GET", `/v1/artifacts/${encodeURIComponent(digest)}`);
  }

  async lineage(digest: string): Promise<unknown> {
    return this.request("GET", `/v1/artifacts/${encodeURIComponent(digest)}/lineage`);
  }

  async bless(
    modelId: string,
    body: { model_artifact: string; report_artifact: string; policy: string },
  ): Promise<BlessOutcome> {
    return (await this.request(
      "POST",
      `/v1/models/${encodeURIComponent(modelId)}/bless`,
      JSON.stringify(body),
    )) as BlessOutcome;
  }

  async setCanary(modelId: string, revision: number, weight: number): Promise<unknown> {
    return this.request(
      "POST",
      `/v1/models/${encodeURIComponent(modelId)}/canary`,
      JSON.stringify({ revision, weight }),
    );
  }

  async predict(modelId: string, imageB64: string): Promise<unknown> {
    return this.request(
      "POST",
      `/v1/serve/${encodeURIComponent(modelId)}/predict`,
      JSON.stringify({ image_b64: imageB64 }),
    );
  }
}
