import { ClusterDto, ControlOutcome, StatsDto } from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Client for the coordinator HTTP API. The dashboard never talks to
 * agents directly, so everything it does is reproducible with bench-ctl. */
export class CoordinatorClient {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail = (payload as { error?: string }).error ?? response.statusText;
      throw new ApiError(response.status, detail);
    }
    return payload;
  }

  getCluster(): Promise<ClusterDto> {
    return this.request("GET", "/api/v1/cluster") as Promise<ClusterDto>;
  }

  getNodeStats(nodeId: string): Promise<StatsDto> {
    return this.request("GET", `/api/v1/nodes/${encodeURIComponent(nodeId)}/stats`) as Promise<StatsDto>;
  }

  /** Node-scoped or cluster-wide command; 409 renders as a busy warning,
   * not a failure. Cluster scope returns one outcome per node. */
  async control(
    action: "start" | "stop" | "backfill" | "set-property",
    scope: { node?: string },
    options: {
      which?: "reads" | "writes" | "both";
      start?: number;
      end?: number;
      name?: string;
      value?: string;
    } = {},
  ): Promise<ControlOutcome[]> {
    const { path, body } = buildCommand(action, options);
    if (scope.node) {
      const nodePath = `/api/v1/nodes/${encodeURIComponent(scope.node)}${path}`;
      try {
        await this.request("POST", nodePath, body);
        return [{ nodeId: scope.node, ok: true, busy: false, message: "ok" }];
      } catch (error) {
        return [outcomeFromError(scope.node, error)];
      }
    }
    const fanout = (await this.request("POST", `/api/v1/cluster${path}`, body)) as Record<
      string,
      { ok: boolean; status: number | null; error: string | null }
    >;
    return Object.entries(fanout).map(([nodeId, result]) => ({
      nodeId,
      ok: result.ok,
      busy: result.status === 409,
      message: result.ok ? "ok" : result.error ?? "failed",
    }));
  }
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

function buildCommand(
  action: "start" | "stop" | "backfill" | "set-property",
  options: { which?: string; start?: number; end?: number; name?: string; value?: string },
): { path: string; body?: unknown } {
  switch (action) {
    case "start":
      return { path: `/workload/start?which=${options.which ?? "both"}` };
    case "stop":
      return { path: `/workload/stop?which=${options.which ?? "both"}` };
    case "backfill":
      return { path: "/backfill", body: { start: options.start ?? 0, end: options.end ?? 0 } };
    case "set-property":
      return { path: "/properties", body: { name: options.name, value: options.value } };
  }
}

function outcomeFromError(nodeId: string, error: unknown): ControlOutcome {
  if (error instanceof ApiError) {
    return { nodeId, ok: false, busy: error.status === 409, message: error.message };
  }
  return { nodeId, ok: false, busy: false, message: String(error) };
}
