export type StatKey =
  | "rps"
  | "avg"
  | "p50"
  | "p95"
  | "p99"
  | "failures"
  | "cacheHitRatio"
  | "slaViolationRatio";

export const ALL_STATS: StatKey[] = [
  "rps",
  "avg",
  "p50",
  "p95",
  "p99",
  "failures",
  "cacheHitRatio",
  "slaViolationRatio",
];

/** Display unit per stat; latency stats arrive in microseconds. */
export const STAT_UNITS: Record<StatKey, string> = {
  rps: "ops/s",
  avg: "ms",
  p50: "ms",
  p95: "ms",
  p99: "ms",
  failures: "ops",
  cacheHitRatio: "ratio",
  slaViolationRatio: "ratio",
};

export interface NodeStatusDto {
  instanceId: string;
  host: string;
  port: number;
  health: string;
  phase: string;
  pluginName: string;
}

export interface ClusterDto {
  clusterName: string;
  source: string;
  refreshedAt: number;
  stale: boolean;
  staleReason?: string | null;
  nodes: NodeStatusDto[];
}

export interface OpStatsDto {
  success: number;
  notFound: number;
  failure: number;
  timeout: number;
  rps: number;
  avg_us: number;
  p50_us: number;
  p95_us: number;
  p99_us: number;
  buckets: number[] | null;
}

export interface StatsDto {
  timestamp: number;
  read: OpStatsDto;
  write: OpStatsDto;
  cacheHitRatio: number | null;
  slaViolationRatio: number;
}

/** One charted sample; a null value marks a missed poll (gap, never interpolated). */
export interface SeriesPoint {
  t: number;
  value: number | null;
}

export interface ControlOutcome {
  nodeId: string;
  ok: boolean;
  busy: boolean;
  message: string;
}
