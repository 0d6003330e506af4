import { RingBuffer } from "./ringbuffer";
import {
  ALL_STATS,
  ClusterDto,
  NodeStatusDto,
  SeriesPoint,
  StatKey,
  StatsDto,
} from "./types";

export const RING_CAPACITY = 600;
export const DEFAULT_POLL_INTERVAL_SECONDS = 2;

/** Pull one charted value out of a stats payload, already in display
 * units (latencies convert from microseconds to milliseconds). */
export function statValue(stats: StatsDto, stat: StatKey): number | null {
  switch (stat) {
    case "rps":
      return stats.read.rps + stats.write.rps;
    case "avg":
      return stats.read.avg_us / 1000;
    case "p50":
      return stats.read.p50_us / 1000;
    case "p95":
      return stats.read.p95_us / 1000;
    case "p99":
      return stats.read.p99_us / 1000;
    case "failures":
      return (
        stats.read.failure + stats.read.timeout + stats.write.failure + stats.write.timeout
      );
    case "cacheHitRatio":
      return stats.cacheHitRatio;
    case "slaViolationRatio":
      return stats.slaViolationRatio;
  }
}

export class DashboardModel {
  cluster: ClusterDto | null = null;
  stale = false;
  staleReason: string | null = null;
  selectedNodes = new Set<string>();
  selectedStats = new Set<StatKey>(["rps", "p99"]);
  pollIntervalSeconds = DEFAULT_POLL_INTERVAL_SECONDS;
  private series = new Map<string, RingBuffer<SeriesPoint>>();
  private seen = new Set<string>();

  nodes(): NodeStatusDto[] {
    return this.cluster ? this.cluster.nodes : [];
  }

  phaseOf(nodeId: string): string {
    const node = this.nodes().find((n) => n.instanceId === nodeId);
    return node ? node.phase : "";
  }

  applyCluster(dto: ClusterDto): void {
    this.cluster = dto;
    this.stale = dto.stale;
    this.staleReason = dto.staleReason ?? null;
    for (const node of dto.nodes) {
      // newly discovered nodes start selected so their stats chart at once
      if (!this.seen.has(node.instanceId)) {
        this.seen.add(node.instanceId);
        this.selectedNodes.add(node.instanceId);
      }
    }
  }

  clusterFetchFailed(reason: string): void {
    // last view stays on screen; only the banner changes
    this.stale = true;
    this.staleReason = reason;
  }

  toggleNode(nodeId: string): void {
    if (this.selectedNodes.has(nodeId)) this.selectedNodes.delete(nodeId);
    else this.selectedNodes.add(nodeId);
  }

  toggleStat(stat: StatKey): void {
    if (this.selectedStats.has(stat)) this.selectedStats.delete(stat);
    else this.selectedStats.add(stat);
  }

  /** Record every stat from a poll; deselected stats keep accumulating so
   * re-selecting them shows history instead of an empty chart. */
  applyStats(nodeId: string, stats: StatsDto, t: number): void {
    for (const stat of ALL_STATS) {
      this.buffer(nodeId, stat).push({ t, value: statValue(stats, stat) });
    }
  }

  /** A missed poll leaves an explicit gap; charts never interpolate over it. */
  markMissedPoll(nodeId: string, t: number): void {
    for (const stat of ALL_STATS) {
      this.buffer(nodeId, stat).push({ t, value: null });
    }
  }

  seriesFor(nodeId: string, stat: StatKey): SeriesPoint[] {
    const buffer = this.series.get(`${nodeId}:${stat}`);
    return buffer ? buffer.toArray() : [];
  }

  /** Total stored points across all buffers; bounded by
   * nodes x stats x RING_CAPACITY regardless of session length. */
  storedPoints(): number {
    let total = 0;
    for (const buffer of this.series.values()) total += buffer.length;
    return total;
  }

  private buffer(nodeId: string, stat: StatKey): RingBuffer<SeriesPoint> {
    const key = `${nodeId}:${stat}`;
    let buffer = this.series.get(key);
    if (!buffer) {
      buffer = new RingBuffer<SeriesPoint>(RING_CAPACITY);
      this.series.set(key, buffer);
    }
    return buffer;
  }
}
