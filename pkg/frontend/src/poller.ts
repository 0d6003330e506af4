import { DashboardModel } from "./model";
import { ClusterDto, StatsDto } from "./types";

export interface Transport {
  getCluster(): Promise<ClusterDto>;
  getNodeStats(nodeId: string): Promise<StatsDto>;
}

/** Drives the poll cycle: refresh the cluster view, then fetch stats for
 * every selected node. At most one in-flight poll per node; a tick that
 * finds one still running skips that node instead of stacking requests. */
export class PollLoop {
  private inflight = new Set<string>();
  private clusterInflight = false;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly model: DashboardModel,
    private readonly transport: Transport,
    private readonly now: () => number = () => Date.now(),
    private readonly onUpdate: () => void = () => {},
  ) {}

  start(): void {
    this.stop();
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.model.pollIntervalSeconds * 1000);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async tick(): Promise<void> {
    await this.pollCluster();
    await Promise.all(this.pollSelectedNodes());
    this.onUpdate();
  }

  private async pollCluster(): Promise<void> {
    if (this.clusterInflight) return;
    this.clusterInflight = true;
    try {
      this.model.applyCluster(await this.transport.getCluster());
    } catch (error) {
      this.model.clusterFetchFailed(String(error));
    } finally {
      this.clusterInflight = false;
    }
  }

  private pollSelectedNodes(): Promise<void>[] {
    const polls: Promise<void>[] = [];
    for (const nodeId of this.model.selectedNodes) {
      if (this.inflight.has(nodeId)) continue;
      this.inflight.add(nodeId);
      polls.push(
        this.transport
          .getNodeStats(nodeId)
          .then((stats) => this.model.applyStats(nodeId, stats, this.now()))
          .catch(() => this.model.markMissedPoll(nodeId, this.now()))
          .finally(() => this.inflight.delete(nodeId)),
      );
    }
    return polls;
  }
}
