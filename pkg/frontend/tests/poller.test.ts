import { describe, expect, it } from "vitest";

import { DashboardModel } from "../src/model";
import { PollLoop, Transport } from "../src/poller";
import { ClusterDto, StatsDto } from "../src/types";

const CLUSTER: ClusterDto = {
  clusterName: "test",
  source: "static",
  refreshedAt: 0,
  stale: false,
  nodes: [
    {
      instanceId: "node-a",
      host: "127.0.0.1",
      port: 9001,
      health: "UP",
      phase: "Running",
      pluginName: "memstore",
    },
  ],
};

const STATS: StatsDto = {
  timestamp: 0,
  read: {
    success: 1,
    notFound: 0,
    failure: 0,
    timeout: 0,
    rps: 10,
    avg_us: 100,
    p50_us: 100,
    p95_us: 200,
    p99_us: 300,
    buckets: null,
  },
  write: {
    success: 0,
    notFound: 0,
    failure: 0,
    timeout: 0,
    rps: 0,
    avg_us: 0,
    p50_us: 0,
    p95_us: 0,
    p99_us: 0,
    buckets: null,
  },
  cacheHitRatio: null,
  slaViolationRatio: 0,
};

function transport(overrides: Partial<Transport> = {}): Transport {
  return {
    getCluster: async () => CLUSTER,
    getNodeStats: async () => STATS,
    ...overrides,
  };
}

describe("PollLoop", () => {
  it("polls the cluster view and stats for selected nodes", async () => {
    const model = new DashboardModel();
    const loop = new PollLoop(model, transport(), () => 1000);
    await loop.tick();
    expect(model.phaseOf("node-a")).toBe("Running");
    expect(model.seriesFor("node-a", "rps")).toHaveLength(1);
  });

  it("skips a node whose previous poll is still in flight", async () => {
    const model = new DashboardModel();
    model.applyCluster(CLUSTER);
    let statCalls = 0;
    let releaseHang: (value: StatsDto) => void = () => {};
    const hanging = new Promise<StatsDto>((resolve) => (releaseHang = resolve));
    const slowTransport = transport({
      getNodeStats: () => {
        statCalls += 1;
        return statCalls === 1 ? hanging : Promise.resolve(STATS);
      },
    });
    const loop = new PollLoop(model, slowTransport, () => 1000);

    const first = loop.tick();
    await new Promise((resolve) => setTimeout(resolve, 0)); // let it reach the hanging fetch
    await loop.tick(); // must skip node-a, not stack a second request
    expect(statCalls).toBe(1);

    releaseHang(STATS);
    await first;
    expect(model.seriesFor("node-a", "rps")).toHaveLength(1);

    await loop.tick(); // in-flight cleared, polls again
    expect(statCalls).toBe(2);
  });

  it("records a gap when a node poll fails", async () => {
    const model = new DashboardModel();
    model.applyCluster(CLUSTER);
    let fail = true;
    const flaky = transport({
      getNodeStats: () => (fail ? Promise.reject(new Error("boom")) : Promise.resolve(STATS)),
    });
    const loop = new PollLoop(model, flaky, () => 1000);
    await loop.tick();
    fail = false;
    await loop.tick();
    const values = model.seriesFor("node-a", "rps").map((point) => point.value);
    expect(values).toEqual([null, 10]);
  });

  it("marks the view stale when the cluster fetch fails, keeping node data", async () => {
    const model = new DashboardModel();
    const good = new PollLoop(model, transport(), () => 1000);
    await good.tick();
    const bad = new PollLoop(
      model,
      transport({ getCluster: () => Promise.reject(new Error("refused")) }),
      () => 2000,
    );
    await bad.tick();
    expect(model.stale).toBe(true);
    expect(model.nodes()).toHaveLength(1);
  });

  it("does not poll deselected nodes", async () => {
    const model = new DashboardModel();
    model.applyCluster(CLUSTER);
    model.toggleNode("node-a");
    let statCalls = 0;
    const counting = transport({
      getNodeStats: () => {
        statCalls += 1;
        return Promise.resolve(STATS);
      },
    });
    await new PollLoop(model, counting, () => 1000).tick();
    expect(statCalls).toBe(0);
  });
});
