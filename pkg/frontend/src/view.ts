import { CoordinatorClient } from "./api";
import { formatStat, maxValue, polylineSegments, visiblePoints, DEFAULT_GEOMETRY } from "./chart";
import { DashboardModel } from "./model";
import { ALL_STATS, ControlOutcome, StatKey } from "./types";

const SERIES_COLORS = ["#2f81f7", "#3fb950", "#d29922", "#f85149", "#a371f7", "#39c5cf"];

export class DashboardView {
  private toasts: { text: string; kind: string; at: number }[] = [];

  constructor(
    private readonly root: HTMLElement,
    private readonly model: DashboardModel,
    private readonly client: CoordinatorClient,
    private readonly now: () => number = () => Date.now(),
  ) {
    this.root.innerHTML = `
      <div id="banner"></div>
      <section>
        <h2>Cluster</h2>
        <table id="nodes"><thead><tr>
          <th></th><th>Instance</th><th>Health</th><th>Phase</th><th>Plugin</th><th>Address</th>
        </tr></thead><tbody></tbody></table>
      </section>
      <section id="controls">
        <h2>Controls</h2>
        <label>Scope
          <select id="scope"><option value="cluster">cluster</option></select>
        </label>
        <label>Which
          <select id="which"><option>both</option><option>reads</option><option>writes</option></select>
        </label>
        <button id="start">Start</button>
        <button id="stop">Stop</button>
        <span class="group">
          <input id="bf-start" type="number" value="0" title="backfill start">
          <input id="bf-end" type="number" value="1000" title="backfill end">
          <button id="backfill">Backfill</button>
        </span>
        <span class="group">
          <input id="prop-name" placeholder="property" list="prop-names">
          <datalist id="prop-names">
            <option value="writeRateLimit"><option value="readRateLimit">
            <option value="numReaders"><option value="numWriters">
            <option value="readEnabled"><option value="writeEnabled">
            <option value="numKeys"><option value="dataSize">
          </datalist>
          <input id="prop-value" placeholder="value">
          <button id="set-prop">Set</button>
        </span>
      </section>
      <section>
        <h2>Statistics</h2>
        <div id="stat-picker"></div>
        <div id="charts"></div>
      </section>
      <div id="toasts"></div>
    `;
    this.bindControls();
    this.renderStatPicker();
  }

  private bindControls(): void {
    const on = (id: string, handler: () => void) =>
      this.root.querySelector<HTMLElement>(`#${id}`)!.addEventListener("click", handler);
    on("start", () => this.issue("start"));
    on("stop", () => this.issue("stop"));
    on("backfill", () => this.issue("backfill"));
    on("set-prop", () => this.issue("set-property"));
  }

  private value(id: string): string {
    return this.root.querySelector<HTMLInputElement | HTMLSelectElement>(`#${id}`)!.value;
  }

  private async issue(action: "start" | "stop" | "backfill" | "set-property"): Promise<void> {
    const scopeValue = this.value("scope");
    const scope = scopeValue === "cluster" ? {} : { node: scopeValue };
    if (!scopeValue) {
      this.toast("select a node first", "warn");
      return;
    }
    const outcomes = await this.client.control(action, scope, {
      which: this.value("which") as "reads" | "writes" | "both",
      start: Number(this.value("bf-start")),
      end: Number(this.value("bf-end")),
      name: this.value("prop-name"),
      value: this.value("prop-value"),
    });
    for (const outcome of outcomes) this.toastOutcome(action, outcome);
  }

  private toastOutcome(action: string, outcome: ControlOutcome): void {
    if (outcome.ok) this.toast(`${outcome.nodeId}: ${action} ok`, "ok");
    else if (outcome.busy) this.toast(`${outcome.nodeId}: busy (${outcome.message})`, "warn");
    else this.toast(`${outcome.nodeId}: ${outcome.message}`, "error");
  }

  private toast(text: string, kind: string): void {
    this.toasts.push({ text, kind, at: this.now() });
    this.renderToasts();
  }

  private renderToasts(): void {
    const cutoff = this.now() - 6000;
    this.toasts = this.toasts.filter((toast) => toast.at >= cutoff).slice(-6);
    this.root.querySelector("#toasts")!.innerHTML = this.toasts
      .map((toast) => `<div class="toast ${toast.kind}">${escapeHtml(toast.text)}</div>`)
      .join("");
  }

  private renderStatPicker(): void {
    const picker = this.root.querySelector("#stat-picker")!;
    picker.innerHTML = ALL_STATS.map(
      (stat) => `
      <label class="stat">
        <input type="checkbox" data-stat="${stat}" ${this.model.selectedStats.has(stat) ? "checked" : ""}>
        ${stat}
      </label>`,
    ).join("");
    picker.querySelectorAll<HTMLInputElement>("input[data-stat]").forEach((box) => {
      box.addEventListener("change", () => {
        this.model.toggleStat(box.dataset.stat as StatKey);
        this.render();
      });
    });
  }

  render(): void {
    this.renderBanner();
    this.renderNodes();
    this.renderCharts();
    this.renderToasts();
  }

  private renderBanner(): void {
    const banner = this.root.querySelector<HTMLElement>("#banner")!;
    if (this.model.stale) {
      banner.className = "stale";
      banner.textContent = `coordinator unreachable, showing last view ${
        this.model.staleReason ? `(${this.model.staleReason})` : ""
      }`;
    } else {
      banner.className = "";
      banner.textContent = "";
    }
  }

  private renderNodes(): void {
    const body = this.root.querySelector("#nodes tbody")!;
    body.innerHTML = this.model
      .nodes()
      .map((node) => {
        const checked = this.model.selectedNodes.has(node.instanceId) ? "checked" : "";
        return `<tr>
          <td><input type="checkbox" data-node="${escapeHtml(node.instanceId)}" ${checked}></td>
          <td>${escapeHtml(node.instanceId)}</td>
          <td><span class="badge health-${node.health.toLowerCase()}">${node.health}</span></td>
          <td><span class="badge phase-${node.phase.toLowerCase()}">${node.phase || "?"}</span></td>
          <td>${escapeHtml(node.pluginName)}</td>
          <td>${escapeHtml(node.host)}:${node.port}</td>
        </tr>`;
      })
      .join("");
    body.querySelectorAll<HTMLInputElement>("input[data-node]").forEach((box) => {
      box.addEventListener("change", () => this.model.toggleNode(box.dataset.node!));
    });
    const scope = this.root.querySelector<HTMLSelectElement>("#scope")!;
    const current = scope.value;
    scope.innerHTML =
      `<option value="cluster">cluster</option>` +
      this.model
        .nodes()
        .map((node) => `<option value="${escapeHtml(node.instanceId)}">${escapeHtml(node.instanceId)}</option>`)
        .join("");
    if ([...scope.options].some((option) => option.value === current)) scope.value = current;
  }

  private renderCharts(): void {
    const now = this.now();
    const container = this.root.querySelector("#charts")!;
    const sections: string[] = [];
    for (const stat of ALL_STATS) {
      if (!this.model.selectedStats.has(stat)) continue;
      const nodeIds = [...this.model.selectedNodes];
      let yMax = 0;
      for (const nodeId of nodeIds) {
        yMax = Math.max(yMax, maxValue(visiblePoints(this.model.seriesFor(nodeId, stat), now)));
      }
      const lines = nodeIds
        .map((nodeId, index) => {
          const color = SERIES_COLORS[index % SERIES_COLORS.length];
          return polylineSegments(this.model.seriesFor(nodeId, stat), now, yMax)
            .map(
              (points) =>
                `<polyline fill="none" stroke="${color}" stroke-width="1.5" points="${points}"/>`,
            )
            .join("");
        })
        .join("");
      const legend = nodeIds
        .map((nodeId, index) => {
          const series = this.model.seriesFor(nodeId, stat);
          const latest = series.length ? series[series.length - 1].value : null;
          const color = SERIES_COLORS[index % SERIES_COLORS.length];
          return `<span style="color:${color}">${escapeHtml(nodeId)}: ${formatStat(stat, latest)}</span>`;
        })
        .join(" ");
      sections.push(`
        <div class="chart">
          <h3>${stat} <small>(max ${formatStat(stat, yMax)})</small></h3>
          <svg viewBox="0 0 ${DEFAULT_GEOMETRY.width} ${DEFAULT_GEOMETRY.height}">${lines}</svg>
          <div class="legend">${legend}</div>
        </div>`);
    }
    container.innerHTML = sections.join("");
  }
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => `&#${ch.charCodeAt(0)};`);
}
