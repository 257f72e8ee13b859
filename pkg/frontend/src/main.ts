// Console entry point: snapshot over HTTP, then the live stream; process
// tabs, data table, alarm feed, trend chart, and the setpoint form.

import { GatewayApi } from "./api.js";
import { AlarmFeed } from "./alarms.js";
import { TrendChart, WindowChoice } from "./chart.js";
import { GatewayStream } from "./stream.js";
import {
  ConsoleState,
  applyEvent,
  applySnapshot,
  emptyState,
  setConnected,
  tableModel,
} from "./state.js";
import { SetpointForm } from "./setpoint.js";
import { ProcessTable } from "./table.js";
import type { StreamEvent } from "./types.js";

class ConsoleApp {
  private state: ConsoleState = emptyState();
  private api = new GatewayApi("");
  private table: ProcessTable;
  private feed: AlarmFeed;
  private chart: TrendChart;
  private form: SetpointForm;
  private tabs: HTMLDivElement;
  private status: HTMLSpanElement;
  private activeProcess = "";
  private activeSymbol = "";

  constructor(root: HTMLElement) {
    const header = document.createElement("header");
    header.innerHTML = "<h1>Operator Console</h1>";
    this.status = document.createElement("span");
    this.status.className = "status";
    header.appendChild(this.status);
    this.tabs = document.createElement("div");
    this.tabs.className = "tabs";

    const main = document.createElement("div");
    main.className = "columns";
    const left = document.createElement("div");
    const right = document.createElement("div");
    main.append(left, right);

    root.append(header, this.tabs, main);
    this.table = new ProcessTable(left, (symbol) => this.pickSymbol(symbol));
    this.form = new SetpointForm(left, this.api);

    const chartBox = document.createElement("div");
    chartBox.className = "chart-box";
    chartBox.innerHTML = "<h2>Trend</h2>";
    const canvas = document.createElement("canvas");
    canvas.width = 560;
    canvas.height = 240;
    chartBox.appendChild(canvas);
    const windows = document.createElement("div");
    windows.className = "windows";
    for (const choice of ["1m", "10m", "all"] as WindowChoice[]) {
      const b = document.createElement("button");
      b.textContent = choice;
      b.addEventListener("click", () => this.chart.setWindow(choice));
      windows.appendChild(b);
    }
    chartBox.appendChild(windows);
    right.appendChild(chartBox);
    this.chart = new TrendChart(canvas);
    this.feed = new AlarmFeed(right);

    this.connect();
  }

  private wsUrl(): string {
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    return `${scheme}://${location.host}/ws/stream`;
  }

  private connect(): void {
    const stream = new GatewayStream(
      this.wsUrl(),
      (event) => this.onEvent(event),
      (connected) => {
        this.state = setConnected(this.state, connected);
        this.status.textContent = connected ? "live" : "disconnected";
        this.status.classList.toggle("down", !connected);
        if (connected) void this.resync(); // reconcile after an outage
        this.render();
      }
    );
    stream.start();
    void this.resync();
  }

  private async resync(): Promise<void> {
    try {
      const snapshot = await this.api.snapshot();
      this.state = applySnapshot(this.state, snapshot);
      if (!this.activeProcess && snapshot.length > 0) {
        this.activeProcess = snapshot[0].name;
      }
      this.render();
    } catch {
      this.status.textContent = "gateway unreachable";
      this.status.classList.add("down");
    }
  }

  private onEvent(event: StreamEvent): void {
    this.state = applyEvent(this.state, event);
    if (
      event.type === "data" &&
      event.payload.process === this.activeProcess
    ) {
      for (const v of event.payload.variables) {
        if (v.symbol === this.activeSymbol) {
          this.chart.append({ t: v.t, pv: v.pv, sp: v.sp });
        }
      }
    }
    this.render();
  }

  private pickProcess(name: string): void {
    this.activeProcess = name;
    this.activeSymbol = "";
    this.chart.clear();
    this.render();
  }

  private pickSymbol(symbol: string): void {
    this.activeSymbol = symbol;
    const row = this.state.processes[this.activeProcess]?.rows[symbol];
    if (row) this.form.target(this.activeProcess, row);
    void this.api
      .trend(symbol)
      .then((samples) => this.chart.setSamples(samples))
      .catch(() => this.chart.clear());
  }

  private render(): void {
    this.tabs.replaceChildren(
      ...this.state.processOrder.map((name) => {
        const b = document.createElement("button");
        b.textContent = name;
        b.classList.toggle("active", name === this.activeProcess);
        b.addEventListener("click", () => this.pickProcess(name));
        return b;
      })
    );
    this.table.render(tableModel(this.state, this.activeProcess));
    this.feed.render(this.state.alarms);
  }
}

new ConsoleApp(document.getElementById("app")!);
