// Thin HTTP client over the gateway API.

import type {
  ProcessPayload,
  ProcessSummary,
  SetpointResult,
  TrendSamplePayload,
} from "./types.js";

export class GatewayApi {
  constructor(private base: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(this.base + path);
    if (!res.ok) throw new Error(`${path}: HTTP ${res.status}`);
    return (await res.json()) as T;
  }

  async processes(): Promise<ProcessSummary[]> {
    const body = await this.get<{ processes: ProcessSummary[] }>("/api/processes");
    return body.processes;
  }

  async process(name: string): Promise<ProcessPayload> {
    return this.get<ProcessPayload>(`/api/process/${encodeURIComponent(name)}`);
  }

  async snapshot(): Promise<ProcessPayload[]> {
    const summaries = await this.processes();
    return Promise.all(summaries.map((s) => this.process(s.name)));
  }

  async trend(symbol: string, from?: number, to?: number): Promise<TrendSamplePayload[]> {
    const params = new URLSearchParams();
    if (from !== undefined) params.set("from", String(from));
    if (to !== undefined) params.set("to", String(to));
    const qs = params.toString();
    const body = await this.get<{ samples: TrendSamplePayload[] }>(
      `/api/trend/${encodeURIComponent(symbol)}${qs ? "?" + qs : ""}`
    );
    return body.samples;
  }

  async submitSetpoint(process: string, symbol: string, value: number): Promise<SetpointResult> {
    const res = await fetch(this.base + "/api/setpoint", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ process, symbol, value }),
    });
    if (!res.ok) throw new Error(`setpoint: HTTP ${res.status}`);
    return (await res.json()) as SetpointResult;
  }
}
