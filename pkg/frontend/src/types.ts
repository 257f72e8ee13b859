// Payload shapes of the gateway HTTP/WS API. Timestamps are epoch ms.

export interface VariablePayload {
  symbol: string;
  lowLimit: number;
  highLimit: number;
  pv: number;
  sp: number;
  t: number;
}

export interface AlarmPayload {
  t: number;
  priority: number;
  text: string;
  symbol: string;
}

export interface ProcessPayload {
  name: string;
  stale: boolean;
  variables: VariablePayload[];
  alarms: AlarmPayload[];
}

export interface ProcessSummary {
  name: string;
  stale: boolean;
  variables: number;
}

export interface TrendSamplePayload {
  t: number;
  pv: number;
  sp: number;
}

export type StreamEvent =
  | { type: "data"; payload: { process: string; variables: VariablePayload[] } }
  | { type: "alarm"; payload: { process: string } & AlarmPayload };

export interface SetpointResult {
  outcome: "forwarded" | "rejected" | "timeout" | "error";
  alarmText: string | null;
  reason?: string | null;
}
