// Console state as a pure function of (snapshot + ordered stream events).
// Rendering reads only the models produced here, so replaying a recorded
// event log reproduces the exact table state.

import { rangeText } from "./format.js";
import type {
  AlarmPayload,
  ProcessPayload,
  StreamEvent,
  VariablePayload,
} from "./types.js";

export interface RowState {
  symbol: string;
  lowLimit: number;
  highLimit: number;
  pv: number;
  sp: number;
  t: number;
}

export interface ProcessState {
  name: string;
  stale: boolean;
  order: string[]; // row order: first appearance
  rows: Record<string, RowState>;
}

export interface AlarmEntry extends AlarmPayload {
  process: string;
}

export interface ConsoleState {
  processes: Record<string, ProcessState>;
  processOrder: string[];
  alarms: AlarmEntry[]; // newest first
  connected: boolean;
}

export const ALARM_FEED_LIMIT = 500;

export function emptyState(): ConsoleState {
  return { processes: {}, processOrder: [], alarms: [], connected: false };
}

function upsertRows(proc: ProcessState, variables: VariablePayload[]): ProcessState {
  const rows = { ...proc.rows };
  const order = [...proc.order];
  for (const v of variables) {
    if (!(v.symbol in rows)) order.push(v.symbol);
    rows[v.symbol] = {
      symbol: v.symbol,
      lowLimit: v.lowLimit,
      highLimit: v.highLimit,
      pv: v.pv,
      sp: v.sp,
      t: v.t,
    };
  }
  return { ...proc, stale: false, rows, order };
}

export function applySnapshot(state: ConsoleState, snapshot: ProcessPayload[]): ConsoleState {
  let next = { ...state, processes: { ...state.processes }, processOrder: [...state.processOrder] };
  for (const p of snapshot) {
    const existing = next.processes[p.name] ?? {
      name: p.name,
      stale: true,
      order: [],
      rows: {},
    };
    if (!next.processOrder.includes(p.name)) next.processOrder.push(p.name);
    let proc = upsertRows(existing, p.variables);
    proc = { ...proc, stale: p.stale };
    next.processes[p.name] = proc;
    for (const a of [...p.alarms].reverse()) {
      next = pushAlarm(next, { ...a, process: p.name }, false);
    }
  }
  return next;
}

function pushAlarm(state: ConsoleState, alarm: AlarmEntry, dedupe: boolean): ConsoleState {
  if (
    dedupe &&
    state.alarms.some(
      (a) => a.t === alarm.t && a.text === alarm.text && a.process === alarm.process
    )
  ) {
    return state;
  }
  const alarms = [alarm, ...state.alarms].slice(0, ALARM_FEED_LIMIT);
  return { ...state, alarms };
}

export function applyEvent(state: ConsoleState, event: StreamEvent): ConsoleState {
  if (event.type === "data") {
    const { process, variables } = event.payload;
    const existing = state.processes[process] ?? {
      name: process,
      stale: true,
      order: [],
      rows: {},
    };
    const processes = { ...state.processes, [process]: upsertRows(existing, variables) };
    const processOrder = state.processOrder.includes(process)
      ? state.processOrder
      : [...state.processOrder, process];
    return { ...state, processes, processOrder };
  }
  if (event.type === "alarm") {
    const { process, ...alarm } = event.payload;
    return pushAlarm(state, { ...alarm, process }, false);
  }
  return state;
}

export function applyEvents(state: ConsoleState, events: StreamEvent[]): ConsoleState {
  return events.reduce(applyEvent, state);
}

export function setConnected(state: ConsoleState, connected: boolean): ConsoleState {
  return { ...state, connected };
}

// --- render models: what the DOM mirrors, verbatim ---------------------------

export interface TableRowModel {
  symbol: string;
  range: string; // `(low-->high)`
  actual: number;
  setpoint: number;
  stale: boolean;
}

export function tableModel(state: ConsoleState, process: string): TableRowModel[] {
  const proc = state.processes[process];
  if (!proc) return [];
  const stale = proc.stale || !state.connected;
  return proc.order.map((symbol) => {
    const r = proc.rows[symbol];
    return {
      symbol,
      range: rangeText(r.lowLimit, r.highLimit),
      actual: r.pv,
      setpoint: r.sp,
      stale,
    };
  });
}

export function alarmModel(state: ConsoleState): AlarmEntry[] {
  return state.alarms;
}
