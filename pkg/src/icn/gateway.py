"""Operator gateway: the supervisory agent plus its HTTP/WebSocket boundary.

The agent half discovers control agents through the DF, holds one full
subscription per process, and maintains per-process views, an alarm log and
trend history. The service half exposes that state to any number of browser
clients and forwards operator setpoints, correlating each reply alarm back
to the waiting HTTP request.
"""

from __future__ import annotations

import asyncio
import json
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .control import SERVICE_TYPE
from .ontology import (
    ACLMessage,
    AID,
    Alarm,
    ListOfAlarms,
    ListOfVariables,
    Performative,
    SetVariable,
    ActionExpr,
    Variable,
)
from .runtime import Agent, DfTemplate, MessageTemplate, PeriodicBehavior
from .sl import SchemaViolation, SLParseError, encode_sl, parse_sl_content

log = logging.getLogger(__name__)

REDISCOVERY_PERIOD_S = 10.0
REPLY_TIMEOUT_S = 2.0
ALARM_LOG_CAPACITY = 1000
TREND_CAPACITY = 100_000


@dataclass
class TrendSample:
    t: int  # epoch milliseconds
    symbol: str
    PV: float
    SP: float


class TrendStore:
    """Per-symbol ring buffers with an optional append-only CSV journal."""

    def __init__(self, capacity: int = TREND_CAPACITY, journal_path: Optional[str] = None):
        self._buffers: dict[str, deque[TrendSample]] = {}
        self._last_t: dict[str, int] = {}
        self._capacity = capacity
        self._lock = threading.Lock()
        self._journal = open(journal_path, "a", encoding="utf-8") if journal_path else None

    def append(self, symbol: str, t: int, pv: float, sp: float) -> TrendSample:
        with self._lock:
            # timestamps must strictly increase per symbol; nudge collisions
            t = max(t, self._last_t.get(symbol, -1) + 1)
            self._last_t[symbol] = t
            sample = TrendSample(t, symbol, pv, sp)
            self._buffers.setdefault(symbol, deque(maxlen=self._capacity)).append(sample)
            if self._journal:
                self._journal.write(f"{t},{symbol},{pv!r},{sp!r}\n")
        return sample

    def query(self, symbol: str, t0: int, t1: int) -> list[TrendSample]:
        if t0 > t1:
            raise ValueError("t0 must be <= t1")
        with self._lock:
            return [s for s in self._buffers.get(symbol, ()) if t0 <= s.t <= t1]

    def full_range(self, symbol: str) -> tuple[int, int]:
        with self._lock:
            buf = self._buffers.get(symbol)
            if not buf:
                return (0, 0)
            return (buf[0].t, buf[-1].t)

    def to_csv(self, symbol: str, t0: int, t1: int) -> str:
        lines = ["t,symbol,pv,sp"]
        for s in self.query(symbol, t0, t1):
            lines.append(f"{s.t},{s.symbol},{s.PV!r},{s.SP!r}")
        return "\n".join(lines) + "\n"

    def close(self):
        if self._journal:
            self._journal.close()
            self._journal = None


@dataclass
class VariableRow:
    symbol: str
    lowLimit: float
    highLimit: float
    PV: float
    SP: float
    t: int  # last update, epoch ms


@dataclass
class AlarmEntry:
    t: int
    priority: int
    text: str
    symbol: str

    def to_json(self) -> dict:
        return {"t": self.t, "priority": self.priority, "text": self.text, "symbol": self.symbol}


@dataclass
class ProcessView:
    name: str
    rows: dict[str, VariableRow] = field(default_factory=dict)
    alarms: deque = field(default_factory=lambda: deque(maxlen=ALARM_LOG_CAPACITY))
    stale: bool = True  # until the snapshot arrives

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "stale": self.stale,
            "variables": [
                {
                    "symbol": r.symbol,
                    "lowLimit": r.lowLimit,
                    "highLimit": r.highLimit,
                    "pv": r.PV,
                    "sp": r.SP,
                    "t": r.t,
                }
                for r in self.rows.values()
            ],
            "alarms": [a.to_json() for a in self.alarms],  # newest first
        }


@dataclass
class SetpointOutcome:
    outcome: str  # forwarded | rejected | timeout | error
    alarm_text: Optional[str] = None
    reason: Optional[str] = None

    def to_json(self) -> dict:
        return {"outcome": self.outcome, "alarmText": self.alarm_text, "reason": self.reason}


@dataclass
class _PendingSetpoint:
    done: threading.Event = field(default_factory=threading.Event)
    result: Optional[SetpointOutcome] = None


class OperatorAgent(Agent):
    """The one agent human operators act through; serves many clients."""

    def __init__(
        self,
        name: str = "R1",
        rediscovery_period: float = REDISCOVERY_PERIOD_S,
        reply_timeout: float = REPLY_TIMEOUT_S,
        trend_capacity: int = TREND_CAPACITY,
        trend_journal: Optional[str] = None,
    ):
        super().__init__(name)
        self.reply_timeout = reply_timeout
        self.rediscovery_period = rediscovery_period
        self.views: dict[str, ProcessView] = {}
        self.trend = TrendStore(trend_capacity, trend_journal)
        self._agents: dict[str, AID] = {}  # process -> control agent
        self._conversations: dict[str, str] = {}  # conversation -> process
        self._subscribed: set[str] = set()
        self._addresses: dict[tuple[str, str], str] = {}  # (process, symbol) -> addressSP
        self._pending: dict[str, _PendingSetpoint] = {}
        self._listeners: list[Callable[[dict], None]] = []
        self._state = threading.Lock()

    # -- wiring ---------------------------------------------------------------

    def setup(self):
        self.add_message_handler(
            MessageTemplate(performative=Performative.INFORM, ontology="icn-ontology"),
            self.on_inform,
        )
        self.add_message_handler(
            MessageTemplate(performative=Performative.AGREE), lambda msg: None
        )
        self.add_message_handler(
            MessageTemplate(performative=Performative.REFUSE), self.on_refuse
        )
        self.add_behavior(
            PeriodicBehavior(
                self.rediscovery_period,
                lambda agent: self.discover_and_subscribe(),
                initial_delay=0.0,
            )
        )

    def add_listener(self, fn: Callable[[dict], None]) -> None:
        """Events: {type: data|alarm, payload: ...}; called on the agent thread."""
        self._listeners.append(fn)

    def _emit(self, event: dict) -> None:
        for fn in self._listeners:
            try:
                fn(event)
            except Exception:
                log.exception("gateway event listener failed")

    # -- discovery ---------------------------------------------------------------

    def discover_and_subscribe(self) -> list[str]:
        found = []
        for sd in self.platform.df.search(DfTemplate(service_type=SERVICE_TYPE)):
            process = sd.service_name
            found.append(process)
            with self._state:
                self.views.setdefault(process, ProcessView(name=process))
                self._agents[process] = sd.provider
            if process in self._subscribed:
                continue
            conv = self.next_token("opsub")
            self._conversations[conv] = process
            receipts = self.send(
                ACLMessage(
                    performative=Performative.SUBSCRIBE,
                    sender=self.aid,
                    receivers=[sd.provider],
                    content=encode_sl(ListOfVariables([])),
                    conversation_id=conv,
                    reply_with=self.next_token("rw"),
                )
            )
            if all(r.ok for r in receipts):
                self._subscribed.add(process)
            else:
                with self._state:
                    self.views[process].stale = True  # retried next cycle
        return found

    # -- inbound data ---------------------------------------------------------------

    def _process_for(self, msg: ACLMessage) -> Optional[str]:
        process = self._conversations.get(msg.conversation_id)
        if process:
            return process
        for name, aid in self._agents.items():
            if aid.name == msg.sender.name:
                return name
        return None

    def on_inform(self, msg: ACLMessage) -> None:
        process = self._process_for(msg)
        if process is None:
            log.debug("%s: inform from unknown party %s", self.name, msg.sender.name)
            return
        try:
            elements = parse_sl_content(msg.content)
        except (SLParseError, SchemaViolation) as e:
            log.warning("%s: undecodable inform: %s", self.name, e)
            return
        for element in elements:
            if isinstance(element, ListOfVariables):
                self.on_process_data(process, element.variables)
            elif isinstance(element, ListOfAlarms):
                self.on_alarm(process, element.alarms, msg)

    def on_process_data(self, process: str, variables: list[Variable]) -> None:
        now = self.platform.now_ms()
        updated = []
        with self._state:
            view = self.views.setdefault(process, ProcessView(name=process))
            view.stale = False
            for v in variables:
                if not v.symbol:
                    log.warning("skipping variable without symbol")
                    continue
                if v.addressSP:
                    self._addresses[(process, v.symbol)] = v.addressSP
                row = view.rows.get(v.symbol)
                if row is None:
                    row = VariableRow(v.symbol, v.lowLimit, v.highLimit, v.PV, v.SP, now)
                    view.rows[v.symbol] = row
                else:
                    row.lowLimit, row.highLimit = v.lowLimit, v.highLimit
                    row.PV, row.SP, row.t = v.PV, v.SP, now
                sample = self.trend.append(v.symbol, now, v.PV, v.SP)
                updated.append(
                    {
                        "symbol": v.symbol,
                        "lowLimit": v.lowLimit,
                        "highLimit": v.highLimit,
                        "pv": v.PV,
                        "sp": v.SP,
                        "t": sample.t,
                    }
                )
        if updated:
            self._emit({"type": "data", "payload": {"process": process, "variables": updated}})

    def on_alarm(self, process: str, alarms: list[Alarm], msg: ACLMessage) -> None:
        now = self.platform.now_ms()
        entries = []
        with self._state:
            view = self.views.setdefault(process, ProcessView(name=process))
            for alarm in alarms:
                entry = AlarmEntry(now, alarm.priority, alarm.text, alarm.var.symbol)
                view.alarms.appendleft(entry)  # newest first
                entries.append(entry)
        for entry in entries:
            self._emit({"type": "alarm", "payload": {"process": process, **entry.to_json()}})
        # resolve a waiting setpoint submission, if this is its reply
        pending = self._pending.get(msg.conversation_id)
        if pending is not None and alarms:
            alarm = alarms[0]
            outcome = "forwarded" if alarm.priority == 2 else "rejected"
            pending.result = SetpointOutcome(outcome, alarm.text)
            pending.done.set()

    def on_refuse(self, msg: ACLMessage) -> None:
        pending = self._pending.get(msg.conversation_id)
        if pending is not None:
            pending.result = SetpointOutcome("rejected", None, msg.content)
            pending.done.set()

    # -- operator actions -----------------------------------------------------------

    def submit_setpoint(self, process: str, symbol: str, value: float) -> SetpointOutcome:
        """Send a setpoint request and wait for its reply alarm (or timeout).

        Safe to call from any thread; the platform must be running.
        """
        with self._state:
            view = self.views.get(process)
            row = view.rows.get(symbol) if view else None
            target = self._agents.get(process)
        if view is None or target is None:
            return SetpointOutcome("error", reason=f"unknown process: {process}")
        if row is None:
            return SetpointOutcome("error", reason=f"unknown variable: {symbol}")
        address = self._address_for(process, symbol)
        if address is None:
            return SetpointOutcome("error", reason=f"no setpoint address for {symbol}")
        conv = self.next_token("sp")
        pending = _PendingSetpoint()
        self._pending[conv] = pending
        self._conversations[conv] = process
        try:
            self.send(
                ACLMessage(
                    performative=Performative.REQUEST,
                    sender=self.aid,
                    receivers=[target],
                    content=encode_sl(
                        ActionExpr(actor=target, act=SetVariable(address, float(value)))
                    ),
                    conversation_id=conv,
                    reply_with=self.next_token("rw"),
                )
            )
            if not pending.done.wait(self.reply_timeout):
                return SetpointOutcome("timeout")
            return pending.result
        finally:
            self._pending.pop(conv, None)

    def _address_for(self, process: str, symbol: str) -> Optional[str]:
        with self._state:
            return self._addresses.get((process, symbol))

    # -- trend ------------------------------------------------------------------------

    def trend_query(self, symbol: str, t0: int, t1: int) -> list[TrendSample]:
        return self.trend.query(symbol, t0, t1)
