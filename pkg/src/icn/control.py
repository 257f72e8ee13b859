"""Control agent: one per PLC, adding supervision the device itself lacks.

Responsibilities: register with the directory facilitator, publish data
changes to subscribers, validate and apply operator setpoints through a
four-state machine, realize local dependency links by interpolation, and
keep cross-process setpoints synchronized by subscribing to peer agents.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

from .interpolation import InterpolationTable, interpolate
from .ontology import (
    ACLMessage,
    ActionExpr,
    AID,
    Alarm,
    ControlProcess,
    DF_ONTOLOGY_NAME,
    GetVariable,
    IsHigh,
    IsLocal,
    IsLocatedin,
    IsVariable,
    IsLow,
    ListOfAlarms,
    ListOfVariables,
    LocateVariable,
    Performative,
    PRIORITY_INFO,
    PRIORITY_LIMIT,
    PRIORITY_REJECTED,
    SetVariable,
    Variable,
)
from .plcsim import ItemAddress, PlcSimulator, parse_address
from .runtime import Agent, DfTemplate, FSMBehavior, MessageTemplate, OneShotBehavior, PeriodicBehavior, ServiceDescription
from .runtime import DuplicateService
from .sl import (
    SchemaViolation,
    SLParseError,
    canonical_float,
    encode_sl,
    encode_sl_content,
    format_alarm_text,
    parse_sl_content,
)

log = logging.getLogger(__name__)

SERVICE_TYPE = "process-control"
SUBSCRIBER_FAILURE_LIMIT = 3

FIELD_PV = "PV"
FIELD_SP = "SP"


@dataclass(frozen=True)
class LinkEndpoint:
    process: str
    symbol: str
    field: str  # PV or SP

    def __post_init__(self):
        if self.field not in (FIELD_PV, FIELD_SP):
            raise ValueError(f"bad endpoint field {self.field!r}")


@dataclass
class DependencyLink:
    """Source variable drives the target setpoint through a lookup table."""

    source: LinkEndpoint
    target: LinkEndpoint
    table: InterpolationTable

    def __post_init__(self):
        if self.target.field != FIELD_SP:
            raise ValueError("dependency links may only write setpoints")

    @property
    def is_local(self) -> bool:
        return self.source.process == self.target.process


OPERATOR_FULL = "OPERATOR_FULL"
CROSS_VARIABLES = "CROSS_VARIABLES"


@dataclass
class Subscription:
    subscriber: AID
    kind: str  # OPERATOR_FULL or CROSS_VARIABLES
    symbols: tuple[str, ...] = ()
    conversation_id: str = ""
    failures: int = 0


class ControlAgent(Agent):
    """Layer-2 agent bound to one simulated PLC."""

    def __init__(
        self,
        name: str,
        process_name: str,
        variables: list[Variable],
        sim: PlcSimulator,
        links: Optional[list[DependencyLink]] = None,
        poll_period: float = 0.5,
        deadband: float = 0.0,
    ):
        super().__init__(name)
        self.process_name = process_name
        self.sim = sim
        self.poll_period = poll_period
        self.variables: dict[str, Variable] = {}
        self._by_pv: dict[ItemAddress, Variable] = {}
        self._by_sp: dict[ItemAddress, Variable] = {}
        for v in variables:
            self.variables[v.symbol] = v
            self._by_pv[parse_address(v.addressPV)] = v
            self._by_sp[parse_address(v.addressSP)] = v
        links = links or []
        for link in links:
            if link.target.process != process_name:
                raise ValueError(f"{name}: link target {link.target} is not local")
        self.local_links = [l for l in links if l.is_local]
        self.cross_links = [l for l in links if not l.is_local]
        self.subscriptions: dict[tuple[str, str], Subscription] = {}
        # peer process -> conversation id of our cross subscription
        self._cross_conversations: dict[str, str] = {}
        self._group = sim.create_group(
            f"{process_name}-all",
            [v.addressPV for v in variables] + [v.addressSP for v in variables],
            period=poll_period,
            deadband=deadband,
        )

    # -- lifecycle ------------------------------------------------------------

    def setup(self):
        self.add_message_handler(
            MessageTemplate(performative=Performative.REQUEST), self.on_request
        )
        self.add_message_handler(
            MessageTemplate(performative=Performative.SUBSCRIBE), self.on_request
        )
        self.add_message_handler(
            MessageTemplate(performative=Performative.INFORM), self.on_inform
        )
        self.add_behavior(OneShotBehavior(lambda agent: self.register_services()))
        self.add_behavior(
            PeriodicBehavior(self.poll_period, lambda agent: self.handle_data_change())
        )

    def register_services(self) -> None:
        sd = ServiceDescription(
            provider=self.aid,
            service_type=SERVICE_TYPE,
            service_name=self.process_name,
            properties={"symbols": sorted(self.variables)},
        )
        try:
            self.platform.df.register(sd)
        except DuplicateService:
            # idempotent restart: replace our stale registration
            self.platform.df.deregister(self.aid.name, self.process_name)
            self.platform.df.register(sd)
        self.platform.df.subscribe(self.aid, DfTemplate(service_type=SERVICE_TYPE))
        for peer in self.platform.df.search(DfTemplate(service_type=SERVICE_TYPE)):
            self._maybe_subscribe_to_peer(peer)

    # -- cross-process subscriptions ---------------------------------------------

    def _needed_peer_symbols(self) -> dict[str, list[str]]:
        needed: dict[str, list[str]] = {}
        for link in self.cross_links:
            needed.setdefault(link.source.process, [])
            if link.source.symbol not in needed[link.source.process]:
                needed[link.source.process].append(link.source.symbol)
        return needed

    def _maybe_subscribe_to_peer(self, sd: ServiceDescription) -> None:
        needed = self._needed_peer_symbols()
        process = sd.service_name
        if process not in needed or process in self._cross_conversations:
            return
        conv = self.next_token("cross")
        self._cross_conversations[process] = conv
        self.send(
            ACLMessage(
                performative=Performative.SUBSCRIBE,
                sender=self.aid,
                receivers=[sd.provider],
                content=encode_sl(
                    ListOfVariables([Variable(symbol=s) for s in needed[process]])
                ),
                conversation_id=conv,
                reply_with=self.next_token("rw"),
            )
        )

    # -- periodic data change handling --------------------------------------------

    def handle_data_change(self) -> None:
        changes = self.sim.poll_group(self._group)
        if not changes:
            return
        changed_pairs: list[tuple[Variable, str]] = []
        changed_vars: list[Variable] = []
        for addr, value in changes:
            if addr in self._by_pv:
                var, fld = self._by_pv[addr], FIELD_PV
                var.PV = value
            elif addr in self._by_sp:
                var, fld = self._by_sp[addr], FIELD_SP
                var.SP = value
            else:
                continue
            changed_pairs.append((var, fld))
            if var not in changed_vars:
                changed_vars.append(var)

        for sub in self._subs_of_kind(OPERATOR_FULL):
            self._publish(sub, changed_vars)
        for sub in self._subs_of_kind(CROSS_VARIABLES):
            relevant = [v for v in changed_vars if v.symbol in sub.symbols]
            if relevant:
                self._publish(sub, relevant)
        self.higher_level_control(changed_pairs)
        self.check_limits(changed_vars)

    def _subs_of_kind(self, kind: str) -> list[Subscription]:
        return [s for s in self.subscriptions.values() if s.kind == kind]

    def _publish(self, sub: Subscription, variables: list[Variable]) -> None:
        receipts = self.send(
            ACLMessage(
                performative=Performative.INFORM,
                sender=self.aid,
                receivers=[sub.subscriber],
                content=encode_sl(ListOfVariables([v.copy() for v in variables])),
                conversation_id=sub.conversation_id,
            )
        )
        if all(r.ok for r in receipts):
            sub.failures = 0
        else:
            sub.failures += 1
            if sub.failures >= SUBSCRIBER_FAILURE_LIMIT:
                self.subscriptions.pop((sub.subscriber.name, sub.kind), None)
                log.info(
                    "%s: pruned unreachable subscriber %s", self.name, sub.subscriber.name
                )

    # -- operator setpoints (four-state machine) -----------------------------------

    def manage_operator_setpoints(self, msg: ACLMessage, action: SetVariable) -> None:
        try:
            addr = parse_address(action.variableAddress)
        except ValueError:
            self._refuse(msg, f"bad setpoint address: {action.variableAddress}")
            return
        if addr not in self._by_sp:
            self._refuse(msg, f"unknown setpoint address: {action.variableAddress}")
            return

        ctx: dict = {}

        def validate(agent):
            var = self._by_sp[addr]
            ctx["var"] = var
            return 0 if var.lowLimit <= action.value <= var.highLimit else 1

        def apply(agent):
            var = ctx["var"]
            self.sim.write_item(addr, action.value)
            var.SP = action.value
            ctx["applied"] = True
            self.platform.counters["setpoints_applied"] += 1
            return 0

        def reject(agent):
            ctx["applied"] = False
            self.platform.counters["setpoints_rejected"] += 1
            return 0

        def notify(agent):
            var: Variable = ctx["var"]
            value_txt = canonical_float(action.value)
            if ctx["applied"]:
                priority = PRIORITY_INFO
                text = f"New SP ({value_txt}) was forwarded to control process {self.process_name}"
            else:
                priority = PRIORITY_REJECTED
                text = (
                    f"New SP ({value_txt}) rejected: out of range "
                    f"[{canonical_float(var.lowLimit)}, {canonical_float(var.highLimit)}]"
                )
            alarm = Alarm(
                destination=msg.sender,
                priority=priority,
                text=format_alarm_text(self.platform.now(), var.symbol, text),
                var=var.copy(),
            )
            self.platform.counters[f"alarms_p{priority}"] += 1
            self.send(msg.reply(Performative.INFORM, encode_sl(ListOfAlarms([alarm]))))

        fsm = FSMBehavior()
        fsm.register_state("VALIDATE", validate, initial=True)
        fsm.register_state("APPLY", apply)
        fsm.register_state("REJECT", reject)
        fsm.register_state("NOTIFY", notify, terminal=True)
        fsm.register_transition("VALIDATE", 0, "APPLY")
        fsm.register_transition("VALIDATE", 1, "REJECT")
        fsm.register_transition("APPLY", 0, "NOTIFY")
        fsm.register_transition("REJECT", 0, "NOTIFY")
        self.add_behavior(fsm)

    # -- higher level control -------------------------------------------------------

    def higher_level_control(self, changed_pairs: list[tuple[Variable, str]]) -> list[tuple[str, float]]:
        """Recompute local-link targets whose source variable+field changed."""
        writes = []
        for link in self.local_links:
            for var, fld in changed_pairs:
                if var.symbol == link.source.symbol and fld == link.source.field:
                    value = var.PV if fld == FIELD_PV else var.SP
                    writes.append(self._apply_link(link, value))
        return writes

    def prepare_new_sp(self, variables: list[Variable], peer_process: str) -> list[tuple[str, float]]:
        """Recompute cross-link targets from a peer's published variables."""
        writes = []
        for link in self.cross_links:
            if link.source.process != peer_process:
                continue
            for var in variables:
                if var.symbol == link.source.symbol:
                    value = var.PV if link.source.field == FIELD_PV else var.SP
                    writes.append(self._apply_link(link, value))
        return writes

    def _apply_link(self, link: DependencyLink, source_value: float) -> tuple[str, float]:
        target = self.variables[link.target.symbol]
        y = interpolate(link.table, source_value)
        y = min(max(y, target.lowLimit), target.highLimit)
        self.sim.write_item(target.addressSP, y)
        target.SP = y
        self.platform.counters["link_writes"] += 1
        return (target.symbol, y)

    # -- limit supervision ------------------------------------------------------------

    def check_limits(self, changed_vars: list[Variable]) -> None:
        for var in changed_vars:
            if var.PV > var.highLimit:
                predicate = IsHigh(var.copy())
                detail = f"PV ({canonical_float(var.PV)}) above high limit ({canonical_float(var.highLimit)})"
            elif var.PV < var.lowLimit:
                predicate = IsLow(var.copy())
                detail = f"PV ({canonical_float(var.PV)}) below low limit ({canonical_float(var.lowLimit)})"
            else:
                continue
            for sub in self._subs_of_kind(OPERATOR_FULL):
                alarm = Alarm(
                    destination=sub.subscriber,
                    priority=PRIORITY_LIMIT,
                    text=format_alarm_text(self.platform.now(), var.symbol, detail),
                    var=var.copy(),
                )
                self.platform.counters["alarms_p0"] += 1
                self.send(
                    ACLMessage(
                        performative=Performative.INFORM,
                        sender=self.aid,
                        receivers=[sub.subscriber],
                        content=encode_sl_content([ListOfAlarms([alarm]), predicate]),
                        conversation_id=sub.conversation_id,
                    )
                )

    # -- subscriptions and queries ----------------------------------------------------

    def handle_subscription(self, msg: ACLMessage, requested: ListOfVariables) -> None:
        symbols = tuple(v.symbol for v in requested.variables)
        for sym in symbols:
            if sym not in self.variables:
                self._refuse(msg, f"unknown variable: {sym}")
                return
        kind = CROSS_VARIABLES if symbols else OPERATOR_FULL
        conv = msg.conversation_id or self.next_token("sub")
        sub = Subscription(
            subscriber=msg.sender, kind=kind, symbols=symbols, conversation_id=conv
        )
        self.subscriptions[(msg.sender.name, kind)] = sub  # replaces any duplicate
        agree = msg.reply(Performative.AGREE, msg.content)
        agree.conversation_id = conv
        self.send(agree)
        snapshot = (
            [self.variables[s] for s in symbols]
            if symbols
            else list(self.variables.values())
        )
        self._publish(sub, snapshot)

    def handle_query(self, msg: ACLMessage, action) -> None:
        if isinstance(action, GetVariable):
            var = None
            if action.symbol:
                var = self.variables.get(action.symbol)
            elif action.variableAddress:
                try:
                    addr = parse_address(action.variableAddress)
                except ValueError:
                    addr = None
                if addr is not None:
                    var = self._by_pv.get(addr) or self._by_sp.get(addr)
            if var is None:
                self._refuse(msg, f"unknown variable: {action.symbol or action.variableAddress}")
                return
            self.send(msg.reply(Performative.INFORM, encode_sl(IsVariable(var.copy()))))
        elif isinstance(action, LocateVariable):
            var = self.variables.get(action.symbol)
            if var is None:
                self._refuse(msg, f"unknown variable: {action.symbol}")
                return
            elements = [
                IsLocatedin(var.copy(), ControlProcess(self.process_name, [])),
                IsLocal(var.copy()),
            ]
            self.send(msg.reply(Performative.INFORM, encode_sl_content(elements)))
        else:
            self._not_understood(msg, f"unsupported action {type(action).__name__}")

    # -- message routing ------------------------------------------------------------

    def on_request(self, msg: ACLMessage) -> None:
        if msg.ontology != "icn-ontology":
            return
        try:
            elements = parse_sl_content(msg.content)
        except (SLParseError, SchemaViolation) as e:
            self._not_understood(msg, str(e))
            return
        for element in elements:
            if isinstance(element, ActionExpr):
                if isinstance(element.act, SetVariable):
                    self.manage_operator_setpoints(msg, element.act)
                else:
                    self.handle_query(msg, element.act)
            elif isinstance(element, ListOfVariables):
                self.handle_subscription(msg, element)
            else:
                self._not_understood(msg, f"unsupported content {type(element).__name__}")

    def on_inform(self, msg: ACLMessage) -> None:
        if msg.ontology == DF_ONTOLOGY_NAME:
            try:
                event = json.loads(msg.content)
                sd = ServiceDescription.from_json(event["service"])
            except (ValueError, KeyError) as e:
                log.warning("%s: bad DF notification: %s", self.name, e)
                return
            if event.get("event") == "registered" and sd.service_type == SERVICE_TYPE:
                self._maybe_subscribe_to_peer(sd)
            return
        peer_process = self._peer_for_conversation(msg.conversation_id)
        if peer_process is None:
            return
        try:
            elements = parse_sl_content(msg.content)
        except (SLParseError, SchemaViolation) as e:
            log.warning("%s: bad cross inform: %s", self.name, e)
            return
        for element in elements:
            if isinstance(element, ListOfVariables):
                self.prepare_new_sp(element.variables, peer_process)

    def _peer_for_conversation(self, conversation_id: str) -> Optional[str]:
        for process, conv in self._cross_conversations.items():
            if conv == conversation_id:
                return process
        return None

    # -- replies ----------------------------------------------------------------------

    def _refuse(self, msg: ACLMessage, reason: str) -> None:
        reply = msg.reply(Performative.REFUSE, reason)
        reply.language = "text"
        self.send(reply)

    def _not_understood(self, msg: ACLMessage, reason: str) -> None:
        reply = msg.reply(Performative.NOT_UNDERSTOOD, reason)
        reply.language = "text"
        self.send(reply)
