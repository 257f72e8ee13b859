"""Agent lifecycle, behavior scheduling, mailboxes, and the directory facilitator.

One platform owns a single scheduler: every behavior of every local agent runs
on that scheduler thread, so an agent's behaviors are mutually exclusive by
construction and a whole run is deterministic under a virtual clock. Producers
on other threads (transport, HTTP handlers, tests) may enqueue messages at any
time; the scheduler picks them up at the current clock instant.

The clock is virtual by default. `run_until()` steps it from a test; `start()`
drives it from a background thread either as fast as events allow ("fast") or
pinned to the wall clock ("real") for interactive use.
"""

from __future__ import annotations

import heapq
import itertools
import json
import logging
import threading
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .ontology import (
    ACLMessage,
    AID,
    DF_ONTOLOGY_NAME,
    Performative,
)

log = logging.getLogger(__name__)

DEFAULT_RECEIVE_TIMEOUT = 1.0


class DuplicateName(ValueError):
    """An agent with this local name already lives on the platform."""


class DuplicateService(ValueError):
    """The DF already holds (provider, service_name)."""


@dataclass
class MessageTemplate:
    """Conjunctive filter over envelope fields; empty template matches all."""

    performative: Optional[Performative] = None
    sender: Optional[AID] = None
    conversation_id: Optional[str] = None
    ontology: Optional[str] = None

    def matches(self, msg: ACLMessage) -> bool:
        if self.performative is not None and msg.performative != self.performative:
            return False
        if self.sender is not None and msg.sender != self.sender:
            return False
        if self.conversation_id is not None and msg.conversation_id != self.conversation_id:
            return False
        if self.ontology is not None and msg.ontology != self.ontology:
            return False
        return True


class Mailbox:
    """FIFO of envelopes; enqueue is safe under concurrent producers."""

    def __init__(self):
        self._items: deque[ACLMessage] = deque()
        self._lock = threading.Lock()
        self._new = threading.Condition(self._lock)

    def put(self, msg: ACLMessage) -> None:
        with self._new:
            self._items.append(msg)
            self._new.notify_all()

    def take(
        self, template: Optional[MessageTemplate] = None, timeout: float = 0.0
    ) -> Optional[ACLMessage]:
        """Remove and return the oldest matching message, else None on timeout.

        The wait is wall-clock; under a stepped virtual platform use
        timeout=0 and drive the scheduler instead.
        """
        deadline = time.monotonic() + timeout
        with self._new:
            while True:
                for i, msg in enumerate(self._items):
                    if template is None or template.matches(msg):
                        del self._items[i]
                        return msg
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                self._new.wait(remaining)

    def snapshot(self) -> list[ACLMessage]:
        with self._lock:
            return list(self._items)

    def remove(self, msg: ACLMessage) -> bool:
        with self._lock:
            try:
                self._items.remove(msg)
                return True
            except ValueError:
                return False

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


# --- behaviors ------------------------------------------------------------


class Behavior:
    """Schedulable unit of agent work."""

    def __init__(self):
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True

    def step(self, agent: "Agent") -> None:
        raise NotImplementedError

    def done(self) -> bool:
        raise NotImplementedError


class OneShotBehavior(Behavior):
    def __init__(self, fn: Callable[["Agent"], None]):
        super().__init__()
        self.fn = fn
        self._ran = False

    def step(self, agent):
        self._ran = True
        self.fn(agent)

    def done(self):
        return self._ran


class PeriodicBehavior(Behavior):
    """Fixed-rate periodic work; drift is bounded by one period."""

    def __init__(self, period: float, fn: Callable[["Agent"], None], initial_delay: float = None):
        super().__init__()
        if period <= 0:
            raise ValueError("period must be > 0")
        self.period = period
        self.fn = fn
        self.initial_delay = period if initial_delay is None else initial_delay
        self.next_due: Optional[float] = None  # filled by the scheduler

    def step(self, agent):
        self.fn(agent)

    def done(self):
        return False


class FSMBehavior(Behavior):
    """Finite state machine of one-shot states joined by integer event codes.

    Each state function returns an event code; the machine follows the
    registered transition and stops only in a declared terminal state. An
    unmapped (state, event) pair is a programming error and raises.
    """

    def __init__(self):
        super().__init__()
        self._states: dict[str, Callable[["Agent"], Optional[int]]] = {}
        self._transitions: dict[tuple[str, int], str] = {}
        self._terminal: set[str] = set()
        self._initial: Optional[str] = None
        self._finished = False

    def register_state(self, name: str, fn, initial: bool = False, terminal: bool = False):
        self._states[name] = fn
        if initial:
            self._initial = name
        if terminal:
            self._terminal.add(name)
        return self

    def register_transition(self, src: str, event: int, dst: str):
        self._transitions[(src, event)] = dst
        return self

    def step(self, agent):
        if self._initial is None:
            raise RuntimeError("FSM has no initial state")
        current = self._initial
        while True:
            event = self._states[current](agent)
            if current in self._terminal:
                self._finished = True
                return
            key = (current, 0 if event is None else int(event))
            if key not in self._transitions:
                raise RuntimeError(f"FSM stuck: no transition for {key}")
            current = self._transitions[key]

    def done(self):
        return self._finished


# --- agents ------------------------------------------------------------------


class Agent:
    """Base agent: a mailbox plus behaviors on the platform scheduler.

    Subclasses override setup() to add behaviors and message handlers.
    Handlers consume matching messages during dispatch; anything unmatched
    stays queued for explicit receive().
    """

    def __init__(self, name: str):
        self.name = name
        self.aid: Optional[AID] = None
        self.platform: Optional["Platform"] = None
        self.mailbox = Mailbox()
        self._handlers: list[tuple[MessageTemplate, Callable[[ACLMessage], None]]] = []
        self._reply_seq = itertools.count(1)

    def setup(self):
        pass

    def add_behavior(self, behavior: Behavior) -> Behavior:
        self.platform.schedule_behavior(self, behavior)
        return behavior

    def add_message_handler(self, template: MessageTemplate, fn) -> None:
        self._handlers.append((template, fn))

    def receive(
        self, template: Optional[MessageTemplate] = None, timeout: float = DEFAULT_RECEIVE_TIMEOUT
    ) -> Optional[ACLMessage]:
        return self.mailbox.take(template, timeout)

    def send(self, msg: ACLMessage):
        if msg.sender is None:
            msg.sender = self.aid
        return self.platform.send(msg)

    def next_token(self, prefix: str) -> str:
        """Deterministic correlation tokens, unique per agent."""
        return f"{prefix}-{self.name}-{next(self._reply_seq)}"

    def dispatch_mail(self) -> None:
        for msg in self.mailbox.snapshot():
            for template, fn in self._handlers:
                if template.matches(msg):
                    if self.mailbox.remove(msg):
                        try:
                            fn(msg)
                        except Exception:
                            log.exception("%s: handler failed for %s", self.name, msg.performative)
                    break


@dataclass
class DeliveryReceipt:
    receiver: AID
    ok: bool
    error: Optional[str] = None
    retries: int = 0


# --- directory facilitator -----------------------------------------------------


@dataclass
class ServiceDescription:
    provider: AID
    service_type: str
    service_name: str
    properties: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "provider": {"name": self.provider.name, "addresses": list(self.provider.addresses)},
            "type": self.service_type,
            "name": self.service_name,
            "properties": self.properties,
        }

    @staticmethod
    def from_json(obj: dict) -> "ServiceDescription":
        return ServiceDescription(
            provider=AID(obj["provider"]["name"], tuple(obj["provider"]["addresses"])),
            service_type=obj["type"],
            service_name=obj["name"],
            properties=obj.get("properties", {}),
        )


@dataclass
class DfTemplate:
    """Filter over service descriptions; empty matches everything."""

    service_type: Optional[str] = None
    service_name: Optional[str] = None
    provider_name: Optional[str] = None

    def matches(self, sd: ServiceDescription) -> bool:
        if self.service_type is not None and sd.service_type != self.service_type:
            return False
        if self.service_name is not None and sd.service_name != self.service_name:
            return False
        if self.provider_name is not None and sd.provider.name != self.provider_name:
            return False
        return True


class DirectoryFacilitator:
    """Yellow pages: searchable registry plus INFORM push on registration."""

    LOCAL_NAME = "df"

    def __init__(self, platform: "Platform"):
        self._platform = platform
        self._lock = threading.Lock()
        self._registry: dict[tuple[str, str], ServiceDescription] = {}
        self._subs: dict[int, tuple[AID, DfTemplate]] = {}
        self._sub_seq = itertools.count(1)

    @property
    def aid(self) -> AID:
        return AID(f"{self.LOCAL_NAME}@{self._platform.name}", tuple(self._platform.addresses))

    def register(self, sd: ServiceDescription) -> None:
        key = (sd.provider.name, sd.service_name)
        with self._lock:
            if key in self._registry:
                raise DuplicateService(f"already registered: {key}")
            self._registry[key] = sd
            subscribers = [aid for aid, tpl in self._subs.values() if tpl.matches(sd)]
        for aid in subscribers:
            self._platform.send(
                ACLMessage(
                    performative=Performative.INFORM,
                    sender=self.aid,
                    receivers=[aid],
                    content=json.dumps({"event": "registered", "service": sd.to_json()}),
                    language="json",
                    ontology=DF_ONTOLOGY_NAME,
                    conversation_id="df-notify",
                )
            )

    def deregister(self, provider_name: str, service_name: str) -> bool:
        with self._lock:
            return self._registry.pop((provider_name, service_name), None) is not None

    def search(self, template: Optional[DfTemplate] = None, **kwargs) -> list[ServiceDescription]:
        template = template or DfTemplate(**kwargs)
        with self._lock:
            return [sd for sd in self._registry.values() if template.matches(sd)]

    def subscribe(self, subscriber: AID, template: Optional[DfTemplate] = None) -> int:
        template = template or DfTemplate()
        with self._lock:
            sub_id = next(self._sub_seq)
            self._subs[sub_id] = (subscriber, template)
            return sub_id

    def unsubscribe(self, sub_id: int) -> bool:
        with self._lock:
            return self._subs.pop(sub_id, None) is not None

    def all_registrations(self) -> list[ServiceDescription]:
        with self._lock:
            return list(self._registry.values())


# --- clocks and the platform ----------------------------------------------------


class VirtualClock:
    """Simulated epoch-seconds time, advanced only by the scheduler."""

    virtual = True

    def __init__(self, start: float = 0.0):
        self._t = start

    def now(self) -> float:
        return self._t

    def advance_to(self, t: float) -> None:
        if t > self._t:
            self._t = t


class RealClock:
    virtual = False

    def now(self) -> float:
        return time.time()

    def advance_to(self, t: float) -> None:
        pass


@dataclass(order=True)
class _Event:
    when: float
    seq: int
    fn: Callable[[], None] = field(compare=False)


class Platform:
    """Container for agents sharing one name, one clock, one scheduler."""

    def __init__(self, name: str, clock=None):
        self.name = name
        self.clock = clock if clock is not None else VirtualClock()
        self.addresses: list[str] = []
        self.agents: dict[str, Agent] = {}
        self.df = DirectoryFacilitator(self)
        self.counters: Counter = Counter()
        self._events: list[_Event] = []
        self._seq = itertools.count()
        self._lock = threading.RLock()
        self._wake = threading.Condition(self._lock)
        self._pending_drain: set[str] = set()
        self._thread: Optional[threading.Thread] = None
        self._running = False
        self._listener = None
        self._connector = None

    # -- time -----------------------------------------------------------

    def now(self) -> float:
        return self.clock.now()

    def now_ms(self) -> int:
        return int(round(self.clock.now() * 1000))

    # -- agent lifecycle ---------------------------------------------------

    def spawn(self, agent: Agent) -> AID:
        with self._lock:
            if agent.name in self.agents or agent.name == DirectoryFacilitator.LOCAL_NAME:
                raise DuplicateName(f"agent name in use: {agent.name}")
            agent.platform = self
            agent.aid = AID(f"{agent.name}@{self.name}", tuple(self.addresses))
            self.agents[agent.name] = agent
        agent.setup()
        return agent.aid

    def spawn_agent(self, name: str, behaviors: Optional[list[Behavior]] = None) -> AID:
        """Spawn a plain agent hosting the given behaviors."""
        agent = Agent(name)
        aid = self.spawn(agent)
        for b in behaviors or []:
            agent.add_behavior(b)
        return aid

    def agent(self, local_name: str) -> Optional[Agent]:
        with self._lock:
            return self.agents.get(local_name)

    # -- scheduling --------------------------------------------------------

    def schedule(self, when: float, fn: Callable[[], None]) -> None:
        with self._wake:
            heapq.heappush(self._events, _Event(when, next(self._seq), fn))
            self._wake.notify_all()

    def schedule_in(self, delay: float, fn: Callable[[], None]) -> None:
        self.schedule(self.now() + delay, fn)

    def schedule_periodic(self, period: float, fn: Callable[[], None], initial_delay=None) -> Callable[[], None]:
        """Platform-level periodic task (simulator ticks etc.); returns canceller."""
        state = {"cancelled": False, "due": self.now() + (period if initial_delay is None else initial_delay)}

        def run():
            if state["cancelled"]:
                return
            fn()
            state["due"] = max(state["due"] + period, self.now())
            self.schedule(state["due"], run)

        self.schedule(state["due"], run)

        def cancel():
            state["cancelled"] = True

        return cancel

    def schedule_behavior(self, agent: Agent, behavior: Behavior) -> None:
        if isinstance(behavior, PeriodicBehavior):
            behavior.next_due = self.now() + behavior.initial_delay

            def run_periodic():
                if behavior.cancelled:
                    return
                behavior.step(agent)
                behavior.next_due = max(behavior.next_due + behavior.period, self.now())
                self.schedule(behavior.next_due, run_periodic)

            self.schedule(behavior.next_due, run_periodic)
        else:

            def run_once():
                if not behavior.cancelled:
                    behavior.step(agent)

            self.schedule(self.now(), run_once)

    def _schedule_drain(self, agent: Agent) -> None:
        with self._lock:
            if agent.name in self._pending_drain:
                return
            self._pending_drain.add(agent.name)

        def drain():
            with self._lock:
                self._pending_drain.discard(agent.name)
            agent.dispatch_mail()

        self.schedule(self.now(), drain)

    # -- messaging -----------------------------------------------------------

    def send(self, msg: ACLMessage) -> list[DeliveryReceipt]:
        if not msg.receivers:
            raise ValueError("message has no receivers")
        if not msg.language or not msg.ontology:
            raise ValueError("language and ontology must be set")
        self.counters["messages_sent"] += 1
        receipts = []
        remote_groups: dict[tuple[str, int], list[AID]] = {}
        for receiver in msg.receivers:
            if receiver.platform == self.name:
                receipts.append(self._deliver_local(msg, receiver))
            else:
                endpoint = self._remote_endpoint(receiver)
                if endpoint is None:
                    receipts.append(
                        DeliveryReceipt(receiver, False, error="NoTransportAddress")
                    )
                else:
                    remote_groups.setdefault(endpoint, []).append(receiver)
        for endpoint, group in remote_groups.items():
            receipts.extend(self._deliver_remote(msg, endpoint, group))
        return receipts

    def _deliver_local(self, msg: ACLMessage, receiver: AID) -> DeliveryReceipt:
        if receiver.local_name == DirectoryFacilitator.LOCAL_NAME:
            return DeliveryReceipt(receiver, True)  # DF sink: housekeeping only
        agent = self.agent(receiver.local_name)
        if agent is None:
            return DeliveryReceipt(receiver, False, error="UnknownReceiver")
        agent.mailbox.put(msg)
        if agent._handlers:
            self._schedule_drain(agent)
        return DeliveryReceipt(receiver, True)

    def _remote_endpoint(self, receiver: AID) -> Optional[tuple[str, int]]:
        from .transport import parse_transport_url

        for url in receiver.addresses:
            parsed = parse_transport_url(url)
            if parsed:
                return parsed
        return None

    def _deliver_remote(self, msg, endpoint, receivers) -> list[DeliveryReceipt]:
        from .transport import envelope_to_line

        if self._connector is None:
            from .transport import TcpConnector

            self._connector = TcpConnector()
        line = envelope_to_line(msg)
        try:
            retries = self._connector.send_line(endpoint[0], endpoint[1], line)
            return [DeliveryReceipt(r, True, retries=retries) for r in receivers]
        except OSError as e:
            return [
                DeliveryReceipt(r, False, error=f"TransportError: {e}", retries=self._connector.max_retries)
                for r in receivers
            ]

    def deliver_from_wire(self, msg: ACLMessage) -> None:
        """Entry point for the TCP listener: hand to local receivers."""
        for receiver in msg.receivers:
            if receiver.platform != self.name:
                continue
            receipt = self._deliver_local(msg, receiver)
            if not receipt.ok:
                log.warning("wire message for unknown agent %s dropped", receiver.name)

    # -- transport endpoint -----------------------------------------------------

    def listen(self, host: str = "127.0.0.1", port: int = 0, advertise_host: Optional[str] = None) -> int:
        """Open the TCP endpoint; returns the bound port."""
        from .transport import TcpListener

        self._listener = TcpListener(self, host, port)
        bound = self._listener.start()
        self.addresses = [f"http://{advertise_host or host}:{bound}/acc"]
        with self._lock:
            for agent in self.agents.values():
                agent.aid = AID(agent.aid.name, tuple(self.addresses))
        return bound

    # -- scheduler loops ----------------------------------------------------------

    def run_until(self, t: float) -> None:
        """Step the virtual clock, executing every event due at or before t."""
        while True:
            with self._lock:
                if not self._events or self._events[0].when > t:
                    break
                event = heapq.heappop(self._events)
            self.clock.advance_to(event.when)
            event.fn()
        self.clock.advance_to(t)

    def run_for(self, duration: float) -> None:
        self.run_until(self.now() + duration)

    def run_until_idle(self, max_events: int = 100000) -> None:
        """Drain all work due now (message cascades) without advancing time."""
        t = self.now()
        for _ in range(max_events):
            with self._lock:
                if not self._events or self._events[0].when > t:
                    return
                event = heapq.heappop(self._events)
            event.fn()
        raise RuntimeError("event cascade did not quiesce")

    def start(self, pace: str = "fast") -> None:
        """Run the scheduler on a background thread.

        pace="fast": jump the virtual clock to each next event.
        pace="real": hold each event until its wall-clock moment.
        """
        if self._thread is not None:
            raise RuntimeError("platform already started")
        self._running = True
        wall_anchor = time.monotonic()
        virt_anchor = self.now()

        def loop():
            while True:
                with self._wake:
                    if not self._running:
                        return
                    if not self._events:
                        self._wake.wait(0.05)
                        continue
                    head = self._events[0]
                    if pace == "real" or not getattr(self.clock, "virtual", False):
                        target_wall = wall_anchor + (head.when - virt_anchor)
                        delay = target_wall - time.monotonic()
                        if delay > 0:
                            self._wake.wait(min(delay, 0.05))
                            continue
                    event = heapq.heappop(self._events)
                self.clock.advance_to(event.when)
                try:
                    event.fn()
                except Exception:
                    log.exception("scheduled event failed")

        self._thread = threading.Thread(target=loop, name=f"platform-{self.name}", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        with self._wake:
            self._running = False
            self._wake.notify_all()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None
        if self._listener is not None:
            self._listener.stop()
            self._listener = None
        if self._connector is not None:
            self._connector.close()
            self._connector = None
