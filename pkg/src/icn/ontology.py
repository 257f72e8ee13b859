"""Agent communication language: performatives, envelopes, and the domain ontology.

The ontology is fixed: three concepts (ControlProcess, Variable, Alarm), three
agent actions (SetVariable, GetVariable, LocateVariable) and eight predicates.
Everything here is a plain immutable-ish value object; the text codec lives in
:mod:`icn.sl`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Union

ONTOLOGY_NAME = "icn-ontology"
LANGUAGE_NAME = "fipa-sl"

# Content for directory-facilitator housekeeping traffic rides under a
# separate ontology marker so the icn-ontology codec stays closed.
DF_ONTOLOGY_NAME = "df-management"


class Performative(Enum):
    REQUEST = "REQUEST"
    INFORM = "INFORM"
    SUBSCRIBE = "SUBSCRIBE"
    AGREE = "AGREE"
    REFUSE = "REFUSE"
    FAILURE = "FAILURE"
    NOT_UNDERSTOOD = "NOT_UNDERSTOOD"
    CANCEL = "CANCEL"


@dataclass(frozen=True)
class AID:
    """Agent identifier: ``local@platform`` plus optional transport URLs."""

    name: str
    addresses: tuple[str, ...] = ()

    def __post_init__(self):
        if self.name.count("@") != 1 or self.name.startswith("@"):
            raise ValueError(f"AID name must be local@platform, got {self.name!r}")
        if isinstance(self.addresses, list):
            object.__setattr__(self, "addresses", tuple(self.addresses))

    @property
    def local_name(self) -> str:
        return self.name.split("@", 1)[0]

    @property
    def platform(self) -> str:
        return self.name.split("@", 1)[1]


@dataclass
class ACLMessage:
    """FIPA-style speech-act envelope; `content` carries SL text verbatim."""

    performative: Performative
    sender: AID
    receivers: list[AID] = field(default_factory=list)
    content: str = ""
    language: str = LANGUAGE_NAME
    ontology: str = ONTOLOGY_NAME
    conversation_id: str = ""
    reply_with: str = ""
    in_reply_to: Optional[str] = None

    def reply(self, performative: Performative, content: str = "") -> "ACLMessage":
        """Skeleton reply addressed back to the sender, correlation fields set."""
        return ACLMessage(
            performative=performative,
            sender=self.receivers[0] if self.receivers else self.sender,
            receivers=[self.sender],
            content=content,
            language=self.language,
            ontology=self.ontology,
            conversation_id=self.conversation_id,
            in_reply_to=self.reply_with or None,
        )


@dataclass
class Variable:
    """A process variable: engineering limits plus current PV/SP.

    The codec tolerates partially filled Variables (symbol only) because
    subscription requests name variables without knowing their details; a
    fully populated Variable must satisfy lowLimit < highLimit, which is
    enforced at scenario load, not here.
    """

    symbol: str
    addressPV: str = ""
    addressSP: str = ""
    lowLimit: float = 0.0
    highLimit: float = 0.0
    PV: float = 0.0
    SP: float = 0.0

    def copy(self) -> "Variable":
        return replace(self)


@dataclass
class Alarm:
    """Operator notification. Lower priority value means more urgent."""

    destination: AID
    priority: int
    text: str
    var: Variable

    def __post_init__(self):
        if self.priority < 0:
            raise ValueError("alarm priority must be >= 0")


# Priority scale used throughout: 0 = limit excursion, 1 = rejected setpoint,
# 2 = informational (setpoint forwarded).
PRIORITY_LIMIT = 0
PRIORITY_REJECTED = 1
PRIORITY_INFO = 2


@dataclass
class ControlProcess:
    name: str
    variables: list[Variable] = field(default_factory=list)


# --- agent actions -----------------------------------------------------------


@dataclass
class SetVariable:
    variableAddress: str
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("SetVariable value must be finite")


@dataclass
class GetVariable:
    """Lookup by symbol or by item address; exactly one should be given."""

    symbol: str = ""
    variableAddress: str = ""


@dataclass
class LocateVariable:
    symbol: str


AgentAction = Union[SetVariable, GetVariable, LocateVariable]


@dataclass
class ActionExpr:
    """An agent action wrapped in the SL ``(action <actor> <act>)`` form."""

    actor: AID
    act: AgentAction


# --- predicates --------------------------------------------------------------


@dataclass
class IsHigh:
    var: Variable


@dataclass
class IsLow:
    var: Variable


@dataclass
class IsLocal:
    var: Variable


@dataclass
class IsLocatedin:
    var: Variable
    process: ControlProcess


@dataclass
class IsVariable:
    var: Variable


@dataclass
class IsControlProcess:
    process: ControlProcess


@dataclass
class ListOfVariables:
    variables: list[Variable] = field(default_factory=list)


@dataclass
class ListOfAlarms:
    alarms: list[Alarm] = field(default_factory=list)


Predicate = Union[
    IsHigh,
    IsLow,
    IsLocal,
    IsLocatedin,
    IsVariable,
    IsControlProcess,
    ListOfVariables,
    ListOfAlarms,
]

ContentElement = Union[ActionExpr, Predicate]
