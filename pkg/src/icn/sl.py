"""Text codec for message content: encode/parse the parenthesized SL form.

Content is one or more elements wrapped in an outer pair of parentheses::

    ((action (agent-identifier :name c1@SCADA ...) (SetVariable ...)))
    ((ListOfAlarms (sequence ...)))

Slots are written ``:name value``, lists as ``(sequence ...)``, floats with
the shortest decimal that round-trips (integois get a trailing ``.0``), and
string-typed slots are double-quoted. Symbols, item addresses and URLs are
opaque atoms. ``parse_sl(encode_sl(x)) == x`` for every schema-valid x.
"""

from __future__ import annotations

import re
from datetime import datetime, timezone
from typing import Union

from .ontology import (
    ACLMessage,
    ActionExpr,
    AID,
    Alarm,
    ContentElement,
    ControlProcess,
    GetVariable,
    IsControlProcess,
    IsHigh,
    IsLocal,
    IsLocatedin,
    IsVariable,
    IsLow,
    ListOfAlarms,
    ListOfVariables,
    LocateVariable,
    SetVariable,
    Variable,
)


class SLParseError(ValueError):
    """Malformed SL text; `offset` is the byte position of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class SchemaViolation(ValueError):
    """Structurally valid s-expression that is not in the ontology."""


# --- s-expression layer -------------------------------------------------------


class Atom(str):
    """Unquoted token. Distinct from str so quoted strings keep their type."""

    __slots__ = ()


_ATOM_END = set(' \t\r\n()"')


def _tokenize(text: str):
    """Yield (kind, value, offset); kind is '(', ')', 'atom' or 'string'."""
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c in "()":
            yield c, c, i
            i += 1
        elif c == '"':
            start = i
            i += 1
            out = []
            while True:
                if i >= n:
                    raise SLParseError("unterminated string", start)
                c = text[i]
                if c == "\\":
                    if i + 1 >= n:
                        raise SLParseError("dangling escape", i)
                    nxt = text[i + 1]
                    if nxt not in ('"', "\\"):
                        raise SLParseError(f"bad escape \\{nxt}", i)
                    out.append(nxt)
                    i += 2
                elif c == '"':
                    i += 1
                    break
                else:
                    out.append(c)
                    i += 1
            yield "string", "".join(out), start
        else:
            start = i
            while i < n and text[i] not in _ATOM_END:
                i += 1
            yield "atom", text[start:i], start


def parse_sexp(text: str):
    """Parse one s-expression; returns nested lists of Atom/str."""
    stack: list[list] = []
    top = None
    last_off = 0
    for kind, value, off in _tokenize(text):
        last_off = off
        if kind == "(":
            if top is not None:
                raise SLParseError("trailing expression", off)
            stack.append([])
        elif kind == ")":
            if not stack:
                raise SLParseError("unbalanced ')'", off)
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            else:
                top = done
        else:
            if not stack:
                if top is None:
                    raise SLParseError("content must start with '('", off)
                raise SLParseError("trailing token", off)
            stack[-1].append(Atom(value) if kind == "atom" else str(value))
    if stack:
        raise SLParseError("unbalanced '('", last_off)
    if top is None:
        raise SLParseError("empty input", 0)
    return top


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def dump_sexp(node) -> str:
    """Canonical single-line rendering of a parsed s-expression."""
    if isinstance(node, list):
        return "(" + " ".join(dump_sexp(x) for x in node) + ")"
    if isinstance(node, Atom):
        return str(node)
    return _quote(node)


def normalized(text: str) -> str:
    """Whitespace-normal form of SL text: single spaces, collapsed strings.

    Used for golden comparisons where source texts differ only in line
    wrapping (including wraps inside quoted strings).
    """
    node = parse_sexp(text)

    def walk(n):
        if isinstance(n, list):
            return [walk(x) for x in n]
        if isinstance(n, Atom):
            return n
        return " ".join(n.split())

    return dump_sexp(walk(node))


# --- value encoders/decoders --------------------------------------------------


def canonical_float(v: float) -> str:
    s = repr(float(v))
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _enc_atom(v: str) -> str:
    if v == "" or any(ch in _ATOM_END for ch in v):
        raise SchemaViolation(f"not encodable as an atom: {v!r}")
    return v


def _dec_atom(node, what: str) -> str:
    if not isinstance(node, Atom):
        raise SchemaViolation(f"{what}: expected atom, got {node!r}")
    return str(node)


def _dec_str(node, what: str) -> str:
    if isinstance(node, list):
        raise SchemaViolation(f"{what}: expected string, got list")
    return str(node)


def _dec_float(node, what: str) -> float:
    if not isinstance(node, Atom):
        raise SchemaViolation(f"{what}: expected number, got {node!r}")
    try:
        return float(node)
    except ValueError:
        raise SchemaViolation(f"{what}: not a number: {node!r}") from None


def _dec_int(node, what: str) -> int:
    if not isinstance(node, Atom):
        raise SchemaViolation(f"{what}: expected integer, got {node!r}")
    try:
        return int(node)
    except ValueError:
        raise SchemaViolation(f"{what}: not an integer: {node!r}") from None


def _slots(items: list, what: str) -> dict[str, object]:
    """Split `:name value` pairs. Accepts the bare (colon-less) slot spelling
    seen in scanned message dumps when it unambiguously names a known slot."""
    out: dict[str, object] = {}
    i = 0
    while i < len(items):
        key = items[i]
        if not isinstance(key, Atom):
            raise SchemaViolation(f"{what}: expected slot name, got {key!r}")
        name = str(key)
        if name.startswith(":"):
            name = name[1:]
        if not name:
            raise SchemaViolation(f"{what}: empty slot name")
        if i + 1 >= len(items):
            raise SchemaViolation(f"{what}: slot :{name} has no value")
        if name in out:
            raise SchemaViolation(f"{what}: duplicate slot :{name}")
        out[name] = items[i + 1]
        i += 2
    return out


def _sequence(node, what: str) -> list:
    if not (isinstance(node, list) and node and node[0] == Atom("sequence")):
        raise SchemaViolation(f"{what}: expected (sequence ...)")
    return node[1:]


# --- concepts -----------------------------------------------------------------


def _enc_aid(a: AID) -> str:
    addrs = " ".join(_enc_atom(u) for u in a.addresses)
    return f"(agent-identifier :name {_enc_atom(a.name)} :addresses (sequence{' ' + addrs if addrs else ''}))"


def _dec_aid(node) -> AID:
    if not (isinstance(node, list) and node and node[0] == Atom("agent-identifier")):
        raise SchemaViolation("expected (agent-identifier ...)")
    slots = _slots(node[1:], "agent-identifier")
    unknown = set(slots) - {"name", "addresses"}
    if unknown:
        raise SchemaViolation(f"agent-identifier: unknown slots {sorted(unknown)}")
    if "name" not in slots:
        raise SchemaViolation("agent-identifier: missing :name")
    addresses = ()
    if "addresses" in slots:
        addresses = tuple(
            _dec_atom(x, "address") for x in _sequence(slots["addresses"], "addresses")
        )
    try:
        return AID(_dec_atom(slots["name"], "name"), addresses)
    except ValueError as e:
        raise SchemaViolation(str(e)) from None


_VARIABLE_SLOTS = ("lowLimit", "highLimit", "addressPV", "addressSP", "symbol", "PV", "SP")


def _enc_variable(v: Variable) -> str:
    pv_addr = _enc_atom(v.addressPV) if v.addressPV else '""'
    sp_addr = _enc_atom(v.addressSP) if v.addressSP else '""'
    return (
        f"(Variable :lowLimit {canonical_float(v.lowLimit)}"
        f" :highLimit {canonical_float(v.highLimit)}"
        f" :addressPV {pv_addr}"
        f" :addressSP {sp_addr}"
        f" :symbol {_enc_atom(v.symbol)}"
        f" :PV {canonical_float(v.PV)} :SP {canonical_float(v.SP)})"
    )


def _dec_variable(node) -> Variable:
    if not (isinstance(node, list) and node and node[0] == Atom("Variable")):
        raise SchemaViolation("expected (Variable ...)")
    slots = _slots(node[1:], "Variable")
    unknown = set(slots) - set(_VARIABLE_SLOTS)
    if unknown:
        raise SchemaViolation(f"Variable: unknown slots {sorted(unknown)}")
    if "symbol" not in slots:
        raise SchemaViolation("Variable: missing :symbol")
    return Variable(
        symbol=_dec_atom(slots["symbol"], "symbol"),
        addressPV=_dec_str(slots["addressPV"], "addressPV") if "addressPV" in slots else "",
        addressSP=_dec_str(slots["addressSP"], "addressSP") if "addressSP" in slots else "",
        lowLimit=_dec_float(slots["lowLimit"], "lowLimit") if "lowLimit" in slots else 0.0,
        highLimit=_dec_float(slots["highLimit"], "highLimit") if "highLimit" in slots else 0.0,
        PV=_dec_float(slots["PV"], "PV") if "PV" in slots else 0.0,
        SP=_dec_float(slots["SP"], "SP") if "SP" in slots else 0.0,
    )


def _enc_alarm(a: Alarm) -> str:
    return (
        f"(Alarm :destination {_enc_aid(a.destination)}"
        f" :priority {int(a.priority)}"
        f" :text {_quote(a.text)}"
        f" :var {_enc_variable(a.var)})"
    )


def _dec_alarm(node) -> Alarm:
    if not (isinstance(node, list) and node and node[0] == Atom("Alarm")):
        raise SchemaViolation("expected (Alarm ...)")
    slots = _slots(node[1:], "Alarm")
    unknown = set(slots) - {"destination", "priority", "text", "var"}
    if unknown:
        raise SchemaViolation(f"Alarm: unknown slots {sorted(unknown)}")
    for required in ("destination", "priority", "text", "var"):
        if required not in slots:
            raise SchemaViolation(f"Alarm: missing :{required}")
    try:
        return Alarm(
            destination=_dec_aid(slots["destination"]),
            priority=_dec_int(slots["priority"], "priority"),
            text=_dec_str(slots["text"], "text"),
            var=_dec_variable(slots["var"]),
        )
    except ValueError as e:
        raise SchemaViolation(str(e)) from None


def _enc_process(p: ControlProcess) -> str:
    inner = " ".join(_enc_variable(v) for v in p.variables)
    return (
        f"(ControlProcess :name {_enc_atom(p.name)}"
        f" :variables (sequence{' ' + inner if inner else ''}))"
    )


def _dec_process(node) -> ControlProcess:
    if not (isinstance(node, list) and node and node[0] == Atom("ControlProcess")):
        raise SchemaViolation("expected (ControlProcess ...)")
    slots = _slots(node[1:], "ControlProcess")
    unknown = set(slots) - {"name", "variables"}
    if unknown:
        raise SchemaViolation(f"ControlProcess: unknown slots {sorted(unknown)}")
    if "name" not in slots:
        raise SchemaViolation("ControlProcess: missing :name")
    variables = []
    if "variables" in slots:
        variables = [_dec_variable(x) for x in _sequence(slots["variables"], "variables")]
    return ControlProcess(name=_dec_atom(slots["name"], "name"), variables=variables)


# --- actions and predicates ---------------------------------------------------


def _enc_action(act) -> str:
    if isinstance(act, SetVariable):
        return (
            f"(SetVariable :variableAddress {_enc_atom(act.variableAddress)}"
            f" :value {canonical_float(act.value)})"
        )
    if isinstance(act, GetVariable):
        parts = []
        if act.symbol:
            parts.append(f":symbol {_enc_atom(act.symbol)}")
        if act.variableAddress:
            parts.append(f":variableAddress {_enc_atom(act.variableAddress)}")
        if not parts:
            raise SchemaViolation("GetVariable needs a symbol or an address")
        return f"(GetVariable {' '.join(parts)})"
    if isinstance(act, LocateVariable):
        return f"(LocateVariable :symbol {_enc_atom(act.symbol)})"
    raise SchemaViolation(f"unknown action {type(act).__name__}")


def _dec_action(node):
    head = str(node[0])
    slots = _slots(node[1:], head)
    if head == "SetVariable":
        unknown = set(slots) - {"variableAddress", "value"}
        if unknown:
            raise SchemaViolation(f"SetVariable: unknown slots {sorted(unknown)}")
        if "variableAddress" not in slots or "value" not in slots:
            raise SchemaViolation("SetVariable: needs :variableAddress and :value")
        try:
            return SetVariable(
                variableAddress=_dec_str(slots["variableAddress"], "variableAddress"),
                value=_dec_float(slots["value"], "value"),
            )
        except ValueError as e:
            raise SchemaViolation(str(e)) from None
    if head == "GetVariable":
        unknown = set(slots) - {"symbol", "variableAddress"}
        if unknown:
            raise SchemaViolation(f"GetVariable: unknown slots {sorted(unknown)}")
        if not slots:
            raise SchemaViolation("GetVariable: needs :symbol or :variableAddress")
        return GetVariable(
            symbol=_dec_atom(slots["symbol"], "symbol") if "symbol" in slots else "",
            variableAddress=(
                _dec_str(slots["variableAddress"], "variableAddress")
                if "variableAddress" in slots
                else ""
            ),
        )
    if head == "LocateVariable":
        unknown = set(slots) - {"symbol"}
        if unknown:
            raise SchemaViolation(f"LocateVariable: unknown slots {sorted(unknown)}")
        if "symbol" not in slots:
            raise SchemaViolation("LocateVariable: missing :symbol")
        return LocateVariable(symbol=_dec_atom(slots["symbol"], "symbol"))
    raise SchemaViolation(f"unknown action {head!r}")


_ACTION_HEADS = {"SetVariable", "GetVariable", "LocateVariable"}
_UNARY_VAR_PREDICATES = {
    "IsHigh": IsHigh,
    "IsLow": IsLow,
    "IsLocal": IsLocal,
    "IsVariable": IsVariable,
}


def encode_element(elem: ContentElement) -> str:
    if isinstance(elem, ActionExpr):
        return f"(action {_enc_aid(elem.actor)} {_enc_action(elem.act)})"
    if isinstance(elem, (IsHigh, IsLow, IsLocal, IsVariable)):
        return f"({type(elem).__name__} {_enc_variable(elem.var)})"
    if isinstance(elem, IsLocatedin):
        return f"(IsLocatedin {_enc_variable(elem.var)} {_enc_process(elem.process)})"
    if isinstance(elem, IsControlProcess):
        return f"(IsControlProcess {_enc_process(elem.process)})"
    if isinstance(elem, ListOfVariables):
        inner = " ".join(_enc_variable(v) for v in elem.variables)
        return f"(ListOfVariables (sequence{' ' + inner if inner else ''}))"
    if isinstance(elem, ListOfAlarms):
        inner = " ".join(_enc_alarm(a) for a in elem.alarms)
        return f"(ListOfAlarms (sequence{' ' + inner if inner else ''}))"
    raise SchemaViolation(f"unknown content element {type(elem).__name__}")


def decode_element(node) -> ContentElement:
    if not (isinstance(node, list) and node and isinstance(node[0], Atom)):
        raise SchemaViolation(f"expected a content element, got {node!r}")
    head = str(node[0])
    if head == "action":
        if len(node) != 3:
            raise SchemaViolation("action: expected (action <agent-identifier> <act>)")
        actor = _dec_aid(node[1])
        act_node = node[2]
        if not (isinstance(act_node, list) and act_node and isinstance(act_node[0], Atom)):
            raise SchemaViolation("action: malformed act")
        if str(act_node[0]) not in _ACTION_HEADS:
            raise SchemaViolation(f"unknown action {str(act_node[0])!r}")
        return ActionExpr(actor=actor, act=_dec_action(act_node))
    if head in _UNARY_VAR_PREDICATES:
        if len(node) != 2:
            raise SchemaViolation(f"{head}: expected one Variable argument")
        return _UNARY_VAR_PREDICATES[head](_dec_variable(node[1]))
    if head == "IsLocatedin":
        if len(node) != 3:
            raise SchemaViolation("IsLocatedin: expected (Variable, ControlProcess)")
        return IsLocatedin(_dec_variable(node[1]), _dec_process(node[2]))
    if head == "IsControlProcess":
        if len(node) != 2:
            raise SchemaViolation("IsControlProcess: expected one ControlProcess")
        return IsControlProcess(_dec_process(node[1]))
    if head == "ListOfVariables":
        if len(node) != 2:
            raise SchemaViolation("ListOfVariables: expected one sequence")
        return ListOfVariables(
            [_dec_variable(x) for x in _sequence(node[1], "ListOfVariables")]
        )
    if head == "ListOfAlarms":
        if len(node) != 2:
            raise SchemaViolation("ListOfAlarms: expected one sequence")
        return ListOfAlarms([_dec_alarm(x) for x in _sequence(node[1], "ListOfAlarms")])
    raise SchemaViolation(f"unknown content element {head!r}")


# --- public entry points ------------------------------------------------------


def encode_sl_content(elements: list[ContentElement]) -> str:
    """Encode one or more content elements into the outer-wrapped SL text."""
    if not elements:
        raise SchemaViolation("content needs at least one element")
    return "(" + " ".join(encode_element(e) for e in elements) + ")"


def encode_sl(element: ContentElement) -> str:
    """Encode a single action expression or predicate."""
    return encode_sl_content([element])


def parse_sl_content(text: str) -> list[ContentElement]:
    node = parse_sexp(text)
    if not isinstance(node, list) or not node:
        raise SchemaViolation("content must be a non-empty list of elements")
    return [decode_element(x) for x in node]


def parse_sl(text: str) -> ContentElement:
    """Parse SL text expected to carry exactly one content element."""
    elements = parse_sl_content(text)
    if len(elements) != 1:
        raise SchemaViolation(f"expected exactly one content element, got {len(elements)}")
    return elements[0]


def content_elements(msg: ACLMessage) -> list[ContentElement]:
    return parse_sl_content(msg.content)


# --- alarm text ---------------------------------------------------------------

_ALARM_RE = re.compile(
    r"^(\w{3}) (\w{3}) ([ \d]\d) (\d\d):(\d\d):(\d\d) (\d{4}) \|'([^']+)' (.+)$",
    re.DOTALL,
)
_MONTHS = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]


def format_alarm_text(now: Union[datetime, float], symbol: str, message: str) -> str:
    """`<asctime> |'<symbol>' <message>` with the C-library asctime layout."""
    if isinstance(now, (int, float)):
        now = datetime.fromtimestamp(now, tz=timezone.utc)
    return f"{now.ctime()} |'{symbol}' {message}"


def parse_alarm_text(text: str) -> tuple[datetime, str, str]:
    """Inverse of :func:`format_alarm_text`; day-of-week is recomputed."""
    m = _ALARM_RE.match(text)
    if not m:
        raise ValueError(f"not an alarm text: {text!r}")
    _, mon, day, hh, mm, ss, year, symbol, message = m.groups()
    if mon not in _MONTHS:
        raise ValueError(f"bad month {mon!r}")
    ts = datetime(
        int(year), _MONTHS.index(mon) + 1, int(day), int(hh), int(mm), int(ss)
    )
    return ts, symbol, message
