"""Scenario files: one JSON document describing the whole network.

A scenario lists the platform, each control process with its variables
(addresses, limits, initial PV/SP, dynamics), and the dependency links.
Validation reports every violation it can find, not just the first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .control import DependencyLink, LinkEndpoint
from .interpolation import InterpolationTable
from .ontology import Variable
from .plcsim import (
    DEFAULT_NOISE_AMPLITUDE,
    DEFAULT_OPC_SERVER_HOST,
    DEFAULT_OPC_SERVER_NAME,
    DEFAULT_TAU_S,
    parse_address,
)

DEFAULT_POLL_PERIOD_S = 0.5
DEFAULT_TICK_PERIOD_S = 0.1
DEFAULT_DEADBAND = 0.0


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


class ScenarioError(ValueError):
    def __init__(self, violations: list[Violation]):
        super().__init__(
            "invalid scenario:\n" + "\n".join(f"  - {v}" for v in violations)
        )
        self.violations = violations


@dataclass
class VariableSpec:
    symbol: str
    addressPV: str
    addressSP: str
    lowLimit: float
    highLimit: float
    pv: float = 0.0
    sp: float = 0.0
    tau_s: float = DEFAULT_TAU_S
    noise_amplitude: float = DEFAULT_NOISE_AMPLITUDE

    def to_variable(self) -> Variable:
        return Variable(
            symbol=self.symbol,
            addressPV=self.addressPV,
            addressSP=self.addressSP,
            lowLimit=self.lowLimit,
            highLimit=self.highLimit,
            PV=self.pv,
            SP=self.sp,
        )


@dataclass
class ProcessSpec:
    name: str
    variables: list[VariableSpec] = field(default_factory=list)
    opc_server_host: str = DEFAULT_OPC_SERVER_HOST
    opc_server_name: str = DEFAULT_OPC_SERVER_NAME


@dataclass
class LinkSpec:
    source: LinkEndpoint
    target: LinkEndpoint
    table: list[tuple[float, float]]

    def to_dependency_link(self) -> DependencyLink:
        return DependencyLink(
            source=self.source, target=self.target, table=InterpolationTable(self.table)
        )


@dataclass
class Scenario:
    platform: str = "SCADA"
    poll_period_s: float = DEFAULT_POLL_PERIOD_S
    tick_period_s: float = DEFAULT_TICK_PERIOD_S
    deadband: float = DEFAULT_DEADBAND
    seed: int = 0
    noise: bool = True
    start_time: float = 0.0
    processes: list[ProcessSpec] = field(default_factory=list)
    links: list[LinkSpec] = field(default_factory=list)

    def process(self, name: str) -> Optional[ProcessSpec]:
        for p in self.processes:
            if p.name == name:
                return p
        return None

    def links_for_target(self, process_name: str) -> list[DependencyLink]:
        return [
            l.to_dependency_link() for l in self.links if l.target.process == process_name
        ]


# --- validation -------------------------------------------------------------


def _check_number(out, code, what, value, allow_zero=True) -> Optional[float]:
    try:
        v = float(value)
    except (TypeError, ValueError):
        out.append(Violation(code, f"{what}: not a number: {value!r}"))
        return None
    if not math.isfinite(v):
        out.append(Violation(code, f"{what}: not finite"))
        return None
    if not allow_zero and v <= 0:
        out.append(Violation(code, f"{what}: must be > 0"))
        return None
    return v


def validate_scenario(data: dict) -> list[Violation]:
    """Collect every violation in the raw scenario document."""
    out: list[Violation] = []
    if not isinstance(data, dict):
        return [Violation("BadDocument", "scenario must be a JSON object")]

    _check_number(out, "BadValue", "poll_period_s", data.get("poll_period_s", DEFAULT_POLL_PERIOD_S), allow_zero=False)
    _check_number(out, "BadValue", "tick_period_s", data.get("tick_period_s", DEFAULT_TICK_PERIOD_S), allow_zero=False)

    deadband = _check_number(out, "BadValue", "deadband", data.get("deadband", 0.0))
    if deadband is not None and deadband < 0:
        out.append(Violation("BadValue", "deadband: must be >= 0"))

    symbols: dict[tuple[str, str], VariableSpec] = {}
    process_names: set[str] = set()
    limits: dict[tuple[str, str], tuple[float, float]] = {}

    for pi, proc in enumerate(data.get("processes", [])):
        pname = proc.get("name")
        where = f"processes[{pi}]"
        if not pname:
            out.append(Violation("MissingField", f"{where}: missing name"))
            continue
        if pname in process_names:
            out.append(Violation("DuplicateProcess", f"process name reused: {pname}"))
            continue
        process_names.add(pname)
        seen_here: set[str] = set()
        for vi, var in enumerate(proc.get("variables", [])):
            vwhere = f"{where}.variables[{vi}]"
            sym = var.get("symbol")
            if not sym:
                out.append(Violation("MissingField", f"{vwhere}: missing symbol"))
                continue
            if sym in seen_here:
                out.append(Violation("DuplicateSymbol", f"{pname}: symbol reused: {sym}"))
                continue
            seen_here.add(sym)
            for key in ("addressPV", "addressSP"):
                addr = var.get(key)
                if not addr:
                    out.append(Violation("MissingField", f"{vwhere}: missing {key}"))
                    continue
                try:
                    parse_address(addr)
                except ValueError as e:
                    out.append(Violation("AddressSyntax", f"{vwhere}.{key}: {e}"))
            low = _check_number(out, "BadValue", f"{vwhere}.lowLimit", var.get("lowLimit"))
            high = _check_number(out, "BadValue", f"{vwhere}.highLimit", var.get("highLimit"))
            if low is not None and high is not None:
                if not low < high:
                    out.append(
                        Violation("BadLimits", f"{sym}: lowLimit {low} must be < highLimit {high}")
                    )
                else:
                    limits[(pname, sym)] = (low, high)
                    for key in ("pv", "sp"):
                        init = _check_number(out, "BadValue", f"{vwhere}.{key}", var.get(key, 0.0))
                        if init is not None and not (low <= init <= high):
                            out.append(
                                Violation(
                                    "InitialOutOfRange",
                                    f"{sym}.{key} = {init} outside [{low}, {high}]",
                                )
                            )
            _check_number(out, "BadValue", f"{vwhere}.tau_s", var.get("tau_s", DEFAULT_TAU_S), allow_zero=False)
            noise_amp = _check_number(
                out, "BadValue", f"{vwhere}.noise_amplitude", var.get("noise_amplitude", DEFAULT_NOISE_AMPLITUDE)
            )
            if noise_amp is not None and noise_amp < 0:
                out.append(Violation("BadValue", f"{vwhere}.noise_amplitude: must be >= 0"))
            symbols[(pname, sym)] = var

    edges: list[tuple[tuple[str, str], tuple[str, str]]] = []
    for li, link in enumerate(data.get("links", [])):
        where = f"links[{li}]"
        src, dst = link.get("source", {}), link.get("target", {})
        src_key = (src.get("process"), src.get("symbol"))
        dst_key = (dst.get("process"), dst.get("symbol"))
        ok = True
        for label, key in (("source", src_key), ("target", dst_key)):
            if key not in symbols:
                out.append(
                    Violation("UnknownLinkEndpoint", f"{where}.{label}: no variable {key}")
                )
                ok = False
        src_field = src.get("field", "PV")
        if src_field not in ("PV", "SP"):
            out.append(Violation("BadLinkField", f"{where}.source.field: {src_field!r}"))
            ok = False
        if dst.get("field", "SP") != "SP":
            out.append(Violation("BadLinkField", f"{where}.target.field must be SP"))
            ok = False

        table = link.get("table", [])
        if len(table) < 2:
            out.append(Violation("TableTooShort", f"{where}: needs at least 2 points"))
        else:
            xs, ys, numeric = [], [], True
            for pt in table:
                if (
                    not isinstance(pt, (list, tuple))
                    or len(pt) != 2
                    or not all(isinstance(c, (int, float)) and math.isfinite(c) for c in pt)
                ):
                    out.append(Violation("TableNotFinite", f"{where}: bad point {pt!r}"))
                    numeric = False
                    break
                xs.append(float(pt[0]))
                ys.append(float(pt[1]))
            if numeric:
                if any(b <= a for a, b in zip(xs, xs[1:])):
                    out.append(
                        Violation("TableNotMonotone", f"{where}: x values must strictly increase")
                    )
                if ok and dst_key in limits:
                    low, high = limits[dst_key]
                    if min(ys) < low or max(ys) > high:
                        out.append(
                            Violation(
                                "TableOutOfRange",
                                f"{where}: y range [{min(ys)}, {max(ys)}] exceeds "
                                f"{dst_key[1]} limits [{low}, {high}]",
                            )
                        )
        if ok:
            edges.append((src_key, dst_key))

    out.extend(_find_cycles(edges))
    return out


def _find_cycles(edges) -> list[Violation]:
    graph: dict = {}
    for src, dst in edges:
        graph.setdefault(src, []).append(dst)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {node: WHITE for pair in edges for node in pair}
    out = []

    def visit(node, path):
        color[node] = GRAY
        for nxt in graph.get(node, []):
            if color[nxt] == GRAY:
                cycle = path[path.index(nxt):] + [nxt] if nxt in path else [node, nxt]
                pretty = " -> ".join(f"{p}.{s}" for p, s in cycle)
                out.append(Violation("CycleDetected", f"link cycle: {pretty}"))
            elif color[nxt] == WHITE:
                visit(nxt, path + [nxt])
        color[node] = BLACK

    for node in list(color):
        if color[node] == WHITE:
            visit(node, [node])
    return out


# --- loading -------------------------------------------------------------------


def scenario_from_dict(data: dict) -> Scenario:
    violations = validate_scenario(data)
    if violations:
        raise ScenarioError(violations)
    processes = []
    for proc in data.get("processes", []):
        processes.append(
            ProcessSpec(
                name=proc["name"],
                opc_server_host=proc.get("OpcServerHost", DEFAULT_OPC_SERVER_HOST),
                opc_server_name=proc.get("OpcServerName", DEFAULT_OPC_SERVER_NAME),
                variables=[
                    VariableSpec(
                        symbol=v["symbol"],
                        addressPV=v["addressPV"],
                        addressSP=v["addressSP"],
                        lowLimit=float(v["lowLimit"]),
                        highLimit=float(v["highLimit"]),
                        pv=float(v.get("pv", 0.0)),
                        sp=float(v.get("sp", 0.0)),
                        tau_s=float(v.get("tau_s", DEFAULT_TAU_S)),
                        noise_amplitude=float(
                            v.get("noise_amplitude", DEFAULT_NOISE_AMPLITUDE)
                        ),
                    )
                    for v in proc.get("variables", [])
                ],
            )
        )
    links = [
        LinkSpec(
            source=LinkEndpoint(
                link["source"]["process"],
                link["source"]["symbol"],
                link["source"].get("field", "PV"),
            ),
            target=LinkEndpoint(
                link["target"]["process"], link["target"]["symbol"], "SP"
            ),
            table=[(float(x), float(y)) for x, y in link["table"]],
        )
        for link in data.get("links", [])
    ]
    return Scenario(
        platform=data.get("platform", "SCADA"),
        poll_period_s=float(data.get("poll_period_s", DEFAULT_POLL_PERIOD_S)),
        tick_period_s=float(data.get("tick_period_s", DEFAULT_TICK_PERIOD_S)),
        deadband=float(data.get("deadband", DEFAULT_DEADBAND)),
        seed=int(data.get("seed", 0)),
        noise=bool(data.get("noise", True)),
        start_time=float(data.get("start_time", 0.0)),
        processes=processes,
        links=links,
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Load and validate; raises ScenarioError listing every violation."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError([Violation("JsonSyntax", str(e))]) from None
    return scenario_from_dict(data)


def default_scenario_path() -> Path:
    return Path(resources.files("icn").joinpath("data/default.json"))


def load_default_scenario() -> Scenario:
    return load_scenario(default_scenario_path())
