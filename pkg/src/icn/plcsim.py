"""Simulated legacy PLC behind an OPC-style item/group interface.

Word-addressed data blocks hold engineering-unit floats (real hardware would
pack 16-bit words; the connection-string examples write floats straight to
word addresses, so the cells do too). Groups poll items against an absolute
deadband, and first-order dynamics pull each PV toward its SP on tick().
"""

from __future__ import annotations

import math
import random
import re
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union

DEFAULT_OPC_SERVER_HOST = "localhost"
DEFAULT_OPC_SERVER_NAME = "OPC.SimaticNet"

DEFAULT_TAU_S = 5.0
DEFAULT_NOISE_AMPLITUDE = 0.005  # fraction of (highLimit - lowLimit)
DEFAULT_DEADBAND = 0.0
DEFAULT_POLL_PERIOD_S = 0.5


class AddressSyntax(ValueError):
    """Connection string does not match s7:[server]db<N>,w<M>."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class ItemAddress:
    """Parsed `s7:[<server>]db<N>,w<M>` connection string.

    The server part is kept verbatim for rendering; identity ignores case
    and a leading `@`, since both spellings appear in the wild.
    """

    server: str
    db: int
    word: int

    @property
    def server_key(self) -> str:
        return self.server.lstrip("@").lower()

    def render(self) -> str:
        return f"s7:[{self.server}]db{self.db},w{self.word}"

    def __str__(self) -> str:
        return self.render()

    def __eq__(self, other):
        if not isinstance(other, ItemAddress):
            return NotImplemented
        return (self.server_key, self.db, self.word) == (
            other.server_key,
            other.db,
            other.word,
        )

    def __hash__(self):
        return hash((self.server_key, self.db, self.word))


def parse_address(text: str) -> ItemAddress:
    """Parse a connection string, reporting the offset of the first defect."""
    if not text[:3].lower() == "s7:":
        raise AddressSyntax("expected scheme 's7:'", 0)
    if len(text) < 4 or text[3] != "[":
        raise AddressSyntax("expected '[' after scheme", 3)
    close = text.find("]", 4)
    if close < 0:
        raise AddressSyntax("unterminated server part, missing ']'", len(text))
    server = text[4:close]
    if not server:
        raise AddressSyntax("empty server part", 4)
    rest = text[close + 1 :]
    m = re.match(r"db(\d+),w(\d+)$", rest, re.IGNORECASE)
    if not m:
        # locate the defect: db prefix, digits, comma, w prefix, digits, end
        pos = close + 1
        m2 = re.match(r"db(\d+)", rest, re.IGNORECASE)
        if not rest.lower().startswith("db"):
            raise AddressSyntax("expected 'db' after ']'", pos)
        if not m2:
            raise AddressSyntax("expected block number after 'db'", pos + 2)
        pos += m2.end()
        if not rest[m2.end() :].startswith(","):
            raise AddressSyntax("expected ',' between block and word", pos)
        raise AddressSyntax("expected 'w<word>' after ','", pos + 1)
    return ItemAddress(server=server, db=int(m.group(1)), word=int(m.group(2)))


def _coerce(addr: Union[str, ItemAddress]) -> ItemAddress:
    return addr if isinstance(addr, ItemAddress) else parse_address(addr)


_UNREPORTED = object()  # sentinel so a fresh group reports everything once


@dataclass
class OpcGroup:
    """Named set of items polled together with a shared absolute deadband."""

    name: str
    period: float = DEFAULT_POLL_PERIOD_S
    deadband: float = DEFAULT_DEADBAND
    items: list[ItemAddress] = field(default_factory=list)
    last_reported: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.deadband < 0:
            raise ValueError("deadband must be >= 0")
        if len(set(self.items)) != len(self.items):
            raise ValueError(f"group {self.name}: duplicate items")


@dataclass
class DynamicVariable:
    """Dynamics binding: PV cell chases SP cell with a first-order lag."""

    symbol: str
    address_pv: ItemAddress
    address_sp: ItemAddress
    low: float
    high: float
    tau: float = DEFAULT_TAU_S
    noise_amplitude: float = DEFAULT_NOISE_AMPLITUDE
    rng: random.Random = field(default_factory=random.Random, repr=False)

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be >= 0")


class PlcSimulator:
    """One simulated PLC + OPC server; all public operations are atomic.

    Identity follows the OPC settings convention: `host` (OpcServerHost)
    and `name` (OpcServerName).
    """

    def __init__(
        self,
        server: str = "LOCALSERVER",
        host: str = DEFAULT_OPC_SERVER_HOST,
        name: str = DEFAULT_OPC_SERVER_NAME,
        rng_seed: int = 0,
        noise_enabled: bool = True,
    ):
        self.server = server
        self.host = host
        self.name = name
        self.rng_seed = rng_seed
        self.noise_enabled = noise_enabled
        self._blocks: dict[int, dict[int, float]] = {}
        self._dynamics: list[DynamicVariable] = []
        self._groups: dict[str, OpcGroup] = {}
        self._write_listeners: list[Callable[[ItemAddress, float], None]] = []
        self._lock = threading.RLock()

    # -- item access -----------------------------------------------------

    def read_item(self, addr: Union[str, ItemAddress]) -> float:
        a = _coerce(addr)
        with self._lock:
            return self._blocks.get(a.db, {}).get(a.word, 0.0)

    def write_item(self, addr: Union[str, ItemAddress], value: float) -> None:
        a = _coerce(addr)
        value = float(value)
        with self._lock:
            self._blocks.setdefault(a.db, {})[a.word] = value
            listeners = list(self._write_listeners)
        for fn in listeners:
            fn(a, value)

    def add_write_listener(self, fn: Callable[[ItemAddress, float], None]) -> None:
        """Audit hook: called after every write with (address, value)."""
        with self._lock:
            self._write_listeners.append(fn)

    # -- groups ------------------------------------------------------------

    def create_group(
        self,
        name: str,
        items: Iterable[Union[str, ItemAddress]],
        period: float = DEFAULT_POLL_PERIOD_S,
        deadband: float = DEFAULT_DEADBAND,
    ) -> OpcGroup:
        group = OpcGroup(
            name=name,
            period=period,
            deadband=deadband,
            items=[_coerce(i) for i in items],
        )
        with self._lock:
            self._groups[name] = group
        return group

    def poll_group(self, group: OpcGroup) -> list[tuple[ItemAddress, float]]:
        """Items whose value moved more than the deadband since last report."""
        changed = []
        with self._lock:
            for item in group.items:
                current = self._blocks.get(item.db, {}).get(item.word, 0.0)
                last = group.last_reported.get(item, _UNREPORTED)
                if last is _UNREPORTED or abs(current - last) > group.deadband:
                    changed.append((item, current))
                    group.last_reported[item] = current
        return changed

    # -- dynamics ----------------------------------------------------------

    def add_dynamics(
        self,
        symbol: str,
        address_pv: Union[str, ItemAddress],
        address_sp: Union[str, ItemAddress],
        low: float,
        high: float,
        tau: float = DEFAULT_TAU_S,
        noise_amplitude: float = DEFAULT_NOISE_AMPLITUDE,
    ) -> DynamicVariable:
        # string-seeded Random is stable across runs and platforms
        rng = random.Random(f"{self.rng_seed}:{symbol}")
        dyn = DynamicVariable(
            symbol=symbol,
            address_pv=_coerce(address_pv),
            address_sp=_coerce(address_sp),
            low=low,
            high=high,
            tau=tau,
            noise_amplitude=noise_amplitude,
            rng=rng,
        )
        with self._lock:
            self._dynamics.append(dyn)
        return dyn

    def tick(self, dt: float) -> None:
        """Advance every PV one first-order step toward its SP.

        Noise is a bounded disturbance on the setpoint, filtered through the
        same lag, so the steady-state error never exceeds noise_amplitude of
        range regardless of the tick rate.
        """
        if dt <= 0:
            raise ValueError("dt must be > 0")
        with self._lock:
            for dyn in self._dynamics:
                block = self._blocks.setdefault(dyn.address_pv.db, {})
                sp = self._blocks.get(dyn.address_sp.db, {}).get(dyn.address_sp.word, 0.0)
                pv = self._blocks.get(dyn.address_pv.db, {}).get(dyn.address_pv.word, 0.0)
                gain = 1.0 - math.exp(-dt / dyn.tau)
                target = sp
                if self.noise_enabled and dyn.noise_amplitude > 0:
                    target = sp + dyn.rng.uniform(-1.0, 1.0) * dyn.noise_amplitude * (
                        dyn.high - dyn.low
                    )
                pv = pv + gain * (target - pv)
                block[dyn.address_pv.word] = min(max(pv, dyn.low), dyn.high)
