"""Headless system assembly and execution, plus the demo CSV generators.

The runner owns startup ordering (simulators, directory facilitator via the
platform, control agents, operator gateway) and produces a run report that is
byte-identical across runs for the same scenario, seed, and noise setting.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .control import ControlAgent
from .gateway import OperatorAgent
from .ontology import Variable
from .plcsim import PlcSimulator
from .runtime import Platform, VirtualClock
from .scenario import Scenario


@dataclass
class RunReport:
    platform: str
    duration_s: float
    seed: int
    noise: bool
    messages_sent: int = 0
    setpoints_applied: int = 0
    setpoints_rejected: int = 0
    link_writes: int = 0
    alarms: dict = field(default_factory=dict)
    processes: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "platform": self.platform,
                "duration_s": self.duration_s,
                "seed": self.seed,
                "noise": self.noise,
                "messages_sent": self.messages_sent,
                "setpoints_applied": self.setpoints_applied,
                "setpoints_rejected": self.setpoints_rejected,
                "link_writes": self.link_writes,
                "alarms": self.alarms,
                "processes": self.processes,
            },
            sort_keys=True,
            indent=2,
        ) + "\n"


class System:
    """Everything one scenario boots: simulators, agents, optional gateway."""

    def __init__(self, scenario: Scenario, noise: Optional[bool] = None, seed: Optional[int] = None):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.noise = scenario.noise if noise is None else noise
        self.platform = Platform(scenario.platform, VirtualClock(scenario.start_time))
        self.sims: dict[str, PlcSimulator] = {}
        self.control_agents: dict[str, ControlAgent] = {}
        self.operator: Optional[OperatorAgent] = None
        self.gateway_server = None
        self._tick_cancels = []

    def build(self, enable_ticks: bool = True, with_operator: bool = True) -> "System":
        sc = self.scenario
        for proc in sc.processes:
            sim = PlcSimulator(
                host=proc.opc_server_host,
                name=proc.opc_server_name,
                rng_seed=self.seed,
                noise_enabled=self.noise,
            )
            for v in proc.variables:
                sim.write_item(v.addressPV, v.pv)
                sim.write_item(v.addressSP, v.sp)
                sim.add_dynamics(
                    v.symbol,
                    v.addressPV,
                    v.addressSP,
                    v.lowLimit,
                    v.highLimit,
                    tau=v.tau_s,
                    noise_amplitude=v.noise_amplitude,
                )
            self.sims[proc.name] = sim
        if enable_ticks:
            dt = sc.tick_period_s
            for proc in sc.processes:
                sim = self.sims[proc.name]
                self._tick_cancels.append(
                    self.platform.schedule_periodic(dt, lambda s=sim: s.tick(dt))
                )
        for i, proc in enumerate(sc.processes):
            agent = ControlAgent(
                name=f"c{i + 1}",
                process_name=proc.name,
                variables=[v.to_variable() for v in proc.variables],
                sim=self.sims[proc.name],
                links=sc.links_for_target(proc.name),
                poll_period=sc.poll_period_s,
                deadband=sc.deadband,
            )
            self.platform.spawn(agent)
            self.control_agents[proc.name] = agent
        if with_operator:
            self.operator = OperatorAgent("R1")
            self.platform.spawn(self.operator)
        return self

    def start_gateway(self, port: int, host: str = "127.0.0.1", static_dir=None) -> int:
        from .webapi import GatewayServer

        if self.operator is None:
            raise RuntimeError("system built without an operator agent")
        self.gateway_server = GatewayServer(self.operator, host=host, port=port, static_dir=static_dir)
        return self.gateway_server.start()

    def report(self, duration: float) -> RunReport:
        counters = self.platform.counters
        report = RunReport(
            platform=self.scenario.platform,
            duration_s=duration,
            seed=self.seed,
            noise=self.noise,
            messages_sent=counters.get("messages_sent", 0),
            setpoints_applied=counters.get("setpoints_applied", 0),
            setpoints_rejected=counters.get("setpoints_rejected", 0),
            link_writes=counters.get("link_writes", 0),
            alarms={
                "limit": counters.get("alarms_p0", 0),
                "rejected": counters.get("alarms_p1", 0),
                "informational": counters.get("alarms_p2", 0),
            },
        )
        for proc in self.scenario.processes:
            sim = self.sims[proc.name]
            report.processes[proc.name] = {
                v.symbol: {
                    "pv": sim.read_item(v.addressPV),
                    "sp": sim.read_item(v.addressSP),
                }
                for v in proc.variables
            }
        return report

    def shutdown(self) -> None:
        for cancel in self._tick_cancels:
            cancel()
        if self.gateway_server is not None:
            self.gateway_server.stop()
            self.gateway_server = None
        self.platform.stop()
        if self.operator is not None:
            self.operator.trend.close()


def run(
    scenario: Scenario,
    duration: float,
    seed: Optional[int] = None,
    noise: Optional[bool] = None,
    gateway_port: Optional[int] = None,
    realtime: bool = False,
    static_dir: Optional[str] = None,
) -> RunReport:
    """Boot the scenario, run it for `duration` simulated seconds, report."""
    system = System(scenario, noise=noise, seed=seed).build()
    try:
        if gateway_port is not None:
            system.start_gateway(gateway_port, static_dir=static_dir)
        if realtime:
            import time

            system.platform.start(pace="real")
            time.sleep(duration)
        else:
            system.platform.run_for(duration)
            system.platform.run_until_idle()  # drain message cascades before exit
        return system.report(duration)
    finally:
        system.shutdown()


# --- demo CSV generators ---------------------------------------------------------


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(c) if isinstance(c, float) else str(c) for c in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _step_scenario() -> Scenario:
    """One variable at rest, ready for a setpoint step."""
    from .scenario import scenario_from_dict

    return scenario_from_dict(
        {
            "platform": "DEMO",
            "poll_period_s": 0.5,
            "tick_period_s": 0.1,
            "seed": 42,
            "noise": False,
            "processes": [
                {
                    "name": "PLC1",
                    "variables": [
                        {
                            "symbol": "PLC1Variable0",
                            "addressPV": "s7:[LOCALSERVER]db1,w2",
                            "addressSP": "s7:[LOCALSERVER]db1,w22",
                            "lowLimit": 0.0,
                            "highLimit": 1000.0,
                            "pv": 200.0,
                            "sp": 200.0,
                            "tau_s": 5.0,
                        }
                    ],
                }
            ],
            "links": [],
        }
    )


def demo_fig9_trend(outdir: Path) -> Path:
    """Setpoint step response sampled every tick: t_ms, pv, sp."""
    scenario = _step_scenario()
    system = System(scenario).build(with_operator=False)
    sim = system.sims["PLC1"]
    rows: list[tuple] = []

    def sample():
        rows.append(
            (
                system.platform.now_ms(),
                sim.read_item("s7:[LOCALSERVER]db1,w2"),
                sim.read_item("s7:[LOCALSERVER]db1,w22"),
            )
        )

    system.platform.schedule_periodic(scenario.tick_period_s, sample)
    # step lands off the tick grid so decay time never undershoots sample time
    system.platform.schedule(10.05, lambda: sim.write_item("s7:[LOCALSERVER]db1,w22", 800.0))
    system.platform.run_until(40.0)
    system.shutdown()
    path = outdir / "fig9_trend.csv"
    _write_csv(path, ["t_ms", "pv", "sp"], rows)
    return path


def demo_fig10_dependency(outdir: Path) -> Path:
    """Sweep the source PV and record the dependent setpoint: no dynamics."""
    from .scenario import load_default_scenario

    scenario = load_default_scenario()
    scenario.noise = False
    system = System(scenario).build(enable_ticks=False, with_operator=False)
    sim = system.sims["PLC1"]
    pv_addr = "s7:[LOCALSERVER]db1,w6"
    sp5_addr = "s7:[LOCALSERVER]db1,w27"
    rows: list[tuple] = []
    for step in range(0, 201):
        x = step * 5.0
        sim.write_item(pv_addr, x)
        system.platform.run_for(scenario.poll_period_s)
        rows.append((system.platform.now_ms(), x, sim.read_item(sp5_addr)))
    system.shutdown()
    path = outdir / "fig10_dependency.csv"
    _write_csv(path, ["t_ms", "plc1variable4_pv", "plc1variable5_sp"], rows)
    return path


def demo_fig11_sync(outdir: Path) -> Path:
    """Cross-process chain following an upstream setpoint step."""
    from .scenario import load_default_scenario

    scenario = load_default_scenario()
    scenario.noise = False
    scenario.process("PLC1").variables[0].sp = 500.0
    system = System(scenario).build()
    sims = system.sims
    sp_addr = "s7:[LOCALSERVER]db1,w22"
    rows: list[tuple] = []

    def sample():
        rows.append(
            (
                system.platform.now_ms(),
                sims["PLC1"].read_item(sp_addr),
                sims["PLC2"].read_item(sp_addr),
                sims["PLC3"].read_item(sp_addr),
            )
        )

    system.platform.schedule_periodic(scenario.poll_period_s, sample)
    system.platform.schedule(10.05, lambda: sims["PLC1"].write_item(sp_addr, 1000.0))
    system.platform.run_until(25.0)
    system.shutdown()
    path = outdir / "fig11_sync.csv"
    _write_csv(
        path,
        ["t_ms", "plc1variable0_sp", "plc2variable0_sp", "plc3variable0_sp"],
        rows,
    )
    return path


def demo_figures(outdir) -> list[Path]:
    """Regenerate all demo CSVs into outdir; returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return [
        demo_fig9_trend(outdir),
        demo_fig10_dependency(outdir),
        demo_fig11_sync(outdir),
    ]
