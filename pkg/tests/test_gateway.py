"""Operator gateway: views, trend history, alarm log, setpoint round-trips, HTTP/WS."""

import json
import random
import time

import httpx
import pytest

from icn.gateway import OperatorAgent, TrendStore
from icn.ontology import ACLMessage, AID, Alarm, ListOfAlarms, Performative, Variable
from icn.runner import System
from icn.runtime import Platform
from icn.scenario import load_default_scenario
from icn.sl import encode_sl, format_alarm_text


def default_system(noise=False, **kwargs):
    scenario = load_default_scenario()
    return System(scenario, noise=noise, **kwargs).build()


def wait_until(predicate, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.02)
    return False


class TestDiscovery:
    def test_three_agents_three_views(self):
        system = default_system()
        system.platform.run_until_idle()
        assert sorted(system.operator.views) == ["PLC1", "PLC2", "PLC3"]
        assert all(not v.stale for v in system.operator.views.values())
        system.shutdown()

    def test_empty_df_empty_views(self):
        platform = Platform("SCADA")
        op = OperatorAgent("R1")
        platform.spawn(op)
        platform.run_until_idle()
        assert op.discover_and_subscribe() == []
        assert op.views == {}

    def test_unreachable_agent_marks_view_stale_then_retries(self):
        system = default_system()
        system.platform.run_until_idle()
        assert not system.operator.views["PLC1"].stale
        # agent vanishes; force a fresh subscription attempt on next discovery
        agent = system.platform.agents.pop("c1")
        agent.subscriptions.clear()  # a gone agent publishes nothing
        system.operator._subscribed.discard("PLC1")
        system.platform.run_for(10.0)
        assert system.operator.views["PLC1"].stale
        # agent comes back; the retry cycle picks it up again
        system.platform.agents["c1"] = agent
        system.platform.run_for(10.0)
        assert not system.operator.views["PLC1"].stale
        system.shutdown()

    def test_late_joiner_discovered_within_one_period(self):
        from icn.control import ControlAgent
        from icn.plcsim import PlcSimulator

        platform = Platform("SCADA")
        op = OperatorAgent("R1")
        platform.spawn(op)
        platform.run_for(5.0)
        assert op.views == {}
        sim = PlcSimulator(noise_enabled=False)
        var = Variable("PLC9Variable0", "s7:[L]db1,w0", "s7:[L]db1,w10", 0.0, 10.0, 1.0, 1.0)
        sim.write_item(var.addressPV, 1.0)
        sim.write_item(var.addressSP, 1.0)
        platform.spawn(ControlAgent("c9", "PLC9", [var], sim))
        platform.run_for(10.0)  # at most one rediscovery period later
        assert "PLC9" in op.views
        assert not op.views["PLC9"].stale


class TestProcessData:
    def test_view_row_matches_source_table(self):
        system = default_system()
        system.platform.run_until_idle()
        view = system.operator.views["PLC1"]
        row = view.rows["PLC1Variable0"]
        assert (row.lowLimit, row.highLimit) == (0.0, 3000.0)
        assert (row.PV, row.SP) == (1002.0, 1000.0)
        system.shutdown()

    def test_hundred_informs_hundred_samples_strictly_increasing(self):
        platform = Platform("SCADA")
        op = OperatorAgent("R1")
        platform.spawn(op)
        for i in range(100):
            op.on_process_data(
                "PLC1", [Variable("S1", "s7:[L]db1,w0", "s7:[L]db1,w1", 0, 10, float(i), 5.0)]
            )
        samples = op.trend.query("S1", 0, 10**15)
        assert len(samples) == 100
        ts = [s.t for s in samples]
        assert all(a < b for a, b in zip(ts, ts[1:]))
        assert samples[-1].PV == 99.0

    def test_empty_inform_is_noop(self):
        platform = Platform("SCADA")
        op = OperatorAgent("R1")
        platform.spawn(op)
        op.on_process_data("PLC1", [])
        assert op.views["PLC1"].rows == {}

    def test_view_converges_to_ground_truth_within_one_poll(self):
        system = default_system(noise=False)
        system.platform.run_for(5.0)
        for cancel in system._tick_cancels:  # stop the world changing
            cancel()
        system.platform.run_for(2 * system.scenario.poll_period_s)
        for proc in system.scenario.processes:
            sim = system.sims[proc.name]
            view = system.operator.views[proc.name]
            for v in proc.variables:
                row = view.rows[v.symbol]
                assert row.PV == sim.read_item(v.addressPV)
                assert row.SP == sim.read_item(v.addressSP)
        system.shutdown()


class TestAlarms:
    def make_alarm(self, text="boom", priority=2, symbol="S1"):
        return Alarm(
            destination=AID("R1@SCADA"),
            priority=priority,
            text=format_alarm_text(0.0, symbol, text),
            var=Variable(symbol, "s7:[L]db1,w0", "s7:[L]db1,w1", 0, 10, 1, 1),
        )

    def inform(self, op, alarm, conv=""):
        msg = ACLMessage(
            performative=Performative.INFORM,
            sender=AID("c1@SCADA"),
            receivers=[AID("R1@SCADA")],
            content=encode_sl(ListOfAlarms([alarm])),
            conversation_id=conv,
        )
        op.on_alarm("PLC1", [alarm], msg)

    def test_alarm_appended_and_pushed(self):
        platform = Platform("SCADA")
        op = OperatorAgent("R1")
        platform.spawn(op)
        events = []
        op.add_listener(events.append)
        self.inform(op, self.make_alarm())
        view = op.views["PLC1"]
        assert len(view.alarms) == 1
        assert view.alarms[0].priority == 2
        assert events and events[0]["type"] == "alarm"

    def test_capacity_evicts_oldest(self):
        platform = Platform("SCADA")
        op = OperatorAgent("R1")
        platform.spawn(op)
        for i in range(1001):
            self.inform(op, self.make_alarm(text=f"n{i}"))
        view = op.views["PLC1"]
        assert len(view.alarms) == 1000
        assert "n1000" in view.alarms[0].text  # newest first
        assert all("n0'" not in a.text for a in view.alarms)  # oldest gone


class TestSubmitSetpoint:
    def run_system(self, reply_timeout=2.0):
        scenario = load_default_scenario()
        system = System(scenario, noise=False).build(with_operator=False)
        system.operator = OperatorAgent("R1", reply_timeout=reply_timeout)
        system.platform.spawn(system.operator)
        system.platform.run_until_idle()
        system.platform.start(pace="fast")
        return system

    def test_forwarded(self):
        system = self.run_system()
        out = system.operator.submit_setpoint("PLC1", "PLC1Variable4", 334.0)
        system.shutdown()
        assert out.outcome == "forwarded"
        assert "New SP (334.0) was forwarded to control process PLC1" in out.alarm_text

    def test_rejected_with_range_text(self):
        system = self.run_system()
        out = system.operator.submit_setpoint("PLC1", "PLC1Variable4", 1200.0)
        sp = system.sims["PLC1"].read_item("s7:[LOCALSERVER]db1,w26")
        system.shutdown()
        assert out.outcome == "rejected"
        assert "rejected: out of range [0.0, 1000.0]" in out.alarm_text
        assert sp == 700.0  # untouched

    def test_unknown_symbol_is_local_error(self):
        system = self.run_system()
        before = system.platform.counters["messages_sent"]
        out = system.operator.submit_setpoint("PLC1", "Nope", 1.0)
        after = system.platform.counters["messages_sent"]
        system.shutdown()
        assert out.outcome == "error"
        assert "Nope" in out.reason
        assert before == after  # nothing sent

    def test_unknown_process_is_local_error(self):
        system = self.run_system()
        out = system.operator.submit_setpoint("PLC99", "X", 1.0)
        system.shutdown()
        assert out.outcome == "error"

    def test_timeout_outcome_when_agent_gone(self):
        system = self.run_system(reply_timeout=0.3)
        system.platform.agents.pop("c1")  # silence the PLC1 agent
        out = system.operator.submit_setpoint("PLC1", "PLC1Variable4", 10.0)
        system.shutdown()
        assert out.outcome == "timeout"


class TestTrendStore:
    def test_window_query_equals_brute_force(self):
        store = TrendStore()
        rng = random.Random(3)
        t = 0
        everything = []
        for _ in range(500):
            t += rng.randint(1, 40)
            s = store.append("S", t, rng.random(), rng.random())
            everything.append(s)
        t0, t1 = 2000, 9000
        want = [s for s in everything if t0 <= s.t <= t1]
        assert store.query("S", t0, t1) == want

    def test_unknown_symbol_empty(self):
        assert TrendStore().query("nope", 0, 10) == []

    def test_csv_format_roundtrip(self):
        store = TrendStore()
        store.append("S", 10, 1.5, 2.0)
        store.append("S", 20, 1.25, 2.0)
        text = store.to_csv("S", 0, 100)
        lines = text.strip().split("\n")
        assert lines[0] == "t,symbol,pv,sp"
        parsed = [l.split(",") for l in lines[1:]]
        assert [(int(t), s, float(pv), float(sp)) for t, s, pv, sp in parsed] == [
            (10, "S", 1.5, 2.0),
            (20, "S", 1.25, 2.0),
        ]

    def test_ring_capacity(self):
        store = TrendStore(capacity=10)
        for i in range(25):
            store.append("S", i, float(i), 0.0)
        samples = store.query("S", 0, 100)
        assert len(samples) == 10
        assert samples[0].t == 15


@pytest.fixture(scope="module")
def live_gateway():
    scenario = load_default_scenario()
    system = System(scenario, noise=True).build()
    port = system.start_gateway(port=0)
    system.platform.start(pace="fast")
    base = f"http://127.0.0.1:{port}"
    with httpx.Client(base_url=base, timeout=10.0) as client:
        assert wait_until(
            lambda: client.get("/api/processes").json()["processes"]
            and all(
                p["variables"] > 0 for p in client.get("/api/processes").json()["processes"]
            )
        )
        yield system, client, port
    system.shutdown()


class TestHttpApi:
    def test_processes_lists_all_three(self, live_gateway):
        system, client, port = live_gateway
        names = sorted(p["name"] for p in client.get("/api/processes").json()["processes"])
        assert names == ["PLC1", "PLC2", "PLC3"]

    def test_process_detail_matches_source_ranges(self, live_gateway):
        system, client, port = live_gateway
        body = client.get("/api/process/PLC1").json()
        rows = {v["symbol"]: v for v in body["variables"]}
        assert len(rows) == 10
        assert rows["PLC1Variable0"]["lowLimit"] == 0.0
        assert rows["PLC1Variable0"]["highLimit"] == 3000.0
        assert rows["PLC1Variable7"]["lowLimit"] == 550.0

    def test_unknown_process_404(self, live_gateway):
        system, client, port = live_gateway
        assert client.get("/api/process/PLC99").status_code == 404

    def test_setpoint_forwarded_and_rejected(self, live_gateway):
        system, client, port = live_gateway
        ok = client.post(
            "/api/setpoint",
            json={"process": "PLC1", "symbol": "PLC1Variable0", "value": 1500.0},
        ).json()
        assert ok["outcome"] == "forwarded"
        assert "New SP (1500.0) was forwarded" in ok["alarmText"]
        bad = client.post(
            "/api/setpoint",
            json={"process": "PLC1", "symbol": "PLC1Variable0", "value": 9999.0},
        ).json()
        assert bad["outcome"] == "rejected"
        assert "out of range" in bad["alarmText"]

    def test_trend_json_and_csv_agree(self, live_gateway):
        system, client, port = live_gateway
        assert wait_until(
            lambda: client.get("/api/trend/PLC1Variable0").json()["samples"]
        )
        body = client.get("/api/trend/PLC1Variable0").json()
        samples = body["samples"]
        t0, t1 = samples[0]["t"], samples[-1]["t"]
        window = client.get(f"/api/trend/PLC1Variable0?from={t0}&to={t1}").json()["samples"]
        assert window == samples
        csv_text = client.get(f"/api/trend/PLC1Variable0.csv?from={t0}&to={t1}").text
        lines = csv_text.strip().split("\n")
        assert lines[0] == "t,symbol,pv,sp"
        assert len(lines) - 1 == len(samples)

    def test_websocket_stream_pushes_events(self, live_gateway):
        from websockets.sync.client import connect

        system, client, port = live_gateway
        with connect(f"ws://127.0.0.1:{port}/ws/stream", open_timeout=10) as ws:
            raw = ws.recv(timeout=10)
        event = json.loads(raw)
        assert event["type"] in ("data", "alarm")
        assert "payload" in event
