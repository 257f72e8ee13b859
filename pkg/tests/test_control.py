"""Control agent: setpoint FSM, dependency links, subscriptions, limit alarms."""

import random

import pytest

from icn.control import (
    CROSS_VARIABLES,
    ControlAgent,
    DependencyLink,
    LinkEndpoint,
    OPERATOR_FULL,
)
from icn.interpolation import InterpolationTable
from icn.ontology import (
    ACLMessage,
    ActionExpr,
    AID,
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
    SetVariable,
    Variable,
)
from icn.plcsim import PlcSimulator
from icn.runtime import Platform
from icn.sl import encode_sl, parse_alarm_text, parse_sl_content

DEFAULT_TABLE = InterpolationTable([(0, 95), (250, 80), (500, 50), (1000, 5)])


def plc1_variables():
    return [
        Variable("PLC1Variable4", "s7:[LOCALSERVER]db1,w6", "s7:[LOCALSERVER]db1,w26",
                 0.0, 1000.0, 133.0, 700.0),
        Variable("PLC1Variable5", "s7:[LOCALSERVER]db1,w7", "s7:[LOCALSERVER]db1,w27",
                 0.0, 100.0, 77.0, 81.0),
    ]


def make_world(variables=None, links=None, poll=0.5):
    variables = variables if variables is not None else plc1_variables()
    platform = Platform("SCADA")
    sim = PlcSimulator(noise_enabled=False)
    for v in variables:
        sim.write_item(v.addressPV, v.PV)
        sim.write_item(v.addressSP, v.SP)
    agent = ControlAgent("c1", "PLC1", variables, sim, links, poll_period=poll)
    platform.spawn(agent)
    operator = platform.spawn_agent("R1")
    platform.run_until_idle()
    platform.run_for(poll)  # consume the initial report-everything poll
    return platform, sim, agent, platform.agent("R1")


def setpoint_request(sender_aid, agent, address, value, conv="cv-1"):
    return ACLMessage(
        performative=Performative.REQUEST,
        sender=sender_aid,
        receivers=[agent.aid],
        content=encode_sl(ActionExpr(actor=agent.aid, act=SetVariable(address, value))),
        conversation_id=conv,
        reply_with=f"rw-{conv}",
    )


def drain_informs(mailbox_owner, platform):
    platform.run_until_idle()
    out = []
    while True:
        m = mailbox_owner.receive(timeout=0)
        if m is None:
            return out
        out.append(m)


class TestSetpointFsm:
    def submit(self, value, address="s7:[LOCALSERVER]db1,w26"):
        platform, sim, agent, operator = make_world()
        platform.send(setpoint_request(operator.aid, agent, address, value))
        platform.run_until_idle()
        replies = drain_informs(operator, platform)
        return platform, sim, agent, replies

    def test_apply_path(self):
        platform, sim, agent, replies = self.submit(334.0)
        assert sim.read_item("s7:[LOCALSERVER]db1,w26") == 334.0
        assert agent.variables["PLC1Variable4"].SP == 334.0
        (reply,) = replies
        assert reply.performative == Performative.INFORM
        (alarms,) = parse_sl_content(reply.content)
        (alarm,) = alarms.alarms
        assert alarm.priority == 2
        assert alarm.text.endswith(
            "|'PLC1Variable4' New SP (334.0) was forwarded to control process PLC1"
        )
        parse_alarm_text(alarm.text)  # timestamp prefix is well-formed
        assert alarm.var.SP == 334.0

    def test_boundary_value_applies(self):
        platform, sim, agent, replies = self.submit(1000.0)
        assert sim.read_item("s7:[LOCALSERVER]db1,w26") == 1000.0
        (alarms,) = parse_sl_content(replies[0].content)
        assert alarms.alarms[0].priority == 2

    def test_reject_path_leaves_plc_untouched(self):
        platform, sim, agent, replies = self.submit(1200.0)
        assert sim.read_item("s7:[LOCALSERVER]db1,w26") == 700.0  # unchanged
        assert agent.variables["PLC1Variable4"].SP == 700.0
        (reply,) = replies
        (alarms,) = parse_sl_content(reply.content)
        (alarm,) = alarms.alarms
        assert alarm.priority == 1
        assert alarm.text.endswith(
            "|'PLC1Variable4' New SP (1200.0) rejected: out of range [0.0, 1000.0]"
        )

    def test_unknown_address_refused(self):
        platform, sim, agent, operator = make_world()
        platform.send(
            setpoint_request(operator.aid, agent, "s7:[LOCALSERVER]db9,w99", 10.0)
        )
        platform.run_until_idle()
        reply = operator.receive(timeout=0)
        assert reply.performative == Performative.REFUSE
        assert "db9,w99" in reply.content

    def test_garbage_content_not_understood(self):
        platform, sim, agent, operator = make_world()
        platform.send(
            ACLMessage(
                performative=Performative.REQUEST,
                sender=operator.aid,
                receivers=[agent.aid],
                content="((BogusThing :x 1))",
                conversation_id="cv-bad",
            )
        )
        platform.run_until_idle()
        reply = operator.receive(timeout=0)
        assert reply.performative == Performative.NOT_UNDERSTOOD

    def test_exactly_one_alarm_per_randomized_request(self):
        platform, sim, agent, operator = make_world()
        rng = random.Random(5)
        for i in range(200):
            value = rng.uniform(-500.0, 1500.0)
            platform.send(
                setpoint_request(
                    operator.aid, agent, "s7:[LOCALSERVER]db1,w26", value, conv=f"cv-{i}"
                )
            )
            platform.run_until_idle()
            replies = drain_informs(operator, platform)
            assert len(replies) == 1
            (alarms,) = parse_sl_content(replies[0].content)
            assert len(alarms.alarms) == 1
            assert replies[0].conversation_id == f"cv-{i}"


def subscribe(platform, operator, agent, symbols=(), conv="sub-1"):
    platform.send(
        ACLMessage(
            performative=Performative.SUBSCRIBE,
            sender=operator.aid,
            receivers=[agent.aid],
            content=encode_sl(ListOfVariables([Variable(symbol=s) for s in symbols])),
            conversation_id=conv,
        )
    )
    platform.run_until_idle()


class TestSubscriptions:
    def test_operator_subscription_gets_snapshot(self):
        platform, sim, agent, operator = make_world()
        subscribe(platform, operator, agent)
        inbox = drain_informs(operator, platform)
        assert [m.performative for m in inbox] == [Performative.AGREE, Performative.INFORM]
        (snapshot,) = parse_sl_content(inbox[1].content)
        assert sorted(v.symbol for v in snapshot.variables) == [
            "PLC1Variable4",
            "PLC1Variable5",
        ]
        assert (operator.aid.name, OPERATOR_FULL) in agent.subscriptions

    def test_peer_subscription_snapshot_only_requested(self):
        platform, sim, agent, operator = make_world()
        subscribe(platform, operator, agent, symbols=("PLC1Variable4",))
        inbox = drain_informs(operator, platform)
        (snapshot,) = parse_sl_content(inbox[1].content)
        assert [v.symbol for v in snapshot.variables] == ["PLC1Variable4"]
        assert (operator.aid.name, CROSS_VARIABLES) in agent.subscriptions

    def test_unknown_symbol_refused_by_name(self):
        platform, sim, agent, operator = make_world()
        subscribe(platform, operator, agent, symbols=("Nope",))
        reply = operator.receive(timeout=0)
        assert reply.performative == Performative.REFUSE
        assert "Nope" in reply.content
        assert not agent.subscriptions

    def test_duplicate_subscription_replaces(self):
        platform, sim, agent, operator = make_world()
        subscribe(platform, operator, agent, conv="sub-1")
        subscribe(platform, operator, agent, conv="sub-2")
        drain_informs(operator, platform)
        assert len(agent.subscriptions) == 1
        assert agent.subscriptions[(operator.aid.name, OPERATOR_FULL)].conversation_id == "sub-2"


class TestDataChangePublishing:
    def test_no_change_no_messages(self):
        platform, sim, agent, operator = make_world()
        subscribe(platform, operator, agent)
        drain_informs(operator, platform)
        platform.run_for(0.5)  # one poll period with nothing written
        platform.run_for(0.5)
        assert drain_informs(operator, platform) == []

    def test_pv_change_reaches_operator(self):
        platform, sim, agent, operator = make_world()
        subscribe(platform, operator, agent)
        drain_informs(operator, platform)
        sim.write_item("s7:[LOCALSERVER]db1,w6", 361.5)
        platform.run_for(0.5)
        inbox = drain_informs(operator, platform)
        assert len(inbox) == 1
        (update,) = parse_sl_content(inbox[0].content)
        assert [(v.symbol, v.PV) for v in update.variables] == [("PLC1Variable4", 361.5)]

    def test_cross_subscriber_gets_only_its_symbols(self):
        platform, sim, agent, operator = make_world()
        platform.spawn_agent("peer")
        peer = platform.agent("peer")
        subscribe(platform, peer, agent, symbols=("PLC1Variable5",))
        drain_informs(peer, platform)
        sim.write_item("s7:[LOCALSERVER]db1,w6", 400.0)  # Variable4 only
        platform.run_for(0.5)
        assert drain_informs(peer, platform) == []
        sim.write_item("s7:[LOCALSERVER]db1,w7", 70.0)  # Variable5
        platform.run_for(0.5)
        inbox = drain_informs(peer, platform)
        (update,) = parse_sl_content(inbox[0].content)
        assert [v.symbol for v in update.variables] == ["PLC1Variable5"]

    def test_dead_subscriber_pruned_after_three_failures(self):
        platform, sim, agent, operator = make_world()
        ghost = AID("ghost@SCADA")
        from icn.control import Subscription

        agent.subscriptions[(ghost.name, OPERATOR_FULL)] = Subscription(
            subscriber=ghost, kind=OPERATOR_FULL, conversation_id="cv-g"
        )
        for i in range(3):
            sim.write_item("s7:[LOCALSERVER]db1,w6", 100.0 + i)
            platform.run_for(0.5)
        assert (ghost.name, OPERATOR_FULL) not in agent.subscriptions


class TestHigherLevelControl:
    def make_linked(self):
        link = DependencyLink(
            source=LinkEndpoint("PLC1", "PLC1Variable4", "PV"),
            target=LinkEndpoint("PLC1", "PLC1Variable5", "SP"),
            table=DEFAULT_TABLE,
        )
        return make_world(links=[link])

    def test_dependency_write_from_pv_change(self):
        platform, sim, agent, operator = self.make_linked()
        sim.write_item("s7:[LOCALSERVER]db1,w6", 360.0)
        platform.run_for(0.5)
        assert sim.read_item("s7:[LOCALSERVER]db1,w27") == pytest.approx(66.8, abs=1e-12)
        assert agent.variables["PLC1Variable5"].SP == pytest.approx(66.8, abs=1e-12)

    def test_source_unchanged_no_write(self):
        platform, sim, agent, operator = self.make_linked()
        platform.run_for(0.5)  # initial snapshot poll aligns the target once
        before = platform.counters["link_writes"]
        platform.run_for(2.0)
        assert platform.counters["link_writes"] == before

    def test_sp_change_does_not_trigger_pv_link(self):
        platform, sim, agent, operator = self.make_linked()
        platform.run_for(0.5)
        before = platform.counters["link_writes"]
        sim.write_item("s7:[LOCALSERVER]db1,w26", 500.0)  # SP of the source symbol
        platform.run_for(0.5)
        assert platform.counters["link_writes"] == before

    def test_increasing_source_gives_non_increasing_target(self):
        platform, sim, agent, operator = self.make_linked()
        outputs = []
        for x in [0.0, 100.0, 300.0, 499.0, 730.0, 1000.0]:
            sim.write_item("s7:[LOCALSERVER]db1,w6", x)
            platform.run_for(0.5)
            outputs.append(sim.read_item("s7:[LOCALSERVER]db1,w27"))
        assert outputs == sorted(outputs, reverse=True)


class TestCrossProcessSync:
    def two_process_world(self, spawn_order=("c1", "c2")):
        platform = Platform("SCADA")
        sims = {
            "PLC1": PlcSimulator(noise_enabled=False),
            "PLC2": PlcSimulator(noise_enabled=False),
        }
        plc1_vars = [
            Variable("PLC1Variable0", "s7:[LOCALSERVER]db1,w2", "s7:[LOCALSERVER]db1,w22",
                     0.0, 3000.0, 1002.0, 1000.0)
        ]
        plc2_vars = [
            Variable("PLC2Variable0", "s7:[LOCALSERVER]db1,w2", "s7:[LOCALSERVER]db1,w22",
                     0.0, 1000.0, 0.0, 0.0)
        ]
        for sim, vars_ in ((sims["PLC1"], plc1_vars), (sims["PLC2"], plc2_vars)):
            for v in vars_:
                sim.write_item(v.addressPV, v.PV)
                sim.write_item(v.addressSP, v.SP)
        link = DependencyLink(
            source=LinkEndpoint("PLC1", "PLC1Variable0", "SP"),
            target=LinkEndpoint("PLC2", "PLC2Variable0", "SP"),
            table=InterpolationTable([(0, 0), (3000, 1000)]),
        )
        agents = {
            "c1": ControlAgent("c1", "PLC1", plc1_vars, sims["PLC1"]),
            "c2": ControlAgent("c2", "PLC2", plc2_vars, sims["PLC2"], links=[link]),
        }
        for name in spawn_order:
            platform.spawn(agents[name])
            platform.run_until_idle()
        return platform, sims, agents

    @pytest.mark.parametrize("order", [("c1", "c2"), ("c2", "c1")])
    def test_cross_subscription_established_either_spawn_order(self, order):
        platform, sims, agents = self.two_process_world(order)
        assert "PLC1" in agents["c2"]._cross_conversations
        assert ("c2@SCADA", CROSS_VARIABLES) in agents["c1"].subscriptions

    def test_snapshot_aligns_downstream_setpoint(self):
        platform, sims, agents = self.two_process_world()
        # upstream SP 1000 through table (0,0)->(3000,1000) = 333.33...
        assert sims["PLC2"].read_item("s7:[LOCALSERVER]db1,w22") == pytest.approx(
            1000.0 * 1000.0 / 3000.0, abs=1e-9
        )

    def test_upstream_change_propagates_on_next_poll(self):
        platform, sims, agents = self.two_process_world()
        sims["PLC1"].write_item("s7:[LOCALSERVER]db1,w22", 1500.0)
        platform.run_for(1.0)
        assert sims["PLC2"].read_item("s7:[LOCALSERVER]db1,w22") == pytest.approx(
            500.0, abs=1e-9
        )

    def test_empty_inform_no_writes(self):
        platform, sims, agents = self.two_process_world()
        before = platform.counters["link_writes"]
        conv = agents["c2"]._cross_conversations["PLC1"]
        platform.send(
            ACLMessage(
                performative=Performative.INFORM,
                sender=agents["c1"].aid,
                receivers=[agents["c2"].aid],
                content=encode_sl(ListOfVariables([])),
                conversation_id=conv,
            )
        )
        platform.run_until_idle()
        assert platform.counters["link_writes"] == before


class TestLimitAlarms:
    def world_with_sub(self):
        platform, sim, agent, operator = make_world()
        subscribe(platform, operator, agent)
        drain_informs(operator, platform)
        return platform, sim, agent, operator

    def test_within_limits_no_alarm(self):
        platform, sim, agent, operator = self.world_with_sub()
        sim.write_item("s7:[LOCALSERVER]db1,w6", 500.0)
        platform.run_for(0.5)
        inbox = drain_informs(operator, platform)
        assert len(inbox) == 1  # the data inform only
        assert all(
            not isinstance(e, (IsHigh, IsLow))
            for m in inbox
            for e in parse_sl_content(m.content)
        )

    def test_excursion_above_high_raises_is_high(self):
        platform, sim, agent, operator = self.world_with_sub()
        sim.write_item("s7:[LOCALSERVER]db1,w6", 1000.5)
        platform.run_for(0.5)
        inbox = drain_informs(operator, platform)
        alarm_msgs = [
            m
            for m in inbox
            if any(isinstance(e, IsHigh) for e in parse_sl_content(m.content))
        ]
        assert len(alarm_msgs) == 1
        elements = parse_sl_content(alarm_msgs[0].content)
        alarms = next(e for e in elements if isinstance(e, ListOfAlarms))
        assert alarms.alarms[0].priority == 0
        high = next(e for e in elements if isinstance(e, IsHigh))
        assert high.var.symbol == "PLC1Variable4"

    def test_excursion_below_low(self):
        platform, sim, agent, operator = self.world_with_sub()
        sim.write_item("s7:[LOCALSERVER]db1,w7", -3.0)
        platform.run_for(0.5)
        inbox = drain_informs(operator, platform)
        assert any(
            isinstance(e, IsLow)
            for m in inbox
            for e in parse_sl_content(m.content)
        )

    def test_exactly_at_limit_no_alarm(self):
        platform, sim, agent, operator = self.world_with_sub()
        sim.write_item("s7:[LOCALSERVER]db1,w6", 1000.0)
        platform.run_for(0.5)
        inbox = drain_informs(operator, platform)
        assert all(
            not isinstance(e, (IsHigh, IsLow))
            for m in inbox
            for e in parse_sl_content(m.content)
        )


class TestQueries:
    def query(self, act):
        platform, sim, agent, operator = make_world()
        platform.send(
            ACLMessage(
                performative=Performative.REQUEST,
                sender=operator.aid,
                receivers=[agent.aid],
                content=encode_sl(ActionExpr(actor=agent.aid, act=act)),
                conversation_id="q-1",
            )
        )
        platform.run_until_idle()
        return operator.receive(timeout=0)

    def test_get_variable_by_symbol(self):
        platform, sim, agent, operator = make_world()
        sim.write_item("s7:[LOCALSERVER]db1,w6", 360.0)
        platform.run_for(0.5)  # poll refreshes the cache
        platform.send(
            ACLMessage(
                performative=Performative.REQUEST,
                sender=operator.aid,
                receivers=[agent.aid],
                content=encode_sl(
                    ActionExpr(actor=agent.aid, act=GetVariable(symbol="PLC1Variable4"))
                ),
                conversation_id="q-1",
            )
        )
        platform.run_until_idle()
        reply = operator.receive(timeout=0)
        assert reply.performative == Performative.INFORM
        (pred,) = parse_sl_content(reply.content)
        assert isinstance(pred, IsVariable)
        assert pred.var.PV == 360.0  # the value current at query time

    def test_get_variable_by_address(self):
        reply = self.query(GetVariable(variableAddress="s7:[LOCALSERVER]db1,w26"))
        (pred,) = parse_sl_content(reply.content)
        assert pred.var.symbol == "PLC1Variable4"

    def test_locate_variable_local(self):
        reply = self.query(LocateVariable(symbol="PLC1Variable4"))
        elements = parse_sl_content(reply.content)
        located = next(e for e in elements if isinstance(e, IsLocatedin))
        assert located.process.name == "PLC1"
        assert any(isinstance(e, IsLocal) for e in elements)

    def test_locate_unknown_refused(self):
        reply = self.query(LocateVariable(symbol="Mystery"))
        assert reply.performative == Performative.REFUSE


class TestServiceRegistration:
    def test_registration_searchable(self):
        platform, sim, agent, operator = make_world()
        found = platform.df.search(service_type="process-control")
        assert [sd.service_name for sd in found] == ["PLC1"]
        assert found[0].properties["symbols"] == ["PLC1Variable4", "PLC1Variable5"]

    def test_reregistration_is_idempotent(self):
        platform, sim, agent, operator = make_world()
        agent.register_services()  # restart without deregistering first
        found = platform.df.search(service_type="process-control")
        assert len(found) == 1
