import random

import pytest

from pnet.addressing import AddressComponent, MultipletAddress, parse_address
from pnet.core import (
    Agent,
    AgentKind,
    Imposition,
    Promise,
    PromiseGraph,
    give,
    use,
)
from pnet.netmodels import InterfaceSpec, RouterSpec, build_ethernet_segment, build_router, build_switch, merge_graphs
from pnet.simulator import (
    Message,
    SimulationError,
    flood_set,
    full_address,
    identity_match,
    inject,
    reachable,
)
from oracles import oracle_reachable, random_graph

MAC_AA = "00:00:11:11:11:AA"
MAC_BB = "00:00:11:11:11:BB"


def fig1_graph():
    agents = [
        Agent("AA", AgentKind.INTERFACE, {"mac": MAC_AA}),
        Agent("BB", AgentKind.INTERFACE, {"mac": MAC_BB}),
        Agent("SW", AgentKind.FORWARDER),
    ]
    promises = [
        Promise("SW", "AA", use("deliver", dst="*")),
        Promise("SW", "BB", use("deliver", dst="*")),
        Promise("SW", "AA", give("forward", dst=MAC_AA)),
        Promise("SW", "BB", give("forward", dst=MAC_BB)),
        Promise("AA", "SW", use("deliver", dst="@destination-equals-self")),
        Promise("BB", "SW", use("deliver", dst="@destination-equals-self")),
    ]
    impositions = [Imposition("AA", "SW", give("deliver", dst=MAC_BB))]
    return PromiseGraph(agents, promises, impositions)


class TestGoldenTraces:
    def test_fig1_exact_trace(self):
        trace = inject(fig1_graph(), "AA", Message(parse_address(f"mac:{MAC_BB}")))
        assert [(e.hop, e.agent, e.action) for e in trace.events] == [
            (0, "AA", "imposed"),
            (1, "SW", "accepted-any"),
            (2, "SW", "forwarded"),
            (3, "BB", "accepted"),
        ]
        assert trace.delivered and trace.final_agent == "BB"

    def test_autonomy_deletion_drops(self):
        g = fig1_graph().without_promise(
            Promise("BB", "SW", use("deliver", dst="@destination-equals-self")))
        trace = inject(g, "AA", Message(parse_address(f"mac:{MAC_BB}")))
        assert not trace.delivered
        assert trace.events[-1].action == "dropped-no-promise"
        assert trace.events[-1].agent == "BB"

    def test_every_hop_needs_a_promise(self):
        # deleting any accept promise on the golden path breaks delivery
        g = fig1_graph()
        for victim in [p for p in g.promises if p.body.kind == "deliver"
                       and p.promiser in ("SW", "BB")]:
            trace = inject(g.without_promise(victim), "AA",
                           Message(parse_address(f"mac:{MAC_BB}")),
                           require_final_at="BB")
            if victim.promiser == "SW" and victim.promisee == "BB":
                continue  # SW's accept from BB is not on the AA->BB path
            assert not trace.delivered, victim

    def test_self_delivery(self):
        trace = inject(fig1_graph(), "AA", Message(parse_address(f"mac:{MAC_AA}")))
        assert trace.delivered and trace.final_agent == "AA"
        assert trace.actions() == ["imposed", "accepted"]

    def test_no_promise_first_hop(self):
        agents = [Agent("AA", AgentKind.INTERFACE, {"mac": MAC_AA}),
                  Agent("BB", AgentKind.INTERFACE, {"mac": MAC_BB})]
        g = PromiseGraph(agents)
        trace = inject(g, "AA", Message(parse_address(f"mac:{MAC_BB}")))
        assert trace.actions() == ["imposed", "dropped-no-promise"]
        assert not trace.delivered

    def test_unknown_source_rejected(self):
        with pytest.raises(SimulationError):
            inject(fig1_graph(), "ZZ", Message(parse_address(f"mac:{MAC_BB}")))


class TestTtl:
    def test_ttl_exhaustion_reported(self):
        g = fig1_graph()
        trace = inject(g, "AA", Message(parse_address(f"mac:{MAC_BB}"), ttl=1))
        assert not trace.delivered
        assert trace.events[-1].action == "dropped-ttl"

    def test_rib_loop_diagnosed(self):
        r1 = build_router(RouterSpec("R1", (
            InterfaceSpec("I1", "00:00:00:00:01:01", ip="10.0.0.1/24"),
        ), rib={"99.99": "I1"}, default_interface="I1"))
        r2 = build_router(RouterSpec("R2", (
            InterfaceSpec("J1", "00:00:00:00:02:01", ip="10.0.0.2/24"),
        ), rib={"99.99": "J1"}, default_interface="J1"))
        g = merge_graphs(r1, r2)
        trace = inject(g, "I1", Message(parse_address("prefix:99.99,local:1"), ttl=6))
        assert not trace.delivered
        assert trace.events[-1].action in ("dropped-ttl", "dropped-no-promise")

    def test_termination_always(self):
        rng = random.Random(31337)
        for _ in range(100):
            g = random_graph(rng)
            ids = sorted(g.agents)
            src, dst = rng.choice(ids), rng.choice(ids)
            inject(g, src, Message(full_address(g.agent(dst)) or
                                   parse_address(f"mac:{MAC_AA}"), ttl=16))


class TestPayload:
    def test_payload_untouched(self):
        payload = b"\x00\x01\x02opaque"
        trace = inject(fig1_graph(), "AA",
                       Message(parse_address(f"mac:{MAC_BB}"), payload=payload))
        assert trace.payload is payload

    def test_ttl_validation(self):
        with pytest.raises(SimulationError):
            Message(parse_address(f"mac:{MAC_BB}"), ttl=-1)


class TestReachable:
    def test_src_equals_dst(self):
        assert reachable(fig1_graph(), "AA", "AA")

    def test_missing_address_rejected(self):
        g = fig1_graph()
        with pytest.raises(SimulationError):
            reachable(g, "AA", "SW")  # the switch has no address components

    def test_misdelivery_does_not_count(self):
        # CC pins BB's mac literally: CC accepts a copy, but BB still gets its own.
        agents = [Agent("AA", AgentKind.INTERFACE, {"mac": MAC_AA}),
                  Agent("BB", AgentKind.INTERFACE, {"mac": MAC_BB}),
                  Agent("CC", AgentKind.INTERFACE, {"mac": "00:00:11:11:11:CC"})]
        promises = [
            Promise("BB", "*", use("deliver", dst="@destination-equals-self")),
            Promise("CC", "*", use("deliver", dst=MAC_BB)),
        ]
        g = PromiseGraph(agents, promises)
        assert reachable(g, "AA", "BB")
        trace = inject(g, "AA", Message(parse_address(f"mac:{MAC_BB}")))
        assert trace.delivered  # somebody took it

    def test_oracle_agreement_smoke(self):
        rng = random.Random(777)
        for _ in range(50):
            g = random_graph(rng)
            ids = sorted(g.agents)
            for src in ids:
                for dst in ids:
                    assert reachable(g, src, dst) == oracle_reachable(g, src, dst), \
                        (src, dst, g)


class TestFlood:
    def test_untagged_segment_floods_everyone(self):
        specs = [InterfaceSpec(f"E{i}", f"00:00:11:11:11:{i:02x}") for i in range(1, 6)]
        g = build_ethernet_segment(specs, name="seg")
        assert flood_set(g, "E1") == {f"E{i}" for i in range(1, 6)}

    def test_switch_relay_not_counted(self):
        g = build_switch([InterfaceSpec("AA", MAC_AA), InterfaceSpec("BB", MAC_BB)], id="SW")
        assert flood_set(g, "AA") == {"AA", "BB"}

    def test_flood_trace_terminates_with_accept(self):
        specs = [InterfaceSpec(f"E{i}", f"00:00:11:11:11:{i:02x}") for i in range(1, 4)]
        g = build_ethernet_segment(specs, name="seg")
        trace = inject(g, "E1", Message(parse_address("mac:ff:ff:ff:ff:ff:ff")))
        assert trace.events[-1].action == "accepted"
        assert trace.events[0].action == "imposed"

    def test_lonely_broadcast_drops(self):
        g = PromiseGraph([Agent("AA", AgentKind.INTERFACE, {"mac": MAC_AA})])
        trace = inject(g, "AA", Message(parse_address("mac:ff:ff:ff:ff:ff:ff")))
        assert not trace.delivered
        assert trace.events[-1].action == "dropped-no-promise"


class TestIdentityMatch:
    def test_mac_level(self):
        agent = Agent("X", AgentKind.INTERFACE, {"mac": MAC_AA})
        assert identity_match(agent, parse_address(f"mac:{MAC_AA}"))
        assert not identity_match(agent, parse_address(f"mac:{MAC_BB}"))

    def test_l3_level_needs_both(self):
        agent = Agent("X", AgentKind.INTERFACE,
                      {"prefix": "10.0.0", "local": "4", "mac": MAC_AA})
        assert identity_match(agent, parse_address("ip:10.0.0.4/24"))
        assert not identity_match(agent, parse_address("ip:10.0.1.4/24"))

    def test_payload_invisible(self):
        # inside a tunnel, the inner mac must not trigger identity
        agent = Agent("X", AgentKind.INTERFACE, {"mac": MAC_AA})
        wrapped = parse_address(f"prefix:9.9,local:1,tni:7,mac:{MAC_AA}")
        assert not identity_match(agent, wrapped)

    def test_symbolic(self):
        agent = Agent("www", AgentKind.SERVICE_HOST)
        assert identity_match(agent, MultipletAddress(
            (AddressComponent("symbolic", "www"),)))


class TestConcurrency:
    def test_parallel_injections_agree(self):
        # analyses are pure over a shared read-only graph
        from concurrent.futures import ThreadPoolExecutor

        g = fig1_graph()
        addr = parse_address(f"mac:{MAC_BB}")
        with ThreadPoolExecutor(max_workers=8) as pool:
            traces = list(pool.map(
                lambda _: inject(g, "AA", Message(addr)), range(32)))
        assert all(t == traces[0] for t in traces)


class TestTraceSerialization:
    def test_tsv_lines(self):
        trace = inject(fig1_graph(), "AA", Message(parse_address(f"mac:{MAC_BB}")))
        lines = trace.text().splitlines()
        assert lines[0].split("\t") == ["0", "AA", "imposed", f"mac:{MAC_BB}"]
        assert len(lines) == 4

    def test_structured_dump(self):
        trace = inject(fig1_graph(), "AA", Message(parse_address(f"mac:{MAC_BB}")))
        data = trace.to_dict()
        assert data["delivered"] is True
        assert data["final_agent"] == "BB"
        assert [e["hop"] for e in data["events"]] == [0, 1, 2, 3]

    def test_hop_indices_strictly_increase(self):
        rng = random.Random(4)
        for _ in range(30):
            g = random_graph(rng)
            ids = sorted(g.agents)
            trace = inject(g, ids[0], Message(full_address(g.agent(ids[-1]))))
            hops = [e.hop for e in trace.events]
            assert hops == sorted(set(hops))
            assert trace.events[0].action == "imposed"
            assert trace.events[-1].action in ("accepted", "dropped-no-promise", "dropped-ttl")
