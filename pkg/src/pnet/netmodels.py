"""
Builders for canonical promise graphs: Ethernet segments, switches, IP
routers, VLAN overlays and tunnels.

Each builder is a pure constructor returning a well-formed PromiseGraph;
compose topologies with merge_graphs. Link attachment is expressed through
containers: an interface's wildcard accept promise is scoped to its link
container, so whoever shares the container is on the wire.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .addressing import AddressComponent, TableEntry, TransducerTable, parse_ip
from .core import (
    Agent,
    AgentKind,
    Body,
    GraphError,
    GUARD_DEST_SELF,
    GUARD_DISTINCT,
    Polarity,
    Promise,
    PromiseGraph,
    give,
    use,
)
from .simulator import KIND_DELIVER, KIND_FORWARD, KIND_PRESENT, KIND_TUNNEL

KIND_IDENTITY = "mac-identity"


@dataclass(frozen=True)
class InterfaceSpec:
    id: str
    mac: str
    ip: Optional[str] = None  # "a.b.c.d/mask", octet-aligned mask
    vlan: Optional[int] = None
    promiscuous: bool = False

    def attributes(self) -> dict[str, str]:
        attrs = {"mac": self.mac}
        if self.ip:
            prefix, local = parse_ip(self.ip)
            attrs["prefix"] = prefix.value
            attrs["local"] = local.value
        if self.vlan is not None:
            attrs["vlan"] = str(self.vlan)
        if self.promiscuous:
            attrs["promiscuous"] = "true"
        return attrs


@dataclass(frozen=True)
class RouterSpec:
    id: str
    interfaces: tuple[InterfaceSpec, ...]
    rib: Mapping[str, str] = field(default_factory=dict)  # prefix -> interface id
    default_interface: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "interfaces", tuple(self.interfaces))
        object.__setattr__(self, "rib", dict(self.rib))


def _check_unique_macs(interfaces: Sequence[InterfaceSpec]):
    seen: dict[str, str] = {}
    for spec in interfaces:
        if spec.mac in seen:
            raise GraphError(f"duplicate MAC {spec.mac} on {seen[spec.mac]!r} and {spec.id!r}")
        seen[spec.mac] = spec.id


def build_ethernet_segment(interfaces: Sequence[InterfaceSpec], name: str = "lan") -> PromiseGraph:
    """A shared medium: everyone promises a unique identity, to take any
    frame off the wire, and to voluntarily accept only frames for itself.
    Promiscuous interfaces additionally keep everything they see."""
    interfaces = tuple(interfaces)
    _check_unique_macs(interfaces)
    agents, promises = [], []
    scope = f"@{name}"
    for spec in interfaces:
        agents.append(Agent(spec.id, AgentKind.INTERFACE, tuple(spec.attributes().items())))
    for spec in interfaces:
        promises.append(Promise(spec.id, scope, give(
            KIND_IDENTITY, mac=spec.mac, constraint=GUARD_DISTINCT)))
        promises.append(Promise(spec.id, scope, use(KIND_DELIVER, dst="*")))
        promises.append(Promise(spec.id, scope, use(KIND_DELIVER, dst=GUARD_DEST_SELF)))
        if spec.promiscuous:
            promises.append(Promise(spec.id, scope, use(KIND_DELIVER, dst="*", mode="monitor")))
    containers = {name: [s.id for s in interfaces]}
    return PromiseGraph(agents, promises, containers=containers)


def build_switch(ports: Sequence[InterfaceSpec], id: str) -> PromiseGraph:
    """A switching function: the switch takes any frame from any port and
    promises each port to forward frames addressed to its MAC."""
    ports = tuple(ports)
    if len(ports) < 2:
        raise GraphError("switch needs at least 2 ports")
    _check_unique_macs(ports)
    if any(p.id == id for p in ports):
        raise GraphError(f"switch id {id!r} collides with a port")
    agents = [Agent(id, AgentKind.FORWARDER)]
    promises = []
    for spec in ports:
        agents.append(Agent(spec.id, AgentKind.INTERFACE, tuple(spec.attributes().items())))
        promises.append(Promise(spec.id, id, give(
            KIND_IDENTITY, mac=spec.mac, constraint=GUARD_DISTINCT)))
        promises.append(Promise(spec.id, id, use(KIND_DELIVER, dst="*")))
        promises.append(Promise(spec.id, id, use(KIND_DELIVER, dst=GUARD_DEST_SELF)))
        promises.append(Promise(id, spec.id, use(KIND_DELIVER, dst="*")))
        promises.append(Promise(id, spec.id, give(KIND_FORWARD, dst=spec.mac)))
    return PromiseGraph(agents, promises)


def link_container(prefix: str) -> str:
    return f"net-{prefix}"


def build_router(spec: RouterSpec) -> PromiseGraph:
    """A forwarder core surrounded by interfaces, one per prefix.

    Interfaces accept anything addressed beyond the wire and present it to
    the core; the core keeps the three-clause forward promise (attached
    prefix, RIB lookup, default interface) toward every interface.
    """
    interfaces = spec.interfaces
    if not interfaces:
        raise GraphError("router needs at least one interface")
    _check_unique_macs(interfaces)
    member_ids = {i.id for i in interfaces}
    prefixes = []
    for iface in interfaces:
        if not iface.ip:
            raise GraphError(f"router interface {iface.id!r} needs an ip")
        prefix = iface.attributes()["prefix"]
        if prefix in prefixes:
            raise GraphError(f"router interfaces share prefix {prefix}")
        prefixes.append(prefix)
    for prefix, target in spec.rib.items():
        if target not in member_ids:
            raise GraphError(f"rib target {target!r} is not a router interface")
    default = spec.default_interface
    if default is None:
        raise GraphError("router needs a default interface")
    if default not in member_ids:
        raise GraphError(f"default interface {default!r} is not a router interface")

    rib_name = f"{spec.id}-rib"
    table = TransducerTable(rib_name, [
        TableEntry("prefix", prefix, target) for prefix, target in sorted(spec.rib.items())
    ])
    agents = [Agent(spec.id, AgentKind.FORWARDER)]
    promises = []
    containers: dict[str, list[str]] = {}
    for iface in interfaces:
        attrs = iface.attributes()
        agents.append(Agent(iface.id, AgentKind.INTERFACE, tuple(attrs.items())))
        net = link_container(attrs["prefix"])
        containers[net] = [iface.id]
        promises.append(Promise(iface.id, f"@{net}", use(KIND_DELIVER, dst="*", prefix="*")))
        promises.append(Promise(iface.id, spec.id, give(KIND_PRESENT, prefix="*")))
        promises.append(Promise(spec.id, iface.id, use(KIND_PRESENT, prefix="*")))
        promises.append(Promise(spec.id, iface.id, give(
            KIND_FORWARD, dst="*", rib=rib_name, default=default)))
        promises.append(Promise(iface.id, spec.id, use(KIND_FORWARD)))
    return PromiseGraph(agents, promises, containers=containers, tables={rib_name: table})


def build_vlan_overlay(graph: PromiseGraph, assignments: Mapping[str, int]) -> PromiseGraph:
    """Tag interfaces into private logical containers.

    Accept promises are rewritten to require the tag (the receiver-side
    reading of mutual scope), so cross-tag traffic dies on the wire. No
    RIB or default-route machinery is ever added.
    """
    for iface, tag in assignments.items():
        if iface not in graph.agents:
            raise GraphError(f"unknown interface {iface!r}")
        if not 1 <= int(tag) <= 4094:
            raise GraphError(f"VLAN tag {tag} outside 1-4094")

    def with_vlan(body: Body, tag: int) -> Body:
        if body.get("vlan") is not None:
            return body
        return Body(body.polarity, body.kind, body.params + (("vlan", str(tag)),))

    def is_access_accept(body: Body) -> bool:
        # Tagging is an access-port concern; accepts that constrain the
        # underlay (prefix/local/tni) pass tunneled and routed frames.
        if body.polarity is not Polarity.USE or body.kind != KIND_DELIVER:
            return False
        keys = {k for k, _ in body.params}
        return not keys & {"prefix", "local", "tni"}

    promises = []
    for p in graph.promises:
        body = p.body
        if is_access_accept(body):
            if p.promiser in assignments:
                body = with_vlan(body, assignments[p.promiser])
            elif not p.scoped and p.promisee in assignments:
                body = with_vlan(body, assignments[p.promisee])
        promises.append(Promise(p.promiser, p.promisee, body))

    agents = []
    for a in graph.agents.values():
        if a.id in assignments:
            attrs = dict(a.attributes)
            attrs["vlan"] = str(assignments[a.id])
            agents.append(Agent(a.id, a.kind, tuple(attrs.items())))
        else:
            agents.append(a)

    containers = {name: set(members) for name, members in graph.containers.items()}
    for iface, tag in assignments.items():
        containers.setdefault(f"vlan-{tag}", set()).add(iface)
    return PromiseGraph(agents, promises, graph.impositions, containers, graph.tables)


def build_tunnel(graph: PromiseGraph, endpoints: tuple[str, str],
                 tni: AddressComponent) -> PromiseGraph:
    """Bridge two endpoints across a routed underlay: each promises the
    other to encapsulate outbound traffic under the tunnel id and to
    unwrap what arrives addressed to itself."""
    a, b = endpoints
    if tni.label != "tni":
        raise GraphError(f"tunnel identifier must be a tni component, got {tni.label!r}")
    for end in (a, b):
        if end not in graph.agents:
            raise GraphError(f"unknown tunnel endpoint {end!r}")
        agent = graph.agent(end)
        if agent.attr("prefix") is None or agent.attr("local") is None:
            raise GraphError(f"tunnel endpoint {end!r} needs an underlay ip (prefix/local)")
    if a == b:
        raise GraphError("tunnel endpoints must differ")
    extra = [
        Promise(a, b, give(KIND_TUNNEL, tni=tni.value, peer=b)),
        Promise(b, a, use(KIND_TUNNEL, tni=tni.value)),
        Promise(b, a, give(KIND_TUNNEL, tni=tni.value, peer=a)),
        Promise(a, b, use(KIND_TUNNEL, tni=tni.value)),
    ]
    return graph.with_promises(extra)


def merge_graphs(*graphs: PromiseGraph) -> PromiseGraph:
    """Union of agents (ids must not collide), edges, containers (same
    name unions members) and tables."""
    agents: dict[str, Agent] = {}
    promises: list[Promise] = []
    impositions = []
    containers: dict[str, set[str]] = {}
    tables: dict[str, object] = {}
    for g in graphs:
        for aid, agent in g.agents.items():
            if aid in agents:
                raise GraphError(f"agent {aid!r} defined by more than one part")
            agents[aid] = agent
        promises.extend(g.promises)
        impositions.extend(g.impositions)
        for name, members in g.containers.items():
            containers.setdefault(name, set()).update(members)
        for name, table in g.tables.items():
            if name in tables and tables[name] != table:
                raise GraphError(f"table {name!r} defined twice with different entries")
            tables[name] = table
    return PromiseGraph(agents.values(), promises, impositions, containers, tables)


def add_members(graph: PromiseGraph, container: str, members: Sequence[str]) -> PromiseGraph:
    """Attach existing agents to a (possibly new) container."""
    for m in members:
        if m not in graph.agents:
            raise GraphError(f"unknown agent {m!r}")
    containers = {name: set(ms) for name, ms in graph.containers.items()}
    containers.setdefault(container, set()).update(members)
    return graph.replace(containers=containers)


def attach_host(graph: PromiseGraph, host: str, port: str) -> PromiseGraph:
    """Plug a dual-homed host (e.g. a tunnel endpoint) into a gateway port
    by point promises, without container membership. The attachment is an
    underlay plug: every accept constrains prefix, so only routed frames
    pass and VLAN overlays leave these promises alone."""
    for aid in (host, port):
        if aid not in graph.agents:
            raise GraphError(f"unknown agent {aid!r}")
    return graph.with_promises([
        Promise(port, host, use(KIND_DELIVER, dst="*", prefix="*")),
        Promise(host, port, use(KIND_DELIVER, dst="*", prefix="*")),
        Promise(host, port, use(KIND_DELIVER, dst=GUARD_DEST_SELF, prefix="*")),
    ])
