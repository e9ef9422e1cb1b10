"""
Emergent message delivery over a promise graph.

A message is injected as an imposition at the source and advances only
through kept promises: a hop happens when the receiving agent has a
matching use-promise covering the sender (autonomy: no promise, no
delivery). Forwarder cores apply the three-clause forward logic strictly
in order (attached prefix, RIB, default). Transducers and tunnel
endpoints rewrite the address in flight. Every step lands in the trace.

All functions here are pure over an immutable graph; independent
injections can run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .addressing import (
    BROADCAST_MAC,
    AddressComponent,
    MultipletAddress,
    TransducerTable,
    transduce,
)
from .core import (
    Agent,
    AgentKind,
    Body,
    PnetError,
    Promise,
    PromiseGraph,
    GUARD_DEST_SELF,
    WILDCARD,
    is_guard,
    pattern_matches_literal,
)

KIND_DELIVER = "deliver"
KIND_FORWARD = "forward"
KIND_PRESENT = "present"
KIND_TUNNEL = "tunnel"

# Actions a delivery trace can record.
IMPOSED = "imposed"
ACCEPTED = "accepted"
ACCEPTED_ANY = "accepted-any"
FORWARDED = "forwarded"
FORWARDED_CLAUSE = ("forwarded-clause-1", "forwarded-clause-2", "forwarded-clause-3")
TRANSDUCED = "transduced"
ENCAPSULATED = "encapsulated"
DECAPSULATED = "decapsulated"
FLOODED = "flooded"
DROPPED_NO_PROMISE = "dropped-no-promise"
DROPPED_TTL = "dropped-ttl"

TERMINAL_ACTIONS = (ACCEPTED, DROPPED_NO_PROMISE, DROPPED_TTL)

# Pinning any of these keys in an accept body claims the message is "for me".
FINAL_KEYS = ("dst", "mac", "local", "symbolic")

DEFAULT_TTL = 32


class SimulationError(PnetError):
    """Raised for invalid injection requests (unknown source, no address)."""


@dataclass(frozen=True)
class Message:
    """An addressed payload. Forwarders never inspect or mutate payload."""

    address: MultipletAddress
    payload: bytes = b""
    ttl: int = DEFAULT_TTL

    def __post_init__(self):
        if self.ttl < 0:
            raise SimulationError("ttl must be >= 0")


@dataclass(frozen=True)
class TraceEvent:
    hop: int
    agent: str
    action: str
    address: MultipletAddress

    def line(self) -> str:
        return f"{self.hop}\t{self.agent}\t{self.action}\t{self.address}"


@dataclass(frozen=True)
class DeliveryTrace:
    events: tuple[TraceEvent, ...]
    delivered: bool
    final_agent: Optional[str]
    payload: bytes = b""

    def actions(self) -> list[str]:
        return [e.action for e in self.events]

    def agents(self) -> list[str]:
        return [e.agent for e in self.events]

    def text(self) -> str:
        return "\n".join(e.line() for e in self.events)

    def to_dict(self) -> dict:
        return {
            "delivered": self.delivered,
            "final_agent": self.final_agent,
            "events": [
                {"hop": e.hop, "agent": e.agent, "action": e.action, "address": str(e.address)}
                for e in self.events
            ],
        }


# -- matching helpers -------------------------------------------------------


def identity_match(agent: Agent, addr: MultipletAddress) -> bool:
    """destination-equals-self: some identity level of the agent (mac,
    prefix+local, or symbolic id) equals the address's active layer."""
    active = {c.label: c.value for c in addr.active_components()}
    mac = agent.attr("mac")
    if mac is not None and active.get("mac") == mac:
        return True
    local, prefix = agent.attr("local"), agent.attr("prefix")
    if local is not None and prefix is not None:
        if active.get("local") == local and active.get("prefix") == prefix:
            return True
    if active.get("symbolic") == agent.id:
        return True
    return False


def body_accepts(body: Body, addr: MultipletAddress, owner: Agent) -> Optional[bool]:
    """Whether a use-body matches a message address for its owner.

    Returns None on no match; otherwise whether the match is *final*
    (the body pins an identity key by literal or by a self-guard that
    resolves true — the message is for the owner, not just relayed).
    """
    params = addr.matching_params()
    final = False
    for key, pattern in body.params:
        if is_guard(pattern):
            if pattern == GUARD_DEST_SELF:
                if not identity_match(owner, addr):
                    return None
                final = True
            continue  # other guards are build-time constraints
        value = params.get(key)
        if value is None or not pattern_matches_literal(pattern, value):
            return None
        if key in FINAL_KEYS and pattern != WILDCARD:
            final = True
    return final


def _use_matches(graph: PromiseGraph, receiver: str, sender: str,
                 addr: MultipletAddress, kinds: tuple[str, ...]) -> Optional[bool]:
    """Best acceptance at receiver for a message from sender: None if no
    matching use-promise covers the sender, else finality (final wins)."""
    owner = graph.agent(receiver)
    best: Optional[bool] = None
    for _, p in graph.use_promises_covering(holder_filter=receiver, sender=sender):
        if p.body.kind not in kinds:
            continue
        outcome = body_accepts(p.body, addr, owner)
        if outcome is None:
            continue
        if outcome:
            return True
        best = False
    return best


def wire_receivers(graph: PromiseGraph, sender: str, addr: MultipletAddress) -> list[tuple[str, bool]]:
    """Agents that would take this transmission off the wire, with
    finality, in lexicographic order."""
    out = []
    for rid in graph.agent_ids():
        if rid == sender:
            continue
        outcome = _use_matches(graph, rid, sender, addr, (KIND_DELIVER,))
        if outcome is not None:
            out.append((rid, outcome))
    return out


# -- the engine -------------------------------------------------------------


@dataclass
class _Attempt:
    """A (possibly failed) exploration: the events walked so far."""

    events: list[tuple[str, str, MultipletAddress]] = field(default_factory=list)

    def extended(self, agent: str, action: str, addr: MultipletAddress) -> "_Attempt":
        return _Attempt(self.events + [(agent, action, addr)])


class _Simulation:
    def __init__(self, graph: PromiseGraph, require_final_at: Optional[str] = None):
        self.graph = graph
        self.require_final_at = require_final_at
        self.best_failure: list[tuple[str, str, MultipletAddress]] = []

    # Deterministic branch order at an agent: clause/literal forward,
    # present to a core, transduce, tunnel encap, then wire transmission.

    def search(self, agent_id: str, addr: MultipletAddress, ttl: int,
               may_transmit: bool, visited: frozenset, attempt: _Attempt) -> Optional[_Attempt]:
        # Relay state: what an agent can do with a frame depends only on
        # the frame and whether it may put it back on the wire, so that is
        # the whole cycle-detection key. Final acceptance never recurses
        # and is deliberately not filtered here.
        key = (agent_id, str(addr), may_transmit)
        if key in visited:
            return None
        visited = visited | {key}

        for hit in self._router_forward(agent_id, addr, ttl, visited, attempt):
            return hit
        for hit in self._literal_forward(agent_id, addr, ttl, visited, attempt):
            return hit
        for hit in self._present(agent_id, addr, ttl, visited, attempt):
            return hit
        for hit in self._transduce(agent_id, addr, ttl, visited, attempt):
            return hit
        if may_transmit:
            for hit in self._transmit(agent_id, addr, ttl, visited, attempt):
                return hit
        for hit in self._encapsulate(agent_id, addr, ttl, visited, attempt):
            return hit
        self._note_failure(attempt.extended(agent_id, DROPPED_NO_PROMISE, addr))
        return None

    def _note_failure(self, attempt: _Attempt):
        if len(attempt.events) > len(self.best_failure):
            self.best_failure = attempt.events

    def _receive(self, target: str, sender: str, addr: MultipletAddress, ttl: int,
                 visited: frozenset, attempt: _Attempt,
                 kinds: tuple[str, ...] = (KIND_DELIVER,),
                 grant_transmit: bool = False) -> Optional[_Attempt]:
        """Hand the message to target; it must hold a matching use-promise.

        grant_transmit lets an explicitly forwarded-to endpoint (a router
        egress interface) put the message back on its own wire.
        """
        if ttl <= 0:
            self._note_failure(attempt.extended(sender, DROPPED_TTL, addr))
            return None
        outcome = _use_matches(self.graph, target, sender, addr, kinds)
        if outcome is None:
            self._note_failure(attempt.extended(target, DROPPED_NO_PROMISE, addr))
            return None
        if outcome and not addr.is_broadcast():
            return self._arrive_final(target, addr, ttl - 1, visited, attempt)
        return self.search(target, addr, ttl - 1, grant_transmit or self._relay_allowed(target),
                           visited, attempt.extended(target, ACCEPTED_ANY, addr))

    def _arrive_final(self, target: str, addr: MultipletAddress, ttl: int,
                      visited: frozenset, attempt: _Attempt) -> Optional[_Attempt]:
        # A tunnel endpoint accepting the outer address unwraps and carries on.
        inner = self._decap_inner(target, addr)
        if inner is not None:
            attempt = attempt.extended(target, DECAPSULATED, inner)
            if inner.is_broadcast():
                return self._flood_into(target, inner, ttl, visited, attempt)
            return self.search(target, inner, ttl, True, visited, attempt)
        # On a shared medium every receiver gets its own copy: an accept at
        # the wrong endpoint consumes one copy, the search carries on with
        # the others.
        if self.require_final_at is not None and target != self.require_final_at:
            self._note_failure(attempt.extended(target, ACCEPTED, addr))
            return None
        return attempt.extended(target, ACCEPTED, addr)

    def _relay_allowed(self, agent_id: str) -> bool:
        return self.graph.agent(agent_id).kind is AgentKind.FORWARDER

    # -- branch generators (yield at most successful attempts) --

    def _router_forward(self, agent_id, addr, ttl, visited, attempt):
        prefix = addr.get("prefix")
        if prefix is None:
            return
        clause_bodies = [
            p for p in self.graph.promises_of(agent_id)
            if p.body.is_give and p.body.kind == KIND_FORWARD
            and (p.body.get("rib") or p.body.get("default"))
        ]
        if not clause_bodies:
            return
        if not all(self._params_admit(p.body, addr) for p in clause_bodies):
            return
        targets = {t for p in clause_bodies for t in self.graph.expand_targets(agent_id, p.promisee)}
        choice = self._apply_clauses(agent_id, prefix, clause_bodies[0].body, sorted(targets))
        if choice is None:
            return
        clause_index, egress = choice
        action = FORWARDED_CLAUSE[clause_index]
        hit = self._receive(egress, agent_id, addr, ttl, visited,
                            attempt.extended(agent_id, action, addr),
                            kinds=(KIND_FORWARD, KIND_DELIVER), grant_transmit=True)
        if hit is not None:
            yield hit

    def _apply_clauses(self, agent_id: str, prefix: str, body: Body,
                       targets: list[str]) -> Optional[tuple[int, str]]:
        # Clause 1: a directly attached interface owns the prefix.
        # Attachment is read off the +present promises made to this core.
        attached = []
        for p in self.graph.promises:
            if not (p.body.is_give and p.body.kind == KIND_PRESENT):
                continue
            if agent_id not in self.graph.expand_targets(p.promiser, p.promisee):
                continue
            if self.graph.agent(p.promiser).attr("prefix") == prefix:
                attached.append(p.promiser)
        for iface in sorted(attached):
            if iface in targets:
                return 0, iface
        # Clause 2: the RIB knows the prefix.
        rib_name = body.get("rib")
        if rib_name and rib_name in self.graph.tables:
            table = self.graph.tables[rib_name]
            if isinstance(table, TransducerTable):
                entry = table.lookup("prefix", prefix)
                if entry is not None and isinstance(entry.target, str) and entry.target in targets:
                    return 1, entry.target
        # Clause 3: the pre-decided default interface.
        default = body.get("default")
        if default and default in targets:
            return 2, default
        return None

    def _params_admit(self, body: Body, addr: MultipletAddress) -> bool:
        params = addr.matching_params()
        for key, pattern in body.params:
            if key in ("rib", "default") or is_guard(pattern):
                continue
            value = params.get(key)
            if value is None or not pattern_matches_literal(pattern, value):
                return False
        return True

    def _literal_forward(self, agent_id, addr, ttl, visited, attempt):
        candidates = []
        for p in self.graph.promises_of(agent_id):
            if not (p.body.is_give and p.body.kind == KIND_FORWARD):
                continue
            if p.body.get("rib") or p.body.get("default"):
                continue
            if not self._params_admit(p.body, addr):
                continue
            for target in self.graph.expand_targets(agent_id, p.promisee):
                candidates.append(target)
        for target in sorted(set(candidates)):
            hit = self._receive(target, agent_id, addr, ttl, visited,
                                attempt.extended(agent_id, FORWARDED, addr),
                                kinds=(KIND_FORWARD, KIND_DELIVER), grant_transmit=True)
            if hit is not None:
                yield hit

    def _present(self, agent_id, addr, ttl, visited, attempt):
        for p in self.graph.promises_of(agent_id):
            if not (p.body.is_give and p.body.kind == KIND_PRESENT):
                continue
            if not self._params_admit(p.body, addr):
                continue
            for core in self.graph.expand_targets(agent_id, p.promisee):
                hit = self._receive(core, agent_id, addr, ttl, visited, attempt,
                                    kinds=(KIND_PRESENT,), grant_transmit=True)
                if hit is not None:
                    yield hit

    def _transduce(self, agent_id, addr, ttl, visited, attempt):
        table_name = self.graph.agent(agent_id).attr("transducer")
        if not table_name or table_name not in self.graph.tables:
            return
        table = self.graph.tables[table_name]
        if not isinstance(table, TransducerTable):
            return
        result = transduce(table, addr)
        if not result.matched or result.address == addr:
            return
        hit = self.search(agent_id, result.address, ttl, True, visited,
                          attempt.extended(agent_id, TRANSDUCED, result.address))
        if hit is not None:
            yield hit

    def _tunnel_promises(self, agent_id: str) -> list[Promise]:
        return [
            p for p in self.graph.promises_of(agent_id)
            if p.body.is_give and p.body.kind == KIND_TUNNEL
        ]

    def _decap_inner(self, agent_id: str, addr: MultipletAddress) -> Optional[MultipletAddress]:
        tni = addr.get("tni")
        if tni is None:
            return None
        if not any(p.body.get("tni") == tni for p in self._tunnel_promises(agent_id)):
            return None
        comps = list(addr.components)
        while comps and comps[0].label != "tni":
            comps.pop(0)
        comps.pop(0)  # the tni itself
        if not comps:
            return None
        return MultipletAddress(tuple(comps))

    def _encap_outer(self, promise: Promise, addr: MultipletAddress) -> Optional[MultipletAddress]:
        if addr.has("tni"):
            return None
        peer_id = promise.body.get("peer")
        tni = promise.body.get("tni")
        if not peer_id or not tni or peer_id not in self.graph.agents:
            return None
        peer = self.graph.agent(peer_id)
        prefix, local = peer.attr("prefix"), peer.attr("local")
        if prefix is None or local is None:
            return None
        if addr.has("prefix") or addr.has("local"):
            return None
        outer = (
            AddressComponent("prefix", prefix),
            AddressComponent("local", local),
            AddressComponent("tni", tni),
        )
        return MultipletAddress(outer + addr.components)

    def _encapsulate(self, agent_id, addr, ttl, visited, attempt):
        for p in sorted(self._tunnel_promises(agent_id), key=lambda p: p.body.canon()):
            outer = self._encap_outer(p, addr)
            if outer is None:
                continue
            hit = self.search(agent_id, outer, ttl, True, visited,
                              attempt.extended(agent_id, ENCAPSULATED, outer))
            if hit is not None:
                yield hit

    def _transmit(self, agent_id, addr, ttl, visited, attempt):
        receivers = wire_receivers(self.graph, agent_id, addr)
        if ttl <= 0 and receivers:
            self._note_failure(attempt.extended(agent_id, DROPPED_TTL, addr))
            return
        if not addr.is_broadcast():
            for rid, final in receivers:
                if not final:
                    continue
                hit = self._arrive_final(rid, addr, ttl - 1, visited, attempt)
                if hit is not None:
                    yield hit
        for rid, final in receivers:
            if final and not addr.is_broadcast():
                continue
            hit = self.search(rid, addr, ttl - 1, self._relay_allowed(rid),
                              visited, attempt.extended(rid, ACCEPTED_ANY, addr))
            if hit is not None:
                yield hit

    # -- flooding --

    def _flood_into(self, start: str, addr: MultipletAddress, ttl: int,
                    visited: frozenset, attempt: _Attempt) -> _Attempt:
        """Broadcast expansion: every in-scope receiver takes the message
        once; forwarder relays propagate; tunnel endpoints teleport it."""
        events = list(attempt.events)
        seen = set(visited) | {(start, str(addr))}
        queue = [(start, addr, ttl, True)]
        while queue:
            agent_id, a, t, may_transmit = queue.pop(0)
            if t <= 0 or not may_transmit:
                continue
            for rid, _final in wire_receivers(self.graph, agent_id, a):
                if (rid, str(a)) in seen:
                    continue
                seen.add((rid, str(a)))
                if self._relay_allowed(rid):
                    events.append((rid, FLOODED, a))
                    queue.append((rid, a, t - 1, True))
                    continue
                tunneled = False
                for p in sorted(self._tunnel_promises(rid), key=lambda p: p.body.canon()):
                    outer = self._encap_outer(p, a)
                    if outer is None:
                        continue
                    sub = self.search(rid, outer, t - 1, True, frozenset(seen),
                                      _Attempt([(rid, ENCAPSULATED, outer)]))
                    if sub is not None:
                        events.extend(sub.events)
                        seen.update((e[0], str(e[2])) for e in sub.events)
                        tunneled = True
                if not tunneled:
                    events.append((rid, ACCEPTED, a))
        return _Attempt(events)


def _assemble(events: list[tuple[str, str, MultipletAddress]], delivered: bool,
              payload: bytes) -> DeliveryTrace:
    trace = tuple(TraceEvent(i, a, act, addr) for i, (a, act, addr) in enumerate(events))
    final_agent = events[-1][0] if events else None
    return DeliveryTrace(trace, delivered, final_agent if delivered else None, payload)


def _retag_for_source(agent: Agent, addr: MultipletAddress) -> MultipletAddress:
    # Frames are tagged at the source's access port: a tagged sender's own
    # tag overrides whatever tag the address literal carried.
    tag = agent.attr("vlan")
    if tag is None or addr.get("vlan") == tag:
        return addr
    comps = tuple(c for c in addr.components if c.label != "vlan")
    return MultipletAddress((AddressComponent("vlan", tag),) + comps)


def inject(graph: PromiseGraph, source: str, message: Message,
           require_final_at: Optional[str] = None) -> DeliveryTrace:
    """Impose a message at the source and walk it through kept promises.

    The trace records the successful delivery path, or the deepest
    exploration ending in a drop. Fully deterministic. With
    require_final_at set, only a voluntary accept at that agent counts as
    delivery; copies consumed elsewhere end their own branch.
    """
    if source not in graph.agents:
        raise SimulationError(f"unknown source agent {source!r}")
    addr = _retag_for_source(graph.agent(source), message.address)
    sim = _Simulation(graph, require_final_at)
    start = _Attempt([(source, IMPOSED, addr)])

    if addr.is_broadcast():
        result = sim._flood_into(source, addr, message.ttl, frozenset(), start)
        events = _order_flood_events(result.events)
        delivered = any(act == ACCEPTED for _, act, _ in events)
        if not delivered:
            events = events + [(source, DROPPED_NO_PROMISE, addr)]
        return _assemble(events, delivered, message.payload)

    if identity_match(graph.agent(source), addr):
        if require_final_at is None or require_final_at == source:
            hit = start.extended(source, ACCEPTED, addr)
            return _assemble(hit.events, True, message.payload)

    hit = sim.search(source, addr, message.ttl, True, frozenset(), start)
    if hit is not None:
        return _assemble(hit.events, True, message.payload)
    failure = sim.best_failure or start.extended(source, DROPPED_NO_PROMISE, addr).events
    return _assemble(failure, False, message.payload)


def _order_flood_events(events: list[tuple[str, str, MultipletAddress]]) -> list:
    """Propagation first, receipts last: broadcast receipt order on a
    shared medium is simultaneous, and the trace contract wants a terminal
    accept at the end."""
    head = [e for e in events if e[1] != ACCEPTED]
    tail = [e for e in events if e[1] == ACCEPTED]
    return head + tail


def full_address(agent: Agent) -> Optional[MultipletAddress]:
    """The agent's own multiplet address from its attributes, outermost
    first (vlan, prefix, local, mac)."""
    comps = []
    for label in ("vlan", "prefix", "local", "mac"):
        value = agent.attr(label)
        if value is not None:
            comps.append(AddressComponent(label, value))
    if not comps:
        return None
    return MultipletAddress(tuple(comps))


def reachable(graph: PromiseGraph, src: str, dst: str, ttl: int = DEFAULT_TTL) -> bool:
    """Whether injecting dst's full multiplet address at src terminates in
    a voluntary accept at dst."""
    if src not in graph.agents:
        raise SimulationError(f"unknown agent {src!r}")
    addr = full_address(graph.agent(dst))
    if addr is None:
        raise SimulationError(f"agent {dst!r} has no address components")
    if src == dst:
        return True
    trace = inject(graph, src, Message(addr, ttl=ttl), require_final_at=dst)
    return trace.delivered and trace.final_agent == dst


def flood_set(graph: PromiseGraph, src: str, ttl: int = DEFAULT_TTL) -> set[str]:
    """Agents receiving a broadcast from src, respecting container scope.

    Pure relays (forwarders, tunnel hops) are not counted: the broadcast
    domain is the set of endpoints in scope.
    """
    agent = graph.agent(src)
    comps = []
    vlan = agent.attr("vlan")
    if vlan is not None:
        comps.append(AddressComponent("vlan", vlan))
    comps.append(AddressComponent("mac", BROADCAST_MAC))
    trace = inject(graph, src, Message(MultipletAddress(tuple(comps)), ttl=ttl))
    received = {e.agent for e in trace.events if e.action == ACCEPTED}
    return received | {src}
