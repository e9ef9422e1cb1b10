"""
Cooperation sufficiency, fitness-for-purpose alignment, proxy expansion,
failure-point and redundancy analysis, control-model metrics.

Everything reports through AnalysisReport: a verdict, witnesses naming
the offending agents or missing promises, and human-readable narrative
lines. A false verdict always carries at least one witness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .core import (
    Body,
    GraphError,
    PnetError,
    Polarity,
    Promise,
    PromiseGraph,
    body_set,
    container_membrane,
    find_bindings,
    give,
    outward_signature,
    use,
)
from .simulator import (
    DEFAULT_TTL,
    Message,
    full_address,
    inject,
    reachable,
)

KIND_COORDINATE = "coordinate"


class AnalysisError(PnetError):
    """Raised when an analysis precondition is violated."""


@dataclass(frozen=True)
class AnalysisReport:
    verdict: bool
    witnesses: tuple[str, ...] = ()
    narrative: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.verdict and not self.witnesses:
            raise GraphError("a false verdict needs at least one witness")

    def lines(self) -> str:
        head = "PASS" if self.verdict else "FAIL"
        rows = [head]
        rows += [f"  witness: {w}" for w in self.witnesses]
        rows += [f"  {n}" for n in self.narrative]
        return "\n".join(rows)


def cooperation_digraph(graph: PromiseGraph) -> dict[str, set[str]]:
    """Give-direction edges: a -> b when a's offer or imposition is bound
    by a matching use-promise at b."""
    edges: dict[str, set[str]] = {aid: set() for aid in graph.agents}
    for b in find_bindings(graph):
        edges[b.giver_agent].add(b.user_agent)
    return edges


def check_cooperation(graph: PromiseGraph, src: str, dst: str) -> AnalysisReport:
    """Are there sufficient promises for src's traffic or service to reach
    dst, every hop covered by a complete binding?

    Addressed destinations are checked by delivery simulation (the verdict
    then coincides with reachable); address-free graphs (service meshes,
    proxies, compiled policies) are checked over the binding digraph.
    """
    for aid in (src, dst):
        if aid not in graph.agents:
            raise AnalysisError(f"unknown agent {aid!r}")
    if src == dst:
        return AnalysisReport(True, narrative=("source and destination coincide",))

    addr = full_address(graph.agent(dst))
    if addr is not None:
        trace = inject(graph, src, Message(addr), require_final_at=dst)
        if trace.delivered and trace.final_agent == dst:
            return AnalysisReport(True, narrative=tuple(e.line() for e in trace.events))
        last = trace.events[-1]
        witness = f"{last.action} at {last.agent} for {last.address}"
        return AnalysisReport(False, (witness,), tuple(e.line() for e in trace.events))

    edges = cooperation_digraph(graph)
    seen, frontier = {src}, [src]
    while frontier:
        nxt = []
        for a in frontier:
            for b in sorted(edges.get(a, ())):
                if b == dst:
                    return AnalysisReport(True, narrative=(f"binding path reaches {dst}",))
                if b not in seen:
                    seen.add(b)
                    nxt.append(b)
        frontier = nxt
    cut = ", ".join(sorted(seen))
    return AnalysisReport(
        False,
        (f"no give/use binding from {{{cut}}} toward {dst}",),
        (f"agents reachable by bindings from {src}: {sorted(seen)}",),
    )


def check_alignment(desired: Iterable[Body], graph: PromiseGraph, container: str) -> AnalysisReport:
    """Fitness for purpose: the desired body set equals the container's
    membrane, under canonical set equality."""
    membrane = body_set(container_membrane(graph, container).keys())
    want = body_set(desired)
    missing = sorted(b.canon() for b in want - membrane)
    surplus = sorted(b.canon() for b in membrane - want)
    witnesses = tuple(f"missing {b}" for b in missing) + tuple(f"surplus {b}" for b in surplus)
    return AnalysisReport(
        not witnesses,
        witnesses,
        (f"membrane of {container}: {sorted(b.canon() for b in membrane)}",),
    )


def expand_proxy(graph: PromiseGraph, client: str, proxy: str, service: str,
                 body: Body) -> PromiseGraph:
    """Mediate an end-to-end service through an intermediary: exactly four
    promises, hence four possible points of failure."""
    if len({client, proxy, service}) != 3:
        raise AnalysisError("client, proxy and service must be three distinct agents")
    if body.polarity is not Polarity.GIVE:
        raise AnalysisError("proxy expansion needs a give-polarity body")
    u = Body(Polarity.USE, body.kind, body.params)
    return graph.with_promises([
        Promise(service, proxy, body),
        Promise(proxy, service, u),
        Promise(proxy, client, body),
        Promise(client, proxy, u),
    ])


def single_points_of_failure(graph: PromiseGraph, src: str, dst: str,
                             ttl: int = DEFAULT_TTL) -> set[str]:
    """Agents (besides the endpoints) whose removal breaks delivery,
    computed exactly by one-at-a-time removal."""
    if not reachable(graph, src, dst, ttl=ttl):
        raise AnalysisError(f"{dst!r} is not reachable from {src!r}; nothing to cut")
    spofs = set()
    for aid in graph.agent_ids():
        if aid in (src, dst):
            continue
        if not reachable(graph.without_agent(aid), src, dst, ttl=ttl):
            spofs.add(aid)
    return spofs


def _alternative_count(promise: Promise, members: frozenset[str]) -> int:
    best = 0
    for _, pattern in promise.body.params:
        values = set(pattern.split("|"))
        best = max(best, len(values & members))
    return best


def redundancy_check(graph: PromiseGraph, group: str,
                     clients: Iterable[str]) -> AnalysisReport:
    """A redundancy group must be one role, fully meshed with mutual
    coordination promises, and every client must promise to use at least
    two members as alternatives (failover is a client function)."""
    if group not in graph.containers:
        raise AnalysisError(f"unknown group {group!r}")
    members = graph.containers[group]
    witnesses: list[str] = []
    narrative: list[str] = []

    signatures = {m: outward_signature(graph, m) for m in members}
    if len(set(signatures.values())) > 1:
        groups: dict[tuple, list[str]] = {}
        for m, sig in signatures.items():
            groups.setdefault(sig, []).append(m)
        split = " / ".join(",".join(sorted(g)) for g in groups.values())
        witnesses.append(f"members split into distinct roles: {split}")
    narrative.append(f"group {group}: {sorted(members)}")

    for x in sorted(members):
        for y in sorted(members):
            if x >= y:
                continue
            for a, b in ((x, y), (y, x)):
                offered = any(
                    p.body.is_give and p.body.kind == KIND_COORDINATE and graph.covers(p, b)
                    for p in graph.promises_of(a)
                )
                accepted = any(
                    p.body.polarity is Polarity.USE and p.body.kind == KIND_COORDINATE
                    and graph.covers(p, a)
                    for p in graph.promises_of(b)
                )
                if not (offered and accepted):
                    witnesses.append(f"no mutual coordination between {a} and {b}")
                    break

    for client in sorted(set(clients)):
        if client not in graph.agents:
            raise AnalysisError(f"unknown client {client!r}")
        alts = max(
            (_alternative_count(p, members) for p in graph.promises_of(client)
             if p.body.polarity is Polarity.USE),
            default=0,
        )
        if alts < 2:
            witnesses.append(f"client {client} binds to fewer than 2 group members")

    return AnalysisReport(not witnesses, tuple(witnesses), tuple(narrative))


def control_model_metric(graph: PromiseGraph, controller: str) -> tuple[int, int]:
    """(live impositions emitted by the controller, standing promises kept
    by everyone else): how imposition-driven the design is."""
    if controller not in graph.agents:
        raise AnalysisError(f"unknown agent {controller!r}")
    imposition_count = sum(1 for i in graph.impositions if i.imposer == controller)
    policy_promise_count = sum(1 for p in graph.promises if p.promiser != controller)
    return imposition_count, policy_promise_count
