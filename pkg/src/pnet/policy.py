"""
Lower application-level service intents (cells, tiers, consumed functions)
into a low-level promise graph, and verify the result against the
declared intent.

A cell compiles to a role group of identical hosts inside a container:
every host offers the cell's services to the world, the group keeps a
full mesh of mutual coordination promises, consumers promise to use all
provider hosts as alternatives (client-side failover), and client API
calls are impositions that only bind when the provider opened a receptor
for them (default-deny).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import (
    Agent,
    AgentKind,
    Body,
    PnetError,
    Polarity,
    Imposition,
    Promise,
    PromiseGraph,
    body_set,
    container_membrane,
    give,
    use,
)
from .verifier import (
    KIND_COORDINATE,
    AnalysisReport,
    check_alignment,
    redundancy_check,
)

KIND_API_REQUEST = "api-request"
EXTERNAL = "external"
USERS_AGENT = "users"

REQUIREMENT_TAGS = ("firewall-open", "capacity", "secure-channel")


class PolicyError(PnetError):
    """Raised for invalid policy specs or mismatched verification input."""


@dataclass(frozen=True)
class ConsumeSpec:
    provider: str           # providing cell name, or "external"
    body: Body              # the service body as provided (give polarity)
    alternatives: Optional[int] = None  # None = all provider hosts

    def __post_init__(self):
        if self.alternatives is not None and self.alternatives < 1:
            raise PolicyError("alternatives must be >= 1")


@dataclass(frozen=True)
class Cell:
    name: str
    hosts: int
    provides: tuple[Body, ...] = ()
    consumes: tuple[ConsumeSpec, ...] = ()
    requirements: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.name:
            raise PolicyError("cell needs a name")
        if self.hosts < 1:
            raise PolicyError(f"cell {self.name!r} needs at least one host")
        object.__setattr__(self, "provides", tuple(self.provides))
        object.__setattr__(self, "consumes", tuple(self.consumes))
        object.__setattr__(self, "requirements", frozenset(self.requirements))
        for b in self.provides:
            if b.polarity is not Polarity.GIVE:
                raise PolicyError(f"cell {self.name!r} provides must have give polarity")
        for tag in self.requirements:
            if tag not in REQUIREMENT_TAGS:
                raise PolicyError(f"unknown requirement tag {tag!r}")

    def host_ids(self) -> list[str]:
        return [f"{self.name}-{i}" for i in range(1, self.hosts + 1)]


@dataclass(frozen=True)
class PolicySpec:
    cells: tuple[Cell, ...]
    desired: frozenset[Body] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "desired", body_set(self.desired))
        names = [c.name for c in self.cells]
        if len(set(names)) != len(names):
            raise PolicyError("cell names must be unique")
        by_name = {c.name: c for c in self.cells}
        for cell in self.cells:
            for spec in cell.consumes:
                if spec.provider == EXTERNAL:
                    continue
                provider = by_name.get(spec.provider)
                if provider is None:
                    raise PolicyError(
                        f"cell {cell.name!r} consumes from unknown cell {spec.provider!r}")
                if spec.body not in provider.provides:
                    raise PolicyError(
                        f"cell {spec.provider!r} does not provide {spec.body.canon()}")

    def cell(self, name: str) -> Cell:
        for c in self.cells:
            if c.name == name:
                return c
        raise PolicyError(f"unknown cell {name!r}")

    def consumers_of(self, provider: str) -> list[tuple[Cell, ConsumeSpec]]:
        out = []
        for cell in self.cells:
            for spec in cell.consumes:
                if spec.provider == provider:
                    out.append((cell, spec))
        return out


def _consume_body(spec: ConsumeSpec, provider_hosts: list[str]) -> Body:
    count = len(provider_hosts) if spec.alternatives is None else min(
        spec.alternatives, len(provider_hosts))
    alts = "|".join(sorted(provider_hosts)[:count])
    params = dict(spec.body.params)
    params["provider"] = alts
    return Body(Polarity.USE, spec.body.kind, tuple(params.items()))


def _provided_body(cell: Cell, body: Body) -> Body:
    """Requirement tags become syntactic body parameters, so capacity and
    channel-security promises are visible at the membrane (whether they
    hold numerically is the provider's own autonomous business)."""
    params = dict(body.params)
    if "capacity" in cell.requirements:
        params.setdefault("capacity", "assured")
    if "secure-channel" in cell.requirements:
        params.setdefault("channel", "secure")
    return Body(Polarity.GIVE, body.kind, tuple(params.items()))


def _receptor_body(service_kind: str) -> Body:
    return use(KIND_API_REQUEST, service=service_kind)


def compile_policy(spec: PolicySpec) -> PromiseGraph:
    """Emit the low-level promise graph for a policy spec.

    Deterministic: equal specs produce structurally equal graphs. A
    synthetic ``users`` agent stands for the world outside every cell so
    that membranes are observable.
    """
    agents: list[Agent] = []
    promises: list[Promise] = []
    impositions: list[Imposition] = []
    containers: dict[str, list[str]] = {}

    for cell in spec.cells:
        hosts = cell.host_ids()
        containers[cell.name] = hosts
        for h in hosts:
            agents.append(Agent(h, AgentKind.SERVICE_HOST, (("cell", cell.name),)))
    agents.append(Agent(USERS_AGENT, AgentKind.SERVICE_HOST))

    for cell in spec.cells:
        hosts = cell.host_ids()
        for h in hosts:
            for b in cell.provides:
                promises.append(Promise(h, "*", _provided_body(cell, b)))
            for other in hosts:
                if other == h:
                    continue
                promises.append(Promise(h, other, give(KIND_COORDINATE)))
                promises.append(Promise(h, other, use(KIND_COORDINATE)))

        # Receptors: accepting client API calls is what firewall-open means;
        # without it no cross-cell exchange can bind (default-deny).
        if "firewall-open" in cell.requirements:
            for consumer_cell, spec_c in spec.consumers_of(cell.name):
                receptor = _receptor_body(spec_c.body.kind)
                for h in hosts:
                    promises.append(Promise(h, f"@{consumer_cell.name}", receptor))

        for spec_c in cell.consumes:
            if spec_c.provider == EXTERNAL:
                provider_hosts = [USERS_AGENT]
                target = USERS_AGENT
            else:
                provider_hosts = spec.cell(spec_c.provider).host_ids()
                target = f"@{spec_c.provider}"
            consume = _consume_body(spec_c, provider_hosts)
            for h in cell.host_ids():
                promises.append(Promise(h, target, consume))
                for v in sorted(provider_hosts):
                    if v != USERS_AGENT:
                        impositions.append(Imposition(
                            h, v, give(KIND_API_REQUEST, service=spec_c.body.kind)))

    return PromiseGraph(agents, promises, impositions, containers)


def cell_boundary_contract(spec: PolicySpec, cell_name: str) -> frozenset[Body]:
    """The bodies the compiler is contracted to place on this cell's
    membrane: its provides, its consumer-side use bodies, and the
    receptors it opens for its consumers."""
    cell = spec.cell(cell_name)
    bodies: set[Body] = {_provided_body(cell, b) for b in cell.provides}
    for spec_c in cell.consumes:
        if spec_c.provider == EXTERNAL:
            provider_hosts = [USERS_AGENT]
        else:
            provider_hosts = spec.cell(spec_c.provider).host_ids()
        bodies.add(_consume_body(spec_c, provider_hosts))
    if "firewall-open" in cell.requirements:
        for _consumer, spec_c in spec.consumers_of(cell_name):
            bodies.add(_receptor_body(spec_c.body.kind))
    return body_set(bodies)


def verify_compiled(spec: PolicySpec, graph: PromiseGraph) -> AnalysisReport:
    """Alignment of every cell's membrane with the spec, redundancy checks
    on every multi-host cell, and coverage of the spec's desired set."""
    witnesses: list[str] = []
    narrative: list[str] = []
    for cell in spec.cells:
        if cell.name not in graph.containers:
            raise PolicyError(f"graph has no container for cell {cell.name!r}")

    union_membrane: set[Body] = set()
    for cell in spec.cells:
        report = check_alignment(cell_boundary_contract(spec, cell.name), graph, cell.name)
        narrative.append(f"cell {cell.name}: alignment {'ok' if report.verdict else 'BROKEN'}")
        if not report.verdict:
            witnesses.extend(f"{cell.name}: {w}" for w in report.witnesses)
        union_membrane.update(container_membrane(graph, cell.name).keys())

        if cell.hosts >= 2:
            clients = []
            for consumer_cell, _ in spec.consumers_of(cell.name):
                clients.extend(consumer_cell.host_ids())
            red = redundancy_check(graph, cell.name, clients)
            narrative.append(f"cell {cell.name}: redundancy {'ok' if red.verdict else 'BROKEN'}")
            if not red.verdict:
                witnesses.extend(f"{cell.name}: {w}" for w in red.witnesses)

    for b in sorted(spec.desired - body_set(union_membrane), key=lambda b: b.canon()):
        witnesses.append(f"desired body never promised: {b.canon()}")

    return AnalysisReport(not witnesses, tuple(witnesses), tuple(narrative))
