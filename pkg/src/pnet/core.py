"""
Promise algebra: agents, signed bodies, promises, impositions, bindings,
roles and containers.

The model is a graph of autonomous agents joined by two edge types:

- a promise, voluntarily published by its promiser and only ever
  constraining the promiser's own behavior;
- an imposition, an attempt by one agent to induce behavior in another
  (a packet on the wire is an imposition; the receiver is free to drop it).

Bodies carry a polarity (+ give / - use), a kind tag and a parameter
pattern map. Cooperation is never assumed: it is detected by matching a
give-side edge with a use-side promise between the same pair of agents
(a "binding"). Everything downstream — delivery simulation, reachability,
alignment checking — reduces to binding computation over this structure.

Graphs are immutable after construction; every analysis here is a pure
function and safe to call concurrently.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence, Union


class PnetError(Exception):
    """Base class for all toolkit errors."""


class GraphError(PnetError):
    """Raised for ill-formed graphs or invalid graph operations."""


WILDCARD = "*"
GUARD_PREFIX = "@"

GUARD_DISTINCT = "@distinct-from-all-peers"
GUARD_DEST_SELF = "@destination-equals-self"
KNOWN_GUARDS = (GUARD_DISTINCT, GUARD_DEST_SELF)

SCOPE_ALL = "*"
SCOPE_CONTAINER = "@"


class Polarity(str, Enum):
    GIVE = "+"
    USE = "-"


class AgentKind(str, Enum):
    INTERFACE = "interface"
    FORWARDER = "forwarder"
    SERVICE_HOST = "service-host"
    PROXY = "proxy"
    CONTROLLER = "controller"
    CONTAINER_BOUNDARY = "container-boundary"


def is_guard(pattern: str) -> bool:
    return pattern.startswith(GUARD_PREFIX)


def normalize_pattern(pattern: str) -> str:
    """Canonical form: disjunction members deduplicated and sorted."""
    if not pattern:
        raise GraphError("empty pattern")
    if is_guard(pattern):
        if pattern not in KNOWN_GUARDS:
            raise GraphError(f"unknown guard {pattern!r}")
        return pattern
    if "|" in pattern:
        parts = sorted(set(p for p in pattern.split("|") if p))
        if not parts:
            raise GraphError("empty disjunction")
        return "|".join(parts)
    return pattern


def pattern_matches_literal(pattern: str, value: str) -> bool:
    """Whether a literal value satisfies a pattern. Guards match lazily."""
    if pattern == WILDCARD or is_guard(pattern):
        return True
    return value in pattern.split("|")


def intersect_patterns(a: str, b: str) -> Optional[tuple[str, tuple[str, ...]]]:
    """Intersection of two patterns, or None if empty.

    Guards intersect with anything; they are stripped from the resulting
    pattern and returned separately for the caller to resolve against a
    graph.
    """
    guards = []
    if is_guard(a):
        guards.append(a)
        a = WILDCARD
    if is_guard(b):
        guards.append(b)
        b = WILDCARD
    if a == WILDCARD:
        result = b
    elif b == WILDCARD:
        result = a
    else:
        common = set(a.split("|")) & set(b.split("|"))
        if not common:
            return None
        result = "|".join(sorted(common))
    return result, tuple(guards)


def _normalize_params(params: Union[Mapping[str, str], Iterable[tuple[str, str]], None]) -> tuple[tuple[str, str], ...]:
    if params is None:
        return ()
    items = params.items() if isinstance(params, Mapping) else params
    out = []
    for key, pattern in items:
        if not key:
            raise GraphError("empty param key")
        out.append((key, normalize_pattern(str(pattern))))
    out.sort()
    if len(set(k for k, _ in out)) != len(out):
        raise GraphError("duplicate param key")
    return tuple(out)


@dataclass(frozen=True)
class Body:
    """A signed intention: polarity, kind tag, parameter patterns.

    A use-body is the same structure with polarity USE; there is no second
    notation. Parameter patterns are literals, "*", sorted disjunctions
    ("a|b"), or guard names ("@destination-equals-self").
    """

    polarity: Polarity
    kind: str
    params: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.kind:
            raise GraphError("empty body kind")
        object.__setattr__(self, "polarity", Polarity(self.polarity))
        object.__setattr__(self, "params", _normalize_params(self.params))

    @property
    def is_give(self) -> bool:
        return self.polarity is Polarity.GIVE

    def param_map(self) -> dict[str, str]:
        return dict(self.params)

    def get(self, key: str) -> Optional[str]:
        for k, v in self.params:
            if k == key:
                return v
        return None

    def canon(self) -> str:
        """Canonical serialization; the equality used by roles and body sets."""
        inner = ",".join(f"{k}={v}" for k, v in self.params)
        return f"{self.polarity.value}{self.kind}{{{inner}}}"

    def __str__(self) -> str:
        return self.canon()


def give(kind: str, **params: str) -> Body:
    return Body(Polarity.GIVE, kind, tuple(params.items()))


def use(kind: str, **params: str) -> Body:
    return Body(Polarity.USE, kind, tuple(params.items()))


@dataclass(frozen=True)
class Agent:
    """An autonomous node. The id is unique per graph; kind never changes."""

    id: str
    kind: AgentKind = AgentKind.SERVICE_HOST
    attributes: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.id:
            raise GraphError("empty agent id")
        object.__setattr__(self, "kind", AgentKind(self.kind))
        attrs = self.attributes
        if isinstance(attrs, Mapping):
            attrs = tuple(attrs.items())
        object.__setattr__(self, "attributes", tuple(sorted(attrs)))

    def attr(self, key: str) -> Optional[str]:
        for k, v in self.attributes:
            if k == key:
                return v
        return None


@dataclass(frozen=True)
class Promise:
    """promiser -> promisee edge. promisee may be an agent id, "*" (every
    agent in the graph) or "@name" (every agent in a named container)."""

    promiser: str
    promisee: str
    body: Body

    @property
    def scoped(self) -> bool:
        return self.promisee == SCOPE_ALL or self.promisee.startswith(SCOPE_CONTAINER)


@dataclass(frozen=True)
class Imposition:
    """imposer -> imposee. Give polarity means "take this"; use means
    "give me". The imposee is free to ignore it."""

    imposer: str
    imposee: str
    body: Body


@dataclass(frozen=True)
class Match:
    """Result of matching a give body against a use body: the param
    intersection plus any guards recorded for lazy resolution."""

    params: tuple[tuple[str, str], ...]
    guards: tuple[tuple[str, str], ...]  # (param key, guard name)

    def param_map(self) -> dict[str, str]:
        return dict(self.params)


def kinds_compatible(plus_kind: str, minus_kind: str) -> bool:
    # Forwarding completes as delivery at the receiving port; the reverse
    # pairing is not a contract.
    return plus_kind == minus_kind or (plus_kind == "forward" and minus_kind == "deliver")


def match_bodies(plus: Body, minus: Body) -> Optional[Match]:
    """Match a give body against a use body.

    Returns the per-key pattern intersection when the kind tags are
    compatible and every shared key intersects non-emptily; None otherwise.
    Keys present on only one side pass through (an absent key constrains
    nothing). Guards are recorded, not resolved.
    """
    if plus.polarity is not Polarity.GIVE:
        raise GraphError("match_bodies: first body must have give polarity")
    if minus.polarity is not Polarity.USE:
        raise GraphError("match_bodies: second body must have use polarity")
    if not kinds_compatible(plus.kind, minus.kind):
        return None
    pmap, mmap = plus.param_map(), minus.param_map()
    params: dict[str, str] = {}
    guards: list[tuple[str, str]] = []
    for key in sorted(set(pmap) | set(mmap)):
        a, b = pmap.get(key, WILDCARD), mmap.get(key, WILDCARD)
        hit = intersect_patterns(a, b)
        if hit is None:
            return None
        pattern, key_guards = hit
        params[key] = pattern
        guards.extend((key, g) for g in key_guards)
    return Match(tuple(sorted(params.items())), tuple(guards))


class PromiseGraph:
    """Agents plus promise and imposition edges, with nested containers.

    Immutable after construction. Containers must form a forest: any two
    are disjoint or one contains the other.
    """

    def __init__(
        self,
        agents: Iterable[Agent],
        promises: Sequence[Promise] = (),
        impositions: Sequence[Imposition] = (),
        containers: Optional[Mapping[str, Iterable[str]]] = None,
        tables: Optional[Mapping[str, "object"]] = None,
    ):
        agent_map: dict[str, Agent] = {}
        for a in agents:
            if a.id in agent_map:
                raise GraphError(f"duplicate agent id {a.id!r}")
            agent_map[a.id] = a
        self._agents = agent_map
        self._promises = tuple(promises)
        self._impositions = tuple(impositions)
        self._containers = {name: frozenset(members) for name, members in (containers or {}).items()}
        self._tables = dict(tables or {})
        self._validate()

    def _validate(self):
        for p in self._promises:
            if p.promiser not in self._agents:
                raise GraphError(f"promise from unknown agent {p.promiser!r}")
            if not p.scoped:
                if p.promisee not in self._agents:
                    raise GraphError(f"promise to unknown agent {p.promisee!r}")
                if p.promisee == p.promiser:
                    raise GraphError(f"agent {p.promiser!r} cannot promise itself")
            elif p.promisee.startswith(SCOPE_CONTAINER):
                name = p.promisee[1:]
                if name not in self._containers:
                    raise GraphError(f"promise scoped to unknown container {name!r}")
        for imp in self._impositions:
            if imp.imposer not in self._agents or imp.imposee not in self._agents:
                raise GraphError("imposition endpoint missing from graph")
            if imp.imposer == imp.imposee:
                raise GraphError(f"agent {imp.imposer!r} cannot impose on itself")
        for name, members in self._containers.items():
            missing = members - set(self._agents)
            if missing:
                raise GraphError(f"container {name!r} names unknown agents {sorted(missing)}")
        names = sorted(self._containers)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                ma, mb = self._containers[a], self._containers[b]
                if ma & mb and not (ma <= mb or mb <= ma):
                    raise GraphError(f"containers {a!r} and {b!r} overlap without nesting")

    # -- access ------------------------------------------------------

    @property
    def agents(self) -> Mapping[str, Agent]:
        return self._agents

    @property
    def promises(self) -> tuple[Promise, ...]:
        return self._promises

    @property
    def impositions(self) -> tuple[Imposition, ...]:
        return self._impositions

    @property
    def containers(self) -> Mapping[str, frozenset[str]]:
        return self._containers

    @property
    def tables(self) -> Mapping[str, "object"]:
        return self._tables

    def agent(self, agent_id: str) -> Agent:
        try:
            return self._agents[agent_id]
        except KeyError:
            raise GraphError(f"unknown agent {agent_id!r}") from None

    def agent_ids(self) -> list[str]:
        return sorted(self._agents)

    def expand_targets(self, promiser: str, promisee: str) -> tuple[str, ...]:
        """Point or scope promisee expanded to concrete agent ids, promiser
        excluded, sorted."""
        if promisee == SCOPE_ALL:
            ids = set(self._agents)
        elif promisee.startswith(SCOPE_CONTAINER):
            ids = set(self._containers.get(promisee[1:], frozenset()))
        else:
            ids = {promisee}
        ids.discard(promiser)
        return tuple(sorted(ids))

    def covers(self, promise: Promise, agent_id: str) -> bool:
        """Whether the promise's promisee scope includes the given agent."""
        if promise.promiser == agent_id:
            return False
        if promise.promisee == SCOPE_ALL:
            return agent_id in self._agents
        if promise.promisee.startswith(SCOPE_CONTAINER):
            return agent_id in self._containers.get(promise.promisee[1:], frozenset())
        return promise.promisee == agent_id

    def use_promises_covering(self, holder_filter=None, sender: Optional[str] = None) -> list[tuple[int, Promise]]:
        out = []
        for i, p in enumerate(self._promises):
            if p.body.polarity is not Polarity.USE:
                continue
            if holder_filter is not None and p.promiser != holder_filter:
                continue
            if sender is not None and not self.covers(p, sender):
                continue
            out.append((i, p))
        return out

    def promises_of(self, agent_id: str) -> list[Promise]:
        return [p for p in self._promises if p.promiser == agent_id]

    # -- derived graphs ----------------------------------------------

    def replace(
        self,
        agents: Optional[Iterable[Agent]] = None,
        promises: Optional[Sequence[Promise]] = None,
        impositions: Optional[Sequence[Imposition]] = None,
        containers: Optional[Mapping[str, Iterable[str]]] = None,
        tables: Optional[Mapping[str, "object"]] = None,
    ) -> "PromiseGraph":
        return PromiseGraph(
            agents if agents is not None else self._agents.values(),
            promises if promises is not None else self._promises,
            impositions if impositions is not None else self._impositions,
            containers if containers is not None else self._containers,
            tables if tables is not None else self._tables,
        )

    def with_promises(self, extra: Sequence[Promise]) -> "PromiseGraph":
        return self.replace(promises=self._promises + tuple(extra))

    def without_promise(self, victim: Promise) -> "PromiseGraph":
        kept, removed = [], False
        for p in self._promises:
            if not removed and p == victim:
                removed = True
                continue
            kept.append(p)
        if not removed:
            raise GraphError("promise not present in graph")
        return self.replace(promises=tuple(kept))

    def without_agent(self, agent_id: str) -> "PromiseGraph":
        self.agent(agent_id)
        agents = [a for a in self._agents.values() if a.id != agent_id]
        promises = tuple(
            p for p in self._promises
            if p.promiser != agent_id and (p.scoped or p.promisee != agent_id)
        )
        impositions = tuple(
            i for i in self._impositions if agent_id not in (i.imposer, i.imposee)
        )
        containers = {n: m - {agent_id} for n, m in self._containers.items()}
        return PromiseGraph(agents, promises, impositions, containers, self._tables)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PromiseGraph):
            return NotImplemented
        return (
            self._agents == other._agents
            and self._promises == other._promises
            and self._impositions == other._impositions
            and self._containers == other._containers
            and self._tables == other._tables
        )

    def __repr__(self) -> str:
        return (
            f"PromiseGraph(agents={len(self._agents)}, promises={len(self._promises)}, "
            f"impositions={len(self._impositions)}, containers={len(self._containers)})"
        )


@dataclass(frozen=True)
class Binding:
    """A matched (+, -) pair between one ordered pair of agents.

    A contract binds two promises; an exchange binds an imposition to a
    use-promise at the imposee.
    """

    giver_agent: str
    user_agent: str
    giver: Union[Promise, Imposition]
    user: Promise
    match: Match

    @property
    def exchange(self) -> bool:
        return isinstance(self.giver, Imposition)


def find_bindings(graph: PromiseGraph) -> list[Binding]:
    """Every contract (+promise, -promise) and exchange (imposition,
    -promise) pair whose bodies match, in deterministic order."""
    found = []
    uses = [(i, p) for i, p in enumerate(graph.promises) if p.body.polarity is Polarity.USE]
    for gi, giverp in enumerate(graph.promises):
        if giverp.body.polarity is not Polarity.GIVE:
            continue
        for target in graph.expand_targets(giverp.promiser, giverp.promisee):
            for ui, userp in uses:
                if userp.promiser != target or not graph.covers(userp, giverp.promiser):
                    continue
                m = match_bodies(giverp.body, userp.body)
                if m is not None:
                    found.append((giverp.promiser, target, gi, ui, Binding(giverp.promiser, target, giverp, userp, m)))
    for ii, imp in enumerate(graph.impositions):
        if imp.body.polarity is not Polarity.GIVE:
            continue
        for ui, userp in uses:
            if userp.promiser != imp.imposee or not graph.covers(userp, imp.imposer):
                continue
            m = match_bodies(imp.body, userp.body)
            if m is not None:
                found.append((imp.imposer, imp.imposee, len(graph.promises) + ii, ui, Binding(imp.imposer, imp.imposee, imp, userp, m)))
    found.sort(key=lambda t: (t[0], t[1], t[2], t[3]))
    return [b for *_, b in found]


def _matched_imposition_indices(graph: PromiseGraph) -> set[int]:
    matched = set()
    for ii, imp in enumerate(graph.impositions):
        if imp.body.polarity is not Polarity.GIVE:
            continue
        for _, userp in graph.use_promises_covering(holder_filter=imp.imposee, sender=imp.imposer):
            if match_bodies(imp.body, userp.body) is not None:
                matched.add(ii)
                break
    return matched


def unmatched_impositions(graph: PromiseGraph) -> list[Imposition]:
    """Impositions with no matching use-promise at the imposee — the
    messages an autonomous imposee will drop."""
    matched = _matched_imposition_indices(graph)
    return [imp for ii, imp in enumerate(graph.impositions) if ii not in matched]


@dataclass(frozen=True)
class Role:
    """An equivalence class of agents making identical outward promises
    (promisee identities erased)."""

    name: str
    members: frozenset[str]
    signature: tuple[str, ...]


def outward_signature(graph: PromiseGraph, agent_id: str) -> tuple[str, ...]:
    return tuple(sorted(p.body.canon() for p in graph.promises if p.promiser == agent_id))


def infer_roles(graph: PromiseGraph) -> list[Role]:
    """Partition agents by outward body multiset. Names are canonical
    hashes of the signature, so the partition is stable under renaming."""
    groups: dict[tuple[str, ...], set[str]] = {}
    for aid in graph.agents:
        groups.setdefault(outward_signature(graph, aid), set()).add(aid)
    roles = []
    for sig, members in groups.items():
        digest = hashlib.sha256("\n".join(sig).encode()).hexdigest()[:12]
        roles.append(Role(f"role-{digest}", frozenset(members), sig))
    roles.sort(key=lambda r: min(r.members))
    return roles


def container_membrane(graph: PromiseGraph, container: str) -> Counter:
    """Multiset of bodies on promises crossing the container boundary
    outward. Scope promises count once per external target."""
    if container not in graph.containers:
        raise GraphError(f"unknown container {container!r}")
    inside = graph.containers[container]
    membrane: Counter = Counter()
    for p in graph.promises:
        if p.promiser not in inside:
            continue
        for target in graph.expand_targets(p.promiser, p.promisee):
            if target not in inside:
                membrane[p.body] += 1
    return membrane


def collapse_container(graph: PromiseGraph, container: str) -> PromiseGraph:
    """Replace a container's members with one container-boundary agent
    keeping the membrane promises; internal edges are deleted and external
    edges re-targeted."""
    if container not in graph.containers:
        raise GraphError(f"unknown container {container!r}")
    inside = graph.containers[container]
    boundary_id = container
    if boundary_id in graph.agents and boundary_id not in inside:
        boundary_id = f"{container}-boundary"

    def rewrite_target(promisee: str) -> str:
        if promisee == SCOPE_ALL:
            return SCOPE_ALL
        if promisee.startswith(SCOPE_CONTAINER):
            name = promisee[1:]
            members = graph.containers.get(name, frozenset())
            if name == container or members <= inside:
                return boundary_id
            return promisee
        if promisee in inside:
            return boundary_id
        return promisee

    agents = [a for a in graph.agents.values() if a.id not in inside]
    agents.append(Agent(boundary_id, AgentKind.CONTAINER_BOUNDARY))

    promises = []
    for p in graph.promises:
        if p.promiser in inside:
            # Keep only edges with at least one outward-facing target.
            if all(t in inside for t in graph.expand_targets(p.promiser, p.promisee)):
                continue
            promises.append(Promise(boundary_id, rewrite_target(p.promisee) if p.scoped else p.promisee, p.body))
        else:
            target = rewrite_target(p.promisee)
            if target == p.promiser:
                continue
            promises.append(Promise(p.promiser, target, p.body))
    impositions = []
    for imp in graph.impositions:
        a = boundary_id if imp.imposer in inside else imp.imposer
        b = boundary_id if imp.imposee in inside else imp.imposee
        if a != b:
            impositions.append(Imposition(a, b, imp.body))

    containers = {}
    for name, members in graph.containers.items():
        if name == container or members <= inside:
            continue
        if members & inside:
            containers[name] = (members - inside) | {boundary_id}
        else:
            containers[name] = members
    return PromiseGraph(agents, promises, impositions, containers, graph.tables)


def body_set(bodies: Iterable[Body]) -> frozenset[Body]:
    """Set of bodies under canonical equality (duplicates collapse,
    polarity preserved)."""
    return frozenset(bodies)


def validate_identity_guards(graph: PromiseGraph) -> list[str]:
    """Resolve distinct-from-all-peers guards on identity promises.

    Returns violation messages (empty when every guarded identity value is
    unique among peers promising the same kind).
    """
    seen: dict[tuple[str, str], list[str]] = {}
    guarded: set[tuple[str, str, str]] = set()
    for p in graph.promises:
        if p.body.polarity is not Polarity.GIVE:
            continue
        pm = p.body.param_map()
        for key, pattern in pm.items():
            if is_guard(pattern) and pattern == GUARD_DISTINCT:
                for vkey, value in pm.items():
                    if vkey != key and not is_guard(value) and value != WILDCARD:
                        seen.setdefault((p.body.kind, value), []).append(p.promiser)
                        guarded.add((p.body.kind, value, p.promiser))
    violations = []
    for (kind, value), holders in sorted(seen.items()):
        if len(set(holders)) > 1:
            violations.append(f"{kind} value {value!r} promised by {sorted(set(holders))}")
    return violations
