"""Independent brute-force oracles and generators for the randomized
corpus.

Everything here re-implements the semantics from scratch over plain dicts
(own pattern matcher, own traversal); the only shared surface is the
public graph structure it reads. Keep it that way: these are the checks
the engine has to agree with.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from pnet.core import (
    Agent,
    AgentKind,
    Imposition,
    Polarity,
    Promise,
    PromiseGraph,
    give,
    use,
)

GUARD_SELF = "@destination-equals-self"


# -- plain view of a graph ---------------------------------------------------


@dataclass
class View:
    macs: dict
    forwarder: dict
    containers: dict
    use_edges: list   # (holder, promisee, dst_pattern)
    fwd_edges: list   # (holder, promisee, dst_pattern)


def view_of(graph: PromiseGraph) -> View:
    macs, forwarder = {}, {}
    for aid, agent in graph.agents.items():
        macs[aid] = agent.attr("mac")
        forwarder[aid] = agent.kind is AgentKind.FORWARDER
    use_edges, fwd_edges = [], []
    for p in graph.promises:
        dst = p.body.get("dst") or "*"
        if p.body.polarity is Polarity.USE and p.body.kind == "deliver":
            use_edges.append((p.promiser, p.promisee, dst))
        elif p.body.polarity is Polarity.GIVE and p.body.kind == "forward":
            fwd_edges.append((p.promiser, p.promisee, dst))
    return View(macs, forwarder, {n: set(m) for n, m in graph.containers.items()},
                use_edges, fwd_edges)


def _covers(view: View, promisee: str, holder: str, sender: str) -> bool:
    if sender == holder:
        return False
    if promisee == "*":
        return True
    if promisee.startswith("@"):
        return sender in view.containers.get(promisee[1:], set())
    return promisee == sender


def _pattern_hit(pattern: str, value: str, owner_mac) -> tuple[bool, bool]:
    """(matches, pins-finality) for the restricted corpus patterns."""
    if pattern == "*":
        return True, False
    if pattern == GUARD_SELF:
        return value == owner_mac, True
    return value in pattern.split("|"), True


def _accepts(view: View, receiver: str, sender: str, value: str):
    """None (refuses) / 'final' / 'any'."""
    best = None
    for holder, promisee, dst in view.use_edges:
        if holder != receiver or not _covers(view, promisee, holder, sender):
            continue
        ok, pins = _pattern_hit(dst, value, view.macs.get(receiver))
        if not ok:
            continue
        if pins:
            return "final"
        best = "any"
    return best


def _expand(view: View, holder: str, promisee: str) -> list:
    if promisee == "*":
        return [a for a in view.macs if a != holder]
    if promisee.startswith("@"):
        return [a for a in view.containers.get(promisee[1:], set()) if a != holder]
    return [promisee] if promisee != holder else []


def oracle_reachable(graph: PromiseGraph, src: str, dst: str) -> bool:
    """Exhaustive search over promise-respecting paths: does some path end
    in a voluntary accept at dst?"""
    if src == dst:
        return True
    view = view_of(graph)
    value = view.macs.get(dst)
    if value is None:
        raise ValueError(f"{dst} has no address")
    # State: (agent, transmit rights). Rights come from being the source,
    # being a forwarder, or having been explicitly forwarded to.
    stack = [(src, True)]
    seen = set()
    while stack:
        x, may_tx = stack.pop()
        if (x, may_tx) in seen:
            continue
        seen.add((x, may_tx))
        for holder, promisee, dst_pat in view.fwd_edges:
            if holder != x:
                continue
            ok, _ = _pattern_hit(dst_pat, value, view.macs.get(x))
            if not ok:
                continue
            for y in _expand(view, holder, promisee):
                outcome = _accepts(view, y, x, value)
                if outcome is None:
                    continue
                if outcome == "final":
                    if y == dst:
                        return True
                    continue
                stack.append((y, True))
        if may_tx:
            for y in view.macs:
                if y == x:
                    continue
                outcome = _accepts(view, y, x, value)
                if outcome is None:
                    continue
                if outcome == "final":
                    if y == dst:
                        return True
                    continue
                stack.append((y, view.forwarder[y]))
    return False


def oracle_spof(graph: PromiseGraph, src: str, dst: str) -> set:
    """One-agent-removal oracle on top of oracle_reachable."""
    out = set()
    for aid in sorted(graph.agents):
        if aid in (src, dst):
            continue
        if not oracle_reachable(graph.without_agent(aid), src, dst):
            out.add(aid)
    return out


# -- brute-force binding oracle ----------------------------------------------


def _body_match(plus, minus) -> bool:
    kinds_ok = plus.kind == minus.kind or (plus.kind == "forward" and minus.kind == "deliver")
    if not kinds_ok:
        return False
    pm, mm = dict(plus.params), dict(minus.params)
    for key in set(pm) | set(mm):
        a, b = pm.get(key, "*"), mm.get(key, "*")
        if a.startswith("@"):
            a = "*"
        if b.startswith("@"):
            b = "*"
        if a == "*" or b == "*":
            continue
        if not set(a.split("|")) & set(b.split("|")):
            return False
    return True


def oracle_bindings(graph: PromiseGraph):
    """Exhaustive double loop over all expanded edge pairs."""
    found = []
    expanded_gives, expanded_uses = [], []
    for idx, p in enumerate(graph.promises):
        targets = graph.expand_targets(p.promiser, p.promisee)
        if p.body.polarity is Polarity.GIVE:
            expanded_gives.append((idx, p, targets))
        else:
            expanded_uses.append((idx, p, targets))
    for gi, gp, gtargets in expanded_gives:
        for ui, up, utargets in expanded_uses:
            for t in gtargets:
                if up.promiser == t and gp.promiser in utargets \
                        and _body_match(gp.body, up.body):
                    found.append((gp.promiser, t, gi, ui))
    for ii, imp in enumerate(graph.impositions):
        if imp.body.polarity is not Polarity.GIVE:
            continue
        for ui, up, utargets in expanded_uses:
            if up.promiser == imp.imposee and imp.imposer in utargets \
                    and _body_match(imp.body, up.body):
                found.append((imp.imposer, imp.imposee, f"imp{ii}", ui))
    return sorted(found, key=str)


# -- random corpus -----------------------------------------------------------


def random_graph(rng: random.Random, max_agents: int = 8, max_edges: int = 24) -> PromiseGraph:
    n = rng.randint(2, max_agents)
    ids = [f"n{i}" for i in range(n)]
    macs = {aid: f"00:00:00:00:00:{i + 1:02x}" for i, aid in enumerate(ids)}
    agents = []
    for aid in ids:
        kind = AgentKind.FORWARDER if rng.random() < 0.25 else AgentKind.INTERFACE
        agents.append(Agent(aid, kind, {"mac": macs[aid]}))

    containers = {}
    if rng.random() < 0.4 and n >= 3:
        cut = rng.randint(1, n - 1)
        containers["zone-a"] = set(ids[:cut])
        if rng.random() < 0.5:
            containers["zone-b"] = set(ids[cut:])

    def temptarget(holder):
        roll = rng.random()
        if roll < 0.2:
            return "*"
        if roll < 0.3 and containers:
            return "@" + rng.choice(sorted(containers))
        choice = rng.choice(ids)
        return choice if choice != holder else "*"

    promises = []
    impositions = []
    budget = rng.randint(2, max_edges)
    for _ in range(budget):
        holder = rng.choice(ids)
        roll = rng.random()
        if roll < 0.35:
            promises.append(Promise(holder, temptarget(holder), use("deliver", dst="*")))
        elif roll < 0.6:
            pattern = GUARD_SELF if rng.random() < 0.7 else macs[rng.choice(ids)]
            promises.append(Promise(holder, temptarget(holder), use("deliver", dst=pattern)))
        elif roll < 0.9:
            dst = macs[rng.choice(ids)] if rng.random() < 0.8 else "*"
            promises.append(Promise(holder, temptarget(holder), give("forward", dst=dst)))
        else:
            other = rng.choice([a for a in ids if a != holder])
            impositions.append(Imposition(holder, other, give("deliver", dst=macs[rng.choice(ids)])))
    return PromiseGraph(agents, promises, impositions, containers)


# -- random policy specs -----------------------------------------------------


def random_policy_spec(rng: random.Random):
    from pnet.policy import Cell, ConsumeSpec, PolicySpec

    n_cells = rng.randint(1, 4)
    cells = []
    service_names = iter(f"svc-{i}" for i in range(100))
    for i in range(n_cells):
        name = f"cell{i}"
        provides = tuple(give(next(service_names)) for _ in range(rng.randint(1, 2)))
        consumes = []
        for j in range(i):
            if rng.random() < 0.6:
                provider = cells[j]
                consumes.append(ConsumeSpec(provider.name, rng.choice(provider.provides)))
        requirements = {"firewall-open"} if rng.random() < 0.7 else set()
        cells.append(Cell(name, rng.randint(1, 3), provides, tuple(consumes),
                          frozenset(requirements)))
    return PolicySpec(tuple(cells))


# -- a small DOT syntax checker ----------------------------------------------


class DotSyntaxError(Exception):
    pass


def check_dot(text: str) -> bool:
    """Validate DOT output against the core grammar subset we emit:
    digraph ID? { stmt* } with node/edge/subgraph/attr statements."""
    tokens = _dot_tokens(text)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take(expected=None):
        nonlocal pos
        tok = peek()
        if tok is None:
            raise DotSyntaxError("unexpected end of input")
        if expected is not None and tok != expected:
            raise DotSyntaxError(f"expected {expected!r}, got {tok!r}")
        pos += 1
        return tok

    def ident():
        tok = take()
        if tok in ("{", "}", "[", "]", ";", "=", ",", "->"):
            raise DotSyntaxError(f"expected identifier, got {tok!r}")
        return tok

    def attr_list():
        take("[")
        while peek() != "]":
            ident()
            take("=")
            ident()
            if peek() == ",":
                take(",")
        take("]")

    def body():
        take("{")
        while peek() != "}":
            tok = peek()
            if tok == "subgraph":
                take()
                ident()
                body()
                continue
            ident()
            if peek() == "=":
                take("=")
                ident()
            elif peek() == "->":
                take("->")
                ident()
                if peek() == "[":
                    attr_list()
            elif peek() == "[":
                attr_list()
            if peek() == ";":
                take(";")
        take("}")

    take("digraph")
    if peek() != "{":
        ident()
    body()
    if peek() is not None:
        raise DotSyntaxError(f"trailing content: {peek()!r}")
    return True


def _dot_tokens(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == '"':
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == '"':
                    break
                j += 1
            if j >= n:
                raise DotSyntaxError("unterminated string")
            tokens.append(text[i:j + 1])
            i = j + 1
            continue
        if text.startswith("->", i):
            tokens.append("->")
            i += 2
            continue
        if ch in "{}[];=,":
            tokens.append(ch)
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in '{}[];=,"' \
                and not text.startswith("->", j):
            j += 1
        tokens.append(text[i:j])
        i = j
    return tokens
