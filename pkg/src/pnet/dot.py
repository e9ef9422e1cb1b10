"""Deterministic DOT rendering of a promise graph: give promises solid,
use promises dashed, impositions with a box arrowhead, containers as
nested clusters."""

from __future__ import annotations

from .core import AgentKind, Polarity, PromiseGraph

_SHAPES = {
    AgentKind.INTERFACE: "ellipse",
    AgentKind.FORWARDER: "box",
    AgentKind.SERVICE_HOST: "component",
    AgentKind.PROXY: "diamond",
    AgentKind.CONTROLLER: "octagon",
    AgentKind.CONTAINER_BOUNDARY: "folder",
}


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(graph: PromiseGraph) -> str:
    """Stable, diffable DOT text for the whole graph."""
    lines = ["digraph promises {", "  rankdir=LR;"]

    # Containers form a forest; nest clusters by strict containment and
    # emit each agent inside its innermost container.
    names = sorted(graph.containers)
    parents: dict[str, str | None] = {}
    for name in names:
        best = None
        for other in names:
            if other == name:
                continue
            if graph.containers[name] < graph.containers[other]:
                if best is None or graph.containers[other] < graph.containers[best]:
                    best = other
        parents[name] = best

    def innermost(agent_id: str) -> str | None:
        best = None
        for name in names:
            if agent_id in graph.containers[name]:
                if best is None or graph.containers[name] < graph.containers[best]:
                    best = name
        return best

    def node_line(agent_id: str, indent: str) -> str:
        shape = _SHAPES[graph.agent(agent_id).kind]
        return f"{indent}{_quote(agent_id)} [shape={shape}];"

    def emit_cluster(name: str, indent: str):
        lines.append(f"{indent}subgraph {_quote('cluster_' + name)} {{")
        lines.append(f"{indent}  label={_quote(name)};")
        for agent_id in sorted(graph.containers[name]):
            if innermost(agent_id) == name:
                lines.append(node_line(agent_id, indent + "  "))
        for child in names:
            if parents[child] == name:
                emit_cluster(child, indent + "  ")
        lines.append(f"{indent}}}")

    for name in names:
        if parents[name] is None:
            emit_cluster(name, "  ")
    for agent_id in graph.agent_ids():
        if innermost(agent_id) is None:
            lines.append(node_line(agent_id, "  "))

    scope_nodes = sorted({
        p.promisee for p in graph.promises
        if p.promisee == "*" or p.promisee.startswith("@")
    })
    for scope in scope_nodes:
        lines.append(f"  {_quote(scope)} [shape=plaintext];")

    edges = []
    for p in graph.promises:
        style = "solid" if p.body.polarity is Polarity.GIVE else "dashed"
        edges.append(
            f"  {_quote(p.promiser)} -> {_quote(p.promisee)} "
            f"[style={style}, label={_quote(p.body.canon())}];"
        )
    for i in graph.impositions:
        edges.append(
            f"  {_quote(i.imposer)} -> {_quote(i.imposee)} "
            f"[style=bold, arrowhead=box, label={_quote(i.body.canon())}];"
        )
    lines.extend(sorted(edges))
    lines.append("}")
    return "\n".join(lines) + "\n"
