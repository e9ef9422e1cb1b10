"""
The model language: a line-oriented declaration syntax with {} blocks,
parsed by recursive descent with per-declaration error recovery, plus
elaboration into a PromiseGraph and canonical rendering back to text.

Declarations:

    agent NAME kind=interface mac=00:00:11:11:11:AA
    promise A -> B body=-deliver {dst=*}
    imposition A -> B body=+deliver {dst=00:00:11:11:11:BB}
    container lan { A B }
    table arp { map ip:128.39.78.1 -> mac:00:00:11:11:11:AA
                default -> mac:00:00:11:11:11:01 }
    ethernet lan { interface A mac=... ip=... promiscuous=true }
    switch SW { port A mac=... }
    router R1 { interface I1 mac=... ip=128.39.78.1/24
                rib 192.168.2 -> I2
                default I2 }
    vlan { assign A 10 }
    tunnel t { endpoints T1 T2  tni 5000 }
    attach { T1 -> K1 }
    cell WEB { hosts 2 provides +http consumes APP:+app alt=all requires firewall-open }
    desired { +http }

Targets are an agent name, ``*`` (everyone) or ``@name`` (a container's
members). ``#`` comments run to end of line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .addressing import AddressComponent, AddressError, TableEntry, TransducerTable, parse_component
from .core import (
    Agent,
    AgentKind,
    Body,
    GraphError,
    PnetError,
    Polarity,
    Imposition,
    Promise,
    PromiseGraph,
)
from .netmodels import (
    InterfaceSpec,
    RouterSpec,
    add_members,
    attach_host,
    build_ethernet_segment,
    build_router,
    build_switch,
    build_tunnel,
    build_vlan_overlay,
    merge_graphs,
)
from .policy import Cell, ConsumeSpec, PolicySpec, compile_policy


class ModelError(PnetError):
    """Elaboration failure; carries the offending diagnostics."""

    def __init__(self, diagnostics: Sequence["Diagnostic"]):
        self.diagnostics = tuple(diagnostics)
        super().__init__("; ".join(d.render() for d in self.diagnostics))


@dataclass(frozen=True)
class Span:
    line: int
    col: int


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    span: Span
    message: str
    hint: str = ""

    def render(self) -> str:
        tail = f" ({self.hint})" if self.hint else ""
        return f"{self.span.line}:{self.span.col}: {self.severity}: {self.message}{tail}"


# -- declarations ------------------------------------------------------------


@dataclass(frozen=True)
class AgentDecl:
    name: str
    kind: Optional[str]
    attrs: tuple[tuple[str, str], ...]
    span: Span = field(compare=False, default=Span(0, 0))


@dataclass(frozen=True)
class EdgeDecl:
    edge: str  # "promise" | "imposition"
    source: str
    target: str
    body: Body
    span: Span = field(compare=False, default=Span(0, 0))


@dataclass(frozen=True)
class ContainerDecl:
    name: str
    members: tuple[str, ...]
    span: Span = field(compare=False, default=Span(0, 0))


@dataclass(frozen=True)
class TableDecl:
    name: str
    entries: tuple[tuple[str, str, Union[str, tuple[AddressComponent, ...]]], ...]
    default: Optional[tuple[AddressComponent, ...]]
    span: Span = field(compare=False, default=Span(0, 0))


@dataclass(frozen=True)
class EthernetDecl:
    name: str
    interfaces: tuple[InterfaceSpec, ...]
    span: Span = field(compare=False, default=Span(0, 0))


@dataclass(frozen=True)
class SwitchDecl:
    name: str
    ports: tuple[InterfaceSpec, ...]
    span: Span = field(compare=False, default=Span(0, 0))


@dataclass(frozen=True)
class RouterDecl:
    name: str
    interfaces: tuple[InterfaceSpec, ...]
    rib: tuple[tuple[str, str], ...]
    default: Optional[str]
    span: Span = field(compare=False, default=Span(0, 0))


@dataclass(frozen=True)
class VlanDecl:
    assignments: tuple[tuple[str, int], ...]
    span: Span = field(compare=False, default=Span(0, 0))


@dataclass(frozen=True)
class TunnelDecl:
    name: str
    endpoints: tuple[str, str]
    tni: str
    span: Span = field(compare=False, default=Span(0, 0))


@dataclass(frozen=True)
class AttachDecl:
    pairs: tuple[tuple[str, str], ...]
    span: Span = field(compare=False, default=Span(0, 0))


@dataclass(frozen=True)
class CellDecl:
    name: str
    hosts: int
    provides: tuple[Body, ...]
    consumes: tuple[tuple[str, Body, Optional[int]], ...]
    requires: tuple[str, ...]
    span: Span = field(compare=False, default=Span(0, 0))


@dataclass(frozen=True)
class DesiredDecl:
    bodies: tuple[Body, ...]
    span: Span = field(compare=False, default=Span(0, 0))


Declaration = Union[
    AgentDecl, EdgeDecl, ContainerDecl, TableDecl, EthernetDecl, SwitchDecl,
    RouterDecl, VlanDecl, TunnelDecl, AttachDecl, CellDecl, DesiredDecl,
]


@dataclass(frozen=True)
class ModelDocument:
    source: str
    declarations: tuple[Declaration, ...]


# -- tokenizer ---------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    text: str  # "\n" for end of line
    line: int
    col: int

    @property
    def newline(self) -> bool:
        return self.text == "\n"

    def span(self) -> Span:
        return Span(self.line, self.col)


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        hash_at = raw.find("#")
        line = raw[:hash_at] if hash_at >= 0 else raw
        col = 0
        n = len(line)
        while col < n:
            ch = line[col]
            if ch.isspace():
                col += 1
                continue
            if ch in "{}":
                tokens.append(Token(ch, lineno, col + 1))
                col += 1
                continue
            start = col
            while col < n and not line[col].isspace() and line[col] not in "{}":
                col += 1
            tokens.append(Token(line[start:col], lineno, start + 1))
        tokens.append(Token("\n", lineno, n + 1))
    return tokens


class _ParseProblem(Exception):
    def __init__(self, span: Span, message: str, hint: str = ""):
        self.diagnostic = Diagnostic("error", span, message, hint)
        super().__init__(message)


_KEYWORDS = (
    "agent", "promise", "imposition", "container", "table", "ethernet",
    "switch", "router", "vlan", "tunnel", "attach", "cell", "desired",
)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []

    # -- cursor helpers --

    def _peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self) -> Token:
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else Token("\n", 1, 1)
            raise _ParseProblem(last.span(), "unexpected end of input")
        self.pos += 1
        return tok

    def _skip_newlines(self):
        while (tok := self._peek()) is not None and tok.newline:
            self.pos += 1

    def _word(self, what: str) -> Token:
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else Token("\n", 1, 1)
            raise _ParseProblem(last.span(), f"expected {what}")
        if tok.newline or tok.text in "{}":
            raise _ParseProblem(tok.span(), f"expected {what}")
        self.pos += 1
        return tok

    def _expect(self, text: str):
        tok = self._peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else Token("\n", 1, 1)
            raise _ParseProblem(last.span(), f"expected {text!r}")
        if tok.text != text:
            raise _ParseProblem(tok.span(), f"expected {text!r}, found {tok.text!r}")
        self.pos += 1
        return tok

    def _recover(self):
        while (tok := self._peek()) is not None and not tok.newline:
            self.pos += 1

    def _block_tokens(self, head: Token) -> Optional[list[Token]]:
        """Consume a brace-balanced block body. On an unterminated block,
        report at the opening brace and consume only the brace so the
        remainder still parses."""
        self._skip_newlines()
        opener = self._peek()
        if opener is None or opener.text != "{":
            span = opener.span() if opener else head.span()
            raise _ParseProblem(span, f"expected '{{' after {head.text}")
        depth, scan = 0, self.pos
        while scan < len(self.tokens):
            t = self.tokens[scan]
            if t.text == "{":
                depth += 1
            elif t.text == "}":
                depth -= 1
                if depth == 0:
                    break
            scan += 1
        else:
            self.diagnostics.append(Diagnostic(
                "error", opener.span(), "unterminated block",
                "missing '}' before end of input"))
            self.pos += 1  # step past '{'; remainder parses as declarations
            return None
        body = self.tokens[self.pos + 1: scan]
        self.pos = scan + 1
        return body

    # -- small parsers --

    def _parse_kv(self, tok: Token) -> tuple[str, str]:
        if "=" not in tok.text:
            raise _ParseProblem(tok.span(), f"expected key=value, found {tok.text!r}")
        key, value = tok.text.split("=", 1)
        if not key or not value:
            raise _ParseProblem(tok.span(), f"malformed key=value {tok.text!r}")
        return key, value

    def _parse_signed_kind(self, text: str, span: Span) -> tuple[Polarity, str]:
        if text.startswith("+"):
            return Polarity.GIVE, text[1:]
        if text.startswith("-"):
            return Polarity.USE, text[1:]
        raise _ParseProblem(span, f"body needs a +/- sign, found {text!r}")

    def _parse_params_block(self) -> tuple[tuple[str, str], ...]:
        tok = self._peek()
        if tok is None or tok.text != "{":
            return ()
        self._next()
        params = []
        while True:
            tok = self._next()
            if tok.text == "}":
                break
            if tok.newline:
                continue
            params.append(self._parse_kv(tok))
        return tuple(params)

    def _parse_body(self, tok: Token) -> Body:
        polarity, kind = self._parse_signed_kind(tok.text, tok.span())
        if not kind:
            raise _ParseProblem(tok.span(), "empty body kind")
        params = self._parse_params_block()
        try:
            return Body(polarity, kind, params)
        except (GraphError, ValueError) as exc:
            raise _ParseProblem(tok.span(), str(exc)) from None

    def _parse_target(self, tok: Token) -> str:
        # Any word works syntactically; names resolve at elaboration.
        return tok.text

    # -- declaration parsers --

    def parse(self, source: str) -> ModelDocument:
        decls: list[Declaration] = []
        while True:
            self._skip_newlines()
            tok = self._peek()
            if tok is None:
                break
            try:
                decl = self._parse_declaration()
                if decl is not None:
                    decls.append(decl)
            except _ParseProblem as problem:
                self.diagnostics.append(problem.diagnostic)
                self._recover()
        return ModelDocument(source, tuple(decls))

    def _parse_declaration(self) -> Optional[Declaration]:
        head = self._next()
        name = head.text
        if name == "agent":
            return self._parse_agent(head)
        if name in ("promise", "imposition"):
            return self._parse_edge(head)
        if name == "container":
            return self._parse_container(head)
        if name == "table":
            return self._parse_table(head)
        if name == "ethernet":
            return self._parse_ethernet(head)
        if name == "switch":
            return self._parse_switch(head)
        if name == "router":
            return self._parse_router(head)
        if name == "vlan":
            return self._parse_vlan(head)
        if name == "tunnel":
            return self._parse_tunnel(head)
        if name == "attach":
            return self._parse_attach(head)
        if name == "cell":
            return self._parse_cell(head)
        if name == "desired":
            return self._parse_desired(head)
        raise _ParseProblem(
            head.span(), f"unknown declaration {name!r}",
            "expected one of: " + ", ".join(_KEYWORDS))

    def _parse_agent(self, head: Token) -> AgentDecl:
        name = self._word("agent name")
        kind = None
        attrs = []
        while (tok := self._peek()) is not None and not tok.newline:
            key, value = self._parse_kv(self._next())
            if key == "kind":
                try:
                    AgentKind(value)
                except ValueError:
                    raise _ParseProblem(tok.span(), f"unknown agent kind {value!r}") from None
                kind = value
            else:
                attrs.append((key, value))
        return AgentDecl(name.text, kind, tuple(attrs), head.span())

    def _parse_edge(self, head: Token) -> EdgeDecl:
        source = self._word("source agent")
        self._expect("->")
        target = self._parse_target(self._word("target"))
        body_tok = self._word("body=...")
        key, value = self._parse_kv(body_tok)
        if key != "body":
            raise _ParseProblem(body_tok.span(), f"expected body=..., found {key}=")
        body = self._parse_body(Token(value, body_tok.line, body_tok.col + len("body=")))
        return EdgeDecl(head.text, source.text, target, body, head.span())

    def _parse_container(self, head: Token) -> Optional[ContainerDecl]:
        name = self._word("container name")
        body = self._block_tokens(head)
        if body is None:
            return None
        members = tuple(t.text for t in body if not t.newline)
        return ContainerDecl(name.text, members, head.span())

    def _parse_table(self, head: Token) -> Optional[TableDecl]:
        name = self._word("table name")
        body = self._block_tokens(head)
        if body is None:
            return None
        entries = []
        default = None
        sub = _Parser(body + [Token("\n", head.line, head.col)])
        while True:
            sub._skip_newlines()
            tok = sub._peek()
            if tok is None:
                break
            tok = sub._next()
            if tok.text == "map":
                source = sub._word("label:pattern")
                if ":" not in source.text:
                    raise _ParseProblem(source.span(), "map source needs label:pattern")
                label, pattern = source.text.split(":", 1)
                sub._expect("->")
                entries.append((label, pattern, self._parse_table_target(sub)))
            elif tok.text == "default":
                sub._expect("->")
                target = self._parse_table_target(sub)
                if isinstance(target, str):
                    target = (AddressComponent("symbolic", target),)
                default = target
            else:
                raise _ParseProblem(tok.span(), f"expected map/default, found {tok.text!r}")
        self.diagnostics.extend(sub.diagnostics)
        return TableDecl(name.text, tuple(entries), default, head.span())

    def _parse_table_target(self, sub: "_Parser") -> Union[str, tuple[AddressComponent, ...]]:
        tok = sub._word("rewrite target")
        if ":" not in tok.text:
            return tok.text
        try:
            comps: list[AddressComponent] = []
            for piece in tok.text.split(","):
                comps.extend(parse_component(piece))
            return tuple(comps)
        except AddressError as exc:
            raise _ParseProblem(tok.span(), str(exc)) from None

    def _iface_from_attrs(self, name: str, span: Span,
                          attrs: dict[str, str]) -> InterfaceSpec:
        if "mac" not in attrs:
            raise _ParseProblem(span, f"interface {name!r} needs mac=")
        vlan = attrs.get("vlan")
        try:
            return InterfaceSpec(
                name,
                attrs["mac"],
                ip=attrs.get("ip"),
                vlan=int(vlan) if vlan is not None else None,
                promiscuous=attrs.get("promiscuous", "false").lower() == "true",
            )
        except (AddressError, ValueError) as exc:
            raise _ParseProblem(span, str(exc)) from None

    def _block_lines(self, body: list[Token]) -> list[list[Token]]:
        """Group block tokens into nonempty lines."""
        lines: list[list[Token]] = [[]]
        for t in body:
            if t.newline:
                if lines[-1]:
                    lines.append([])
            else:
                lines[-1].append(t)
        if lines and not lines[-1]:
            lines.pop()
        return lines

    def _parse_ethernet(self, head: Token) -> Optional[EthernetDecl]:
        name = self._word("segment name")
        body = self._block_tokens(head)
        if body is None:
            return None
        interfaces = []
        for line in self._block_lines(body):
            if not line:
                continue
            if line[0].text != "interface":
                raise _ParseProblem(line[0].span(), "expected 'interface NAME k=v...'")
            if len(line) < 2:
                raise _ParseProblem(line[0].span(), "interface needs a name")
            attrs = dict(self._parse_kv(t) for t in line[2:])
            interfaces.append(self._iface_from_attrs(line[1].text, line[1].span(), attrs))
        return EthernetDecl(name.text, tuple(interfaces), head.span())

    def _parse_switch(self, head: Token) -> Optional[SwitchDecl]:
        name = self._word("switch name")
        body = self._block_tokens(head)
        if body is None:
            return None
        ports = []
        for line in self._block_lines(body):
            if not line:
                continue
            if line[0].text != "port":
                raise _ParseProblem(line[0].span(), "expected 'port NAME k=v...'")
            if len(line) < 2:
                raise _ParseProblem(line[0].span(), "port needs a name")
            attrs = dict(self._parse_kv(t) for t in line[2:])
            ports.append(self._iface_from_attrs(line[1].text, line[1].span(), attrs))
        return SwitchDecl(name.text, tuple(ports), head.span())

    def _parse_router(self, head: Token) -> Optional[RouterDecl]:
        name = self._word("router name")
        body = self._block_tokens(head)
        if body is None:
            return None
        interfaces, rib = [], []
        default = None
        for line in self._block_lines(body):
            if not line:
                continue
            kw = line[0]
            if kw.text == "interface":
                if len(line) < 2:
                    raise _ParseProblem(kw.span(), "interface needs a name")
                attrs = dict(self._parse_kv(t) for t in line[2:])
                interfaces.append(self._iface_from_attrs(line[1].text, line[1].span(), attrs))
            elif kw.text == "rib":
                if len(line) != 4 or line[2].text != "->":
                    raise _ParseProblem(kw.span(), "expected 'rib PREFIX -> INTERFACE'")
                rib.append((line[1].text, line[3].text))
            elif kw.text == "default":
                if len(line) != 2:
                    raise _ParseProblem(kw.span(), "expected 'default INTERFACE'")
                default = line[1].text
            else:
                raise _ParseProblem(kw.span(), f"unexpected {kw.text!r} in router block")
        return RouterDecl(name.text, tuple(interfaces), tuple(rib), default, head.span())

    def _parse_vlan(self, head: Token) -> Optional[VlanDecl]:
        body = self._block_tokens(head)
        if body is None:
            return None
        assignments = []
        for line in self._block_lines(body):
            if not line:
                continue
            if line[0].text != "assign" or len(line) != 3:
                raise _ParseProblem(line[0].span(), "expected 'assign INTERFACE TAG'")
            try:
                tag = int(line[2].text)
            except ValueError:
                raise _ParseProblem(line[2].span(), f"bad VLAN tag {line[2].text!r}") from None
            assignments.append((line[1].text, tag))
        return VlanDecl(tuple(assignments), head.span())

    def _parse_tunnel(self, head: Token) -> Optional[TunnelDecl]:
        name = self._word("tunnel name")
        body = self._block_tokens(head)
        if body is None:
            return None
        endpoints: Optional[tuple[str, str]] = None
        tni = None
        for line in self._block_lines(body):
            if not line:
                continue
            kw = line[0]
            if kw.text == "endpoints":
                if len(line) != 3:
                    raise _ParseProblem(kw.span(), "expected 'endpoints A B'")
                endpoints = (line[1].text, line[2].text)
            elif kw.text == "tni":
                if len(line) != 2:
                    raise _ParseProblem(kw.span(), "expected 'tni VALUE'")
                tni = line[1].text
            else:
                raise _ParseProblem(kw.span(), f"unexpected {kw.text!r} in tunnel block")
        if endpoints is None or tni is None:
            raise _ParseProblem(head.span(), "tunnel needs endpoints and tni")
        return TunnelDecl(name.text, endpoints, tni, head.span())

    def _parse_attach(self, head: Token) -> Optional[AttachDecl]:
        body = self._block_tokens(head)
        if body is None:
            return None
        pairs = []
        for line in self._block_lines(body):
            if not line:
                continue
            if len(line) != 3 or line[1].text != "->":
                raise _ParseProblem(line[0].span(), "expected 'HOST -> PORT'")
            pairs.append((line[0].text, line[2].text))
        return AttachDecl(tuple(pairs), head.span())

    def _parse_cell(self, head: Token) -> Optional[CellDecl]:
        name = self._word("cell name")
        body = self._block_tokens(head)
        if body is None:
            return None
        sub = _Parser(body + [Token("\n", head.line, head.col)])
        hosts = None
        provides: list[Body] = []
        consumes: list[tuple[str, Body, Optional[int]]] = []
        requires: list[str] = []
        while True:
            sub._skip_newlines()
            tok = sub._peek()
            if tok is None:
                break
            tok = sub._next()
            if tok.text == "hosts":
                count = sub._word("host count")
                try:
                    hosts = int(count.text)
                except ValueError:
                    raise _ParseProblem(count.span(), f"bad host count {count.text!r}") from None
            elif tok.text == "provides":
                provides.append(sub._parse_body(sub._word("+body")))
            elif tok.text == "consumes":
                ref = sub._word("CELL:+body")
                if ":" not in ref.text:
                    raise _ParseProblem(ref.span(), "consumes needs CELL:+body")
                provider, signed = ref.text.split(":", 1)
                polarity, kind = sub._parse_signed_kind(signed, ref.span())
                params = sub._parse_params_block()
                body_obj = Body(polarity, kind, params)
                alt: Optional[int] = None
                nxt = sub._peek()
                if nxt is not None and not nxt.newline and nxt.text.startswith("alt="):
                    sub._next()
                    value = nxt.text[4:]
                    if value != "all":
                        try:
                            alt = int(value)
                        except ValueError:
                            raise _ParseProblem(nxt.span(), f"bad alt {value!r}") from None
                consumes.append((provider, body_obj, alt))
            elif tok.text == "requires":
                while (nxt := sub._peek()) is not None and not nxt.newline \
                        and nxt.text not in ("hosts", "provides", "consumes", "requires"):
                    requires.append(sub._next().text)
            else:
                raise _ParseProblem(tok.span(), f"unexpected {tok.text!r} in cell block")
        self.diagnostics.extend(sub.diagnostics)
        if hosts is None:
            raise _ParseProblem(head.span(), f"cell {name.text!r} needs 'hosts N'")
        return CellDecl(name.text, hosts, tuple(provides), tuple(consumes),
                        tuple(requires), head.span())

    def _parse_desired(self, head: Token) -> Optional[DesiredDecl]:
        body = self._block_tokens(head)
        if body is None:
            return None
        sub = _Parser(body + [Token("\n", head.line, head.col)])
        bodies = []
        while True:
            sub._skip_newlines()
            tok = sub._peek()
            if tok is None:
                break
            bodies.append(sub._parse_body(sub._next()))
        self.diagnostics.extend(sub.diagnostics)
        return DesiredDecl(tuple(bodies), head.span())


def parse_model(text: str, source: str = "<model>") -> tuple[ModelDocument, list[Diagnostic]]:
    """Parse model text. Recovers at declaration boundaries so several
    errors are reported in one pass; never raises on any input."""
    parser = _Parser(_tokenize(text))
    doc = parser.parse(source)
    return doc, parser.diagnostics


# -- elaboration -------------------------------------------------------------


def elaborate(doc: ModelDocument) -> PromiseGraph:
    """Resolve a parsed document into a promise graph: builders expand,
    policy cells compile, names resolve (errors carry spans)."""
    errors: list[Diagnostic] = []

    def fail(span: Span, message: str):
        errors.append(Diagnostic("error", span, message))

    parts: list[PromiseGraph] = []
    plain_agents: list[tuple[AgentDecl, Agent]] = []
    cells: list[CellDecl] = []
    desired: list[Body] = []
    for decl in doc.declarations:
        try:
            if isinstance(decl, AgentDecl):
                kind = AgentKind(decl.kind) if decl.kind else AgentKind.SERVICE_HOST
                plain_agents.append((decl, Agent(decl.name, kind, decl.attrs)))
            elif isinstance(decl, EthernetDecl):
                parts.append(build_ethernet_segment(decl.interfaces, name=decl.name))
            elif isinstance(decl, SwitchDecl):
                parts.append(build_switch(decl.ports, id=decl.name))
            elif isinstance(decl, RouterDecl):
                parts.append(build_router(RouterSpec(
                    decl.name, decl.interfaces, dict(decl.rib), decl.default)))
            elif isinstance(decl, CellDecl):
                cells.append(decl)
            elif isinstance(decl, DesiredDecl):
                desired.extend(decl.bodies)
        except (PnetError, ValueError) as exc:
            fail(decl.span, str(exc))
    if cells:
        try:
            spec = PolicySpec(
                tuple(Cell(c.name, c.hosts, c.provides,
                           tuple(ConsumeSpec(p, b, a) for p, b, a in c.consumes),
                           frozenset(c.requires)) for c in cells),
                frozenset(desired),
            )
            parts.append(compile_policy(spec))
        except PnetError as exc:
            fail(cells[0].span, str(exc))
    if errors:
        raise ModelError(errors)

    graph = merge_graphs(*parts) if parts else PromiseGraph([])
    if plain_agents:
        extra = []
        for decl, agent in plain_agents:
            if agent.id in graph.agents:
                fail(decl.span, f"agent {agent.id!r} already defined")
            else:
                extra.append(agent)
        if errors:
            raise ModelError(errors)
        graph = merge_graphs(graph, PromiseGraph(extra))

    # tables
    tables = dict(graph.tables)
    for decl in doc.declarations:
        if isinstance(decl, TableDecl):
            if decl.name in tables:
                fail(decl.span, f"table {decl.name!r} already defined")
                continue
            try:
                tables[decl.name] = TransducerTable(
                    decl.name,
                    [TableEntry(l, p, t) for l, p, t in decl.entries],
                    decl.default,
                )
            except AddressError as exc:
                fail(decl.span, str(exc))
    graph = graph.replace(tables=tables)

    # containers first (edges may be scoped to them), then attachments and edges
    for decl in doc.declarations:
        try:
            if isinstance(decl, ContainerDecl):
                graph = add_members(graph, decl.name, decl.members)
        except PnetError as exc:
            fail(decl.span, str(exc))
    if errors:
        raise ModelError(errors)
    for decl in doc.declarations:
        try:
            if isinstance(decl, AttachDecl):
                for host, port in decl.pairs:
                    graph = attach_host(graph, host, port)
            elif isinstance(decl, EdgeDecl):
                if decl.source not in graph.agents:
                    fail(decl.span, f"unknown agent {decl.source!r}")
                    continue
                if decl.edge == "promise":
                    target = decl.target
                    if target.startswith("@") and target[1:] not in graph.containers:
                        fail(decl.span, f"unknown container {target[1:]!r}")
                        continue
                    if not target.startswith("@") and target != "*" and target not in graph.agents:
                        fail(decl.span, f"unknown agent {target!r}")
                        continue
                    graph = graph.with_promises([Promise(decl.source, target, decl.body)])
                else:
                    if decl.target not in graph.agents:
                        fail(decl.span, f"unknown agent {decl.target!r}")
                        continue
                    graph = graph.replace(impositions=graph.impositions + (
                        Imposition(decl.source, decl.target, decl.body),))
        except PnetError as exc:
            fail(decl.span, str(exc))
    if errors:
        raise ModelError(errors)

    # overlays last: they rewrite what the base graph promised
    for decl in doc.declarations:
        try:
            if isinstance(decl, VlanDecl):
                graph = build_vlan_overlay(graph, dict(decl.assignments))
            elif isinstance(decl, TunnelDecl):
                graph = build_tunnel(graph, decl.endpoints,
                                     AddressComponent("tni", decl.tni))
        except PnetError as exc:
            fail(decl.span, str(exc))
    if errors:
        raise ModelError(errors)
    return graph


def desired_bodies(doc: ModelDocument) -> frozenset[Body]:
    bodies: list[Body] = []
    for decl in doc.declarations:
        if isinstance(decl, DesiredDecl):
            bodies.extend(decl.bodies)
    return frozenset(bodies)


def policy_spec_of(doc: ModelDocument) -> Optional[PolicySpec]:
    cells = [d for d in doc.declarations if isinstance(d, CellDecl)]
    if not cells:
        return None
    return PolicySpec(
        tuple(Cell(c.name, c.hosts, c.provides,
                   tuple(ConsumeSpec(p, b, a) for p, b, a in c.consumes),
                   frozenset(c.requires)) for c in cells),
        desired_bodies(doc),
    )


# -- rendering ---------------------------------------------------------------


def _render_body(body: Body) -> str:
    text = f"{body.polarity.value}{body.kind}"
    if body.params:
        inner = " ".join(f"{k}={v}" for k, v in body.params)
        text += f" {{{inner}}}"
    return text


def _render_component_list(comps: Sequence[AddressComponent]) -> str:
    return ",".join(f"{c.label}:{c.value}" for c in comps)


def render_document(doc: ModelDocument) -> str:
    """Canonical text for a document; parse(render(parse(x))) is
    structurally equal to parse(x)."""
    lines: list[str] = []
    for decl in doc.declarations:
        if isinstance(decl, AgentDecl):
            parts = [f"agent {decl.name}"]
            if decl.kind:
                parts.append(f"kind={decl.kind}")
            parts += [f"{k}={v}" for k, v in decl.attrs]
            lines.append(" ".join(parts))
        elif isinstance(decl, EdgeDecl):
            lines.append(f"{decl.edge} {decl.source} -> {decl.target} "
                         f"body={_render_body(decl.body)}")
        elif isinstance(decl, ContainerDecl):
            lines.append(f"container {decl.name} {{ {' '.join(decl.members)} }}")
        elif isinstance(decl, TableDecl):
            lines.append(f"table {decl.name} {{")
            for label, pattern, target in decl.entries:
                rendered = target if isinstance(target, str) else _render_component_list(target)
                lines.append(f"  map {label}:{pattern} -> {rendered}")
            if decl.default is not None:
                lines.append(f"  default -> {_render_component_list(decl.default)}")
            lines.append("}")
        elif isinstance(decl, (EthernetDecl, SwitchDecl)):
            keyword = "ethernet" if isinstance(decl, EthernetDecl) else "switch"
            entry = "interface" if isinstance(decl, EthernetDecl) else "port"
            specs = decl.interfaces if isinstance(decl, EthernetDecl) else decl.ports
            lines.append(f"{keyword} {decl.name} {{")
            for s in specs:
                lines.append(f"  {entry} {s.id} {_render_iface(s)}")
            lines.append("}")
        elif isinstance(decl, RouterDecl):
            lines.append(f"router {decl.name} {{")
            for s in decl.interfaces:
                lines.append(f"  interface {s.id} {_render_iface(s)}")
            for prefix, target in decl.rib:
                lines.append(f"  rib {prefix} -> {target}")
            if decl.default:
                lines.append(f"  default {decl.default}")
            lines.append("}")
        elif isinstance(decl, VlanDecl):
            lines.append("vlan {")
            for iface, tag in decl.assignments:
                lines.append(f"  assign {iface} {tag}")
            lines.append("}")
        elif isinstance(decl, TunnelDecl):
            lines.append(f"tunnel {decl.name} {{")
            lines.append(f"  endpoints {decl.endpoints[0]} {decl.endpoints[1]}")
            lines.append(f"  tni {decl.tni}")
            lines.append("}")
        elif isinstance(decl, AttachDecl):
            lines.append("attach {")
            for host, port in decl.pairs:
                lines.append(f"  {host} -> {port}")
            lines.append("}")
        elif isinstance(decl, CellDecl):
            lines.append(f"cell {decl.name} {{")
            lines.append(f"  hosts {decl.hosts}")
            for b in decl.provides:
                lines.append(f"  provides {_render_body(b)}")
            for provider, body, alt in decl.consumes:
                suffix = "" if alt is None else f" alt={alt}"
                signed = f"{provider}:{body.polarity.value}{body.kind}"
                params = ""
                if body.params:
                    params = " {" + " ".join(f"{k}={v}" for k, v in body.params) + "}"
                lines.append(f"  consumes {signed}{params}{suffix}")
            if decl.requires:
                lines.append(f"  requires {' '.join(decl.requires)}")
            lines.append("}")
        elif isinstance(decl, DesiredDecl):
            lines.append("desired {")
            for b in decl.bodies:
                lines.append(f"  {_render_body(b)}")
            lines.append("}")
    return "\n".join(lines) + ("\n" if lines else "")


def _render_iface(s: InterfaceSpec) -> str:
    parts = [f"mac={s.mac}"]
    if s.ip:
        parts.append(f"ip={s.ip}")
    if s.vlan is not None:
        parts.append(f"vlan={s.vlan}")
    if s.promiscuous:
        parts.append("promiscuous=true")
    return " ".join(parts)


def render_graph(graph: PromiseGraph) -> str:
    """A promise graph as primitive model declarations (agents, containers,
    tables, edges); elaborating the output reproduces the graph."""
    lines: list[str] = []
    for aid in graph.agent_ids():
        a = graph.agent(aid)
        parts = [f"agent {aid}", f"kind={a.kind.value}"]
        parts += [f"{k}={v}" for k, v in a.attributes]
        lines.append(" ".join(parts))
    for name in sorted(graph.containers):
        members = " ".join(sorted(graph.containers[name]))
        lines.append(f"container {name} {{ {members} }}")
    for name in sorted(graph.tables):
        table = graph.tables[name]
        if not isinstance(table, TransducerTable):
            continue
        lines.append(f"table {name} {{")
        for e in table.entries:
            rendered = e.target if isinstance(e.target, str) else _render_component_list(e.target)
            lines.append(f"  map {e.label}:{e.pattern} -> {rendered}")
        if table.default is not None:
            lines.append(f"  default -> {_render_component_list(table.default)}")
        lines.append("}")
    for p in graph.promises:
        lines.append(f"promise {p.promiser} -> {p.promisee} body={_render_body(p.body)}")
    for i in graph.impositions:
        lines.append(f"imposition {i.imposer} -> {i.imposee} body={_render_body(i.body)}")
    return "\n".join(lines) + ("\n" if lines else "")
