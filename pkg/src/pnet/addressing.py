"""
Multiplet addresses, scope tests, scaling arithmetic, transducer tables
and tunnel encapsulation.

An address is an ordered sequence of labeled components, outermost first
(e.g. prefix, local, mac). Forwarding machinery only ever interprets the
components it has promised to recognize; everything else rides along as
payload.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .core import PnetError

LABELS = ("mac", "prefix", "local", "vlan", "tni", "symbolic")
MAX_COMPONENTS = 8
BROADCAST_MAC = "ff:ff:ff:ff:ff:ff"

_MAC_RE = re.compile(r"^[0-9A-Fa-f]{2}(:[0-9A-Fa-f]{2}){5}$")
_NUMERIC_RE = re.compile(r"^[0-9]+(\.[0-9]+)*$")


class AddressError(PnetError):
    """Raised for malformed addresses, components or table operations."""


@dataclass(frozen=True)
class AddressComponent:
    label: str
    value: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise AddressError(f"unknown address label {self.label!r}")
        if not self.value:
            raise AddressError("empty component value")
        if self.label == "mac" and not _MAC_RE.match(self.value):
            raise AddressError(f"bad MAC {self.value!r}: want 6 colon-separated hex octets")
        if self.label in ("prefix", "local") and not _NUMERIC_RE.match(self.value):
            raise AddressError(f"bad {self.label} {self.value!r}: want dotted decimal or integer")
        if self.label == "vlan":
            if not self.value.isdigit() or not 1 <= int(self.value) <= 4094:
                raise AddressError(f"VLAN tag {self.value!r} outside 1-4094")
        if self.label == "tni" and not self.value.isdigit():
            raise AddressError(f"bad TNI {self.value!r}")

    def __str__(self) -> str:
        return f"{self.label}:{self.value}"


@dataclass(frozen=True)
class MultipletAddress:
    """Ordered labeled components, outermost first; labels unique."""

    components: tuple[AddressComponent, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise AddressError("address needs at least one component")
        if len(comps) > MAX_COMPONENTS:
            raise AddressError(f"address exceeds {MAX_COMPONENTS} components")
        labels = [c.label for c in comps]
        if len(set(labels)) != len(labels):
            raise AddressError(f"duplicate labels in address {labels}")

    def get(self, label: str) -> Optional[str]:
        for c in self.components:
            if c.label == label:
                return c.value
        return None

    def has(self, label: str) -> bool:
        return self.get(label) is not None

    def active_components(self) -> tuple[AddressComponent, ...]:
        """The outermost addressing layer: everything up to and including
        a tunnel id. Components inside a tunnel are payload, invisible to
        forwarding until decapsulation."""
        for i, c in enumerate(self.components):
            if c.label == "tni":
                return self.components[: i + 1]
        return self.components

    def matching_params(self) -> dict[str, str]:
        """Active-layer component values keyed by label, plus 'dst' for the
        innermost active component (the hop-terminal destination)."""
        active = self.active_components()
        params = {c.label: c.value for c in active}
        params["dst"] = active[-1].value
        return params

    def is_broadcast(self) -> bool:
        # A tunneled frame is a unicast to the far endpoint, whatever it carries.
        return self.get("mac") == BROADCAST_MAC and not self.has("tni")

    def __str__(self) -> str:
        return ",".join(str(c) for c in self.components)


def address(*components: AddressComponent) -> MultipletAddress:
    return MultipletAddress(tuple(components))


def component(label: str, value: Union[str, int]) -> AddressComponent:
    return AddressComponent(label, str(value))


def parse_component(text: str) -> list[AddressComponent]:
    """One address-literal token -> components.

    ``mac:00:00:11:11:11:AA``, ``vlan:10``, ``tni:5000``, ``prefix:128.39``,
    ``local:4``, ``sym:www`` and ``ip:128.39.78.4/24`` (split into
    prefix+local at an octet-aligned mask).
    """
    if ":" not in text:
        raise AddressError(f"component literal {text!r} needs label:value")
    label, value = text.split(":", 1)
    if label == "sym":
        label = "symbolic"
    if label == "ip":
        return list(parse_ip(value))
    return [AddressComponent(label, value)]


def parse_ip(value: str) -> tuple[AddressComponent, AddressComponent]:
    """``a.b.c.d/mask`` -> (prefix, local); masks 8/16/24 only."""
    if "/" not in value:
        raise AddressError(f"ip literal {value!r} needs /mask")
    dotted, mask_s = value.rsplit("/", 1)
    octets = dotted.split(".")
    if len(octets) != 4 or not all(o.isdigit() and 0 <= int(o) <= 255 for o in octets):
        raise AddressError(f"bad IPv4 {dotted!r}")
    try:
        mask = int(mask_s)
    except ValueError:
        raise AddressError(f"bad mask {mask_s!r}") from None
    if mask not in (8, 16, 24):
        raise AddressError(f"mask /{mask} not octet-aligned (8, 16 or 24)")
    split = mask // 8
    return (
        AddressComponent("prefix", ".".join(octets[:split])),
        AddressComponent("local", ".".join(octets[split:])),
    )


def parse_address(text: str) -> MultipletAddress:
    """Comma-separated component literals -> address, outermost first."""
    comps: list[AddressComponent] = []
    for token in text.split(","):
        token = token.strip()
        if token:
            comps.extend(parse_component(token))
    return MultipletAddress(tuple(comps))


# -- scaling arithmetic ---------------------------------------------------


@dataclass(frozen=True)
class ScalingParams:
    n: int  # total address bits
    p: int  # prefix bits

    def __post_init__(self):
        if not (0 <= self.p <= self.n <= 128):
            raise AddressError(f"need 0 <= p <= n <= 128, got n={self.n} p={self.p}")


def scaling_split(params: ScalingParams) -> tuple[int, int]:
    """(containers, addresses per container) = (2^p, 2^(n-p)), exact."""
    return (1 << params.p, 1 << (params.n - params.p))


# -- scope ----------------------------------------------------------------


def same_scope(a: MultipletAddress, b: MultipletAddress, label: str) -> bool:
    """Whether two addresses share the labeled component's value."""
    va, vb = a.get(label), b.get(label)
    if va is None or vb is None:
        raise AddressError(f"label {label!r} missing from address")
    return va == vb


# -- transducer tables ----------------------------------------------------


@dataclass(frozen=True)
class TableEntry:
    """Source component pattern -> rewrite.

    ``label`` may be any address label, or ``ip`` to match the
    (prefix, local) pair jointly. ``target`` is either replacement
    component(s) or an opaque string (a RIB's egress interface id, a
    tenant registry's owner).
    """

    label: str
    pattern: str
    target: Union[str, tuple[AddressComponent, ...]]

    def __post_init__(self):
        if self.label not in LABELS + ("ip",):
            raise AddressError(f"unknown table label {self.label!r}")
        if not self.pattern:
            raise AddressError("empty table pattern")
        if isinstance(self.target, (list, tuple)):
            object.__setattr__(self, "target", tuple(self.target))

    def replacement(self) -> tuple[AddressComponent, ...]:
        if isinstance(self.target, str):
            return (AddressComponent("symbolic", self.target),)
        return self.target

    def matches(self, value: str) -> bool:
        if self.label in ("prefix", "ip"):
            return value == self.pattern or value.startswith(self.pattern + ".")
        return value == self.pattern


class TransducerTable:
    """A logical rewriting table (ARP, DNS, NAT, RIB, tenant registry).

    Entries are consulted longest-pattern-first, then by insertion order.
    """

    def __init__(self, name: str, entries: Iterable[TableEntry] = (),
                 default: Union[str, Sequence[AddressComponent], None] = None):
        if not name:
            raise AddressError("table needs a name")
        self.name = name
        self.entries = tuple(entries)
        if isinstance(default, str):
            default = (AddressComponent("symbolic", default),)
        self.default = tuple(default) if default is not None else None
        self._order = sorted(
            range(len(self.entries)),
            key=lambda i: (-len(self.entries[i].pattern), i),
        )

    def lookup(self, label: str, value: str) -> Optional[TableEntry]:
        """Longest matching entry for one labeled value, or None."""
        for i in self._order:
            e = self.entries[i]
            if e.label == label and e.matches(value):
                return e
        return None

    def __eq__(self, other) -> bool:
        if not isinstance(other, TransducerTable):
            return NotImplemented
        return (self.name, self.entries, self.default) == (other.name, other.entries, other.default)

    def __repr__(self) -> str:
        return f"TransducerTable({self.name!r}, {len(self.entries)} entries)"


@dataclass(frozen=True)
class TransduceResult:
    address: MultipletAddress
    matched: bool  # False only when nothing applied (no entry, no default)
    used_default: bool = False


def _domain_labels(table: TransducerTable) -> set[str]:
    labels: set[str] = set()
    for e in table.entries:
        if e.label == "ip":
            labels.update(("prefix", "local"))
        else:
            labels.add(e.label)
    return labels


def transduce(table: TransducerTable, addr: MultipletAddress) -> TransduceResult:
    """Rewrite the first matched component(s) per longest-match entry.

    With no matching entry, the default target (if any) is prepended,
    replacing same-label components — but only for addresses the table is
    about (carrying a label its entries match; an empty table matches
    anything). Otherwise the address is returned unchanged and flagged.
    """
    for i in table._order:
        entry = table.entries[i]
        if entry.label == "ip":
            prefix, local = addr.get("prefix"), addr.get("local")
            if prefix is None or local is None:
                continue
            if not entry.matches(f"{prefix}.{local}"):
                continue
            comps: list[AddressComponent] = []
            spliced = False
            for c in addr.components:
                if c.label in ("prefix", "local"):
                    if not spliced:
                        comps.extend(entry.replacement())
                        spliced = True
                    continue
                comps.append(c)
            return TransduceResult(MultipletAddress(tuple(comps)), True)
        value = addr.get(entry.label)
        if value is None or not entry.matches(value):
            continue
        comps = []
        for c in addr.components:
            if c.label == entry.label:
                comps.extend(entry.replacement())
            else:
                comps.append(c)
        return TransduceResult(MultipletAddress(tuple(comps)), True)
    domain = _domain_labels(table)
    in_domain = not domain or any(addr.has(label) for label in domain)
    if table.default is not None and in_domain:
        default_labels = {c.label for c in table.default}
        rest = tuple(c for c in addr.components if c.label not in default_labels)
        return TransduceResult(MultipletAddress(tuple(table.default) + rest), True, used_default=True)
    return TransduceResult(addr, False)


# -- tunnels ----------------------------------------------------------------


def encapsulate(addr: MultipletAddress, outer: AddressComponent) -> MultipletAddress:
    """Prepend an outer component; inner components ride along untouched."""
    if addr.has(outer.label):
        raise AddressError(f"label {outer.label!r} already present; cannot encapsulate")
    return MultipletAddress((outer,) + addr.components)


def decapsulate(addr: MultipletAddress) -> tuple[AddressComponent, MultipletAddress]:
    """Strip the outermost component; error on single-component addresses."""
    if len(addr.components) < 2:
        raise AddressError("nothing to decapsulate: single-component address")
    return addr.components[0], MultipletAddress(addr.components[1:])
